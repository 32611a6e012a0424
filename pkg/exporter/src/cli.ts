#!/usr/bin/env node
/**
 * rotsense-export: convert a TensorFlow.js LayersModel checkpoint of a
 * sequential pose network into the rotsense manifest + tensor format.
 *
 *   rotsense-export export --checkpoint model.json --out DIR --input-shape C,H,W
 *                          [--map ClassName=kind ...]
 */

import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { CheckpointError, loadCheckpoint } from "./checkpoint.js";
import { ConversionError, UnsupportedLayerError, convertCheckpoint } from "./convert.js";
import { writeModel } from "./manifest.js";

export interface ExportConfig {
  checkpointPath: string;
  outputDir: string;
  inputShape: [number, number, number];
  kindOverrides: Map<string, string>;
}

export function exportCheckpoint(cfg: ExportConfig): string {
  const ckpt = loadCheckpoint(cfg.checkpointPath);
  const model = convertCheckpoint(ckpt, cfg.inputShape, cfg.kindOverrides);
  return writeModel(model, cfg.outputDir);
}

function parseInputShape(text: string): [number, number, number] {
  const parts = text.split(",").map((t) => Number(t.trim()));
  if (parts.length !== 3 || parts.some((d) => !Number.isInteger(d) || d < 1)) {
    throw new ConversionError(`--input-shape expects C,H,W integers, got ${JSON.stringify(text)}`);
  }
  return [parts[0], parts[1], parts[2]];
}

function parseOverrides(values: string[]): Map<string, string> {
  const map = new Map<string, string>();
  for (const value of values) {
    const pos = value.indexOf("=");
    if (pos <= 0) {
      throw new ConversionError(`--map expects ClassName=kind, got ${JSON.stringify(value)}`);
    }
    map.set(value.slice(0, pos), value.slice(pos + 1));
  }
  return map;
}

export function main(argv: string[]): number {
  if (argv[0] !== "export") {
    process.stderr.write("usage: rotsense-export export --checkpoint PATH --out DIR --input-shape C,H,W\n");
    return 2;
  }
  let parsed;
  try {
    parsed = parseArgs({
      args: argv.slice(1),
      options: {
        checkpoint: { type: "string" },
        out: { type: "string" },
        "input-shape": { type: "string" },
        map: { type: "string", multiple: true },
      },
    });
  } catch (err) {
    process.stderr.write(`argument error: ${(err as Error).message}\n`);
    return 2;
  }
  const { checkpoint, out, "input-shape": inputShape, map } = parsed.values;
  if (!checkpoint || !out || !inputShape) {
    process.stderr.write("export requires --checkpoint, --out, and --input-shape\n");
    return 2;
  }
  try {
    const manifestPath = exportCheckpoint({
      checkpointPath: checkpoint,
      outputDir: out,
      inputShape: parseInputShape(inputShape),
      kindOverrides: parseOverrides(map ?? []),
    });
    process.stdout.write(manifestPath + "\n");
    return 0;
  } catch (err) {
    if (err instanceof UnsupportedLayerError) {
      process.stderr.write(`unsupported layer: ${err.message}\n`);
      return 3;
    }
    if (err instanceof CheckpointError || err instanceof ConversionError) {
      process.stderr.write(`export failed: ${err.message}\n`);
      return 4;
    }
    throw err;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
