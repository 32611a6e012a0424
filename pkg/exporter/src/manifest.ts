/**
 * Writer for the rotsense model directory: `manifest.json` plus one raw
 * little-endian float32 file per tensor, named `layer_<index>_<role>.bin`.
 * Field order and JSON formatting mirror the consumer's own writer so that
 * an export -> load -> save cycle is byte-identical.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { ConvertedModel } from "./convert.js";

export const FORMAT_VERSION = 1;

function tensorBytes(data: Float32Array): Buffer {
  // Float32Array is IEEE-754; serialize explicitly little-endian.
  const buf = Buffer.allocUnsafe(4 * data.length);
  for (let i = 0; i < data.length; i++) {
    buf.writeFloatLE(data[i], 4 * i);
  }
  return buf;
}

export function writeModel(model: ConvertedModel, outDir: string): string {
  fs.mkdirSync(outDir, { recursive: true });
  const entries: Record<string, unknown>[] = [];
  for (let index = 0; index < model.layers.length; index++) {
    const layer = model.layers[index];
    const entry: Record<string, unknown> = { ...layer.entry };
    if (layer.weight) {
      const name = `layer_${index}_weight.bin`;
      fs.writeFileSync(path.join(outDir, name), tensorBytes(layer.weight.data));
      entry.weight_file = name;
      entry.weight_shape = layer.weight.shape;
    }
    if (layer.bias) {
      const name = `layer_${index}_bias.bin`;
      fs.writeFileSync(path.join(outDir, name), tensorBytes(layer.bias.data));
      entry.bias_file = name;
      entry.bias_shape = layer.bias.shape;
    }
    entries.push(entry);
  }
  const manifest = {
    format_version: FORMAT_VERSION,
    input_shape: model.inputShape,
    layers: entries,
  };
  const manifestPath = path.join(outDir, "manifest.json");
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return manifestPath;
}
