/**
 * Reader for TensorFlow.js LayersModel artifacts: a `model.json` holding the
 * Keras-style layer topology plus a weights manifest pointing at raw binary
 * shards. Only what the converter needs is modeled here.
 */

import * as fs from "node:fs";
import * as path from "node:path";

export class CheckpointError extends Error {}

export interface LayerConfigEntry {
  className: string;
  name: string;
  config: Record<string, unknown>;
}

export interface NamedTensor {
  name: string;
  shape: number[];
  data: Float32Array;
}

export interface Checkpoint {
  layers: LayerConfigEntry[];
  tensors: Map<string, NamedTensor>;
}

interface WeightSpec {
  name: string;
  shape: number[];
  dtype: string;
}

interface WeightsManifestGroup {
  paths: string[];
  weights: WeightSpec[];
}

function product(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

/** Parse one weights-manifest group: concatenated shards sliced per spec. */
function readGroup(dir: string, group: WeightsManifestGroup, out: Map<string, NamedTensor>): void {
  const buffers: Buffer[] = [];
  for (const rel of group.paths) {
    const shardPath = path.join(dir, rel);
    if (!fs.existsSync(shardPath)) {
      throw new CheckpointError(`weight shard not found: ${rel}`);
    }
    buffers.push(fs.readFileSync(shardPath));
  }
  const raw = Buffer.concat(buffers);
  let offset = 0;
  for (const spec of group.weights) {
    if (spec.dtype !== "float32") {
      throw new CheckpointError(`tensor ${spec.name} has unsupported dtype ${spec.dtype}`);
    }
    const count = product(spec.shape);
    const bytes = 4 * count;
    if (offset + bytes > raw.length) {
      throw new CheckpointError(
        `weight shard data ends before tensor ${spec.name} (${offset + bytes} > ${raw.length})`
      );
    }
    // Shards are little-endian float32; copy to an aligned buffer.
    const slice = Buffer.from(raw.subarray(offset, offset + bytes));
    const data = new Float32Array(slice.buffer, slice.byteOffset, count);
    out.set(spec.name, { name: spec.name, shape: spec.shape, data });
    offset += bytes;
  }
  if (offset !== raw.length) {
    throw new CheckpointError(
      `weight shards hold ${raw.length} bytes but the manifest accounts for ${offset}`
    );
  }
}

export function loadCheckpoint(modelJsonPath: string): Checkpoint {
  if (!fs.existsSync(modelJsonPath)) {
    throw new CheckpointError(`checkpoint not found: ${modelJsonPath}`);
  }
  let parsed: any;
  try {
    parsed = JSON.parse(fs.readFileSync(modelJsonPath, "utf-8"));
  } catch (err) {
    throw new CheckpointError(`checkpoint is not valid JSON: ${(err as Error).message}`);
  }
  const topology = parsed.modelTopology;
  if (!topology || typeof topology !== "object") {
    throw new CheckpointError("checkpoint has no modelTopology");
  }
  if (topology.class_name !== "Sequential") {
    throw new CheckpointError(
      `unsupported model class ${JSON.stringify(topology.class_name)}; ` +
        "only sequential layer stacks are supported"
    );
  }
  const rawLayers = topology.config?.layers;
  if (!Array.isArray(rawLayers) || rawLayers.length === 0) {
    throw new CheckpointError("checkpoint topology lists no layers");
  }
  const layers: LayerConfigEntry[] = rawLayers.map((entry: any) => {
    if (typeof entry?.class_name !== "string" || typeof entry?.config !== "object") {
      throw new CheckpointError("malformed layer entry in topology");
    }
    return {
      className: entry.class_name,
      name: String(entry.config.name ?? entry.class_name),
      config: entry.config,
    };
  });

  const groups = parsed.weightsManifest;
  if (!Array.isArray(groups)) {
    throw new CheckpointError("checkpoint has no weightsManifest");
  }
  const tensors = new Map<string, NamedTensor>();
  const dir = path.dirname(path.resolve(modelJsonPath));
  for (const group of groups as WeightsManifestGroup[]) {
    readGroup(dir, group, tensors);
  }
  return { layers, tensors };
}
