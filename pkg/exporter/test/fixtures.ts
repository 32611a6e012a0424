/**
 * Deterministic TensorFlow.js LayersModel fixtures: model.json plus one
 * weight shard, written exactly the way tfjs serializes sequential Keras
 * models (channels-last, HWIO conv kernels, [in, out] dense kernels).
 */

import * as fs from "node:fs";
import * as path from "node:path";

export interface FixtureLayer {
  class_name: string;
  config: Record<string, unknown>;
}

export interface FixtureTensor {
  name: string;
  shape: number[];
  data: Float32Array;
}

/** Tiny deterministic PRNG (mulberry32) so fixtures never change. */
export function rand(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomTensor(name: string, shape: number[], next: () => number): FixtureTensor {
  const count = shape.reduce((a, b) => a * b, 1);
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = Math.fround((next() - 0.5) * 2.0);
  }
  return { name, shape, data };
}

export function writeCheckpoint(
  dir: string,
  layers: FixtureLayer[],
  tensors: FixtureTensor[]
): string {
  fs.mkdirSync(dir, { recursive: true });
  const shardName = "group1-shard1of1.bin";
  const total = tensors.reduce((a, t) => a + 4 * t.data.length, 0);
  const shard = Buffer.allocUnsafe(total);
  let offset = 0;
  for (const t of tensors) {
    for (let i = 0; i < t.data.length; i++) {
      shard.writeFloatLE(t.data[i], offset + 4 * i);
    }
    offset += 4 * t.data.length;
  }
  fs.writeFileSync(path.join(dir, shardName), shard);
  const modelJson = {
    format: "layers-model",
    generatedBy: "keras",
    convertedBy: null,
    modelTopology: {
      class_name: "Sequential",
      config: { name: "sequential_1", layers },
      keras_version: "2.15.0",
      backend: "tensorflow",
    },
    weightsManifest: [
      {
        paths: [shardName],
        weights: tensors.map((t) => ({ name: t.name, shape: t.shape, dtype: "float32" })),
      },
    ],
  };
  const modelPath = path.join(dir, "model.json");
  fs.writeFileSync(modelPath, JSON.stringify(modelJson));
  return modelPath;
}

export function denseLayer(
  name: string,
  units: number,
  activation: string | undefined,
  extra: Record<string, unknown> = {}
): FixtureLayer {
  return {
    class_name: "Dense",
    config: { name, units, activation: activation ?? "linear", use_bias: true, ...extra },
  };
}

export function convLayer(
  name: string,
  filters: number,
  kernel: number,
  stride: number,
  padding: "valid" | "same",
  activation?: string
): FixtureLayer {
  return {
    class_name: "Conv2D",
    config: {
      name,
      filters,
      kernel_size: [kernel, kernel],
      strides: [stride, stride],
      padding,
      data_format: "channels_last",
      activation: activation ?? "linear",
      use_bias: true,
    },
  };
}

export function zeroPadLayer(name: string, pad: number): FixtureLayer {
  return {
    class_name: "ZeroPadding2D",
    config: {
      name,
      padding: [
        [pad, pad],
        [pad, pad],
      ],
      data_format: "channels_last",
    },
  };
}

export function maxPoolLayer(name: string, pool: number, stride: number): FixtureLayer {
  return {
    class_name: "MaxPooling2D",
    config: {
      name,
      pool_size: [pool, pool],
      strides: [stride, stride],
      padding: "valid",
      data_format: "channels_last",
    },
  };
}

export function flattenLayer(name: string): FixtureLayer {
  return { class_name: "Flatten", config: { name, data_format: "channels_last" } };
}

export function dropoutLayer(name: string, rate: number): FixtureLayer {
  return { class_name: "Dropout", config: { name, rate } };
}
