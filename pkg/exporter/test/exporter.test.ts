import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { spawnSync } from "node:child_process";

import { afterAll, describe, expect, it } from "vitest";

import { loadCheckpoint } from "../src/checkpoint.js";
import { UnsupportedLayerError, convertCheckpoint } from "../src/convert.js";
import { exportCheckpoint, main } from "../src/cli.js";
import {
  FixtureTensor,
  convLayer,
  denseLayer,
  dropoutLayer,
  flattenLayer,
  maxPoolLayer,
  rand,
  randomTensor,
  writeCheckpoint,
  zeroPadLayer,
} from "./fixtures.js";
import { convValid, dense, hwcToChw, maxPool, relu, zeroPad } from "./reference.js";

const tmpRoot = fs.mkdtempSync(path.join(os.tmpdir(), "rotsense-export-"));
afterAll(() => fs.rmSync(tmpRoot, { recursive: true, force: true }));

function tmp(name: string): string {
  const dir = path.join(tmpRoot, name);
  fs.mkdirSync(dir, { recursive: true });
  return dir;
}

function python(code: string): { status: number | null; stdout: string; stderr: string } {
  const proc = spawnSync("python3", ["-c", code], { encoding: "utf-8" });
  return { status: proc.status, stdout: proc.stdout, stderr: proc.stderr };
}

function expectDirsEqual(a: string, b: string): void {
  const fa = fs.readdirSync(a).sort();
  const fb = fs.readdirSync(b).sort();
  expect(fa).toEqual(fb);
  for (const name of fa) {
    const ba = fs.readFileSync(path.join(a, name));
    const bb = fs.readFileSync(path.join(b, name));
    expect(ba.equals(bb), `${name} differs`).toBe(true);
  }
}

function toyDenseCheckpoint(dir: string): { modelPath: string; tensors: FixtureTensor[] } {
  const next = rand(42);
  const tensors = [
    randomTensor("fc1/kernel", [10, 8], next),
    randomTensor("fc1/bias", [8], next),
    randomTensor("head/kernel", [8, 6], next),
    randomTensor("head/bias", [6], next),
  ];
  const modelPath = writeCheckpoint(
    dir,
    [
      denseLayer("fc1", 8, "relu", { batch_input_shape: [null, 10] }),
      denseLayer("head", 6, undefined),
    ],
    tensors
  );
  return { modelPath, tensors };
}

describe("dense-only toy checkpoint", () => {
  const src = tmp("toy-src");
  const out = tmp("toy-out");
  const { modelPath, tensors } = toyDenseCheckpoint(src);
  const manifestPath = exportCheckpoint({
    checkpointPath: modelPath,
    outputDir: out,
    inputShape: [10, 1, 1],
    kindOverrides: new Map(),
  });

  it("emits the expected layer sequence", () => {
    const manifest = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
    expect(manifest.format_version).toBe(1);
    expect(manifest.input_shape).toEqual([10, 1, 1]);
    expect(manifest.layers.map((l: any) => l.kind)).toEqual([
      "flatten",
      "fully_connected",
      "relu",
      "fully_connected",
    ]);
    expect(manifest.layers[1].weight_shape).toEqual([8, 10]);
    expect(manifest.layers[3].weight_shape).toEqual([6, 8]);
  });

  it("writes transposed kernels byte-exactly", () => {
    const kernel = tensors[0]; // [10, 8] in-out
    const written = fs.readFileSync(path.join(out, "layer_1_weight.bin"));
    expect(written.length).toBe(4 * 80);
    for (let o = 0; o < 8; o++) {
      for (let i = 0; i < 10; i++) {
        const got = written.readFloatLE(4 * (o * 10 + i));
        expect(got).toBe(kernel.data[i * 8 + o]);
      }
    }
    const bias = fs.readFileSync(path.join(out, "layer_1_bias.bin"));
    for (let o = 0; o < 8; o++) {
      expect(bias.readFloatLE(4 * o)).toBe(tensors[1].data[o]);
    }
  });

  it("round-trips through the consumer loader byte-exactly", () => {
    const reencoded = tmp("toy-resave");
    const res = python(
      `from rotsense.model_io import load_model, save_model\n` +
        `m = load_model(${JSON.stringify(manifestPath)})\n` +
        `save_model(m, ${JSON.stringify(reencoded)})\n` +
        `print(len(m.layers), m.output_shape)`
    );
    expect(res.status, res.stderr).toBe(0);
    expect(res.stdout.trim()).toBe("4 (6,)");
    expectDirsEqual(out, reencoded);
  });

  it("re-exports idempotently at byte level", () => {
    const again = tmp("toy-again");
    exportCheckpoint({
      checkpointPath: modelPath,
      outputDir: again,
      inputShape: [10, 1, 1],
      kindOverrides: new Map(),
    });
    expectDirsEqual(out, again);
  });
});

describe("convolutional checkpoint with padding, pooling, and flatten", () => {
  const src = tmp("conv-src");
  const next = rand(7);
  const tensors = [
    randomTensor("c1/kernel", [3, 3, 2, 4], next),
    randomTensor("c1/bias", [4], next),
    randomTensor("c2/kernel", [3, 3, 4, 3], next),
    randomTensor("c2/bias", [3], next),
    randomTensor("head/kernel", [27, 6], next),
    randomTensor("head/bias", [6], next),
  ];
  const modelPath = writeCheckpoint(
    src,
    [
      zeroPadLayer("pad1", 1),
      convLayer("c1", 4, 3, 2, "valid", "relu"),
      convLayer("c2", 3, 3, 1, "same"),
      maxPoolLayer("pool", 2, 2),
      flattenLayer("flat"),
      dropoutLayer("drop", 0.5),
      denseLayer("head", 6, undefined),
    ],
    tensors
  );
  const out = tmp("conv-out");
  const manifestPath = exportCheckpoint({
    checkpointPath: modelPath,
    outputDir: out,
    inputShape: [2, 13, 13],
    kindOverrides: new Map(),
  });

  it("folds zero padding and same padding into conv entries", () => {
    const manifest = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
    expect(manifest.layers.map((l: any) => l.kind)).toEqual([
      "conv",
      "relu",
      "conv",
      "maxpool",
      "flatten",
      "dropout",
      "fully_connected",
    ]);
    expect(manifest.layers[0]).toMatchObject({ padding: 1, stride: 2, kernel: 3 });
    expect(manifest.layers[2]).toMatchObject({ padding: 1, stride: 1, kernel: 3 });
    expect(manifest.layers[6].weight_shape).toEqual([6, 27]);
  });

  it("computes the same function as the checkpoint", () => {
    // Reference path: channels-last eval of the fixture layers.
    const shape0 = { h: 13, w: 13, c: 2 };
    const nextX = rand(99);
    const x = new Float64Array(13 * 13 * 2);
    for (let i = 0; i < x.length; i++) x[i] = Math.fround(nextX() * 2 - 1);

    let act = zeroPad(x, shape0, 1);
    act = convValid(act.x, act.shape, tensors[0].data, 3, 4, 2, tensors[1].data);
    act = { x: relu(act.x), shape: act.shape };
    let padded = zeroPad(act.x, act.shape, 1);
    act = convValid(padded.x, padded.shape, tensors[2].data, 3, 3, 1, tensors[3].data);
    act = maxPool(act.x, act.shape, 2, 2);
    expect(act.shape).toEqual({ h: 3, w: 3, c: 3 });
    const expected = Array.from(dense(act.x, tensors[4].data, 6, tensors[5].data));

    // Consumer path: load the exported model and run its forward pass on
    // the channels-first reordering of the same input.
    const chw = Array.from(hwcToChw(x, shape0));
    const res = python(
      `import json\n` +
        `import numpy as np\n` +
        `from rotsense.model_io import load_model\n` +
        `from rotsense.network import forward\n` +
        `m = load_model(${JSON.stringify(manifestPath)})\n` +
        `x = np.array(${JSON.stringify(chw)}).reshape(2, 13, 13)\n` +
        `print(json.dumps(list(forward(m, x))))`
    );
    expect(res.status, res.stderr).toBe(0);
    const got = JSON.parse(res.stdout) as number[];
    expect(got.length).toBe(6);
    for (let i = 0; i < 6; i++) {
      expect(Math.abs(got[i] - expected[i])).toBeLessThanOrEqual(1e-9 * Math.max(1, Math.abs(expected[i])));
    }
  });
});

describe("published pose architecture checkpoint", () => {
  it("exports the full layer sequence and loads", () => {
    const src = tmp("pose-src");
    const next = rand(1234);
    const specs: Array<[string, number[], boolean]> = [
      ["c1", [7, 7, 3, 96], true],
      ["c2", [5, 5, 96, 128], true],
      ["c3", [3, 3, 128, 192], true],
      ["c4", [3, 3, 192, 192], true],
      ["c5", [3, 3, 192, 128], true],
      ["fc1", [128 * 3 * 3, 4096], false],
      ["fc2", [4096, 4096], false],
      ["head", [4096, 6], false],
    ];
    const tensors: FixtureTensor[] = [];
    for (const [name, shape, isConv] of specs) {
      tensors.push(randomTensor(`${name}/kernel`, shape, next));
      tensors.push(randomTensor(`${name}/bias`, [shape[isConv ? 3 : 1]], next));
    }
    const modelPath = writeCheckpoint(
      src,
      [
        zeroPadLayer("pad1", 2),
        convLayer("c1", 96, 7, 2, "valid", "relu"),
        maxPoolLayer("pool1", 3, 2),
        convLayer("c2", 128, 5, 1, "same", "relu"),
        maxPoolLayer("pool2", 3, 2),
        convLayer("c3", 192, 3, 1, "same", "relu"),
        convLayer("c4", 192, 3, 1, "same", "relu"),
        convLayer("c5", 128, 3, 1, "same", "relu"),
        maxPoolLayer("pool3", 3, 2),
        flattenLayer("flat"),
        denseLayer("fc1", 4096, "relu"),
        dropoutLayer("drop1", 0.5),
        denseLayer("fc2", 4096, "relu"),
        dropoutLayer("drop2", 0.5),
        denseLayer("head", 6, undefined),
      ],
      tensors
    );
    const out = tmp("pose-out");
    const manifestPath = exportCheckpoint({
      checkpointPath: modelPath,
      outputDir: out,
      inputShape: [3, 64, 64],
      kindOverrides: new Map(),
    });
    const manifest = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
    const kinds = manifest.layers.map((l: any) => l.kind);
    const structural = manifest.layers.filter((l: any) => !["relu", "dropout"].includes(l.kind));
    expect(structural.map((l: any) => l.kind)).toEqual([
      "conv",
      "maxpool",
      "conv",
      "maxpool",
      "conv",
      "conv",
      "conv",
      "maxpool",
      "flatten",
      "fully_connected",
      "fully_connected",
      "fully_connected",
    ]);
    expect(structural[0]).toMatchObject({ out_channels: 96, kernel: 7, stride: 2, padding: 2 });
    expect(kinds.filter((k: string) => k === "relu").length).toBe(7);
    expect(kinds.filter((k: string) => k === "dropout").length).toBe(2);

    const res = python(
      `from rotsense.model_io import load_model\n` +
        `m = load_model(${JSON.stringify(manifestPath)})\n` +
        `print(m.output_shape, m.activation_shapes[14][0])`
    );
    expect(res.status, res.stderr).toBe(0);
    expect(res.stdout.trim()).toBe("(6,) 1152");
  }, 120_000);
});

describe("rejections", () => {
  it("names unsupported layer types", () => {
    const src = tmp("residual-src");
    const modelPath = writeCheckpoint(
      src,
      [denseLayer("fc", 4, undefined, { batch_input_shape: [null, 4] }), { class_name: "Add", config: { name: "res" } }],
      [randomTensor("fc/kernel", [4, 4], rand(1)), randomTensor("fc/bias", [4], rand(2))]
    );
    const ckpt = loadCheckpoint(modelPath);
    expect(() => convertCheckpoint(ckpt, [4, 1, 1])).toThrowError(UnsupportedLayerError);
    expect(() => convertCheckpoint(ckpt, [4, 1, 1])).toThrowError(/Add/);
  });

  it("rejects functional (non-sequential) models", () => {
    const src = tmp("functional-src");
    const modelPath = writeCheckpoint(src, [denseLayer("fc", 4, undefined)], []);
    const raw = JSON.parse(fs.readFileSync(modelPath, "utf-8"));
    raw.modelTopology.class_name = "Model";
    fs.writeFileSync(modelPath, JSON.stringify(raw));
    expect(() => loadCheckpoint(modelPath)).toThrowError(/sequential/);
  });

  it("rejects non-relu activations", () => {
    const src = tmp("softmax-src");
    const modelPath = writeCheckpoint(
      src,
      [denseLayer("fc", 4, "softmax", { batch_input_shape: [null, 4] })],
      [randomTensor("fc/kernel", [4, 4], rand(1)), randomTensor("fc/bias", [4], rand(2))]
    );
    const ckpt = loadCheckpoint(modelPath);
    expect(() => convertCheckpoint(ckpt, [4, 1, 1])).toThrowError(/softmax/);
  });

  it("rejects same padding with stride 2", () => {
    const src = tmp("same-stride-src");
    const modelPath = writeCheckpoint(
      src,
      [convLayer("c", 2, 3, 2, "same")],
      [randomTensor("c/kernel", [3, 3, 1, 2], rand(1)), randomTensor("c/bias", [2], rand(2))]
    );
    const ckpt = loadCheckpoint(modelPath);
    expect(() => convertCheckpoint(ckpt, [1, 8, 8])).toThrowError(/ZeroPadding2D/);
  });

  it("rejects truncated weight shards", () => {
    const src = tmp("truncated-src");
    const { modelPath } = toyDenseCheckpoint(src);
    const shard = path.join(src, "group1-shard1of1.bin");
    fs.writeFileSync(shard, fs.readFileSync(shard).subarray(0, 100));
    expect(() => loadCheckpoint(modelPath)).toThrowError(/ends before/);
  });
});

describe("kind overrides", () => {
  it("maps custom class names onto supported kinds", () => {
    const src = tmp("override-src");
    const modelPath = writeCheckpoint(
      src,
      [
        denseLayer("fc", 4, undefined, { batch_input_shape: [null, 4] }),
        { class_name: "QuantReLU", config: { name: "q" } },
      ],
      [randomTensor("fc/kernel", [4, 4], rand(1)), randomTensor("fc/bias", [4], rand(2))]
    );
    const ckpt = loadCheckpoint(modelPath);
    const model = convertCheckpoint(ckpt, [4, 1, 1], new Map([["QuantReLU", "relu"]]));
    expect(model.layers.map((l) => l.entry.kind)).toEqual(["flatten", "fully_connected", "relu"]);
  });
});

describe("command line", () => {
  it("exports via the compiled CLI", () => {
    const src = tmp("cli-src");
    const { modelPath } = toyDenseCheckpoint(src);
    const out = tmp("cli-out");
    const cli = path.resolve("dist/cli.js");
    const proc = spawnSync(
      "node",
      [cli, "export", "--checkpoint", modelPath, "--out", out, "--input-shape", "10,1,1"],
      { encoding: "utf-8" }
    );
    expect(proc.status, proc.stderr).toBe(0);
    expect(proc.stdout.trim()).toBe(path.join(out, "manifest.json"));
    expect(fs.existsSync(path.join(out, "manifest.json"))).toBe(true);
  });

  it("exits 2 on missing arguments and 3 on unsupported layers", () => {
    expect(main(["export"])).toBe(2);
    const src = tmp("cli-bad-src");
    const modelPath = writeCheckpoint(
      src,
      [{ class_name: "BatchNormalization", config: { name: "bn" } }],
      []
    );
    expect(
      main(["export", "--checkpoint", modelPath, "--out", tmp("cli-bad-out"), "--input-shape", "1,4,4"])
    ).toBe(3);
  });
});
