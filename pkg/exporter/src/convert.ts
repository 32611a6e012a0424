/**
 * Convert a sequential TensorFlow.js layer stack (channels-last) into the
 * rotsense model format (channels-first manifest + raw float32 tensors).
 *
 * Handled along the way:
 * - Conv2D kernels transpose from [kH, kW, in, out] to [out, in, kH, kW];
 *   `same` padding becomes an explicit symmetric pad (stride 1, odd kernel
 *   only) and a preceding ZeroPadding2D folds into the following conv.
 * - Dense kernels transpose from [in, out] to [out, in]; the first Dense
 *   after flattening a spatial activation additionally permutes its input
 *   axis from height-width-channel order to channel-height-width order.
 * - `relu` activations on Conv2D/Dense become standalone relu entries, as
 *   do Activation('relu') and ReLU layers.
 *
 * Anything outside the supported sequential vocabulary (residual adds,
 * normalization layers, non-relu activations, asymmetric padding) raises
 * an UnsupportedLayerError naming the offender.
 */

import { Checkpoint, LayerConfigEntry, NamedTensor } from "./checkpoint.js";

export class UnsupportedLayerError extends Error {}
export class ConversionError extends Error {}

export type LayerKind =
  | "conv"
  | "maxpool"
  | "flatten"
  | "fully_connected"
  | "relu"
  | "dropout";

export interface ConvertedLayer {
  entry: Record<string, unknown>;
  weight?: { shape: number[]; data: Float32Array };
  bias?: { shape: number[]; data: Float32Array };
}

export interface ConvertedModel {
  inputShape: [number, number, number];
  layers: ConvertedLayer[];
}

type Shape = { kind: "spatial"; h: number; w: number; c: number } | { kind: "flat"; n: number };

const BUILTIN_KINDS: Record<string, string> = {
  Conv2D: "conv",
  MaxPooling2D: "maxpool",
  Flatten: "flatten",
  Dense: "fully_connected",
  Dropout: "dropout",
  ReLU: "relu",
  Activation: "__activation__",
  ZeroPadding2D: "__zeropad__",
  InputLayer: "__input__",
};

function asSquare(value: unknown, what: string, layer: string): number {
  if (typeof value === "number") return value;
  if (Array.isArray(value) && value.length === 2 && value[0] === value[1]) {
    return Number(value[0]);
  }
  throw new UnsupportedLayerError(
    `layer ${layer}: ${what} ${JSON.stringify(value)} is not square; the target format needs one integer`
  );
}

function symmetricPad(value: unknown, layer: string): number {
  if (typeof value === "number") return value;
  if (Array.isArray(value) && value.length === 2) {
    const norm = value.map((side: unknown) =>
      Array.isArray(side) && side.length === 2 && side[0] === side[1] ? Number(side[0]) : side
    );
    if (typeof norm[0] === "number" && norm[0] === norm[1]) return norm[0];
  }
  throw new UnsupportedLayerError(
    `layer ${layer}: only symmetric padding is supported, got ${JSON.stringify(value)}`
  );
}

function checkDataFormat(config: Record<string, unknown>, layer: string): void {
  const fmt = config.data_format ?? "channels_last";
  if (fmt !== "channels_last") {
    throw new UnsupportedLayerError(`layer ${layer}: data_format ${fmt} is not supported`);
  }
}

function activationOf(config: Record<string, unknown>, layer: string): "relu" | null {
  const act = config.activation ?? "linear";
  if (act === "linear") return null;
  if (act === "relu") return "relu";
  throw new UnsupportedLayerError(`layer ${layer}: unsupported activation ${JSON.stringify(act)}`);
}

function tensorOf(ckpt: Checkpoint, layer: string, which: "kernel" | "bias"): NamedTensor {
  const tensor = ckpt.tensors.get(`${layer}/${which}`);
  if (!tensor) {
    throw new ConversionError(`tensor ${layer}/${which} is missing from the checkpoint`);
  }
  return tensor;
}

function transposeConvKernel(t: NamedTensor, layer: string): { shape: number[]; data: Float32Array } {
  if (t.shape.length !== 4) {
    throw new ConversionError(`layer ${layer}: conv kernel must be rank 4, got ${t.shape}`);
  }
  const [kh, kw, cIn, cOut] = t.shape;
  const out = new Float32Array(t.data.length);
  for (let o = 0; o < cOut; o++) {
    for (let c = 0; c < cIn; c++) {
      for (let i = 0; i < kh; i++) {
        for (let j = 0; j < kw; j++) {
          out[((o * cIn + c) * kh + i) * kw + j] = t.data[((i * kw + j) * cIn + c) * cOut + o];
        }
      }
    }
  }
  return { shape: [cOut, cIn, kh, kw], data: out };
}

function transposeDenseKernel(
  t: NamedTensor,
  layer: string,
  flattenedFrom: { h: number; w: number; c: number } | null
): { shape: number[]; data: Float32Array } {
  if (t.shape.length !== 2) {
    throw new ConversionError(`layer ${layer}: dense kernel must be rank 2, got ${t.shape}`);
  }
  const [nIn, nOut] = t.shape;
  const out = new Float32Array(t.data.length);
  if (flattenedFrom === null) {
    for (let o = 0; o < nOut; o++) {
      for (let i = 0; i < nIn; i++) {
        out[o * nIn + i] = t.data[i * nOut + o];
      }
    }
    return { shape: [nOut, nIn], data: out };
  }
  const { h, w, c } = flattenedFrom;
  if (h * w * c !== nIn) {
    throw new ConversionError(
      `layer ${layer}: dense kernel expects ${nIn} inputs but the flattened activation has ${h * w * c}`
    );
  }
  // Rows arrive in height-width-channel order; the target flattens
  // channel-height-width.
  for (let o = 0; o < nOut; o++) {
    for (let ch = 0; ch < c; ch++) {
      for (let i = 0; i < h; i++) {
        for (let j = 0; j < w; j++) {
          out[o * nIn + (ch * h + i) * w + j] = t.data[((i * w + j) * c + ch) * nOut + o];
        }
      }
    }
  }
  return { shape: [nOut, nIn], data: out };
}

export function convertCheckpoint(
  ckpt: Checkpoint,
  inputShape: [number, number, number],
  kindOverrides: Map<string, string> = new Map()
): ConvertedModel {
  const [c0, h0, w0] = inputShape;
  if (![c0, h0, w0].every((d) => Number.isInteger(d) && d >= 1)) {
    throw new ConversionError(`input shape ${inputShape} must be three positive integers`);
  }
  let shape: Shape = { kind: "spatial", h: h0, w: w0, c: c0 };
  const layers: ConvertedLayer[] = [];
  let pendingPad = 0;
  let flattenedFrom: { h: number; w: number; c: number } | null = null;

  const pushRelu = () => layers.push({ entry: { kind: "relu" } });

  for (const layer of ckpt.layers) {
    const mapped = kindOverrides.get(layer.className) ?? BUILTIN_KINDS[layer.className];
    if (mapped === undefined) {
      throw new UnsupportedLayerError(
        `layer ${layer.name}: unsupported layer type ${layer.className}`
      );
    }
    if (mapped === "__input__") {
      continue;
    }
    if (pendingPad > 0 && mapped !== "conv") {
      throw new UnsupportedLayerError(
        `layer ${layer.name}: zero padding must be followed by a valid-padding convolution`
      );
    }

    if (mapped === "__zeropad__") {
      checkDataFormat(layer.config, layer.name);
      pendingPad += symmetricPad(layer.config.padding, layer.name);
      continue;
    }

    if (mapped === "__activation__") {
      const act = layer.config.activation;
      if (act !== "relu") {
        throw new UnsupportedLayerError(
          `layer ${layer.name}: unsupported activation ${JSON.stringify(act)}`
        );
      }
      pushRelu();
      continue;
    }

    if (mapped === "relu") {
      pushRelu();
      continue;
    }

    if (mapped === "dropout") {
      const rate = Number(layer.config.rate ?? 0.5);
      layers.push({ entry: { kind: "dropout", rate } });
      continue;
    }

    if (mapped === "flatten") {
      if (shape.kind === "spatial") {
        flattenedFrom = { h: shape.h, w: shape.w, c: shape.c };
        shape = { kind: "flat", n: shape.h * shape.w * shape.c };
      }
      layers.push({ entry: { kind: "flatten" } });
      continue;
    }

    if (mapped === "maxpool") {
      if (shape.kind !== "spatial") {
        throw new ConversionError(`layer ${layer.name}: pooling needs a spatial activation`);
      }
      checkDataFormat(layer.config, layer.name);
      if ((layer.config.padding ?? "valid") !== "valid") {
        throw new UnsupportedLayerError(
          `layer ${layer.name}: only valid padding is supported for pooling`
        );
      }
      const kernel = asSquare(layer.config.pool_size ?? 2, "pool size", layer.name);
      const stride = asSquare(layer.config.strides ?? layer.config.pool_size ?? 2, "stride", layer.name);
      shape = {
        kind: "spatial",
        h: Math.floor((shape.h - kernel) / stride) + 1,
        w: Math.floor((shape.w - kernel) / stride) + 1,
        c: shape.c,
      };
      if (shape.h < 1 || shape.w < 1) {
        throw new ConversionError(`layer ${layer.name}: pooling output collapses to zero size`);
      }
      layers.push({ entry: { kind: "maxpool", kernel, stride } });
      continue;
    }

    if (mapped === "conv") {
      if (shape.kind !== "spatial") {
        throw new ConversionError(`layer ${layer.name}: convolution needs a spatial activation`);
      }
      checkDataFormat(layer.config, layer.name);
      const kernel = asSquare(layer.config.kernel_size, "kernel size", layer.name);
      const stride = asSquare(layer.config.strides ?? 1, "stride", layer.name);
      let padding = pendingPad;
      pendingPad = 0;
      const padMode = layer.config.padding ?? "valid";
      if (padMode === "same") {
        if (padding > 0) {
          throw new UnsupportedLayerError(
            `layer ${layer.name}: zero padding before a same-padding convolution`
          );
        }
        if (stride !== 1 || kernel % 2 === 0) {
          throw new UnsupportedLayerError(
            `layer ${layer.name}: same padding is only symmetric for stride 1 and odd kernels; ` +
              "use an explicit ZeroPadding2D plus valid padding"
          );
        }
        padding = (kernel - 1) / 2;
      } else if (padMode !== "valid") {
        throw new UnsupportedLayerError(`layer ${layer.name}: unknown padding ${padMode}`);
      }
      const kernelTensor = tensorOf(ckpt, layer.name, "kernel");
      if (kernelTensor.shape[2] !== shape.c) {
        throw new ConversionError(
          `layer ${layer.name}: kernel expects ${kernelTensor.shape[2]} channels, activation has ${shape.c}`
        );
      }
      const weight = transposeConvKernel(kernelTensor, layer.name);
      const outChannels = weight.shape[0];
      const converted: ConvertedLayer = {
        entry: {
          kind: "conv",
          out_channels: outChannels,
          kernel,
          stride,
          padding,
        },
        weight,
      };
      if (layer.config.use_bias !== false) {
        const bias = tensorOf(ckpt, layer.name, "bias");
        converted.bias = { shape: bias.shape, data: bias.data };
      }
      layers.push(converted);
      shape = {
        kind: "spatial",
        h: Math.floor((shape.h + 2 * padding - kernel) / stride) + 1,
        w: Math.floor((shape.w + 2 * padding - kernel) / stride) + 1,
        c: outChannels,
      };
      if (shape.h < 1 || shape.w < 1) {
        throw new ConversionError(`layer ${layer.name}: convolution output collapses to zero size`);
      }
      if (activationOf(layer.config, layer.name)) pushRelu();
      continue;
    }

    if (mapped === "fully_connected") {
      if (shape.kind === "spatial") {
        if (shape.h === 1 && shape.w === 1) {
          // Dense directly on a flat checkpoint input: the target format
          // flattens explicitly, and at 1x1 the permutation is trivial.
          flattenedFrom = { h: 1, w: 1, c: shape.c };
          shape = { kind: "flat", n: shape.c };
          layers.push({ entry: { kind: "flatten" } });
        } else {
          throw new ConversionError(
            `layer ${layer.name}: dense layer on a spatial activation; insert a Flatten first`
          );
        }
      }
      const kernelTensor = tensorOf(ckpt, layer.name, "kernel");
      const weight = transposeDenseKernel(kernelTensor, layer.name, flattenedFrom);
      flattenedFrom = null;
      if (weight.shape[1] !== shape.n) {
        throw new ConversionError(
          `layer ${layer.name}: dense kernel expects ${weight.shape[1]} inputs, activation has ${shape.n}`
        );
      }
      const converted: ConvertedLayer = {
        entry: { kind: "fully_connected", out_features: weight.shape[0] },
        weight,
      };
      if (layer.config.use_bias !== false) {
        const bias = tensorOf(ckpt, layer.name, "bias");
        converted.bias = { shape: bias.shape, data: bias.data };
      }
      layers.push(converted);
      shape = { kind: "flat", n: weight.shape[0] };
      if (activationOf(layer.config, layer.name)) pushRelu();
      continue;
    }

    throw new UnsupportedLayerError(
      `layer ${layer.name}: mapping ${layer.className} -> ${mapped} is not a supported kind`
    );
  }

  if (pendingPad > 0) {
    throw new UnsupportedLayerError("trailing zero padding with no following convolution");
  }

  return { inputShape: [c0, h0, w0], layers };
}
