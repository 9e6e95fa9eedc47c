/**
 * Seeded synthetic checkpoints for tests and offline demos.
 *
 * The sandbox has no network access, so instead of downloading a real
 * checkpoint the test suite fabricates one: the full node topology of
 * the expected network with reproducible pseudo-random weights, scaled
 * by fan-in so a forward pass stays well-conditioned. Broken variants
 * exercise the converter's error paths cheaply with small tensors.
 */

import { EXPECTED_LAYERS } from "./convert.js";
import { DTYPE_DOUBLE, DTYPE_FLOAT, NodeSpec, TensorSpec, writeModel } from "./onnx.js";
import { XorShift32 } from "./rng.js";

export type Variant = "full" | "missing-fc8" | "bad-shape" | "bad-dtype";

export const VARIANTS: Variant[] = ["full", "missing-fc8", "bad-shape", "bad-dtype"];

export interface SyntheticOptions {
  /** Gemm transB attribute; 0 stores B transposed as (in, out). */
  gemmTransB?: 0 | 1;
}

function seededFloats(seed: number, index: number, count: number, scale: number): Float32Array {
  const rng = new XorShift32((seed ^ Math.imul(index + 1, 0x9e3779b1)) >>> 0);
  const out = new Float32Array(count);
  rng.fill(out, scale);
  return out;
}

function rawBytes(data: Float32Array): Buffer {
  return Buffer.from(data.buffer, data.byteOffset, data.byteLength);
}

function product(dims: number[]): number {
  return dims.reduce((a, b) => a * b, 1);
}

interface LayerTensors {
  weights: TensorSpec;
  bias: TensorSpec;
}

function makeLayerTensors(
  seed: number,
  index: number,
  name: string,
  weightDims: number[],
  biasDims: number[],
): LayerTensors {
  const fanIn = product(weightDims.slice(1));
  const wScale = 1 / Math.sqrt(fanIn);
  const weights = seededFloats(seed, index * 2, product(weightDims), wScale);
  const bias = seededFloats(seed, index * 2 + 1, product(biasDims), 0.01);
  return {
    weights: { name: `${name}_w`, dims: weightDims, dataType: DTYPE_FLOAT, rawData: rawBytes(weights) },
    bias: { name: `${name}_b`, dims: biasDims, dataType: DTYPE_FLOAT, rawData: rawBytes(bias) },
  };
}

function transposeTo(data: Float32Array, rows: number, cols: number): Float32Array {
  const out = new Float32Array(data.length);
  for (let r = 0; r < rows; r += 1) {
    for (let c = 0; c < cols; c += 1) {
      out[c * rows + r] = data[r * cols + c];
    }
  }
  return out;
}

function ints(name: string, values: number[]) {
  return { name, ints: values };
}

function int(name: string, value: number) {
  return { name, i: value };
}

function flt(name: string, value: number) {
  return { name, f: value };
}

const LRN_ATTRS = [flt("alpha", 1e-4), flt("beta", 0.75), flt("bias", 1.0), int("size", 5)];

function convNode(
  name: string,
  input: string,
  output: string,
  kernel: number,
  stride: number,
  pad: number,
  group: number,
): NodeSpec {
  return {
    opType: "Conv",
    name,
    inputs: [input, `${name}_w`, `${name}_b`],
    outputs: [output],
    attributes: [
      ints("kernel_shape", [kernel, kernel]),
      ints("strides", [stride, stride]),
      ints("pads", [pad, pad, pad, pad]),
      int("group", group),
    ],
  };
}

function unary(opType: string, name: string, input: string, output: string, attrs: NodeSpec["attributes"] = []): NodeSpec {
  return { opType, name, inputs: [input], outputs: [output], attributes: attrs };
}

function gemmNode(name: string, input: string, output: string, transB: 0 | 1): NodeSpec {
  return {
    opType: "Gemm",
    name,
    inputs: [input, `${name}_w`, `${name}_b`],
    outputs: [output],
    attributes: [flt("alpha", 1.0), flt("beta", 1.0), int("transB", transB)],
  };
}

function fullTopology(transB: 0 | 1): NodeSpec[] {
  return [
    convNode("conv1", "data", "conv1_out", 11, 4, 0, 1),
    unary("Relu", "relu1", "conv1_out", "relu1_out"),
    unary("LRN", "norm1", "relu1_out", "norm1_out", LRN_ATTRS),
    unary("MaxPool", "pool1", "norm1_out", "pool1_out", [
      ints("kernel_shape", [3, 3]),
      ints("strides", [2, 2]),
    ]),
    convNode("conv2", "pool1_out", "conv2_out", 5, 1, 2, 2),
    unary("Relu", "relu2", "conv2_out", "relu2_out"),
    unary("LRN", "norm2", "relu2_out", "norm2_out", LRN_ATTRS),
    unary("MaxPool", "pool2", "norm2_out", "pool2_out", [
      ints("kernel_shape", [3, 3]),
      ints("strides", [2, 2]),
    ]),
    convNode("conv3", "pool2_out", "conv3_out", 3, 1, 1, 1),
    unary("Relu", "relu3", "conv3_out", "relu3_out"),
    convNode("conv4", "relu3_out", "conv4_out", 3, 1, 1, 2),
    unary("Relu", "relu4", "conv4_out", "relu4_out"),
    convNode("conv5", "relu4_out", "conv5_out", 3, 1, 1, 2),
    unary("Relu", "relu5", "conv5_out", "relu5_out"),
    unary("MaxPool", "pool5", "relu5_out", "pool5_out", [
      ints("kernel_shape", [3, 3]),
      ints("strides", [2, 2]),
    ]),
    unary("Flatten", "flatten6", "pool5_out", "flat6", [int("axis", 1)]),
    gemmNode("fc6", "flat6", "fc6_out", transB),
    unary("Relu", "relu6", "fc6_out", "relu6_out"),
    unary("Dropout", "drop6", "relu6_out", "drop6_out", [flt("ratio", 0.5)]),
    gemmNode("fc7", "drop6_out", "fc7_out", transB),
    unary("Relu", "relu7", "fc7_out", "relu7_out"),
    unary("Dropout", "drop7", "relu7_out", "drop7_out", [flt("ratio", 0.5)]),
    gemmNode("fc8", "drop7_out", "fc8_out", transB),
    unary("Softmax", "prob", "fc8_out", "prob_out"),
  ];
}

function fullInitializers(seed: number, transB: 0 | 1): TensorSpec[] {
  const out: TensorSpec[] = [];
  EXPECTED_LAYERS.forEach((layer, i) => {
    const tensors = makeLayerTensors(seed, i, layer.name, layer.weights, [layer.weights[0]]);
    if (layer.kind === "fc" && transB === 0) {
      // Same underlying matrix, stored in the (in, out) orientation.
      const [rows, cols] = layer.weights;
      const canonical = new Float32Array(
        tensors.weights.rawData.buffer,
        tensors.weights.rawData.byteOffset,
        rows * cols,
      );
      tensors.weights = {
        ...tensors.weights,
        dims: [cols, rows],
        rawData: rawBytes(transposeTo(canonical, rows, cols)),
      };
    }
    out.push(tensors.weights, tensors.bias);
  });
  return out;
}

/** Small stand-in tensors; never shape-checked on the paths that use them. */
function tinyInitializers(seed: number, layers: string[]): TensorSpec[] {
  const out: TensorSpec[] = [];
  layers.forEach((name, i) => {
    const tensors = makeLayerTensors(seed, i, name, [2, 3, 3, 3], [2]);
    out.push(tensors.weights, tensors.bias);
  });
  return out;
}

function tinyTopology(layers: string[]): NodeSpec[] {
  return layers.map((name, i) =>
    name.startsWith("conv")
      ? convNode(name, i === 0 ? "data" : `t${i - 1}`, `t${i}`, 3, 1, 1, 1)
      : gemmNode(name, `t${i - 1}`, `t${i}`, 1),
  );
}

/** Serialize a synthetic checkpoint; the variant picks which defect, if any. */
export function buildSyntheticModel(
  seed: number,
  variant: Variant = "full",
  options: SyntheticOptions = {},
): Buffer {
  const transB = options.gemmTransB ?? 1;
  const allNames = EXPECTED_LAYERS.map((l) => l.name);

  if (variant === "full") {
    return writeModel(fullTopology(transB), fullInitializers(seed, transB));
  }
  if (variant === "missing-fc8") {
    const names = allNames.slice(0, -1);
    return writeModel(tinyTopology(names), tinyInitializers(seed, names));
  }
  if (variant === "bad-shape") {
    return writeModel(tinyTopology(allNames), tinyInitializers(seed, allNames));
  }
  if (variant === "bad-dtype") {
    const initializers = tinyInitializers(seed, allNames);
    const weights = initializers[0];
    const floats = new Float32Array(
      weights.rawData.buffer,
      weights.rawData.byteOffset,
      weights.rawData.byteLength / 4,
    );
    const doubles = Buffer.alloc(floats.length * 8);
    floats.forEach((v, i) => doubles.writeDoubleLE(v, i * 8));
    initializers[0] = { ...weights, dataType: DTYPE_DOUBLE, rawData: doubles };
    return writeModel(tinyTopology(allNames), initializers);
  }
  throw new Error(`unknown variant '${variant}'`);
}
