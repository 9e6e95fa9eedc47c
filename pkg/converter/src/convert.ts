/**
 * Checkpoint conversion: ONNX initializers to a weight bundle.
 *
 * The expected architecture is fixed: five grouped convolutions and
 * three fully-connected layers, identified by walking the graph's Conv
 * and Gemm nodes in document order. Everything is validated against
 * the pipeline's shape table before a single byte is written, so a
 * checkpoint for any other network fails loudly with the layer named.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { writeBundle, BundleTensor, ManifestEntry } from "./bundle.js";
import {
  DTYPE_FLOAT,
  DTYPE_NAMES,
  OnnxModel,
  OnnxNode,
  OnnxTensor,
  parseModel,
  tensorFloats,
} from "./onnx.js";

/** Raised for every malformed-checkpoint condition; the CLI maps it to exit 1. */
export class ConversionError extends Error {}

interface LayerSpec {
  name: string;
  kind: "conv" | "fc";
  weights: number[];
  group?: number;
}

/** Shape table of the fixed network, weights as stored in the bundle. */
export const EXPECTED_LAYERS: LayerSpec[] = [
  { name: "conv1", kind: "conv", weights: [96, 3, 11, 11], group: 1 },
  { name: "conv2", kind: "conv", weights: [256, 48, 5, 5], group: 2 },
  { name: "conv3", kind: "conv", weights: [384, 256, 3, 3], group: 1 },
  { name: "conv4", kind: "conv", weights: [384, 192, 3, 3], group: 2 },
  { name: "conv5", kind: "conv", weights: [256, 192, 3, 3], group: 2 },
  { name: "fc6", kind: "fc", weights: [4096, 9216] },
  { name: "fc7", kind: "fc", weights: [4096, 4096] },
  { name: "fc8", kind: "fc", weights: [1000, 4096] },
];

/** The spatial block fc6 consumes: 256 channels of 6x6. */
export const FC6_CHANNELS = 256;
export const FC6_SIDE = 6;

export type Fc6Order = "chw" | "hwc";

export interface ConvertOptions {
  /**
   * Flattening order the checkpoint used for fc6 input. Checkpoints
   * exported from channel-major (NCHW) frameworks are already "chw"
   * and need no permutation; "hwc" asks for the row reorder.
   */
  fc6Order?: Fc6Order;
  provenance?: string;
}

export interface LayerReport {
  bundleLayer: string;
  weightsSource: string;
  biasSource: string;
  weightsShape: number[];
  biasShape: number[];
  permutation: string;
}

export interface ConversionReport {
  source: string;
  outDir: string;
  provenance: string;
  layers: LayerReport[];
  manifest: ManifestEntry[];
}

function formatDtype(dtype: number): string {
  const name = DTYPE_NAMES[dtype] ?? "unknown";
  return `${name}(${dtype})`;
}

function shapesEqual(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

function attrInt(node: OnnxNode, name: string): number | undefined {
  const attr = node.attributes.find((a) => a.name === name);
  if (attr === undefined) {
    return undefined;
  }
  if (attr.i !== undefined) {
    return attr.i;
  }
  throw new ConversionError(
    `node '${node.name}': attribute '${name}' is not an integer`,
  );
}

function attrFloat(node: OnnxNode, name: string): number | undefined {
  const attr = node.attributes.find((a) => a.name === name);
  return attr?.f;
}

function learnableNodes(model: OnnxModel): OnnxNode[] {
  return model.nodes.filter((n) => n.opType === "Conv" || n.opType === "Gemm");
}

function requireInitializer(
  model: OnnxModel,
  layer: string,
  role: string,
  name: string,
): OnnxTensor {
  const tensor = model.initializers.get(name);
  if (tensor === undefined) {
    throw new ConversionError(
      `layer ${layer}: ${role} initializer '${name}' is not in the checkpoint`,
    );
  }
  if (tensor.dataType !== DTYPE_FLOAT) {
    throw new ConversionError(
      `layer ${layer} ${role}: unsupported dtype ${formatDtype(tensor.dataType)}, expected FLOAT(1)`,
    );
  }
  return tensor;
}

function transposed(values: Float32Array, rows: number, cols: number): Float32Array {
  const out = new Float32Array(values.length);
  for (let r = 0; r < rows; r += 1) {
    for (let c = 0; c < cols; c += 1) {
      out[c * rows + r] = values[r * cols + c];
    }
  }
  return out;
}

/**
 * Reorder each fc6 row from height-width-channel flattening to the
 * channel-major order the pipeline uses for its conv-to-fc boundary.
 */
export function permuteFc6RowsFromHwc(weights: Float32Array, rows: number): Float32Array {
  const c = FC6_CHANNELS;
  const s = FC6_SIDE;
  const width = c * s * s;
  if (weights.length !== rows * width) {
    throw new ConversionError(
      `fc6 permutation expects ${rows}x${width} values, got ${weights.length}`,
    );
  }
  const out = new Float32Array(weights.length);
  for (let r = 0; r < rows; r += 1) {
    const base = r * width;
    for (let h = 0; h < s; h += 1) {
      for (let w = 0; w < s; w += 1) {
        for (let ch = 0; ch < c; ch += 1) {
          out[base + ch * s * s + h * s + w] = weights[base + h * s * c + w * c + ch];
        }
      }
    }
  }
  return out;
}

interface ExtractedLayer {
  spec: LayerSpec;
  tensors: BundleTensor[];
  report: LayerReport;
}

function extractLayer(
  model: OnnxModel,
  node: OnnxNode,
  spec: LayerSpec,
  fc6Order: Fc6Order,
): ExtractedLayer {
  if (node.inputs.length < 3) {
    throw new ConversionError(
      `layer ${spec.name}: node '${node.name}' carries no bias input`,
    );
  }
  const weightsName = node.inputs[1];
  const biasName = node.inputs[2];
  const weightsTensor = requireInitializer(model, spec.name, "weights", weightsName);
  const biasTensor = requireInitializer(model, spec.name, "bias", biasName);

  let weights = tensorFloats(weightsTensor);
  let weightsShape = [...weightsTensor.dims];
  const permutations: string[] = [];

  if (spec.kind === "conv") {
    const group = attrInt(node, "group") ?? 1;
    if (group !== (spec.group ?? 1)) {
      throw new ConversionError(
        `layer ${spec.name}: group is ${group}, expected ${spec.group ?? 1}`,
      );
    }
  } else {
    const alpha = attrFloat(node, "alpha") ?? 1;
    const beta = attrFloat(node, "beta") ?? 1;
    const transA = attrInt(node, "transA") ?? 0;
    if (alpha !== 1 || beta !== 1 || transA !== 0) {
      throw new ConversionError(
        `layer ${spec.name}: only plain Gemm is supported ` +
          `(alpha=1, beta=1, transA=0), got alpha=${alpha} beta=${beta} transA=${transA}`,
      );
    }
    const transB = attrInt(node, "transB") ?? 0;
    if (transB === 0) {
      // B stored (in, out): bring it to the (out, in) orientation.
      if (weightsShape.length !== 2) {
        throw new ConversionError(
          `layer ${spec.name}: weights have rank ${weightsShape.length}, expected 2`,
        );
      }
      weights = transposed(weights, weightsShape[0], weightsShape[1]);
      weightsShape = [weightsShape[1], weightsShape[0]];
      permutations.push("transposed Gemm B (transB=0)");
    }
  }

  if (!shapesEqual(weightsShape, spec.weights)) {
    throw new ConversionError(
      `layer ${spec.name}: weights shape [${weightsShape}] does not match ` +
        `the expected [${spec.weights}]`,
    );
  }
  const expectedBias = [spec.weights[0]];
  if (!shapesEqual(biasTensor.dims, expectedBias)) {
    throw new ConversionError(
      `layer ${spec.name}: bias shape [${biasTensor.dims}] does not match ` +
        `the expected [${expectedBias}]`,
    );
  }

  if (spec.name === "fc6" && fc6Order === "hwc") {
    weights = permuteFc6RowsFromHwc(weights, spec.weights[0]);
    permutations.push("fc6 rows reordered hwc -> chw");
  }

  return {
    spec,
    tensors: [
      { layer: spec.name, role: "weights", shape: spec.weights, data: weights },
      { layer: spec.name, role: "bias", shape: expectedBias, data: tensorFloats(biasTensor) },
    ],
    report: {
      bundleLayer: spec.name,
      weightsSource: weightsName,
      biasSource: biasName,
      weightsShape: spec.weights,
      biasShape: expectedBias,
      permutation: permutations.join("; ") || "none",
    },
  };
}

/** Pull all eight learnable layers out of a parsed model, validated. */
export function extractLayers(model: OnnxModel, fc6Order: Fc6Order = "chw"): ExtractedLayer[] {
  const nodes = learnableNodes(model);
  if (nodes.length < EXPECTED_LAYERS.length) {
    const missing = EXPECTED_LAYERS.slice(nodes.length).map((l) => l.name);
    throw new ConversionError(
      `checkpoint is missing learnable layers: ${missing.join(", ")} ` +
        `(found ${nodes.length} of ${EXPECTED_LAYERS.length} Conv/Gemm nodes)`,
    );
  }
  if (nodes.length > EXPECTED_LAYERS.length) {
    throw new ConversionError(
      `checkpoint has ${nodes.length} Conv/Gemm nodes, expected exactly ` +
        `${EXPECTED_LAYERS.length}; this tool converts only the fixed architecture`,
    );
  }
  return nodes.map((node, i) => extractLayer(model, node, EXPECTED_LAYERS[i], fc6Order));
}

export function convert(
  onnxPath: string,
  outDir: string,
  options: ConvertOptions = {},
): ConversionReport {
  const fc6Order = options.fc6Order ?? "chw";
  let data: Buffer;
  try {
    data = fs.readFileSync(onnxPath);
  } catch (err) {
    throw new ConversionError(`cannot read checkpoint '${onnxPath}': ${(err as Error).message}`);
  }
  let model: OnnxModel;
  try {
    model = parseModel(data);
  } catch (err) {
    throw new ConversionError(
      `'${onnxPath}' is not a readable ONNX file: ${(err as Error).message}`,
    );
  }

  const layers = extractLayers(model, fc6Order);
  const provenance = options.provenance ?? `converted from ${path.basename(onnxPath)}`;
  const manifest = writeBundle(
    outDir,
    provenance,
    layers.flatMap((l) => l.tensors),
  );
  return {
    source: onnxPath,
    outDir,
    provenance,
    layers: layers.map((l) => l.report),
    manifest: manifest.tensors,
  };
}
