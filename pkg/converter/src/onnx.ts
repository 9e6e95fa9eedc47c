/**
 * Reader and writer for the slice of ONNX this tool needs.
 *
 * Reading covers ModelProto -> GraphProto -> nodes, attributes, and
 * initializers, with unknown fields skipped, so real exported
 * checkpoints parse as long as they carry the expected tensors.
 * Writing covers just enough to assemble a checkpoint from scratch
 * (used by the synthetic-model generator and the tests).
 */

import {
  ProtoReader,
  ProtoWriter,
  readVarintList,
  WIRE_I32,
  WIRE_LEN,
  WIRE_VARINT,
} from "./proto.js";

export const DTYPE_FLOAT = 1;
export const DTYPE_DOUBLE = 11;

export const DTYPE_NAMES: Record<number, string> = {
  1: "FLOAT",
  2: "UINT8",
  3: "INT8",
  6: "INT32",
  7: "INT64",
  10: "FLOAT16",
  11: "DOUBLE",
};

export interface OnnxAttribute {
  name: string;
  i?: number;
  f?: number;
  ints?: number[];
}

export interface OnnxNode {
  opType: string;
  name: string;
  inputs: string[];
  outputs: string[];
  attributes: OnnxAttribute[];
}

export interface OnnxTensor {
  name: string;
  dims: number[];
  dataType: number;
  /** Raw little-endian payload; empty when the values came as float_data. */
  rawData: Buffer;
  /** Populated when the checkpoint used the float_data encoding. */
  floatData?: number[];
}

export interface OnnxModel {
  producerName: string;
  nodes: OnnxNode[];
  initializers: Map<string, OnnxTensor>;
}

export function tensorFloats(tensor: OnnxTensor): Float32Array {
  if (tensor.floatData !== undefined) {
    return Float32Array.from(tensor.floatData);
  }
  if (tensor.rawData.length % 4 !== 0) {
    throw new Error(`initializer '${tensor.name}': raw data is not a whole number of floats`);
  }
  // Copy out of the file buffer to guarantee alignment and ownership.
  const out = new Float32Array(tensor.rawData.length / 4);
  for (let i = 0; i < out.length; i += 1) {
    out[i] = tensor.rawData.readFloatLE(i * 4);
  }
  return out;
}

// --- parsing ---------------------------------------------------------------

function parseAttribute(body: Buffer): OnnxAttribute {
  const reader = new ProtoReader(body);
  const attr: OnnxAttribute = { name: "" };
  while (reader.hasMore()) {
    const { field, wire } = reader.readTag();
    if (field === 1 && wire === WIRE_LEN) {
      attr.name = reader.readLengthDelimited().toString("utf-8");
    } else if (field === 2 && wire === WIRE_I32) {
      attr.f = reader.readFloat32();
    } else if (field === 3 && wire === WIRE_VARINT) {
      attr.i = reader.readVarint();
    } else if (field === 8) {
      attr.ints = attr.ints ?? [];
      readVarintList(reader, wire, attr.ints);
    } else {
      reader.skip(wire);
    }
  }
  return attr;
}

function parseNode(body: Buffer): OnnxNode {
  const reader = new ProtoReader(body);
  const node: OnnxNode = { opType: "", name: "", inputs: [], outputs: [], attributes: [] };
  while (reader.hasMore()) {
    const { field, wire } = reader.readTag();
    if (field === 1 && wire === WIRE_LEN) {
      node.inputs.push(reader.readLengthDelimited().toString("utf-8"));
    } else if (field === 2 && wire === WIRE_LEN) {
      node.outputs.push(reader.readLengthDelimited().toString("utf-8"));
    } else if (field === 3 && wire === WIRE_LEN) {
      node.name = reader.readLengthDelimited().toString("utf-8");
    } else if (field === 4 && wire === WIRE_LEN) {
      node.opType = reader.readLengthDelimited().toString("utf-8");
    } else if (field === 5 && wire === WIRE_LEN) {
      node.attributes.push(parseAttribute(reader.readLengthDelimited()));
    } else {
      reader.skip(wire);
    }
  }
  return node;
}

function parseTensor(body: Buffer): OnnxTensor {
  const reader = new ProtoReader(body);
  const tensor: OnnxTensor = { name: "", dims: [], dataType: 0, rawData: Buffer.alloc(0) };
  while (reader.hasMore()) {
    const { field, wire } = reader.readTag();
    if (field === 1) {
      readVarintList(reader, wire, tensor.dims);
    } else if (field === 2 && wire === WIRE_VARINT) {
      tensor.dataType = reader.readVarint();
    } else if (field === 4) {
      tensor.floatData = tensor.floatData ?? [];
      if (wire === WIRE_LEN) {
        const packed = new ProtoReader(reader.readLengthDelimited());
        while (packed.hasMore()) {
          tensor.floatData.push(packed.readFloat32());
        }
      } else {
        tensor.floatData.push(reader.readFloat32());
      }
    } else if (field === 8 && wire === WIRE_LEN) {
      tensor.name = reader.readLengthDelimited().toString("utf-8");
    } else if (field === 9 && wire === WIRE_LEN) {
      tensor.rawData = reader.readLengthDelimited();
    } else {
      reader.skip(wire);
    }
  }
  return tensor;
}

function parseGraph(body: Buffer, model: OnnxModel): void {
  const reader = new ProtoReader(body);
  while (reader.hasMore()) {
    const { field, wire } = reader.readTag();
    if (field === 1 && wire === WIRE_LEN) {
      model.nodes.push(parseNode(reader.readLengthDelimited()));
    } else if (field === 5 && wire === WIRE_LEN) {
      const tensor = parseTensor(reader.readLengthDelimited());
      model.initializers.set(tensor.name, tensor);
    } else {
      reader.skip(wire);
    }
  }
}

export function parseModel(data: Buffer): OnnxModel {
  const model: OnnxModel = { producerName: "", nodes: [], initializers: new Map() };
  const reader = new ProtoReader(data);
  let sawGraph = false;
  while (reader.hasMore()) {
    const { field, wire } = reader.readTag();
    if (field === 2 && wire === WIRE_LEN) {
      model.producerName = reader.readLengthDelimited().toString("utf-8");
    } else if (field === 7 && wire === WIRE_LEN) {
      parseGraph(reader.readLengthDelimited(), model);
      sawGraph = true;
    } else {
      reader.skip(wire);
    }
  }
  if (!sawGraph) {
    throw new Error("file contains no ONNX graph");
  }
  return model;
}

// --- writing ---------------------------------------------------------------

export interface NodeSpec {
  opType: string;
  name: string;
  inputs: string[];
  outputs: string[];
  attributes?: OnnxAttribute[];
}

export interface TensorSpec {
  name: string;
  dims: number[];
  dataType: number;
  rawData: Buffer;
}

function writeAttribute(attr: OnnxAttribute): Buffer {
  const w = new ProtoWriter();
  w.stringField(1, attr.name);
  if (attr.f !== undefined) {
    w.floatField(2, attr.f);
    w.varintField(20, 1); // AttributeProto.FLOAT
  }
  if (attr.i !== undefined) {
    w.varintField(3, attr.i);
    w.varintField(20, 2); // AttributeProto.INT
  }
  if (attr.ints !== undefined) {
    for (const value of attr.ints) {
      w.varintField(8, value);
    }
    w.varintField(20, 7); // AttributeProto.INTS
  }
  return w.finish();
}

function writeNode(node: NodeSpec): Buffer {
  const w = new ProtoWriter();
  for (const input of node.inputs) {
    w.stringField(1, input);
  }
  for (const output of node.outputs) {
    w.stringField(2, output);
  }
  w.stringField(3, node.name);
  w.stringField(4, node.opType);
  for (const attr of node.attributes ?? []) {
    w.messageField(5, writeAttribute(attr));
  }
  return w.finish();
}

function writeTensor(tensor: TensorSpec): Buffer {
  const w = new ProtoWriter();
  for (const dim of tensor.dims) {
    w.varintField(1, dim);
  }
  w.varintField(2, tensor.dataType);
  w.stringField(8, tensor.name);
  w.bytesField(9, tensor.rawData);
  return w.finish();
}

export function writeModel(
  nodes: NodeSpec[],
  initializers: TensorSpec[],
  producerName = "weight-converter-tests",
): Buffer {
  const graph = new ProtoWriter();
  for (const node of nodes) {
    graph.messageField(1, writeNode(node));
  }
  graph.stringField(2, "alexnet");
  for (const tensor of initializers) {
    graph.messageField(5, writeTensor(tensor));
  }

  const model = new ProtoWriter();
  model.varintField(1, 7); // ir_version
  model.stringField(2, producerName);
  model.messageField(7, graph.finish());
  return model.finish();
}
