import { describe, expect, it } from "vitest";

import { crc32, crc32Hex } from "../src/crc32.js";
import { ProtoReader, ProtoWriter, WIRE_LEN, WIRE_VARINT } from "../src/proto.js";
import {
  DTYPE_FLOAT,
  parseModel,
  tensorFloats,
  writeModel,
} from "../src/onnx.js";

describe("protobuf wire format", () => {
  it("round-trips varints across the size spectrum", () => {
    const values = [0, 1, 127, 128, 300, 2 ** 21, 2 ** 32 - 1, Number.MAX_SAFE_INTEGER];
    const w = new ProtoWriter();
    for (const v of values) {
      w.varint(v);
    }
    const r = new ProtoReader(w.finish());
    for (const v of values) {
      expect(r.readVarint()).toBe(v);
    }
  });

  it("reads tags, length-delimited fields, and skips unknown fields", () => {
    const w = new ProtoWriter();
    w.varintField(3, 42);
    w.stringField(8, "hello");
    w.varintField(2, 7);
    const r = new ProtoReader(w.finish());

    let tag = r.readTag();
    expect(tag).toEqual({ field: 3, wire: WIRE_VARINT });
    r.skip(tag!.wire); // unknown to this consumer

    tag = r.readTag();
    expect(tag).toEqual({ field: 8, wire: WIRE_LEN });
    expect(Buffer.from(r.readLengthDelimited()).toString("utf8")).toBe("hello");

    tag = r.readTag();
    expect(tag).toEqual({ field: 2, wire: WIRE_VARINT });
    expect(r.readVarint()).toBe(7);
    expect(r.hasMore()).toBe(false);
  });
});

describe("onnx subset", () => {
  it("round-trips a model through the writer and parser", () => {
    const weights = new Float32Array([1.5, -2.25, 0.125, 3]);
    const raw = Buffer.from(weights.buffer, weights.byteOffset, weights.byteLength);
    const data = writeModel(
      [
        {
          opType: "Conv",
          name: "c1",
          inputs: ["x", "w", "b"],
          outputs: ["y"],
          attributes: [
            { name: "group", i: 2 },
            { name: "strides", ints: [4, 4] },
            { name: "alpha", f: 1.5 },
          ],
        },
      ],
      [{ name: "w", dims: [2, 2], dataType: DTYPE_FLOAT, rawData: raw }],
      "round-trip-test",
    );

    const model = parseModel(data);
    expect(model.producerName).toBe("round-trip-test");
    expect(model.nodes).toHaveLength(1);
    const node = model.nodes[0];
    expect(node.opType).toBe("Conv");
    expect(node.inputs).toEqual(["x", "w", "b"]);
    expect(node.attributes.find((a) => a.name === "group")?.i).toBe(2);
    expect(node.attributes.find((a) => a.name === "strides")?.ints).toEqual([4, 4]);
    expect(node.attributes.find((a) => a.name === "alpha")?.f).toBeCloseTo(1.5, 6);

    const tensor = model.initializers.get("w");
    expect(tensor).toBeDefined();
    expect(tensor!.dims).toEqual([2, 2]);
    expect(Array.from(tensorFloats(tensor!))).toEqual([1.5, -2.25, 0.125, 3]);
  });

  it("rejects buffers without a graph", () => {
    const w = new ProtoWriter();
    w.varintField(1, 7); // ir_version only
    expect(() => parseModel(w.finish())).toThrow(/no ONNX graph/);
  });
});

describe("crc32", () => {
  it("matches the standard check value", () => {
    // The canonical CRC-32 test vector.
    expect(crc32(Buffer.from("123456789", "ascii"))).toBe(0xcbf43926);
    expect(crc32Hex(Buffer.from("123456789", "ascii"))).toBe("cbf43926");
  });

  it("pads short digests to eight hex digits", () => {
    expect(crc32Hex(Buffer.alloc(0))).toBe("00000000");
  });
});
