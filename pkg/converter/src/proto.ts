/**
 * Minimal protobuf wire-format primitives.
 *
 * Only what the ONNX subset needs: varints, length-delimited fields, and
 * 32-bit floats, with wire-type-aware skipping of everything unknown.
 * Both the reader and the writer work on Buffers; nested messages are
 * built bottom-up and embedded as length-delimited payloads.
 */

export const WIRE_VARINT = 0;
export const WIRE_I64 = 1;
export const WIRE_LEN = 2;
export const WIRE_I32 = 5;

const MAX_SAFE = BigInt(Number.MAX_SAFE_INTEGER);

export class ProtoReader {
  private pos: number;

  constructor(private readonly buf: Buffer, start = 0, private readonly end = buf.length) {
    this.pos = start;
  }

  hasMore(): boolean {
    return this.pos < this.end;
  }

  readTag(): { field: number; wire: number } {
    const tag = this.readVarint();
    return { field: Math.floor(tag / 8), wire: tag % 8 };
  }

  readVarint(): number {
    let value = 0n;
    let shift = 0n;
    for (;;) {
      if (this.pos >= this.end) {
        throw new Error("truncated varint");
      }
      const byte = this.buf[this.pos];
      this.pos += 1;
      value |= BigInt(byte & 0x7f) << shift;
      if ((byte & 0x80) === 0) {
        break;
      }
      shift += 7n;
      if (shift > 70n) {
        throw new Error("varint longer than 10 bytes");
      }
    }
    if (value > MAX_SAFE) {
      throw new Error(`varint ${value} exceeds the safe integer range`);
    }
    return Number(value);
  }

  readLengthDelimited(): Buffer {
    const length = this.readVarint();
    if (this.pos + length > this.end) {
      throw new Error("length-delimited field runs past the end");
    }
    const out = this.buf.subarray(this.pos, this.pos + length);
    this.pos += length;
    return out;
  }

  readFloat32(): number {
    if (this.pos + 4 > this.end) {
      throw new Error("truncated 32-bit field");
    }
    const value = this.buf.readFloatLE(this.pos);
    this.pos += 4;
    return value;
  }

  skip(wire: number): void {
    if (wire === WIRE_VARINT) {
      this.readVarint();
    } else if (wire === WIRE_LEN) {
      this.readLengthDelimited();
    } else if (wire === WIRE_I32) {
      this.pos += 4;
    } else if (wire === WIRE_I64) {
      this.pos += 8;
    } else {
      throw new Error(`unsupported wire type ${wire}`);
    }
    if (this.pos > this.end) {
      throw new Error("skip ran past the end");
    }
  }
}

/** Repeated varint fields may arrive packed or one tag per element. */
export function readVarintList(reader: ProtoReader, wire: number, into: number[]): void {
  if (wire === WIRE_LEN) {
    const packed = new ProtoReader(reader.readLengthDelimited());
    while (packed.hasMore()) {
      into.push(packed.readVarint());
    }
  } else {
    into.push(reader.readVarint());
  }
}

export class ProtoWriter {
  private readonly chunks: Buffer[] = [];
  private readonly scratch = Buffer.alloc(10);

  varint(value: number | bigint): this {
    let v = typeof value === "bigint" ? value : BigInt(value);
    if (v < 0n) {
      throw new Error("negative varints are not needed by this writer");
    }
    let n = 0;
    do {
      let byte = Number(v & 0x7fn);
      v >>= 7n;
      if (v > 0n) {
        byte |= 0x80;
      }
      this.scratch[n] = byte;
      n += 1;
    } while (v > 0n);
    this.chunks.push(Buffer.from(this.scratch.subarray(0, n)));
    return this;
  }

  tag(field: number, wire: number): this {
    return this.varint(field * 8 + wire);
  }

  varintField(field: number, value: number | bigint): this {
    return this.tag(field, WIRE_VARINT).varint(value);
  }

  bytesField(field: number, data: Buffer): this {
    this.tag(field, WIRE_LEN).varint(data.length);
    this.chunks.push(data);
    return this;
  }

  stringField(field: number, text: string): this {
    return this.bytesField(field, Buffer.from(text, "utf-8"));
  }

  messageField(field: number, body: Buffer): this {
    return this.bytesField(field, body);
  }

  floatField(field: number, value: number): this {
    const buf = Buffer.alloc(4);
    buf.writeFloatLE(value, 0);
    this.tag(field, WIRE_I32);
    this.chunks.push(buf);
    return this;
  }

  finish(): Buffer {
    return Buffer.concat(this.chunks);
  }
}
