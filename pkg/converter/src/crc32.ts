/**
 * CRC-32 (the zlib polynomial), table-driven.
 *
 * Node 20 does not expose zlib's crc32, and the bundle manifest needs
 * checksums that agree with it, so this is the standard reflected
 * implementation with the 0xEDB88320 polynomial.
 */

const TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n += 1) {
    let c = n;
    for (let k = 0; k < 8; k += 1) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(data: Uint8Array, seed = 0): number {
  let c = ~seed >>> 0;
  for (let i = 0; i < data.length; i += 1) {
    c = TABLE[(c ^ data[i]) & 0xff] ^ (c >>> 8);
  }
  return ~c >>> 0;
}

/** Lowercase zero-padded 8-digit hex, the form the bundle manifest uses. */
export function crc32Hex(data: Uint8Array): string {
  return crc32(data).toString(16).padStart(8, "0");
}
