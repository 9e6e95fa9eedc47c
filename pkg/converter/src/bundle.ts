/**
 * Writer for the weight-bundle directory format the pipeline consumes.
 *
 * A bundle is `manifest.json` plus `weights.bin`: the manifest lists
 * every tensor with layer, role, shape, dtype tag `f32le`, byte offset
 * into the blob, and the crc32 of its bytes; the blob is the tensors'
 * little-endian float32 data concatenated in manifest order. Tensors
 * are laid out sorted by layer name with weights before bias so the
 * same input always produces byte-identical files.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { crc32Hex } from "./crc32.js";

export const MANIFEST_NAME = "manifest.json";
export const BLOB_NAME = "weights.bin";

export interface BundleTensor {
  layer: string;
  role: "weights" | "bias";
  shape: number[];
  data: Float32Array;
}

export interface ManifestEntry {
  layer: string;
  role: string;
  shape: number[];
  dtype: string;
  offset: number;
  crc32: string;
}

export interface BundleManifest {
  provenance: string;
  tensors: ManifestEntry[];
}

const ROLE_ORDER: Record<string, number> = { weights: 0, bias: 1 };

function tensorBytes(tensor: BundleTensor): Buffer {
  const expected = tensor.shape.reduce((a, b) => a * b, 1);
  if (expected !== tensor.data.length) {
    throw new Error(
      `layer '${tensor.layer}' ${tensor.role}: shape [${tensor.shape}] holds ` +
        `${expected} values but ${tensor.data.length} were provided`,
    );
  }
  // Float32Array is little-endian on every platform node supports.
  return Buffer.from(tensor.data.buffer, tensor.data.byteOffset, tensor.data.byteLength);
}

export function writeBundle(
  outDir: string,
  provenance: string,
  tensors: BundleTensor[],
): BundleManifest {
  const ordered = [...tensors].sort(
    (a, b) => a.layer.localeCompare(b.layer) || ROLE_ORDER[a.role] - ROLE_ORDER[b.role],
  );
  const entries: ManifestEntry[] = [];
  const chunks: Buffer[] = [];
  let offset = 0;
  for (const tensor of ordered) {
    const raw = tensorBytes(tensor);
    entries.push({
      layer: tensor.layer,
      role: tensor.role,
      shape: [...tensor.shape],
      dtype: "f32le",
      offset,
      crc32: crc32Hex(raw),
    });
    chunks.push(raw);
    offset += raw.length;
  }
  const manifest: BundleManifest = { provenance, tensors: entries };
  fs.mkdirSync(outDir, { recursive: true });
  fs.writeFileSync(path.join(outDir, BLOB_NAME), Buffer.concat(chunks));
  fs.writeFileSync(
    path.join(outDir, MANIFEST_NAME),
    JSON.stringify(manifest, null, 2) + "\n",
  );
  return manifest;
}

/** Read a bundle back, verifying structure and checksums (test support). */
export function readBundle(dir: string): Map<string, Float32Array> {
  const manifestPath = path.join(dir, MANIFEST_NAME);
  const manifest = JSON.parse(fs.readFileSync(manifestPath, "utf-8")) as BundleManifest;
  const blob = fs.readFileSync(path.join(dir, BLOB_NAME));
  const out = new Map<string, Float32Array>();
  for (const entry of manifest.tensors) {
    const count = entry.shape.reduce((a, b) => a * b, 1);
    const raw = blob.subarray(entry.offset, entry.offset + count * 4);
    if (raw.length !== count * 4) {
      throw new Error(`layer '${entry.layer}' ${entry.role}: blob too short`);
    }
    if (crc32Hex(raw) !== entry.crc32) {
      throw new Error(`layer '${entry.layer}' ${entry.role}: checksum mismatch`);
    }
    const values = new Float32Array(count);
    for (let i = 0; i < count; i += 1) {
      values[i] = raw.readFloatLE(i * 4);
    }
    out.set(`${entry.layer}/${entry.role}`, values);
  }
  return out;
}
