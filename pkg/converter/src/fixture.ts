/**
 * Golden fixture emission.
 *
 * A fixture is a deterministic probe of a converted bundle: a seeded
 * synthetic input image, the feature-layer activation, and the softmax
 * output, each stored as raw little-endian float32 with a JSON index
 * describing shapes, checksums, and the input generator. Consumers can
 * replay the input through their own engine and compare against the
 * recorded arrays without any shared code.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { crc32Hex } from "./crc32.js";
import { readBundle } from "./bundle.js";
import { GENERATOR_DOC, XorShift32 } from "./rng.js";
import { INPUT_SHAPE, runReference } from "./reference.js";

export const FIXTURE_DIR = "fixture";
export const FIXTURE_INDEX = "index.json";
export const DEFAULT_FIXTURE_SEED = 20240415;

export interface FixtureArray {
  name: string;
  shape: number[];
  file: string;
  dtype: "f32le";
  crc32: string;
}

export interface FixtureIndex {
  seed: number;
  generator: string;
  arrays: FixtureArray[];
}

/** Seeded input image: values in [-1, 1), shape c,h,w. */
export function generateInput(seed: number): Float32Array {
  const { channels, height, width } = INPUT_SHAPE;
  const data = new Float32Array(channels * height * width);
  new XorShift32(seed).fill(data);
  return data;
}

function writeArray(
  dir: string,
  name: string,
  shape: number[],
  data: Float32Array,
): FixtureArray {
  const file = `${name}.f32le`;
  const bytes = Buffer.from(data.buffer, data.byteOffset, data.byteLength);
  fs.writeFileSync(path.join(dir, file), bytes);
  return { name, shape, file, dtype: "f32le", crc32: crc32Hex(bytes) };
}

/**
 * Generate the fixture for the bundle in `bundleDir`, writing into
 * `bundleDir`/fixture. Returns the parsed index. Re-running with the
 * same bundle and seed reproduces every byte.
 */
export function emitGoldenFixture(bundleDir: string, seed = DEFAULT_FIXTURE_SEED): FixtureIndex {
  const tensors = readBundle(bundleDir);
  const input = generateInput(seed);
  const { fc7, prob } = runReference(tensors, input);

  let probSum = 0;
  for (let i = 0; i < prob.length; i += 1) {
    probSum += prob[i];
  }
  if (Math.abs(probSum - 1) > 1e-5) {
    throw new Error(`fixture self-check failed: prob sums to ${probSum}`);
  }

  const dir = path.join(bundleDir, FIXTURE_DIR);
  fs.mkdirSync(dir, { recursive: true });
  const { channels, height, width } = INPUT_SHAPE;
  const index: FixtureIndex = {
    seed,
    generator: GENERATOR_DOC,
    arrays: [
      writeArray(dir, "input", [channels, height, width], input),
      writeArray(dir, "fc7", [fc7.length], fc7),
      writeArray(dir, "prob", [prob.length], prob),
    ],
  };
  fs.writeFileSync(path.join(dir, FIXTURE_INDEX), JSON.stringify(index, null, 2) + "\n");
  return index;
}
