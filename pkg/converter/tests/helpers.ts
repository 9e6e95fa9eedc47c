import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { buildSyntheticModel, SyntheticOptions, Variant } from "../src/synthetic.js";

const CACHE_DIR = path.join(os.tmpdir(), "weight-converter-tests");

/**
 * Serialize a synthetic checkpoint to a cached path. The full variant
 * weighs a quarter gigabyte, so test files reuse one copy per
 * (seed, variant, transB) instead of rebuilding it.
 */
export function syntheticModelPath(
  seed: number,
  variant: Variant = "full",
  options: SyntheticOptions = {},
): string {
  const transB = options.gemmTransB ?? 1;
  const file = path.join(CACHE_DIR, `model-${variant}-s${seed}-t${transB}.onnx`);
  if (!fs.existsSync(file)) {
    fs.mkdirSync(CACHE_DIR, { recursive: true });
    const tmp = `${file}.partial`;
    fs.writeFileSync(tmp, buildSyntheticModel(seed, variant, options));
    fs.renameSync(tmp, file);
  }
  return file;
}

export function freshDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}
