#!/usr/bin/env node
/**
 * Write a synthetic checkpoint to disk.
 *
 *   make-synthetic --out model.onnx [--seed N] [--variant full|missing-fc8|bad-shape|bad-dtype]
 *
 * The sandboxed test environments have no network access, so this
 * stands in for downloading a real checkpoint. The full variant is a
 * complete, well-conditioned network; the others are deliberately
 * broken inputs for exercising converter error handling.
 */

import * as fs from "node:fs";
import { parseArgs } from "node:util";
import { pathToFileURL } from "node:url";
import * as process from "node:process";

import { buildSyntheticModel, Variant, VARIANTS } from "./synthetic.js";

const USAGE = `usage: make-synthetic --out PATH [--seed N] [--variant ${VARIANTS.join("|")}]`;

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        out: { type: "string" },
        seed: { type: "string", default: "7" },
        variant: { type: "string", default: "full" },
        help: { type: "boolean", short: "h", default: false },
      },
    });
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n${USAGE}\n`);
    return 2;
  }
  if (parsed.values.help) {
    process.stdout.write(USAGE + "\n");
    return 0;
  }
  const out = parsed.values.out;
  if (!out) {
    process.stderr.write(`error: --out is required\n${USAGE}\n`);
    return 2;
  }
  const seed = Number(parsed.values.seed);
  if (!Number.isInteger(seed) || seed < 0) {
    process.stderr.write(`error: --seed must be a non-negative integer\n${USAGE}\n`);
    return 2;
  }
  const variant = parsed.values.variant as Variant;
  if (!VARIANTS.includes(variant)) {
    process.stderr.write(`error: unknown variant '${variant}'\n${USAGE}\n`);
    return 2;
  }
  fs.writeFileSync(out, buildSyntheticModel(seed, variant));
  process.stderr.write(`wrote ${variant} checkpoint (seed ${seed}) to ${out}\n`);
  return 0;
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
