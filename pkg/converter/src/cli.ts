#!/usr/bin/env node
/**
 * Command line front end.
 *
 *   convert --onnx model.onnx --out bundle-dir [--fixture] [--fc6-order chw|hwc]
 *
 * Prints the conversion report as JSON on stdout. Exit codes: 0 on
 * success, 1 for a conversion problem (unreadable or mismatched
 * checkpoint), 2 for bad usage.
 */

import { parseArgs } from "node:util";
import { pathToFileURL } from "node:url";
import * as process from "node:process";

import { convert, ConversionError, Fc6Order } from "./convert.js";
import { DEFAULT_FIXTURE_SEED, emitGoldenFixture } from "./fixture.js";

const USAGE = `usage: convert --onnx PATH --out DIR [--fixture] [--fc6-order chw|hwc] [--seed N]

Converts an ONNX checkpoint of the fixed eight-layer network into a
weight bundle (manifest.json + weights.bin). With --fixture, also
emits a golden fixture (seeded input, feature activation, softmax
output) under DIR/fixture for cross-engine verification.`;

class UsageError extends Error {}

function parse(argv: string[]) {
  try {
    return parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        onnx: { type: "string" },
        out: { type: "string" },
        fixture: { type: "boolean", default: false },
        "fc6-order": { type: "string", default: "chw" },
        seed: { type: "string", default: String(DEFAULT_FIXTURE_SEED) },
        help: { type: "boolean", short: "h", default: false },
      },
    });
  } catch (err) {
    throw new UsageError((err as Error).message);
  }
}

function run(argv: string[]): number {
  const parsed = parse(argv);
  if (parsed.values.help) {
    process.stdout.write(USAGE + "\n");
    return 0;
  }
  const positionals = parsed.positionals;
  if (positionals.length !== 1 || positionals[0] !== "convert") {
    throw new UsageError(
      `expected the 'convert' command, got: ${positionals.join(" ") || "(nothing)"}`,
    );
  }
  const onnxPath = parsed.values.onnx;
  const outDir = parsed.values.out;
  if (!onnxPath || !outDir) {
    throw new UsageError("--onnx and --out are both required");
  }
  const fc6Order = parsed.values["fc6-order"];
  if (fc6Order !== "chw" && fc6Order !== "hwc") {
    throw new UsageError(`--fc6-order must be 'chw' or 'hwc', got '${fc6Order}'`);
  }
  const seed = Number(parsed.values.seed);
  if (!Number.isInteger(seed) || seed < 0) {
    throw new UsageError(`--seed must be a non-negative integer, got '${parsed.values.seed}'`);
  }

  const report: Record<string, unknown> = {
    ...convert(onnxPath, outDir, { fc6Order: fc6Order as Fc6Order }),
  };
  if (parsed.values.fixture) {
    report.fixture = emitGoldenFixture(outDir, seed);
  }
  process.stdout.write(JSON.stringify(report, null, 2) + "\n");
  return 0;
}

export function main(argv: string[]): number {
  try {
    return run(argv);
  } catch (err) {
    if (err instanceof UsageError) {
      process.stderr.write(`error: ${err.message}\n\n${USAGE}\n`);
      return 2;
    }
    if (err instanceof ConversionError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 1;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
