/**
 * Client bindings for the cellseg toolkit.
 *
 * Every operation marshals plain row-major typed arrays to RAS files,
 * invokes the `cellseg` CLI, and parses the result back, so numbers are
 * exactly what the toolkit itself produces: label outputs are exact and
 * real-valued metrics round-trip through full-precision JSON. Nothing is
 * reimplemented on this side.
 *
 * All calls are async and run the CLI as a child process, so they never
 * block the event loop; independent calls may run concurrently.
 */

import { readFile, writeFile } from "node:fs/promises";
import { join } from "node:path";

import { decodeRas, encodeRas } from "./ras.js";
import { runCli, runCliJson, withScratchDir } from "./runner.js";

export { CellsegError, ConstantImageError, DimensionMismatchError, InvalidRequestError, IoError } from "./errors.js";
export { decodeRas, encodeRas } from "./ras.js";
export type { DecodedRas, RasArray, RasDtype } from "./ras.js";

export const VERSION = "0.1.0";

/** Row-major 2-D array view; data.length must equal width * height. */
export interface Grid<T extends ArrayLike<number>> {
  width: number;
  height: number;
  data: T;
}

/** Real-valued samples (intensity, logits, distances). */
export type RealGrid = Grid<Float32Array>;
/** Non-negative instance ids; 0 is background. */
export type LabelGrid = Grid<Int32Array>;
/** Boolean-ish mask; any non-zero value counts as foreground. */
export type MaskGrid = Grid<Uint8Array>;

export interface SegmentOptions {
  /** Suppression depth for distance-map maxima (default 10). */
  h?: number;
  /** Semantic probability cut in (0, 1) (default 0.5). */
  threshold?: number;
  /** "standard" sigmoid or the "shifted" variant centered at 0.5. */
  activation?: "standard" | "shifted";
  /** Pixel neighborhood, 4 or 8 (default 8). */
  connectivity?: 4 | 8;
  /** Flood the watershed on the h-maxima transform instead of the raw map. */
  floodOnHmax?: boolean;
}

export interface LossChannels {
  predDist: RealGrid;
  predLogits: RealGrid;
  targetDist: RealGrid;
  targetMask: MaskGrid;
  /** BCE weight (default 2000). */
  alpha?: number;
}

function checkGrid(name: string, grid: Grid<ArrayLike<number>>): void {
  if (grid.data.length !== grid.width * grid.height) {
    throw new RangeError(
      `${name}: data length ${grid.data.length} != ${grid.width}x${grid.height}`,
    );
  }
}

async function writeReal(dir: string, name: string, grid: RealGrid): Promise<string> {
  checkGrid(name, grid);
  const path = join(dir, name);
  await writeFile(path, encodeRas(grid.width, grid.height, "f32", grid.data));
  return path;
}

async function writeLabels(dir: string, name: string, grid: LabelGrid): Promise<string> {
  checkGrid(name, grid);
  const path = join(dir, name);
  await writeFile(path, encodeRas(grid.width, grid.height, "u32", grid.data));
  return path;
}

async function writeMask(dir: string, name: string, grid: MaskGrid): Promise<string> {
  checkGrid(name, grid);
  const path = join(dir, name);
  const bits = Uint8Array.from(grid.data, (v) => (v ? 1 : 0));
  await writeFile(path, encodeRas(grid.width, grid.height, "u8", bits));
  return path;
}

async function readLabels(path: string): Promise<LabelGrid> {
  const decoded = decodeRas(await readFile(path));
  return {
    width: decoded.width,
    height: decoded.height,
    data: Int32Array.from(decoded.data),
  };
}

async function readReal(path: string): Promise<RealGrid> {
  const decoded = decodeRas(await readFile(path));
  if (decoded.dtype !== "f32") throw new Error(`expected f32 RAS, got ${decoded.dtype}`);
  return { width: decoded.width, height: decoded.height, data: decoded.data as Float32Array };
}

async function evaluatePair(
  metric: "map" | "iou" | "pcc",
  writeGt: (dir: string) => Promise<string>,
  writePred: (dir: string) => Promise<string>,
): Promise<number> {
  return withScratchDir(async (dir) => {
    const gt = await writeGt(dir);
    const pred = await writePred(dir);
    const res = await runCliJson<{ metric: string; value: number }>([
      "evaluate",
      "--gt",
      gt,
      "--pred",
      pred,
      "--metric",
      metric,
    ]);
    return res.value;
  });
}

/** Mean detection precision over IoU thresholds 0.50 .. 0.95. */
export function mapScore(gt: LabelGrid, pred: LabelGrid): Promise<number> {
  return evaluatePair(
    "map",
    (dir) => writeLabels(dir, "gt.ras", gt),
    (dir) => writeLabels(dir, "pred.ras", pred),
  );
}

/** Intersection over union; 1.0 when both masks are empty. */
export function iou(x: MaskGrid, y: MaskGrid): Promise<number> {
  return evaluatePair(
    "iou",
    (dir) => writeMask(dir, "gt.ras", x),
    (dir) => writeMask(dir, "pred.ras", y),
  );
}

/** Pearson correlation coefficient over all pixels. */
export function pcc(x: RealGrid, y: RealGrid): Promise<number> {
  return evaluatePair(
    "pcc",
    (dir) => writeReal(dir, "gt.ras", x),
    (dir) => writeReal(dir, "pred.ras", y),
  );
}

/** Pixel-mean MSE on the distance channel + alpha * pixel-mean BCE-with-logits. */
export function combinedLoss(channels: LossChannels): Promise<number> {
  return withScratchDir(async (dir) => {
    const args = [
      "loss",
      "--pred-dist",
      await writeReal(dir, "pd.ras", channels.predDist),
      "--pred-logits",
      await writeReal(dir, "pl.ras", channels.predLogits),
      "--target-dist",
      await writeReal(dir, "td.ras", channels.targetDist),
      "--target-mask",
      await writeMask(dir, "tm.ras", channels.targetMask),
    ];
    if (channels.alpha !== undefined) args.push("--alpha", String(channels.alpha));
    const res = await runCliJson<{ metric: string; value: number }>(args);
    return res.value;
  });
}

/** Exact per-instance Euclidean distance map; background stays 0. */
export function distanceMap(
  labels: LabelGrid,
  options: { normalize?: boolean } = {},
): Promise<RealGrid> {
  return withScratchDir(async (dir) => {
    const input = await writeLabels(dir, "labels.ras", labels);
    const output = join(dir, "dist.ras");
    const args = ["distmap", "--labels", input, "--out", output];
    if (options.normalize) args.push("--normalize");
    await runCli(args);
    return readReal(output);
  });
}

/** Split distance + semantic predictions into labeled instances. */
export function instanceSegment(
  dist: RealGrid,
  semantic: RealGrid,
  options: SegmentOptions = {},
): Promise<LabelGrid> {
  return withScratchDir(async (dir) => {
    const args = [
      "postprocess",
      "--distance",
      await writeReal(dir, "dist.ras", dist),
      "--semantic",
      await writeReal(dir, "semantic.ras", semantic),
      "--out",
      join(dir, "pred.ras"),
    ];
    if (options.h !== undefined) args.push("--h", String(options.h));
    if (options.threshold !== undefined) args.push("--threshold", String(options.threshold));
    if (options.activation !== undefined) args.push("--activation", options.activation);
    if (options.connectivity !== undefined)
      args.push("--connectivity", String(options.connectivity));
    if (options.floodOnHmax) args.push("--flood-on-hmax");
    await runCli(args);
    return readLabels(join(dir, "pred.ras"));
  });
}

/** Version reported by the installed toolkit (mirrors VERSION when in sync). */
export async function coreVersion(): Promise<string> {
  const out = await runCli(["--version"]);
  return out.trim().replace(/^cellseg\s+/, "");
}
