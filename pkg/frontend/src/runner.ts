import { execFile } from "node:child_process";
import { mkdtemp, rm } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

import { errorForExit } from "./errors.js";

const execFileAsync = promisify(execFile);

/** Command used to reach the toolkit; override with CELLSEG_BIN. */
export function cliCommand(): string {
  return process.env.CELLSEG_BIN ?? "cellseg";
}

export async function runCli(args: string[]): Promise<string> {
  try {
    const { stdout } = await execFileAsync(cliCommand(), args, {
      maxBuffer: 1 << 28,
    });
    return stdout;
  } catch (err) {
    const failure = err as NodeJS.ErrnoException & { code?: number | string; stderr?: string };
    if (typeof failure.code === "number") {
      throw errorForExit(failure.code, failure.stderr ?? "");
    }
    throw err; // spawn failure (binary missing), not a CLI exit
  }
}

export async function runCliJson<T>(args: string[]): Promise<T> {
  return JSON.parse(await runCli(args)) as T;
}

/** Run a callback with a private scratch directory, cleaned up afterwards. */
export async function withScratchDir<T>(fn: (dir: string) => Promise<T>): Promise<T> {
  const dir = await mkdtemp(join(tmpdir(), "cellseg-client-"));
  try {
    return await fn(dir);
  } finally {
    await rm(dir, { recursive: true, force: true });
  }
}
