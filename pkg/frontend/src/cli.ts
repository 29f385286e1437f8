/**
 * Process plumbing for the core command line tool.
 *
 * Every binding call round-trips through the CLI with NPY files in a
 * private temp directory, so results are exactly what the command line
 * path produces.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export class CoreProcessError extends Error {
  readonly exitCode: number | null;
  readonly stderr: string;

  constructor(args: string[], exitCode: number | null, stderr: string) {
    super(
      `core command failed (exit ${exitCode}): ` +
        `${cliCommand()} ${args.join(" ")}\n${stderr.trim()}`,
    );
    this.name = "CoreProcessError";
    this.exitCode = exitCode;
    this.stderr = stderr;
  }
}

export function cliCommand(): string {
  return process.env.TISSUESEP_CLI ?? "tissuesep";
}

export function runCore(args: string[]): string {
  const result = spawnSync(cliCommand(), args, {
    encoding: "utf8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (result.error) {
    throw result.error;
  }
  if (result.status !== 0) {
    throw new CoreProcessError(args, result.status, result.stderr ?? "");
  }
  return result.stdout ?? "";
}

export function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "tissuesep-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
