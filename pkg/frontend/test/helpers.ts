import { spawnSync } from 'node:child_process';
import { readFileSync } from 'node:fs';
import { fileURLToPath } from 'node:url';

export const CLI_PATH = fileURLToPath(new URL('../dist/cli.js', import.meta.url));

export function fixturePath(name: string): string {
  return fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url));
}

export function readFixture(name: string): Uint8Array {
  const buf = readFileSync(fixturePath(name));
  return new Uint8Array(buf.buffer, buf.byteOffset, buf.length);
}

export interface ExpectedRgb {
  width: number;
  height: number;
  rgb: number[];
}

export function readExpected(name: string): ExpectedRgb {
  return JSON.parse(readFileSync(fixturePath(name), 'utf8')) as ExpectedRgb;
}

export interface CliResult {
  status: number | null;
  stdout: string;
  stderr: string;
}

export function runCli(args: string[], env?: Record<string, string | undefined>): CliResult {
  const merged: Record<string, string> = {};
  for (const [k, v] of Object.entries({ ...process.env, ...env })) {
    if (v !== undefined) merged[k] = v;
  }
  const run = spawnSync(process.execPath, [CLI_PATH, ...args], {
    encoding: 'utf8',
    env: merged,
  });
  return { status: run.status, stdout: run.stdout, stderr: run.stderr };
}

/** Binary PGM with pixel k = (seedByte + 7 * k) mod 256; enough for decode tests. */
export function syntheticPgm(width: number, height: number, seedByte = 0): Uint8Array {
  const header = `P5\n${width} ${height}\n255\n`;
  const out = new Uint8Array(header.length + width * height);
  for (let i = 0; i < header.length; i++) out[i] = header.charCodeAt(i);
  for (let k = 0; k < width * height; k++) {
    out[header.length + k] = (seedByte + 7 * k) % 256;
  }
  return out;
}
