#!/usr/bin/env node
/**
 * est-embed command line: `extract` produces embedding JSON from an image,
 * `preview` drives an external diffusion pipeline to render the two
 * single-LoRA preview images.
 *
 * Exit codes: 0 success, 2 bad input, 3 write failure, 4 pipeline
 * unavailable, 1 pipeline ran but failed.
 */

import { realpathSync } from 'node:fs';
import { pathToFileURL } from 'node:url';
import { parseArgs } from 'node:util';

import { UsageError } from './backbones.js';
import { ImageDecodeError } from './image.js';
import { extract } from './extract.js';
import { PipelineError, PipelineUnavailableError, previewPair } from './preview.js';

const USAGE = `usage:
  est-embed extract --image <path> --out <path> [--backbone <tag>]
  est-embed preview --prompt <text> --content-lora <path> --style-lora <path>
                    --seed <n> --out-dir <dir> [--pipeline <executable>]

extract writes an embedding JSON file consumable by est-lora discrepancy.
preview needs an external diffusion pipeline executable (EST_EMBED_PIPELINE).
`;

function fail(message: string): never {
  throw new UsageError(message);
}

function requireOption(values: Record<string, unknown>, name: string): string {
  const v = values[name];
  if (typeof v !== 'string' || v === '') fail(`missing required option --${name}`);
  return v;
}

function runExtract(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      image: { type: 'string' },
      out: { type: 'string' },
      backbone: { type: 'string' },
    },
    strict: true,
    allowPositionals: false,
  });
  extract({
    imagePath: requireOption(values, 'image'),
    outputPath: requireOption(values, 'out'),
    backboneTag: values.backbone,
  });
}

function runPreview(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      prompt: { type: 'string' },
      'content-lora': { type: 'string' },
      'style-lora': { type: 'string' },
      seed: { type: 'string' },
      'out-dir': { type: 'string' },
      pipeline: { type: 'string' },
    },
    strict: true,
    allowPositionals: false,
  });
  const seedText = requireOption(values, 'seed');
  if (!/^\d+$/.test(seedText)) fail(`seed must be a non-negative integer, got ${seedText}`);
  const [contentImage, styleImage] = previewPair({
    prompt: requireOption(values, 'prompt'),
    contentLora: requireOption(values, 'content-lora'),
    styleLora: requireOption(values, 'style-lora'),
    seed: parseInt(seedText, 10),
    outDir: requireOption(values, 'out-dir'),
    pipeline: values.pipeline,
  });
  process.stdout.write(JSON.stringify({ content: contentImage, style: styleImage }) + '\n');
}

export function main(argv: string[]): number {
  if (argv.length === 0 || argv[0] === '--help' || argv[0] === '-h') {
    process.stdout.write(USAGE);
    return argv.length === 0 ? 2 : 0;
  }
  const command = argv[0];
  const rest = argv.slice(1);
  try {
    if (command === 'extract') {
      runExtract(rest);
    } else if (command === 'preview') {
      runPreview(rest);
    } else {
      fail(`unknown command ${JSON.stringify(command)}`);
    }
    return 0;
  } catch (err) {
    if (err instanceof PipelineUnavailableError) {
      process.stderr.write(`est-embed: error: ${err.message}\n`);
      return 4;
    }
    if (err instanceof PipelineError) {
      process.stderr.write(`est-embed: error: ${err.message}\n`);
      return 1;
    }
    if (err instanceof UsageError || err instanceof ImageDecodeError) {
      process.stderr.write(`est-embed: error: ${err.message}\n${USAGE}`);
      return 2;
    }
    const anyErr = err as NodeJS.ErrnoException;
    if (anyErr.code === 'ERR_PARSE_ARGS_UNKNOWN_OPTION' || anyErr.code === 'ERR_PARSE_ARGS_INVALID_OPTION_VALUE') {
      process.stderr.write(`est-embed: error: ${anyErr.message}\n${USAGE}`);
      return 2;
    }
    if (typeof anyErr.code === 'string' && anyErr.code.startsWith('E')) {
      process.stderr.write(`est-embed: error: ${anyErr.message}\n`);
      return 3;
    }
    throw err;
  }
}

let entryPath = process.argv[1];
if (entryPath) {
  try {
    entryPath = realpathSync(entryPath); // bin shims are symlinks
  } catch {
    // leave as-is
  }
}
if (entryPath && import.meta.url === pathToFileURL(entryPath).href) {
  process.exit(main(process.argv.slice(2)));
}
