/**
 * Minimal image decoding: PNM (P2/P3/P5/P6) and non-interlaced 8-bit PNG.
 *
 * Everything is decoded to interleaved RGB doubles in [0, 1]. Alpha, where
 * present, is composited onto a white background so that the same picture
 * saved with or without a useless opaque alpha channel embeds identically.
 */

import { inflateSync } from 'node:zlib';

export class ImageDecodeError extends Error {}

export interface RgbImage {
  width: number;
  height: number;
  /** Row-major, interleaved r,g,b per pixel, values in [0, 1]. */
  pixels: Float64Array;
}

export function decodeImage(data: Uint8Array): RgbImage {
  if (data.length >= 2 && data[0] === 0x50 /* 'P' */) {
    const tag = data[1];
    if (tag === 0x32 || tag === 0x33 || tag === 0x35 || tag === 0x36) {
      return decodePnm(data);
    }
  }
  if (hasPngSignature(data)) {
    return decodePng(data);
  }
  throw new ImageDecodeError('unsupported or undecodable image format');
}

// ── PNM ────────────────────────────────────────────────────────────────

const WHITESPACE = new Set([0x20, 0x09, 0x0a, 0x0d, 0x0b, 0x0c]);

class PnmReader {
  pos = 0;
  constructor(private data: Uint8Array) {}

  /** Next whitespace-delimited token, skipping # comments to end of line. */
  token(): string {
    const d = this.data;
    while (this.pos < d.length) {
      if (WHITESPACE.has(d[this.pos])) {
        this.pos++;
      } else if (d[this.pos] === 0x23) {
        while (this.pos < d.length && d[this.pos] !== 0x0a) this.pos++;
      } else {
        break;
      }
    }
    const start = this.pos;
    while (this.pos < d.length && !WHITESPACE.has(d[this.pos]) && d[this.pos] !== 0x23) {
      this.pos++;
    }
    if (this.pos === start) throw new ImageDecodeError('truncated PNM header');
    let s = '';
    for (let i = start; i < this.pos; i++) s += String.fromCharCode(d[i]);
    return s;
  }

  int(what: string): number {
    const tok = this.token();
    if (!/^\d+$/.test(tok)) {
      throw new ImageDecodeError(`bad PNM ${what}: ${JSON.stringify(tok)}`);
    }
    return parseInt(tok, 10);
  }
}

function decodePnm(data: Uint8Array): RgbImage {
  const reader = new PnmReader(data);
  const magic = reader.token();
  const ascii = magic === 'P2' || magic === 'P3';
  const gray = magic === 'P2' || magic === 'P5';
  const width = reader.int('width');
  const height = reader.int('height');
  const maxval = reader.int('maxval');
  if (width < 1 || height < 1) {
    throw new ImageDecodeError(`bad PNM size ${width}x${height}`);
  }
  if (maxval < 1 || maxval > 65535) {
    throw new ImageDecodeError(`bad PNM maxval ${maxval}`);
  }
  const samples = width * height * (gray ? 1 : 3);
  const raw = new Float64Array(samples);

  if (ascii) {
    for (let i = 0; i < samples; i++) {
      const v = reader.int('sample');
      if (v > maxval) throw new ImageDecodeError(`PNM sample ${v} exceeds maxval ${maxval}`);
      raw[i] = v;
    }
  } else {
    // single whitespace byte separates the maxval from the payload
    if (!WHITESPACE.has(data[reader.pos])) {
      throw new ImageDecodeError('bad PNM payload separator');
    }
    let pos = reader.pos + 1;
    const wide = maxval > 255;
    const need = samples * (wide ? 2 : 1);
    if (data.length - pos < need) {
      throw new ImageDecodeError(
        `truncated PNM payload: need ${need} bytes, have ${data.length - pos}`,
      );
    }
    for (let i = 0; i < samples; i++) {
      let v: number;
      if (wide) {
        v = data[pos] * 256 + data[pos + 1]; // big-endian per the format
        pos += 2;
      } else {
        v = data[pos++];
      }
      if (v > maxval) throw new ImageDecodeError(`PNM sample ${v} exceeds maxval ${maxval}`);
      raw[i] = v;
    }
  }

  const pixels = new Float64Array(width * height * 3);
  const scale = 1 / maxval;
  if (gray) {
    for (let i = 0; i < width * height; i++) {
      const v = raw[i] * scale;
      pixels[3 * i] = v;
      pixels[3 * i + 1] = v;
      pixels[3 * i + 2] = v;
    }
  } else {
    for (let i = 0; i < samples; i++) pixels[i] = raw[i] * scale;
  }
  return { width, height, pixels };
}

// ── PNG ────────────────────────────────────────────────────────────────

const PNG_SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

function hasPngSignature(data: Uint8Array): boolean {
  if (data.length < 8) return false;
  for (let i = 0; i < 8; i++) {
    if (data[i] !== PNG_SIGNATURE[i]) return false;
  }
  return true;
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(data: Uint8Array, start: number, end: number): number {
  let c = 0xffffffff;
  for (let i = start; i < end; i++) {
    c = CRC_TABLE[(c ^ data[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

interface PngHeader {
  width: number;
  height: number;
  bitDepth: number;
  colorType: number;
  interlace: number;
}

// samples per pixel for color types 0, 2, 3, 4, 6
const CHANNELS: Record<number, number> = { 0: 1, 2: 3, 3: 1, 4: 2, 6: 4 };

function decodePng(data: Uint8Array): RgbImage {
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  let pos = 8;
  let header: PngHeader | null = null;
  let palette: Uint8Array | null = null;
  const idat: Uint8Array[] = [];
  let sawEnd = false;

  while (pos + 8 <= data.length && !sawEnd) {
    const length = view.getUint32(pos);
    const type = String.fromCharCode(data[pos + 4], data[pos + 5], data[pos + 6], data[pos + 7]);
    const dataStart = pos + 8;
    const dataEnd = dataStart + length;
    if (dataEnd + 4 > data.length) {
      throw new ImageDecodeError(`truncated PNG chunk ${type}`);
    }
    const stored = view.getUint32(dataEnd);
    if (stored !== crc32(data, pos + 4, dataEnd)) {
      throw new ImageDecodeError(`PNG chunk ${type} fails CRC check`);
    }
    switch (type) {
      case 'IHDR': {
        if (length !== 13) throw new ImageDecodeError('bad IHDR length');
        header = {
          width: view.getUint32(dataStart),
          height: view.getUint32(dataStart + 4),
          bitDepth: data[dataStart + 8],
          colorType: data[dataStart + 9],
          interlace: data[dataStart + 12],
        };
        if (data[dataStart + 10] !== 0 || data[dataStart + 11] !== 0) {
          throw new ImageDecodeError('unsupported PNG compression/filter method');
        }
        break;
      }
      case 'PLTE':
        palette = data.subarray(dataStart, dataEnd);
        break;
      case 'IDAT':
        idat.push(data.subarray(dataStart, dataEnd));
        break;
      case 'IEND':
        sawEnd = true;
        break;
      default:
        break; // ancillary chunks are irrelevant here
    }
    pos = dataEnd + 4;
  }

  if (!header) throw new ImageDecodeError('PNG missing IHDR');
  if (!sawEnd) throw new ImageDecodeError('PNG missing IEND');
  if (header.interlace !== 0) {
    throw new ImageDecodeError('interlaced PNG not supported');
  }
  const subByte = header.bitDepth === 1 || header.bitDepth === 2 || header.bitDepth === 4;
  const depthOk =
    header.bitDepth === 8 ||
    (subByte && (header.colorType === 0 || header.colorType === 3));
  if (!depthOk || !(header.colorType in CHANNELS)) {
    throw new ImageDecodeError(
      `unsupported PNG layout: bit depth ${header.bitDepth}, color type ${header.colorType}`,
    );
  }
  if (header.colorType === 3 && !palette) {
    throw new ImageDecodeError('palette PNG missing PLTE');
  }
  if (header.width < 1 || header.height < 1) {
    throw new ImageDecodeError(`bad PNG size ${header.width}x${header.height}`);
  }

  let compressed: Uint8Array;
  if (idat.length === 1) {
    compressed = idat[0];
  } else {
    let total = 0;
    for (const part of idat) total += part.length;
    compressed = new Uint8Array(total);
    let at = 0;
    for (const part of idat) {
      compressed.set(part, at);
      at += part.length;
    }
  }
  let rawBuf: Buffer;
  try {
    rawBuf = inflateSync(compressed);
  } catch (err) {
    throw new ImageDecodeError(`PNG inflate failed: ${(err as Error).message}`);
  }
  const raw = new Uint8Array(rawBuf.buffer, rawBuf.byteOffset, rawBuf.length);

  const { width, height, colorType, bitDepth } = header;
  const channels = CHANNELS[colorType];
  const stride = Math.ceil((width * channels * bitDepth) / 8);
  const filterBpp = Math.max(1, (channels * bitDepth) >> 3);
  if (raw.length !== (stride + 1) * height) {
    throw new ImageDecodeError(
      `bad PNG payload size: expected ${(stride + 1) * height}, got ${raw.length}`,
    );
  }

  const scanlines = unfilter(raw, height, stride, filterBpp);
  const samples = unpackSamples(scanlines, width, height, channels, bitDepth, stride);
  const pixels = new Float64Array(width * height * 3);
  const s = 1 / 255;
  // sub-byte grayscale normalizes by its own sample maximum
  const grayScale = 1 / ((1 << bitDepth) - 1);

  for (let i = 0; i < width * height; i++) {
    const at = i * channels;
    let r: number, g: number, b: number, alpha: number;
    switch (colorType) {
      case 0:
        r = g = b = samples[at] * grayScale;
        alpha = 1;
        break;
      case 2:
        r = samples[at] * s;
        g = samples[at + 1] * s;
        b = samples[at + 2] * s;
        alpha = 1;
        break;
      case 3: {
        const idx = samples[at] * 3;
        if (idx + 2 >= palette!.length) {
          throw new ImageDecodeError(`palette index ${samples[at]} out of range`);
        }
        r = palette![idx] * s;
        g = palette![idx + 1] * s;
        b = palette![idx + 2] * s;
        alpha = 1;
        break;
      }
      case 4:
        r = g = b = samples[at] * s;
        alpha = samples[at + 1] * s;
        break;
      default:
        r = samples[at] * s;
        g = samples[at + 1] * s;
        b = samples[at + 2] * s;
        alpha = samples[at + 3] * s;
        break;
    }
    if (alpha === 1) {
      pixels[3 * i] = r;
      pixels[3 * i + 1] = g;
      pixels[3 * i + 2] = b;
    } else {
      // composite over white
      const bg = 1 - alpha;
      pixels[3 * i] = r * alpha + bg;
      pixels[3 * i + 1] = g * alpha + bg;
      pixels[3 * i + 2] = b * alpha + bg;
    }
  }
  return { width, height, pixels };
}

/** One byte per sample, MSB-first bit unpacking for depths below 8. */
function unpackSamples(
  scanlines: Uint8Array,
  width: number,
  height: number,
  channels: number,
  bitDepth: number,
  stride: number,
): Uint8Array {
  if (bitDepth === 8) return scanlines;
  const out = new Uint8Array(width * height * channels);
  const perByte = 8 / bitDepth;
  const mask = (1 << bitDepth) - 1;
  for (let y = 0; y < height; y++) {
    const rowStart = y * stride;
    for (let x = 0; x < width; x++) {
      const sampleIdx = x; // sub-byte depths only occur with 1 channel
      const byte = scanlines[rowStart + Math.floor(sampleIdx / perByte)];
      const shift = 8 - bitDepth * ((sampleIdx % perByte) + 1);
      out[y * width + x] = (byte >> shift) & mask;
    }
  }
  return out;
}

/** Undo per-scanline filtering in place; returns the filtered-out bytes. */
function unfilter(raw: Uint8Array, height: number, stride: number, bpp: number): Uint8Array {
  const out = new Uint8Array(height * stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const src = y * (stride + 1) + 1;
    const dst = y * stride;
    const prev = dst - stride;
    switch (filter) {
      case 0:
        out.set(raw.subarray(src, src + stride), dst);
        break;
      case 1:
        for (let x = 0; x < stride; x++) {
          const left = x >= bpp ? out[dst + x - bpp] : 0;
          out[dst + x] = (raw[src + x] + left) & 0xff;
        }
        break;
      case 2:
        for (let x = 0; x < stride; x++) {
          const up = y > 0 ? out[prev + x] : 0;
          out[dst + x] = (raw[src + x] + up) & 0xff;
        }
        break;
      case 3:
        for (let x = 0; x < stride; x++) {
          const left = x >= bpp ? out[dst + x - bpp] : 0;
          const up = y > 0 ? out[prev + x] : 0;
          out[dst + x] = (raw[src + x] + ((left + up) >> 1)) & 0xff;
        }
        break;
      case 4:
        for (let x = 0; x < stride; x++) {
          const left = x >= bpp ? out[dst + x - bpp] : 0;
          const up = y > 0 ? out[prev + x] : 0;
          const upLeft = y > 0 && x >= bpp ? out[prev + x - bpp] : 0;
          out[dst + x] = (raw[src + x] + paeth(left, up, upLeft)) & 0xff;
        }
        break;
      default:
        throw new ImageDecodeError(`unknown PNG filter type ${filter} on row ${y}`);
    }
  }
  return out;
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}
