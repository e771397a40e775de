/**
 * Frozen feature extraction with an on-disk cache.
 *
 * The backbone is pluggable behind FeatureExtractor; the bundled
 * "handcrafted-v1" extractor stands in for a pretrained network in
 * environments without downloadable weights. It is deterministic and
 * translation-aware: saturation-weighted hue histograms capture the
 * object's color signature regardless of position, and multiscale
 * center crops exploit the camera looking at the target.
 *
 * Cached features live in <root>/.feature_cache/<version>/<seq_id>.bin
 * (little-endian: uint32 numFrames, uint32 dim, float32 payload), one
 * record per frame keyed by (seq_id, frame index).
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { framePath, Image, ManifestRow, readPpm } from "./formats.js";

export interface FeatureExtractor {
  readonly version: string;
  readonly dim: number;
  extract(img: Image): Float32Array;
}

const HUE_BINS = 24;

function satHueHist(
  rgb: Uint8Array,
  width: number,
  x0: number,
  y0: number,
  w: number,
  h: number,
  out: Float32Array,
  offset: number,
): void {
  const hist = new Float64Array(HUE_BINS);
  for (let y = y0; y < y0 + h; y++) {
    for (let x = x0; x < x0 + w; x++) {
      const i = (y * width + x) * 3;
      const r = rgb[i] / 255;
      const g = rgb[i + 1] / 255;
      const b = rgb[i + 2] / 255;
      const mx = Math.max(r, g, b);
      const mn = Math.min(r, g, b);
      const c = mx - mn;
      if (c < 1e-6 || mx < 1e-6) continue;
      const sat = c / mx;
      let hue: number;
      if (mx === r) hue = ((g - b) / c + 6) % 6;
      else if (mx === g) hue = (b - r) / c + 2;
      else hue = (r - g) / c + 4;
      let bin = Math.floor((hue / 6) * HUE_BINS);
      if (bin >= HUE_BINS) bin = HUE_BINS - 1;
      hist[bin] += sat * sat;
    }
  }
  const n = w * h;
  for (let k = 0; k < HUE_BINS; k++) {
    out[offset + k] = Math.log1p((hist[k] * 200) / n);
  }
}

function avgPool(
  rgb: Uint8Array,
  width: number,
  x0: number,
  y0: number,
  w: number,
  h: number,
  cells: number,
  out: Float32Array,
  offset: number,
): void {
  const cw = Math.floor(w / cells);
  const ch = Math.floor(h / cells);
  for (let cy = 0; cy < cells; cy++) {
    for (let cx = 0; cx < cells; cx++) {
      let sr = 0;
      let sg = 0;
      let sb = 0;
      for (let y = y0 + cy * ch; y < y0 + (cy + 1) * ch; y++) {
        for (let x = x0 + cx * cw; x < x0 + (cx + 1) * cw; x++) {
          const i = (y * width + x) * 3;
          sr += rgb[i];
          sg += rgb[i + 1];
          sb += rgb[i + 2];
        }
      }
      const n = cw * ch * 255;
      const o = offset + (cy * cells + cx) * 3;
      out[o] = sr / n;
      out[o + 1] = sg / n;
      out[o + 2] = sb / n;
    }
  }
}

/** Hue histograms and average pools over the full view and two center crops. */
export class HandcraftedV1 implements FeatureExtractor {
  readonly version: string = "handcrafted-v1";
  readonly dim = HUE_BINS + 8 * 8 * 3 + HUE_BINS + 4 * 4 * 3 + HUE_BINS + 2 * 2 * 3;

  extract(img: Image): Float32Array {
    const { width: w, height: h, rgb } = img;
    const out = new Float32Array(this.dim);
    let off = 0;
    satHueHist(rgb, w, 0, 0, w, h, out, off);
    off += HUE_BINS;
    avgPool(rgb, w, 0, 0, w, h, 8, out, off);
    off += 8 * 8 * 3;
    satHueHist(rgb, w, w >> 2, h >> 2, w >> 1, h >> 1, out, off);
    off += HUE_BINS;
    avgPool(rgb, w, w >> 2, h >> 2, w >> 1, h >> 1, 4, out, off);
    off += 4 * 4 * 3;
    const qw = w >> 2;
    const qh = h >> 2;
    satHueHist(rgb, w, (w - qw) >> 1, (h - qh) >> 1, qw, qh, out, off);
    off += HUE_BINS;
    avgPool(rgb, w, (w - qw) >> 1, (h - qh) >> 1, qw, qh, 2, out, off);
    return out;
  }
}

export interface ExtractStats {
  computed: number;
  cached: number;
}

export class FeatureStore {
  readonly stats: ExtractStats = { computed: 0, cached: 0 };

  constructor(
    private readonly root: string,
    private readonly extractor: FeatureExtractor,
  ) {}

  private cacheFile(seqId: string): string {
    return path.join(
      this.root,
      ".feature_cache",
      this.extractor.version,
      `${seqId}.bin`,
    );
  }

  /** Per-frame feature vectors for one sequence, from cache when present. */
  sequenceFeatures(row: ManifestRow): Float32Array[] {
    const file = this.cacheFile(row.seqId);
    if (fs.existsSync(file)) {
      const frames = this.readCache(file, row);
      if (frames) {
        this.stats.cached += frames.length;
        return frames;
      }
    }
    const frames: Float32Array[] = [];
    for (let k = 0; k < row.numFrames; k++) {
      frames.push(this.extractor.extract(readPpm(framePath(this.root, row, k))));
      this.stats.computed++;
    }
    this.writeCache(file, frames);
    return frames;
  }

  private readCache(file: string, row: ManifestRow): Float32Array[] | null {
    const buf = fs.readFileSync(file);
    if (buf.length < 8) return null;
    const numFrames = buf.readUInt32LE(0);
    const dim = buf.readUInt32LE(4);
    if (
      numFrames !== row.numFrames ||
      dim !== this.extractor.dim ||
      buf.length !== 8 + numFrames * dim * 4
    ) {
      return null; // stale cache: recompute
    }
    const frames: Float32Array[] = [];
    for (let k = 0; k < numFrames; k++) {
      const start = 8 + k * dim * 4;
      frames.push(
        new Float32Array(buf.buffer.slice(buf.byteOffset + start,
                                          buf.byteOffset + start + dim * 4)),
      );
    }
    return frames;
  }

  private writeCache(file: string, frames: Float32Array[]): void {
    fs.mkdirSync(path.dirname(file), { recursive: true });
    const dim = this.extractor.dim;
    const buf = Buffer.alloc(8 + frames.length * dim * 4);
    buf.writeUInt32LE(frames.length, 0);
    buf.writeUInt32LE(dim, 4);
    frames.forEach((f, k) => {
      Buffer.from(f.buffer, f.byteOffset, dim * 4).copy(buf, 8 + k * dim * 4);
    });
    fs.writeFileSync(file, buf);
  }
}
