/**
 * Readers/writers for the dataset interchange formats: manifest.csv,
 * poses.csv, binary PPM frames and prediction CSVs. Parsing is strict:
 * these files are machine-written, so anything unexpected is an error.
 */

import * as fs from "node:fs";
import * as path from "node:path";

export const PRE_SHAPES = [
  "power",
  "lateral",
  "pinch",
  "pinch_3_digit",
  "no_grasp",
] as const;
export type PreShape = (typeof PRE_SHAPES)[number];
export const GRASP_CLASSES: PreShape[] = [
  "power",
  "lateral",
  "pinch",
  "pinch_3_digit",
];

export interface ManifestRow {
  seqId: string;
  object: string;
  partId: string;
  graspType: string;
  preShape: PreShape;
  seed: number;
  numFrames: number;
  durationS: number;
  fps: number;
  relativePath: string;
}

const MANIFEST_HEADER =
  "seq_id,object,part_id,grasp_type,pre_shape,seed,num_frames,duration_s,fps,relative_path";

export function readManifest(root: string): ManifestRow[] {
  const file = path.join(root, "manifest.csv");
  const lines = fs.readFileSync(file, "utf-8").trimEnd().split("\n");
  if (lines[0] !== MANIFEST_HEADER) {
    throw new Error(`${file}: unexpected manifest header: ${lines[0]}`);
  }
  const rows: ManifestRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const f = lines[i].split(",");
    if (f.length !== 10) {
      throw new Error(`${file}:${i + 1}: expected 10 fields, got ${f.length}`);
    }
    if (!PRE_SHAPES.includes(f[4] as PreShape)) {
      throw new Error(`${file}:${i + 1}: unknown pre-shape ${f[4]}`);
    }
    rows.push({
      seqId: f[0],
      object: f[1],
      partId: f[2],
      graspType: f[3],
      preShape: f[4] as PreShape,
      seed: Number(f[5]),
      numFrames: Number(f[6]),
      durationS: Number(f[7]),
      fps: Number(f[8]),
      relativePath: f[9],
    });
  }
  return rows;
}

export interface FrameLabel {
  frame: number;
  tS: number;
  label: PreShape;
}

export function readFrameLabels(root: string, row: ManifestRow): FrameLabel[] {
  const file = path.join(root, row.relativePath, "poses.csv");
  const lines = fs.readFileSync(file, "utf-8").trimEnd().split("\n");
  if (!lines[0].startsWith("frame,t_s,")) {
    throw new Error(`${file}: unexpected poses header`);
  }
  const out: FrameLabel[] = [];
  for (let i = 1; i < lines.length; i++) {
    const f = lines[i].split(",");
    if (f.length !== 10) throw new Error(`${file}:${i + 1}: bad field count`);
    const frame = Number(f[0]);
    if (frame !== i - 1) {
      throw new Error(`${file}:${i + 1}: frames must be contiguous from 0`);
    }
    if (!PRE_SHAPES.includes(f[9] as PreShape)) {
      throw new Error(`${file}:${i + 1}: unknown label ${f[9]}`);
    }
    out.push({ frame, tS: Number(f[1]), label: f[9] as PreShape });
  }
  if (out.length !== row.numFrames) {
    throw new Error(
      `${file}: ${out.length} rows but manifest says ${row.numFrames}`,
    );
  }
  return out;
}

export interface Image {
  width: number;
  height: number;
  rgb: Uint8Array; // row-major, 3 bytes per pixel
}

/** Binary PPM (P6, maxval 255) reader. */
export function readPpm(file: string): Image {
  const buf = fs.readFileSync(file);
  let pos = 0;
  const token = (): string => {
    while (
      pos < buf.length &&
      (buf[pos] === 0x20 || buf[pos] === 0x0a || buf[pos] === 0x0d || buf[pos] === 0x09)
    )
      pos++;
    if (buf[pos] === 0x23) {
      // comment
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      return token();
    }
    const start = pos;
    while (
      pos < buf.length &&
      buf[pos] !== 0x20 &&
      buf[pos] !== 0x0a &&
      buf[pos] !== 0x0d &&
      buf[pos] !== 0x09
    )
      pos++;
    return buf.subarray(start, pos).toString("ascii");
  };
  if (token() !== "P6") throw new Error(`${file}: not a P6 PPM`);
  const width = Number(token());
  const height = Number(token());
  const maxval = Number(token());
  if (maxval !== 255) throw new Error(`${file}: unsupported maxval ${maxval}`);
  pos++; // single whitespace after maxval
  const data = buf.subarray(pos, pos + width * height * 3);
  if (data.length !== width * height * 3) {
    throw new Error(`${file}: truncated pixel data`);
  }
  return { width, height, rgb: new Uint8Array(data) };
}

export function framePath(root: string, row: ManifestRow, frame: number): string {
  const name = `frame_${String(frame).padStart(5, "0")}.rgb.ppm`;
  return path.join(root, row.relativePath, "frames", name);
}

/** Per-frame class scores for one dataset, in manifest order. */
export interface Predictions {
  seqIds: string[];
  // seqId -> (numFrames x 5) scores, classes in PRE_SHAPES order
  scores: Map<string, Float32Array[]>;
}

export function writePredictions(file: string, preds: Predictions): void {
  const lines = [
    "seq_id,frame,pred,s_power,s_lateral,s_pinch,s_pinch3,s_nograsp",
  ];
  for (const seqId of preds.seqIds) {
    const frames = preds.scores.get(seqId);
    if (!frames) throw new Error(`no scores for sequence ${seqId}`);
    frames.forEach((s, k) => {
      let best = 0;
      for (let c = 1; c < 5; c++) if (s[c] > s[best]) best = c;
      const cols = Array.from(s, (v) => v.toPrecision(9)).join(",");
      lines.push(`${seqId},${k},${PRE_SHAPES[best]},${cols}`);
    });
  }
  fs.writeFileSync(file, lines.join("\n") + "\n");
}
