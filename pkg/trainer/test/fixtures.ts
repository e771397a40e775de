/** Synthetic dataset fixtures: tiny PPM frames with painted squares. */

import * as fs from "node:fs";
import * as path from "node:path";

import { PreShape } from "../src/formats.js";

export interface ToySpec {
  seqId: string;
  object: string;
  graspType: string;
  preShape: PreShape;
  frames: number;
  color: [number, number, number];
  background?: [number, number, number];
}

export function makePpm(
  w: number,
  h: number,
  bg: [number, number, number],
  square?: { x: number; y: number; size: number; color: [number, number, number] },
): Buffer {
  const header = Buffer.from(`P6\n${w} ${h}\n255\n`, "ascii");
  const pix = Buffer.alloc(w * h * 3);
  for (let i = 0; i < w * h; i++) {
    pix[i * 3] = bg[0];
    pix[i * 3 + 1] = bg[1];
    pix[i * 3 + 2] = bg[2];
  }
  if (square) {
    for (let y = square.y; y < Math.min(h, square.y + square.size); y++) {
      for (let x = square.x; x < Math.min(w, square.x + square.size); x++) {
        const i = (y * w + x) * 3;
        pix[i] = square.color[0];
        pix[i + 1] = square.color[1];
        pix[i + 2] = square.color[2];
      }
    }
  }
  return Buffer.concat([header, pix]);
}

/** Write a minimal dataset directory readable by the trainer. */
export function writeToyDataset(
  root: string,
  specs: ToySpec[],
  size = 32,
  jitter = 0,
): void {
  fs.mkdirSync(root, { recursive: true });
  const manifest = [
    "seq_id,object,part_id,grasp_type,pre_shape,seed,num_frames,duration_s,fps,relative_path",
  ];
  specs.forEach((spec, si) => {
    const dir = path.join(root, spec.seqId);
    fs.mkdirSync(path.join(dir, "frames"), { recursive: true });
    manifest.push(
      `${spec.seqId},${spec.object},p,${spec.graspType},${spec.preShape},` +
        `${si},${spec.frames},2.5,10,${spec.seqId}`,
    );
    const poses = ["frame,t_s,px,py,pz,qw,qx,qy,qz,label"];
    for (let k = 0; k < spec.frames; k++) {
      poses.push(`${k},${(k / 10).toPrecision(9)},0,0,1,1,0,0,0,${spec.preShape}`);
      const off = jitter > 0 ? ((si * 7 + k * 3) % (2 * jitter)) - jitter : 0;
      const img = makePpm(size, size, spec.background ?? [120, 120, 120], {
        x: (size >> 2) + off,
        y: (size >> 2) + off,
        size: size >> 1,
        color: spec.color,
      });
      const name = `frame_${String(k).padStart(5, "0")}.rgb.ppm`;
      fs.writeFileSync(path.join(dir, "frames", name), img);
    }
    fs.writeFileSync(path.join(dir, "poses.csv"), poses.join("\n") + "\n");
    fs.writeFileSync(
      path.join(dir, "scene.txt"),
      `format_version=1\nseed=${si}\nobject=${spec.object}\n` +
        "pose=0 0 0.75 1 0 0 0\nwall_texture=flat:808080\n" +
        "floor_texture=flat:606060\ntable_texture=flat:a0784a\n" +
        "light_intensity=1\nlight_direction=0 0 -1\n",
    );
  });
  fs.writeFileSync(path.join(root, "manifest.csv"), manifest.join("\n") + "\n");
}

export const FOUR_CLASS_COLORS: Record<string, [number, number, number]> = {
  power: [40, 160, 120],
  lateral: [170, 30, 80],
  pinch: [170, 50, 150],
  pinch_3_digit: [180, 170, 50],
};

export const GRASP_FOR: Record<string, string> = {
  power: "large_diameter",
  lateral: "adducted_thumb",
  pinch: "prismatic_4_fingers",
  pinch_3_digit: "tripod",
};

export function fourClassToy(
  seqsPerClass: number,
  frames = 6,
  size = 32,
): ToySpec[] {
  const specs: ToySpec[] = [];
  for (const pre of Object.keys(FOUR_CLASS_COLORS) as PreShape[]) {
    for (let i = 0; i < seqsPerClass; i++) {
      specs.push({
        seqId: `${pre}_obj_p_${String(i).padStart(3, "0")}`,
        object: `${pre}_obj`,
        graspType: GRASP_FOR[pre],
        preShape: pre,
        frames,
        color: FOUR_CLASS_COLORS[pre],
      });
    }
  }
  return specs;
}
