import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import {
  readFrameLabels,
  readManifest,
  readPpm,
  writePredictions,
  Predictions,
} from "../src/formats.js";
import { fourClassToy, makePpm, writeToyDataset } from "./fixtures.js";

let root: string;

beforeAll(() => {
  root = fs.mkdtempSync(path.join(os.tmpdir(), "trainer-formats-"));
  writeToyDataset(path.join(root, "ds"), fourClassToy(2, 4));
});

afterAll(() => {
  fs.rmSync(root, { recursive: true, force: true });
});

describe("manifest and poses", () => {
  it("reads rows in file order", () => {
    const rows = readManifest(path.join(root, "ds"));
    expect(rows).toHaveLength(8);
    expect(rows[0].seqId).toBe("power_obj_p_000");
    expect(rows[0].numFrames).toBe(4);
    expect(rows[0].preShape).toBe("power");
  });

  it("reads frame labels with times", () => {
    const rows = readManifest(path.join(root, "ds"));
    const labels = readFrameLabels(path.join(root, "ds"), rows[0]);
    expect(labels).toHaveLength(4);
    expect(labels[2]).toMatchObject({ frame: 2, label: "power" });
    expect(labels[2].tS).toBeCloseTo(0.2, 9);
  });

  it("rejects a bad manifest header", () => {
    const bad = path.join(root, "bad");
    fs.mkdirSync(bad, { recursive: true });
    fs.writeFileSync(path.join(bad, "manifest.csv"), "a,b,c\n1,2,3\n");
    expect(() => readManifest(bad)).toThrow(/header/);
  });

  it("rejects non-contiguous frames", () => {
    const rows = readManifest(path.join(root, "ds"));
    const poses = path.join(root, "ds", rows[0].seqId, "poses.csv");
    const lines = fs.readFileSync(poses, "utf-8").trimEnd().split("\n");
    const broken = [lines[0], lines[1], lines[3], lines[2], lines[4]];
    const dir = path.join(root, "broken", rows[0].seqId);
    fs.mkdirSync(dir, { recursive: true });
    fs.writeFileSync(path.join(dir, "poses.csv"), broken.join("\n") + "\n");
    expect(() =>
      readFrameLabels(path.join(root, "broken"), rows[0]),
    ).toThrow(/contiguous/);
  });
});

describe("ppm reader", () => {
  it("decodes pixels row-major", () => {
    const file = path.join(root, "x.ppm");
    fs.writeFileSync(
      file,
      makePpm(4, 2, [1, 2, 3], { x: 0, y: 0, size: 1, color: [250, 0, 9] }),
    );
    const img = readPpm(file);
    expect([img.width, img.height]).toEqual([4, 2]);
    expect([...img.rgb.slice(0, 3)]).toEqual([250, 0, 9]);
    expect([...img.rgb.slice(3, 6)]).toEqual([1, 2, 3]);
  });

  it("rejects non-P6 data", () => {
    const file = path.join(root, "y.ppm");
    fs.writeFileSync(file, "P3\n1 1\n255\n0 0 0\n");
    expect(() => readPpm(file)).toThrow(/P6/);
  });
});

describe("prediction writer", () => {
  it("emits the shared CSV schema with argmax labels", () => {
    const preds: Predictions = {
      seqIds: ["a"],
      scores: new Map([
        [
          "a",
          [
            Float32Array.from([0.1, 0.6, 0.1, 0.1, 0.1]),
            Float32Array.from([0.7, 0.1, 0.1, 0.05, 0.05]),
          ],
        ],
      ]),
    };
    const file = path.join(root, "preds.csv");
    writePredictions(file, preds);
    const lines = fs.readFileSync(file, "utf-8").trimEnd().split("\n");
    expect(lines[0]).toBe(
      "seq_id,frame,pred,s_power,s_lateral,s_pinch,s_pinch3,s_nograsp",
    );
    expect(lines[1].startsWith("a,0,lateral,")).toBe(true);
    expect(lines[2].startsWith("a,1,power,")).toBe(true);
    const scores = lines[1].split(",").slice(3).map(Number);
    const sum = scores.reduce((x, y) => x + y, 0);
    expect(Math.abs(sum - 1)).toBeLessThan(1e-5);
  });
});
