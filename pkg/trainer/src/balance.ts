/**
 * Per-epoch class balancing: every pre-shape class is downsampled,
 * uniformly without replacement, to the cardinality of the minority
 * class. Matches the dataset generator's balancing contract so epoch
 * histograms come out exactly flat.
 */

import { GRASP_CLASSES, ManifestRow, PreShape } from "./formats.js";
import { deriveSeed, Rng } from "./rng.js";

const EPOCH_TAG = 0x45;

export function balanceEpoch(
  rows: ManifestRow[],
  epoch: number,
  seed: number,
): Map<PreShape, string[]> {
  const byClass = new Map<PreShape, string[]>(
    GRASP_CLASSES.map((c) => [c, []]),
  );
  for (const row of rows) {
    byClass.get(row.preShape)?.push(row.seqId);
  }
  const missing = GRASP_CLASSES.filter((c) => byClass.get(c)!.length === 0);
  if (missing.length > 0) {
    throw new Error(`classes absent from manifest: ${missing.join(", ")}`);
  }
  const minority = Math.min(
    ...GRASP_CLASSES.map((c) => byClass.get(c)!.length),
  );
  const rng = new Rng(deriveSeed(seed, EPOCH_TAG, epoch));
  const selected = new Map<PreShape, string[]>();
  for (const c of GRASP_CLASSES) {
    const ids = byClass.get(c)!;
    const order = rng.permutation(ids.length);
    const take: string[] = [];
    for (let i = 0; i < minority; i++) take.push(ids[order[i]]);
    selected.set(c, take);
  }
  return selected;
}
