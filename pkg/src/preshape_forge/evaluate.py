"""Per-video scoring: majority voting, trial aggregation, oracle baselines.

A prediction file carries one pre-shape per frame per sequence. The
sequence-level prediction is the majority vote over frames, excluding
NoGrasp; per-video accuracy is the fraction of sequences whose vote
matches the ground-truth pre-shape. Trials (one prediction file per
random seed) aggregate to mean and sample standard deviation.

The single-grasp oracle models the ideal object classifier that commits
to one grasp per object (the most frequent one). Its frame predictions
are the pre-shape of that modal grasp; its headline baseline accuracy
counts a sequence as correct only when the modal grasp equals the
sequence's annotated grasp type, which is what makes multi-grasp objects
hard even under perfect object classification.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DatasetManifest, ManifestRow
from .taxonomy import GraspTaxonomy, PreShape, modal_grasp, preshape_of

VOTE_ORDER = (PreShape.POWER, PreShape.LATERAL, PreShape.PINCH,
              PreShape.PINCH_3_DIGIT)

SCORE_COLUMNS = ("s_power", "s_lateral", "s_pinch", "s_pinch3", "s_nograsp")
SCORE_CLASSES = (PreShape.POWER, PreShape.LATERAL, PreShape.PINCH,
                 PreShape.PINCH_3_DIGIT, PreShape.NO_GRASP)


class EvalError(ValueError):
    pass


@dataclass
class PredictionFile:
    """Frame predictions per sequence, frames contiguous from 0."""

    predictions: dict[str, list[PreShape]]
    scores: dict[str, np.ndarray] = field(default_factory=dict)

    def for_sequence(self, seq_id: str) -> list[PreShape]:
        try:
            return self.predictions[seq_id]
        except KeyError:
            raise EvalError(f"no predictions for sequence {seq_id!r}") from None


def majority_vote(frame_preds) -> PreShape:
    """Most frequent non-NoGrasp class; ties go to the earlier class in
    (Power, Lateral, Pinch, Pinch3Digit). All-NoGrasp input votes NoGrasp."""
    preds = list(frame_preds)
    if not preds:
        raise EvalError("majority_vote of an empty prediction list")
    counts = {c: 0 for c in VOTE_ORDER}
    for p in preds:
        if p is not PreShape.NO_GRASP:
            counts[p] += 1
    best = max(counts.values())
    if best == 0:
        return PreShape.NO_GRASP
    return next(c for c in VOTE_ORDER if counts[c] == best)


# ---------------------------------------------------------------------------
# Prediction file CSV
# ---------------------------------------------------------------------------

def write_predictions(path: str | Path, pred: PredictionFile) -> None:
    with_scores = bool(pred.scores)
    lines = ["seq_id,frame,pred" + ("," + ",".join(SCORE_COLUMNS)
                                    if with_scores else "")]
    for seq_id, frames in pred.predictions.items():
        for k, p in enumerate(frames):
            row = f"{seq_id},{k},{p.value}"
            if with_scores:
                row += "," + ",".join(f"{v:.9g}" for v in pred.scores[seq_id][k])
            lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_predictions(path: str | Path) -> PredictionFile:
    preds: dict[str, list[PreShape]] = {}
    scores: dict[str, list[list[float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["seq_id", "frame", "pred"]:
            raise EvalError(f"{path}: not a prediction file (header {header})")
        has_scores = len(header) == 8
        if len(header) not in (3, 8) or \
                (has_scores and tuple(header[3:]) != SCORE_COLUMNS):
            raise EvalError(f"{path}: unexpected columns {header}")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise EvalError(f"{path}:{lineno}: wrong field count")
            seq_id, frame_s, label = rec[0], rec[1], rec[2]
            rows = preds.setdefault(seq_id, [])
            try:
                frame = int(frame_s)
                pred = PreShape(label)
            except ValueError as exc:
                raise EvalError(f"{path}:{lineno}: {exc}") from exc
            if frame != len(rows):
                raise EvalError(f"{path}:{lineno}: frames for {seq_id} must "
                                f"be contiguous from 0 (got {frame})")
            rows.append(pred)
            if has_scores:
                scores.setdefault(seq_id, []).append([float(v) for v in rec[3:]])
    return PredictionFile(preds, {k: np.array(v) for k, v in scores.items()})


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    per_trial: list[float]            # per-video accuracy (%) per trial
    mean: float
    std: float                        # sample std (ddof=1); 0 for one trial
    single_grasp_acc: float           # mean over trials, single-grasp objects
    multi_grasp_acc: float
    time_curve: list[tuple[float, str, float, int]]  # (t_s, split, acc %, n)

    @property
    def per_video_accuracy(self) -> float:
        return self.mean


def _check_coverage(pred: PredictionFile, manifest: DatasetManifest) -> None:
    for row in manifest.rows:
        frames = pred.predictions.get(row.seq_id)
        if frames is None:
            raise EvalError(f"predictions missing sequence {row.seq_id}")
        if len(frames) != row.num_frames:
            raise EvalError(
                f"{row.seq_id}: {len(frames)} predicted frames, dataset has "
                f"{row.num_frames}")


def score(preds: list[PredictionFile], manifest: DatasetManifest,
          taxonomy: GraspTaxonomy, count_nograsp: bool = False,
          with_time_curve: bool = True) -> EvalReport:
    """Per-video accuracy per trial plus mean/std and the grasp-count split.

    The time curve needs per-frame ground truth from the sequence files;
    pass with_time_curve=False to score from the manifest alone.
    """
    if not preds:
        raise EvalError("no prediction files given")
    if not manifest.rows:
        raise EvalError("empty manifest")
    for p in preds:
        _check_coverage(p, manifest)
    multi = {row.seq_id: taxonomy.is_multigrasp(row.object_name)
             for row in manifest.rows}
    per_trial, per_trial_single, per_trial_multi = [], [], []
    for p in preds:
        hits = {False: [0, 0], True: [0, 0]}  # split -> [correct, total]
        for row in manifest.rows:
            vote = majority_vote(p.for_sequence(row.seq_id))
            bucket = hits[multi[row.seq_id]]
            bucket[0] += int(vote is row.pre_shape)
            bucket[1] += 1
        total_c = hits[False][0] + hits[True][0]
        total_n = hits[False][1] + hits[True][1]
        per_trial.append(100.0 * total_c / total_n)
        per_trial_single.append(_pct(hits[False]))
        per_trial_multi.append(_pct(hits[True]))
    mean = float(np.mean(per_trial))
    std = float(np.std(per_trial, ddof=1)) if len(per_trial) > 1 else 0.0
    curve = time_resolved_accuracy(preds, manifest, taxonomy,
                                   split_by_multigrasp=True,
                                   count_nograsp=count_nograsp) \
        if with_time_curve else []
    return EvalReport(per_trial, mean, std,
                      single_grasp_acc=float(np.mean(per_trial_single)),
                      multi_grasp_acc=float(np.mean(per_trial_multi)),
                      time_curve=curve)


def _pct(bucket) -> float:
    correct, total = bucket
    return 100.0 * correct / total if total else float("nan")


def time_resolved_accuracy(preds: list[PredictionFile],
                           manifest: DatasetManifest,
                           taxonomy: GraspTaxonomy,
                           split_by_multigrasp: bool = False,
                           count_nograsp: bool = False):
    """Per-frame-time accuracy over the sequences alive at each time.

    Ground truth per frame is the frame label; frames whose label is
    NoGrasp are skipped unless count_nograsp is set (the terminal label
    switch otherwise reads as a spurious accuracy drop).
    """
    if not preds:
        raise EvalError("no prediction files given")
    for p in preds:
        _check_coverage(p, manifest)
    splits = ("all", "single", "multi") if split_by_multigrasp else ("all",)
    acc: dict[tuple[float, str], list[int]] = {}
    for row in manifest.rows:
        record_multi = taxonomy.is_multigrasp(row.object_name)
        labels = _frame_truth(manifest, row)
        for p in preds:
            frames = p.for_sequence(row.seq_id)
            for k, pred_label in enumerate(frames):
                truth = labels[k]
                if truth is PreShape.NO_GRASP and not count_nograsp:
                    continue
                t = round(k / row.fps, 6)
                groups = ["all"]
                if split_by_multigrasp:
                    groups.append("multi" if record_multi else "single")
                for g in groups:
                    cell = acc.setdefault((t, g), [0, 0])
                    cell[0] += int(pred_label is truth)
                    cell[1] += 1
    curve = [(t, g, 100.0 * c / n, n)
             for (t, g), (c, n) in sorted(acc.items(),
                                          key=lambda kv: (kv[0][0],
                                                          splits.index(kv[0][1])))]
    return curve


_TRUTH_CACHE: dict[tuple[str, str], tuple] = {}


def _frame_truth(manifest: DatasetManifest, row: ManifestRow):
    key = (str(manifest.root), row.seq_id)
    if key not in _TRUTH_CACHE:
        _TRUTH_CACHE[key] = manifest.load_record(row.seq_id).labels
    return _TRUTH_CACHE[key]


# ---------------------------------------------------------------------------
# Single-grasp oracle
# ---------------------------------------------------------------------------

def oracle_single_grasp(manifest: DatasetManifest,
                        taxonomy: GraspTaxonomy) -> PredictionFile:
    """Frame predictions of the ideal one-grasp-per-object classifier."""
    preds = {}
    for row in manifest.rows:
        p = preshape_of(taxonomy, modal_grasp(taxonomy, row.object_name))
        preds[row.seq_id] = [p] * row.num_frames
    return PredictionFile(preds)


@dataclass(frozen=True)
class OracleBaseline:
    """Grasp-level accuracy of the single-grasp model (perfect object id)."""

    overall: float
    single_grasp: float
    multi_grasp: float
    correct: int
    total: int


def oracle_baseline(manifest: DatasetManifest,
                    taxonomy: GraspTaxonomy) -> OracleBaseline:
    """Fraction of sequences whose grasp type is the object's modal grasp.

    A sequence counts as correct only when the committed grasp equals the
    sequence's annotated grasp type; this is the quantity that degrades
    on multi-grasp objects even with perfect object classification.
    """
    hits = {False: [0, 0], True: [0, 0]}
    for row in manifest.rows:
        bucket = hits[taxonomy.is_multigrasp(row.object_name)]
        bucket[0] += int(modal_grasp(taxonomy, row.object_name)
                         is row.grasp_type)
        bucket[1] += 1
    correct = hits[False][0] + hits[True][0]
    total = hits[False][1] + hits[True][1]
    if total == 0:
        raise EvalError("empty manifest")
    return OracleBaseline(100.0 * correct / total, _pct(hits[False]),
                          _pct(hits[True]), correct, total)


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------

def write_report(report_dir: str | Path, report: EvalReport) -> None:
    report_dir = Path(report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    lines = [
        "per-video accuracy, mean ± std over trials",
        f"trials: {len(report.per_trial)}",
        "per_trial_pct: " + " ".join(f"{v:.4f}" for v in report.per_trial),
        f"mean_pct: {report.mean:.4f}",
        f"std_pct: {report.std:.4f}",
        f"single_grasp_pct: {report.single_grasp_acc:.4f}",
        f"multi_grasp_pct: {report.multi_grasp_acc:.4f}",
    ]
    (report_dir / "report.txt").write_text("\n".join(lines) + "\n",
                                           encoding="utf-8")
    rows = ["t_s,split,accuracy_pct,n"]
    for t, g, a, n in report.time_curve:
        rows.append(f"{t:.9g},{g},{a:.6g},{n}")
    (report_dir / "time_curve.csv").write_text("\n".join(rows) + "\n",
                                               encoding="utf-8")
