"""Command-line interface: generate, validate, render-preview, oracle, eval.

Defaults come from the bundled data/defaults.cfg; flags override. Every
run echoes its fully resolved configuration. The master seed falls back
to the PRESHAPE_FORGE_SEED environment variable when --seed is absent.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from pathlib import Path

from . import config as config_mod
from . import dataset as ds
from . import evaluate as ev
from .renderer import write_pgm8, write_pgm16, write_ppm, render_frame
from .scene import build_render_scene
from .taxonomy import BUNDLED_TAXONOMY, load_taxonomy

ENV_SEED = "PRESHAPE_FORGE_SEED"


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, default=config_mod.DEFAULTS_PATH,
                   help="defaults file (bundled defaults.cfg if omitted)")
    p.add_argument("--taxonomy", type=Path, default=BUNDLED_TAXONOMY,
                   help="taxonomy file")


def _add_workspace_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("workspace overrides")
    g.add_argument("--room-extents", type=float, nargs=3, metavar=("X", "Y", "Z"))
    g.add_argument("--table-top-height", type=float)
    g.add_argument("--table-extents", type=float, nargs=2, metavar=("X", "Y"))
    g.add_argument("--start-plane-distance", type=float)
    g.add_argument("--start-plane-window", type=float, nargs=2, metavar=("W", "H"))
    g.add_argument("--fov", type=float, dest="camera_fov_deg")
    g.add_argument("--image-size", type=int, nargs=2, metavar=("W", "H"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="preshape-forge",
        description="synthetic eye-in-hand grasping sequences: generation, "
                    "validation, rendering and pre-shape scoring",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a dataset",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    _add_workspace_flags(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--per-pair", type=int, default=None,
                   help="sequences per grasp-object-part pair (default 47)")
    p.add_argument("--seed", type=int, default=None,
                   help=f"master seed (default: ${ENV_SEED} or defaults file)")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel workers; output bytes are identical for any value")
    p.add_argument("--render", action="store_true",
                   help="also write rgb/depth/label rasters per frame")
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--duration", type=float, default=None, dest="duration_s")
    p.add_argument("--no-grasp-tail", type=float, default=None,
                   dest="no_grasp_tail_s",
                   help="relabel this many trailing seconds as no_grasp")
    p.add_argument("--objects", nargs="*", default=None,
                   help="restrict generation to these objects")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="re-check all dataset invariants",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    p.add_argument("--root", type=Path, required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("render-preview", help="render frames of one sequence",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    _add_workspace_flags(p)
    p.add_argument("--root", type=Path, required=True)
    p.add_argument("--seq", required=True, help="sequence id to render")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--boxes", action="store_true",
                   help="overlay part boxes in the label channel")
    p.set_defaults(func=cmd_render_preview)

    p = sub.add_parser("oracle", help="single-grasp oracle baseline",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    p.add_argument("--root", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None,
                   help="write the oracle per-frame predictions here")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("eval", help="score prediction files",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    p.add_argument("--root", type=Path, required=True)
    p.add_argument("--pred", type=Path, action="append", required=True,
                   help="prediction CSV; repeat for multiple trials")
    p.add_argument("--report-dir", type=Path, default=None)
    p.add_argument("--count-nograsp", action="store_true",
                   help="score frames whose ground truth is no_grasp")
    p.set_defaults(func=cmd_eval)
    return parser


def _resolve(defaults, args):
    """Apply CLI overrides on top of the defaults file; echo the result."""
    ws = defaults.workspace
    over = {}
    for f in dataclasses.fields(ws):
        v = getattr(args, f.name, None)
        if v is not None:
            over[f.name] = tuple(v) if isinstance(v, list) else v
    if over:
        ws = dataclasses.replace(ws, **over)

    gen = defaults.generation
    over = {}
    for name in ("per_pair", "duration_s", "fps", "no_grasp_tail_s"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = v
    if getattr(args, "render", False):
        over["render"] = True
    if over:
        gen = dataclasses.replace(gen, **over)

    seed = getattr(args, "seed", None)
    if seed is None:
        env = os.environ.get(ENV_SEED)
        seed = int(env) if env else defaults.seed
    workers = getattr(args, "workers", None) or defaults.workers
    return ws, defaults.randomization, gen, seed, workers


def _echo_config(ws, rand, gen, seed, workers):
    print("resolved configuration:")
    for obj in (ws, rand, gen):
        for f in dataclasses.fields(obj):
            print(f"  {f.name} = {getattr(obj, f.name)}")
    print(f"  seed = {seed}")
    print(f"  workers = {workers}")


def cmd_generate(args) -> int:
    defaults = config_mod.load_defaults(args.config)
    taxonomy = load_taxonomy(args.taxonomy)
    ws, rand, gen, seed, workers = _resolve(defaults, args)
    if args.objects:
        keep = tuple(o for o in taxonomy.objects if o.name in set(args.objects))
        missing = set(args.objects) - {o.name for o in keep}
        if missing:
            print(f"error: unknown objects {sorted(missing)}", file=sys.stderr)
            return 2
        taxonomy = dataclasses.replace(taxonomy, objects=keep)
    _echo_config(ws, rand, gen, seed, workers)

    t0 = time.monotonic()
    try:
        manifest = ds.generate_dataset(
            cfg=ws, rand=rand, taxonomy=taxonomy, out_root=args.out,
            master_seed=seed, params=gen, workers=workers,
            progress=lambda i, n: print(f"  {i}/{n} sequences", flush=True))
    except ds.UnreachablePartError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    elapsed = time.monotonic() - t0

    counts: dict[tuple[str, str], int] = {}
    for row in manifest.rows:
        counts[(row.object_name, row.part_id)] = \
            counts.get((row.object_name, row.part_id), 0) + 1
    print(f"\npair coverage ({len(counts)} pairs, {len(manifest.rows)} "
          f"sequences, {elapsed:.1f}s):")
    for (obj, part), n in counts.items():
        print(f"  {obj:16s} {part:12s} {n}")
    bad = {k: v for k, v in counts.items() if v != gen.per_pair}
    if bad:
        print(f"error: pairs off target {bad}", file=sys.stderr)
        return 1
    return 0


def cmd_validate(args) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    problems = ds.validate_dataset(args.root, taxonomy)
    if problems:
        for p in problems:
            print(f"violation: {p}")
        print(f"{len(problems)} violation(s)")
        return 1
    manifest = ds.load_dataset(args.root)
    print(f"ok: {len(manifest.rows)} sequences, 0 violations")
    return 0


def cmd_render_preview(args) -> int:
    defaults = config_mod.load_defaults(args.config)
    taxonomy = load_taxonomy(args.taxonomy)
    ws, _rand, _gen, _seed, _workers = _resolve(defaults, args)
    manifest = ds.load_dataset(args.root)
    record = manifest.load_record(args.seq)
    scene = build_render_scene(ws, taxonomy, record.scene)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    intr = ws.intrinsics()
    for k, pose in enumerate(record.poses):
        fr = render_frame(scene, pose.rotation, pose.translation, intr,
                          include_part_boxes=args.boxes)
        write_ppm(out / f"frame_{k:05d}.rgb.ppm", fr.rgb)
        write_pgm16(out / f"frame_{k:05d}.depth.pgm", fr.depth)
        write_pgm8(out / f"frame_{k:05d}.label.pgm", fr.labels)
    print(f"rendered {len(record.poses)} frames of {args.seq} to {out}")
    return 0


def cmd_oracle(args) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    manifest = ds.load_dataset(args.root)
    baseline = ev.oracle_baseline(manifest, taxonomy)
    print(f"single-grasp oracle baseline (perfect object classification):")
    print(f"  overall: {baseline.correct}/{baseline.total} = "
          f"{baseline.overall:.1f}%")
    print(f"  single-grasp objects: {baseline.single_grasp:.1f}%")
    print(f"  multi-grasp objects:  {baseline.multi_grasp:.1f}%")
    if args.out is not None:
        pred = ev.oracle_single_grasp(manifest, taxonomy)
        ev.write_predictions(args.out, pred)
        print(f"wrote per-frame oracle predictions to {args.out}")
    return 0


def cmd_eval(args) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    manifest = ds.load_dataset(args.root)
    try:
        preds = [ev.read_predictions(p) for p in args.pred]
        report = ev.score(preds, manifest, taxonomy,
                          count_nograsp=args.count_nograsp)
    except ev.EvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    def pct(v: float) -> str:
        return "n/a (no sequences)" if v != v else f"{v:.2f}%"

    print(f"trials: {len(report.per_trial)}")
    print("per-trial accuracy: "
          + " ".join(f"{v:.2f}%" for v in report.per_trial))
    print(f"per-video accuracy: {report.mean:.2f}% ± {report.std:.2f}%")
    print(f"single-grasp objects: {pct(report.single_grasp_acc)}")
    print(f"multi-grasp objects:  {pct(report.multi_grasp_acc)}")
    if args.report_dir is not None:
        ev.write_report(args.report_dir, report)
        print(f"wrote report.txt and time_curve.csv to {args.report_dir}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
