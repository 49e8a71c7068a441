"""Command-line entry point: ``topmanifold <campaign> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .analysis import pca_project, ratio_R
from .core import ValidationError
from .harness import ExperimentConfig, run_campaign
from .models import PRESETS, load_preset

COMMANDS = {
    "climb": "climb_pool",
    "connect-string": "connect_string",
    "connect-dmorph": "connect_dmorph",
    "arc-test": "arc_test",
    "walk-far": "walk_far",
    "explore-random": "explore_random",
    "sweep-eps": "tolerance_sweep",
}

HELP = {
    "climb": "climb random seed fields to the top and record convergence",
    "connect-string": "join pairs of optima with a relaxed string",
    "connect-dmorph": "join pairs of optima by level-set motion toward the target",
    "arc-test": "relax strings started on arcs of prescribed straightness ratio",
    "walk-far": "walk along the level set away from an optimum until the fluence cap",
    "explore-random": "level-set motion under randomly redrawn guiding fields",
    "sweep-eps": "compare string and level-set paths at several tolerances",
}

# CLI flag -> config field, for the options shared by every campaign
OVERRIDES = {
    "preset": str,
    "landscape": str,
    "preset_seed": int,
    "seed": int,
    "trials": int,
    "workers": int,
    "out": str,
    "epsilon": float,
    "eps_st": float,
    "eps_dm": float,
    "tau1": float,
    "tau2": float,
    "n_st0": int,
    "target_R": float,
    "walks_per_start": int,
    "n_max": int,
    "window": float,
}


def _campaign_parser(sub, name: str):
    p = sub.add_parser(name, help=HELP[name])
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("--config", type=Path, help="JSON experiment config; flags override its values")
    for key, typ in OVERRIDES.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)
    p.add_argument("--eps-values", dest="eps_values", type=float, nargs="+", default=None)
    p.add_argument("--log10-fluence-range", dest="log10_fluence_range", type=float, nargs=2, default=None)
    p.add_argument("--no-save-fields", dest="save_fields", action="store_false", default=None)
    p.set_defaults(kind=COMMANDS[name])
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topmanifold", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _campaign_parser(sub, name)
    an = sub.add_parser("analyze", help="R ratio and PCA projection of stored paths")
    an.add_argument("paths", nargs="+", type=Path, help="path bundle directories (or a campaign output directory)")
    an.add_argument("--out", type=Path, default=None, help="directory for metrics.json and pca.csv")
    pr = sub.add_parser("preset", help="preset utilities")
    prs = pr.add_subparsers(dest="preset_command", required=True)
    ex = prs.add_parser("export", help="write a preset as JSON")
    ex.add_argument("name", choices=sorted(PRESETS))
    ex.add_argument("--seed", type=int, default=None)
    ex.add_argument("--out", type=Path, default=None)
    return parser


def config_from_args(args) -> ExperimentConfig:
    data = io.read_json(args.config) if args.config else {}
    if "kind" in data and data["kind"] != args.kind:
        raise ValidationError(f"config kind {data['kind']!r} does not match command ({args.kind})")
    data["kind"] = args.kind
    for key in [*OVERRIDES, "eps_values", "log10_fluence_range", "save_fields"]:
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    return ExperimentConfig.from_dict(data)


def _bundle_dirs(paths: list[Path]) -> list[Path]:
    dirs = []
    for p in paths:
        if (p / "manifest.json").exists():
            dirs.append(p)
        elif (p / "paths").is_dir():
            dirs.extend(sorted(d for d in (p / "paths").iterdir() if (d / "manifest.json").exists()))
        else:
            raise FileNotFoundError(f"{p}: no path bundle found")
    return dirs


def analyze(paths: list[Path], out: Path | None) -> dict:
    results = []
    for d in _bundle_dirs(paths):
        images, manifest = io.read_path_bundle(d)
        dt = manifest["duration"] / images.shape[-1]
        m = ratio_R(images, dt=dt)
        entry = {"path": str(d), "n_points": len(images), **m.to_dict()}
        if len(images) >= 4:
            proj = pca_project(images, images[-1], dt=dt)
            entry["pca_percent"] = proj.percent.tolist()
            if out is not None:
                out.mkdir(parents=True, exist_ok=True)
                io.write_pca_csv(out / f"pca_{d.name}.csv", proj.to_rows())
        results.append(entry)
    R = [r["R"] for r in results if not r["degenerate"]]
    report = {"paths": results, "R_min": min(R, default=None), "R_avg": float(np.mean(R)) if R else None, "R_max": max(R, default=None)}
    if out is not None:
        io.write_json(out / "metrics.json", report)
    return report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "analyze":
            report = analyze(args.paths, args.out)
            print(json.dumps({k: v for k, v in report.items() if k != "paths"}, indent=1))
            return 0
        if args.command == "preset":
            data = io.preset_to_dict(load_preset(args.name, args.seed))
            if args.out is None:
                print(json.dumps(data))
            else:
                io.write_json(args.out, data)
            return 0
        cfg = config_from_args(args)

        def progress(rec):
            if args.verbose:
                status = "ok" if rec.get("success") else f"failed ({rec.get('reason')})"
                print(f"trial {rec['trial']}: {status}", file=sys.stderr)

        summary = run_campaign(cfg, progress=progress)
        print(json.dumps(io.to_jsonable(summary.stats), indent=1))
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
