"""Command-line surface.

Subcommands map one-to-one onto the library: `simulate` runs a scenario,
`evaluate` compares trajectories (and optionally clouds), `fit-friction`
fits the resistance curve to measurements, `coverage-report` summarizes
a coverage CSV, and `serve` starts the teleoperation service.

Exit codes: 0 success, 1 validation problem (bad config, missing file,
unparseable input), 2 runtime failure (divergence, non-convergence).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    CapsimError,
    MissingFileError,
    ParseError,
    ValidationError,
)
from .friction import fit_friction_params
from .metrics import PointCloud, Trajectory, associate, ate, cloud_to_cloud_rmse, rpe_sequence
from .runner import run_simulation
from .scenario import load_scenario


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise MissingFileError(f"{what}: file not found: {p}")
    return p


def _emit(report: dict):
    print(json.dumps(report, indent=2))


def cmd_simulate(args) -> int:
    config = load_scenario(args.config)
    record = run_simulation(config, controller=args.controller)
    _emit(record.to_dict())
    return 0


def cmd_evaluate(args) -> int:
    pred = Trajectory.load(_require_file(args.pred, "--pred"))
    gt = Trajectory.load(_require_file(args.gt, "--gt"))
    pred, gt = associate(pred, gt, max_dt=args.max_dt)
    if len(pred) < 2:
        raise ValidationError(
            "fewer than 2 associated samples; check timestamps or --max-dt",
            field="pred/gt")
    ate_result = ate(pred, gt)
    rpe_result = rpe_sequence(pred, gt)
    report = {
        "samples": len(pred),
        "ate_mean": ate_result.mean,
        "ate_std": ate_result.std,
        "rpe_trans_mean": rpe_result.trans_mean,
        "rpe_trans_std": rpe_result.trans_std,
        "rpe_rot_mean": rpe_result.rot_mean,
        "rpe_rot_std": rpe_result.rot_std,
    }
    if args.pred_cloud or args.gt_cloud:
        if not (args.pred_cloud and args.gt_cloud):
            raise ValidationError("--pred-cloud and --gt-cloud go together",
                                  field="pred_cloud/gt_cloud")
        a = PointCloud.load(_require_file(args.pred_cloud, "--pred-cloud"))
        b = PointCloud.load(_require_file(args.gt_cloud, "--gt-cloud"))
        c2c = cloud_to_cloud_rmse(a, b)
        report["c2c_rmse"] = c2c.rmse
        if args.heatmap:
            PointCloud(a.points, scalars=c2c.distances).save(args.heatmap)
            report["heatmap"] = str(args.heatmap)
    elif args.heatmap:
        raise ValidationError("--heatmap needs --pred-cloud and --gt-cloud",
                              field="heatmap")
    _emit(report)
    return 0


def _load_samples_csv(path) -> np.ndarray:
    """Two-column CSV (speed mm/s, force mN); header row optional."""
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.replace(",", " ").split()]
            if len(parts) != 2:
                raise ParseError(f"expected 2 columns, got {len(parts)}", line=lineno)
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError:
                if lineno == 1:
                    continue  # header row
                raise ParseError(f"non-numeric row: {line!r}", line=lineno) from None
    if not rows:
        raise ValidationError("no data rows found", field="data")
    return np.array(rows)


def cmd_fit_friction(args) -> int:
    samples = _load_samples_csv(_require_file(args.data, "--data"))
    params, rmse = fit_friction_params(samples)
    report = {"a": params.a, "b": params.b, "c": params.c, "big_c": params.big_c,
              "rmse": rmse, "samples": len(samples)}
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    _emit(report)
    return 0


def cmd_coverage_report(args) -> int:
    path = _require_file(args.csv, "--csv")
    rows = []
    with open(path) as fh:
        header = fh.readline()
        if "covered_count" not in header:
            raise ParseError("missing coverage CSV header", line=1)
        for lineno, raw in enumerate(fh, start=2):
            line = raw.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 4:
                raise ParseError(f"expected 4 columns, got {len(parts)}", line=lineno)
            try:
                rows.append((float(parts[0]), int(parts[1]), int(parts[2]),
                             float(parts[3])))
            except ValueError:
                raise ParseError(f"bad row: {line!r}", line=lineno) from None
    if not rows:
        raise ValidationError("coverage CSV has no data rows", field="csv")
    fractions = [r[3] for r in rows]
    report = {
        "rows": len(rows),
        "total_vertices": rows[-1][2],
        "final_covered": rows[-1][1],
        "final_C": rows[-1][3],
        "max_C": max(fractions),
        "monotone": all(b >= a for a, b in zip(fractions, fractions[1:])),
    }
    _emit(report)
    return 0


def cmd_serve(args) -> int:
    config = load_scenario(args.config)
    from .service import serve  # deferred: pulls in the web stack

    serve(config, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capsim",
        description="Magnetic capsule simulation and evaluation toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write its logs")
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--controller", default="idle",
                   choices=["idle", "scripted", "greedy"],
                   help="command source for the run")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="compare trajectories and clouds")
    p.add_argument("--pred", required=True, help="predicted trajectory file")
    p.add_argument("--gt", required=True, help="ground-truth trajectory file")
    p.add_argument("--max-dt", type=float, default=0.02,
                   help="association window in seconds")
    p.add_argument("--pred-cloud", help="predicted point cloud PLY")
    p.add_argument("--gt-cloud", help="reference point cloud PLY")
    p.add_argument("--heatmap", help="write per-point distances to this PLY")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fit-friction", help="fit the resistance curve to a CSV")
    p.add_argument("--data", required=True,
                   help="CSV of speed (mm/s) and force (mN)")
    p.add_argument("--out", help="also write the fitted parameters to this JSON")
    p.set_defaults(func=cmd_fit_friction)

    p = sub.add_parser("coverage-report", help="summarize a coverage CSV")
    p.add_argument("--csv", required=True, help="coverage CSV from a run")
    p.set_defaults(func=cmd_coverage_report)

    p = sub.add_parser("serve", help="start the teleoperation service")
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, MissingFileError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CapsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
