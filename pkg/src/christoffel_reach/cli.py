"""Command-line interface.

Randomness: one ``--seed`` per run. Sub-seeds come from
``SeedSequence([seed, 0])`` in the fixed order data, outliers, split,
evaluation (see ``evaluation.derive_seeds``); coverage trials use
``SeedSequence([seed, repetition])``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure. Errors are
reported as a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds, evaluation
from .christoffel import ChristoffelModel, fit, make_transductive
from .conformal import (
    ReachSetEstimate,
    calibrate,
    calibrate_robust,
    split,
    transductive_p_value,
)
from .monomials import MonomialBasis
from .systems import IntegrationError, inject_outliers, make_system, sample_reach_set

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

DEFAULTS = {
    "system": "four_squares",
    "count": 1000,
    "fp_count": 10000,
    "seed": 0,
    "outlier_frac": 0.0,
    "outlier_box": "-4,-4,4,4",
    "horizon": None,
    "step": None,
    "degree": 6,
    "rescale": True,
    "ridge": 0.0,
    "normalization": "normalized",
    "N": None,
    "delta": 0.01,
    "eps": None,
    "p": 0,
    "M": 1000,
    "mode": "split",
    "R": 1000,
    "n_eval": 10000,
    "box": "-4,-4,4,4",
    "resolution": 200,
    "kind": "membership",
    "workers": 1,
}


class CLIError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise CLIError(f"expected comma-separated numbers, got {text!r}") from exc


def _box(text: str):
    vals = _floats(text)
    if len(vals) % 2 or not vals:
        raise CLIError(f"box needs 2n numbers (lower corner then upper corner), got {text!r}")
    n = len(vals) // 2
    return tuple(vals[:n]), tuple(vals[n:])


def read_points(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a dataset CSV (``x1,...,xn[,label]``); returns points and labels (or None)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise CLIError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    has_label = header[-1] == "label"
    body = rows[1:]
    if not body:
        raise CLIError(f"{path}: no data rows")
    try:
        table = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise CLIError(f"{path}: non-numeric entry ({exc})") from exc
    if has_label:
        return table[:, :-1], table[:, -1] > 0.5
    return table, None


def write_points(path, points: np.ndarray, labels: np.ndarray | None = None) -> None:
    n = points.shape[1]
    header = [f"x{i + 1}" for i in range(n)] + (["label"] if labels is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, row in enumerate(points):
            cells = [repr(float(v)) for v in row]
            if labels is not None:
                cells.append("1" if labels[i] else "0")
            w.writerow(cells)


def _dump(doc, path=None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _resolve(args, keys) -> dict:
    """flags > manifest file > defaults."""
    manifest = {}
    if getattr(args, "config", None):
        manifest = json.loads(Path(args.config).read_text())
        manifest = manifest.get("config", manifest)
    out = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in manifest:
            out[key] = manifest[key]
        else:
            out[key] = DEFAULTS.get(key)
    return out


def _system(cfg):
    kwargs = {}
    if cfg["system"] == "duffing":
        for key in ("horizon", "step"):
            if cfg.get(key) is not None:
                kwargs[key] = float(cfg[key])
    return make_system(cfg["system"], **kwargs)


def cmd_sample(args):
    cfg = _resolve(args, ["system", "count", "seed", "outlier_frac", "outlier_box", "horizon", "step"])
    system = _system(cfg)
    seeds = evaluation.derive_seeds(cfg["seed"], 0)
    data = sample_reach_set(system, int(cfg["count"]), seeds[0])
    if cfg["outlier_frac"]:
        data = inject_outliers(data, float(cfg["outlier_frac"]), _box(cfg["outlier_box"]), seeds[1], system=system)
    out = Path(args.out)
    write_points(out, data.points, data.labels)
    manifest = {
        "kind": "dataset_manifest",
        "config": cfg,
        "manifest_sha256": evaluation.manifest_hash(cfg),
        "provenance": data.provenance,
        "count": len(data),
        "fraction": float(cfg["outlier_frac"]),
        "outliers": int((~data.labels).sum()),
    }
    _dump(manifest, out.with_suffix(".json"))
    _dump({"written": [str(out), str(out.with_suffix(".json"))], "config": cfg})


def cmd_fit(args):
    cfg = _resolve(args, ["data", "degree", "rescale", "ridge", "normalization"])
    points, _ = read_points(cfg["data"])
    model = fit(
        points,
        MonomialBasis(points.shape[1], int(cfg["degree"])),
        rescale=bool(cfg["rescale"]),
        ridge=float(cfg["ridge"]),
        normalization=cfg["normalization"],
    )
    doc = model.to_dict()
    doc["config"] = cfg
    _dump(doc, args.out)


def _estimate_from(cfg):
    p = int(cfg["p"])
    if cfg.get("model"):
        model = ChristoffelModel.from_dict(json.loads(Path(cfg["model"]).read_text()))
        if not cfg.get("calibration"):
            raise CLIError("--model needs --calibration")
        cal, _ = read_points(cfg["calibration"])
    elif cfg.get("data"):
        points, _ = read_points(cfg["data"])
        if cfg["N"] is None:
            raise CLIError("--data needs --N (calibration size)")
        part = split(points, int(cfg["N"]), evaluation.derive_seeds(cfg["seed"], 0)[2])
        model = fit(
            part.training,
            MonomialBasis(points.shape[1], int(cfg["degree"])),
            rescale=bool(cfg["rescale"]),
            ridge=float(cfg["ridge"]),
        )
        cal = part.calibration
    else:
        raise CLIError("calibrate needs either --model and --calibration, or --data and --N")
    if p > 0:
        if cfg["eps"] is None:
            raise CLIError("robust calibration (--p > 0) needs --eps")
        return calibrate_robust(model, cal, p, float(cfg["eps"]))
    return calibrate(model, cal, float(cfg["delta"]))


def cmd_calibrate(args):
    keys = ["model", "calibration", "data", "N", "seed", "degree", "rescale", "ridge", "p", "eps", "delta"]
    cfg = _resolve(args, keys)
    est = _estimate_from(cfg)
    doc = est.to_dict()
    doc["config"] = cfg
    _dump(doc, args.out)


def cmd_transductive(args):
    cfg = _resolve(args, ["data", "queries", "degree", "rescale", "ridge", "delta"])
    points, _ = read_points(cfg["data"])
    queries, _ = read_points(cfg["queries"])
    ctx = make_transductive(
        points, MonomialBasis(points.shape[1], int(cfg["degree"])), rescale=bool(cfg["rescale"]), ridge=float(cfg["ridge"])
    )
    pv = np.atleast_1d(transductive_p_value(ctx, queries))
    N = ctx.n_train
    doc = {
        "kind": "transductive_p_values",
        "config": cfg,
        "N": N,
        "guarantee": bounds.split_bound(N, float(cfg["delta"])).to_dict(),
        "p_values": pv.tolist(),
        "member": (pv * N >= 0.5).tolist(),
    }
    _dump(doc, args.out)


def _print_bound(result: dict, fmt: str, config: dict):
    if fmt == "table":
        width = max(len(k) for k in result)
        for k, v in result.items():
            sys.stdout.write(f"{k:<{width}}  {v}\n")
    else:
        _dump({**result, "config": config})


def cmd_bounds(args):
    kind = args.bound
    if kind == "robust-table":
        cfg = {
            "outlier_frac": args.outlier_frac,
            "sizes": [int(s) for s in _floats(args.sizes)],
            "eps": _floats(args.eps),
        }
        rows = bounds.robust_table(cfg["sizes"], cfg["eps"], cfg["outlier_frac"])
        if args.format == "table":
            head = "size N    p  " + "  ".join(f"eps={e:<8g}" for e in cfg["eps"])
            sys.stdout.write(head + "\n")
            for row in rows:
                cells = "  ".join(f"{100 * v:>12.4f}" for v in row["confidence"].values())
                sys.stdout.write(f"{row['N']:>6} {row['p']:>4}  {cells}\n")
        else:
            _dump({"kind": "robust_table", "rows": rows, "config": cfg})
        return
    if kind == "split":
        res = bounds.split_bound(args.N, args.delta)
    elif kind == "split-upper":
        res = bounds.BoundResult(bounds.SPLIT_UPPER, bounds.split_upper_epsilon(args.N, args.delta), args.delta, args.N)
    elif kind == "two-sided":
        res = bounds.split_two_sided(args.N, args.delta)
    elif kind == "robust":
        res = bounds.robust_bound(args.N, args.p, args.eps)
    else:
        res = bounds.baseline_bound(args.N, args.n, args.d, args.delta)
    _print_bound(res.to_dict(), args.format, {k: v for k, v in vars(args).items() if k not in ("func", "format")})


def _trial_config(cfg) -> evaluation.TrialConfig:
    mode = cfg["mode"]
    N = int(cfg["N"]) if cfg["N"] is not None else (int(cfg["M"]) if mode == "transductive" else 200)
    return evaluation.TrialConfig(
        system=cfg["system"],
        M=int(cfg["M"]),
        N=N,
        degree=int(cfg["degree"]),
        mode=mode,
        delta=float(cfg["delta"]),
        epsilon=None if cfg["eps"] is None else float(cfg["eps"]),
        p=int(cfg["p"]),
        outlier_fraction=float(cfg["outlier_frac"]),
        outlier_box=_box(cfg["outlier_box"]),
        n_eval=int(cfg["n_eval"]),
        rescale=bool(cfg["rescale"]),
        ridge=float(cfg["ridge"]),
    )


def cmd_coverage_trials(args):
    keys = ["system", "M", "N", "degree", "mode", "delta", "eps", "p", "outlier_frac", "outlier_box",
            "n_eval", "rescale", "ridge", "R", "seed", "workers"]
    cfg = _resolve(args, keys)
    workers = int(cfg["workers"])
    if args.threads:
        workers = min(workers, args.threads)
    report = evaluation.coverage_trials(_trial_config(cfg), int(cfg["R"]), int(cfg["seed"]), workers=workers)
    doc = report.to_dict()
    _dump(doc, args.out)
    if args.out:
        _dump({k: doc[k] for k in ("repetitions", "epsilon", "violations", "failures")} | {"written": [args.out]})


def _region_for(cfg):
    if cfg.get("estimate"):
        return ReachSetEstimate.from_dict(json.loads(Path(cfg["estimate"]).read_text()))
    if cfg.get("data"):
        points, _ = read_points(cfg["data"])
        ctx = make_transductive(
            points, MonomialBasis(points.shape[1], int(cfg["degree"])), rescale=bool(cfg["rescale"]), ridge=float(cfg["ridge"])
        )
        from .conformal import transductive_region

        return transductive_region(ctx, float(cfg["delta"]))
    raise CLIError("need --estimate, or --data for a transductive region")


def cmd_fp_rate(args):
    cfg = _resolve(args, ["estimate", "data", "degree", "rescale", "ridge", "delta", "system", "box", "fp_count", "seed"])
    region = _region_for(cfg)
    system = _system(cfg)
    rate = evaluation.false_positive_rate(
        region, system, _box(cfg["box"]), int(cfg["fp_count"]), evaluation.derive_seeds(cfg["seed"], 0)[3]
    )
    _dump({"kind": "fp_rate", "false_positive_rate": rate, "config": cfg,
           "manifest_sha256": evaluation.manifest_hash(cfg)}, args.out)


def cmd_grid(args):
    cfg = _resolve(args, ["estimate", "data", "degree", "rescale", "ridge", "delta", "box", "resolution", "kind"])
    region = _region_for(cfg)
    lower, upper = _box(cfg["box"])
    grid = evaluation.export_grid(region, lower, upper, int(cfg["resolution"]), cfg["kind"])
    doc = evaluation.write_grid(grid, args.out, cfg)
    _dump({"written": [str(Path(args.out).with_suffix(s)) for s in (".csv", ".svg", ".json")],
           "components": doc.get("components"), "config": cfg})


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="christoffel-reach", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=None, help="cap on worker processes")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON manifest; flags override its values")
    common.add_argument("--seed", type=int)

    fitopts = _Parser(add_help=False)
    fitopts.add_argument("--degree", type=int)
    fitopts.add_argument("--no-rescale", dest="rescale", action="store_false", default=None)
    fitopts.add_argument("--ridge", type=float)

    p = sub.add_parser("sample", parents=[common], help="sample a benchmark reach set")
    p.add_argument("--system")
    p.add_argument("--count", type=int)
    p.add_argument("--outlier-frac", dest="outlier_frac", type=float)
    p.add_argument("--outlier-box", dest="outlier_box")
    p.add_argument("--horizon", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fit", parents=[common, fitopts], help="fit a Christoffel model")
    p.add_argument("--data", required=True)
    p.add_argument("--normalization", choices=["normalized", "unnormalized"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("calibrate", parents=[common, fitopts], help="calibrate a reach-set estimate")
    p.add_argument("--model")
    p.add_argument("--calibration")
    p.add_argument("--data")
    p.add_argument("--N", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("transductive", parents=[common, fitopts], help="transductive p-values for queries")
    p.add_argument("--data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--delta", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_transductive)

    p = sub.add_parser("bounds", help="closed-form guarantees")
    bsub = p.add_subparsers(dest="bound", required=True, parser_class=_Parser)
    fmt = _Parser(add_help=False)
    fmt.add_argument("--format", choices=["json", "table"], default="json")
    for name in ("split", "split-upper", "two-sided"):
        b = bsub.add_parser(name, parents=[fmt])
        b.add_argument("--N", type=int, required=True)
        b.add_argument("--delta", type=float, default=0.01)
    b = bsub.add_parser("robust", parents=[fmt])
    b.add_argument("--N", type=int, required=True)
    b.add_argument("--p", type=int, required=True)
    b.add_argument("--eps", type=float, required=True)
    b = bsub.add_parser("baseline", parents=[fmt])
    b.add_argument("--N", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--d", type=int, required=True)
    b.add_argument("--delta", type=float, default=0.01)
    b = bsub.add_parser("robust-table", parents=[fmt])
    b.add_argument("--outlier-frac", dest="outlier_frac", type=float, default=0.05)
    b.add_argument("--sizes", default="100,500,1000,2000")
    b.add_argument("--eps", default="0.04,0.05,0.06,0.10")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("coverage-trials", parents=[common, fitopts], help="repeated coverage experiment")
    p.add_argument("--system")
    p.add_argument("--M", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--mode", choices=["split", "robust", "transductive"])
    p.add_argument("--delta", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--p", type=int)
    p.add_argument("--outlier-frac", dest="outlier_frac", type=float)
    p.add_argument("--outlier-box", dest="outlier_box")
    p.add_argument("--n-eval", dest="n_eval", type=int)
    p.add_argument("--R", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_coverage_trials)

    p = sub.add_parser("fp-rate", parents=[common, fitopts], help="false-positive rate against the true set")
    p.add_argument("--estimate")
    p.add_argument("--data", help="dataset for a transductive region instead of --estimate")
    p.add_argument("--delta", type=float)
    p.add_argument("--system")
    p.add_argument("--box")
    p.add_argument("--count", dest="fp_count", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fp_rate)

    p = sub.add_parser("grid", parents=[common, fitopts], help="grid export (CSV + SVG contour)")
    p.add_argument("--estimate")
    p.add_argument("--data", help="dataset for a transductive region instead of --estimate")
    p.add_argument("--delta", type=float)
    p.add_argument("--box")
    p.add_argument("--resolution", type=int)
    p.add_argument("--kind", choices=["score", "membership"])
    p.add_argument("--out", required=True, help="output stem; .csv/.svg/.json are appended")
    p.set_defaults(func=cmd_grid)
    return parser


def _fail(message: str, code: int, kind: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except CLIError as exc:
        return _fail(str(exc), exc.code, "validation")
    except (np.linalg.LinAlgError, IntegrationError, FloatingPointError) as exc:
        return _fail(str(exc), EXIT_NUMERICAL, "numerical")
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError, NotImplementedError) as exc:
        return _fail(f"{type(exc).__name__}: {exc}", EXIT_VALIDATION, "validation")
    return 0


if __name__ == "__main__":
    sys.exit(main())
