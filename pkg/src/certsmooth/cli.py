"""Command-line entry point: ``certsmooth <subcommand> --model M --data D --out DIR``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .certify import CertParams
from .diagnostics import sample_curve, sqc_estimate
from .io import DataError, load_dataset, load_model, read_jsonl, write_jsonl
from .qcrs import ExactRadius, MonteCarloRadius, QcrsParams, search_region
from .report import DEFAULT_THRESHOLDS, RunConfig, run, summarize, write_report
from .rng import derive_seed, seed_from_env

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    if data:
        p.add_argument("--model", required=True, type=Path, help="model config JSON")
        p.add_argument("--data", required=True, type=Path, help="dataset JSONL")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--seed", type=int, default=None,
                   help="run seed (falls back to $CERTSMOOTH_SEED, then 0)")
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--thresholds", type=_floats, default=DEFAULT_THRESHOLDS)


def _cert_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n0", type=int, default=100)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--sigma", type=float, default=0.25,
                   help="fixed sigma, or the default sigma0 kept by the rejection step")


def _search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma-min", type=float, default=None)
    p.add_argument("--sigma-max", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--grad-samples", type=int, default=500)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="certsmooth", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="certify every point at a fixed sigma")
    _common(p)
    _cert_flags(p)

    p = sub.add_parser("optimize", help="pick sigma per point by binary search, then certify")
    _common(p)
    _cert_flags(p)
    _search_flags(p)

    p = sub.add_parser("grid", help="pick sigma per point by grid search, then certify")
    _common(p)
    _cert_flags(p)
    _search_flags(p)
    p.add_argument("--sigmas", type=_floats, default=None, help="explicit grid (default: 24 points)")
    p.add_argument("--save-curves", action="store_true")

    for name, helptext in (("curve", "sample sigma-radius curves to CSV"),
                           ("diagnose", "quasiconcavity / concavity report per point")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _search_flags(p)
        p.add_argument("--sigma", type=float, default=0.25)
        p.add_argument("--sigmas", type=_floats, default=None)
        p.add_argument("--points", type=int, default=20, help="grid size when --sigmas is absent")
        p.add_argument("--n", type=int, default=100_000)
        p.add_argument("--exact", action="store_true", help="use closed-form probabilities")

    p = sub.add_parser("report", help="aggregate an existing records.jsonl")
    _common(p, data=False)
    p.add_argument("--records", required=True, type=Path)
    return parser


def _seed(args) -> int:
    return args.seed if args.seed is not None else seed_from_env(0)


def _qcrs_params(args) -> QcrsParams:
    lo, hi = search_region(args.sigma)
    return QcrsParams(
        sigma_min=args.sigma_min if args.sigma_min is not None else lo,
        sigma_max=args.sigma_max if args.sigma_max is not None else hi,
        epsilon=args.epsilon, tau=args.tau, grad_samples=args.grad_samples, sigma0=args.sigma,
    )


def _grid(args) -> np.ndarray:
    if args.sigmas:
        return np.asarray(args.sigmas)
    lo, hi = search_region(args.sigma)
    lo = args.sigma_min if args.sigma_min is not None else lo
    hi = args.sigma_max if args.sigma_max is not None else hi
    return np.linspace(lo, hi, args.points)


def _run_mode(args, mode: str) -> int:
    config = RunConfig(
        dataset=args.data, model=args.model, mode=mode, sigma=args.sigma,
        cert=CertParams(args.alpha, args.n0, args.n, _seed(args)),
        qcrs=_qcrs_params(args) if mode != "fixed" else None,
        grid_sigmas=getattr(args, "sigmas", None), n_eval=getattr(args, "grad_samples", 500),
        out=args.out, workers=args.workers, thresholds=args.thresholds,
        save_curves=getattr(args, "save_curves", False),
    )
    report = run(config)
    print(f"ACR {report.acr:.6f} over {report.num_points} points "
          f"({report.total_forward_passes} forward passes, {report.num_errors} errors)")
    for r, acc in report.certified_accuracy.items():
        print(f"  radius >= {r:g}: {acc:.4f}")
    return EXIT_OK


def _curves(args, diagnose: bool) -> int:
    model = load_model(args.model)
    points = load_dataset(args.data, model.dimension)
    sigmas = _grid(args)
    seed = _seed(args)
    args.out.mkdir(parents=True, exist_ok=True)
    reports = []
    for point in points:
        pseed = derive_seed(seed, "point", point.id)
        curve = sample_curve(model, point.x, sigmas, args.n, pseed, args.alpha, exact=args.exact)
        if not diagnose:
            (args.out / "curves").mkdir(exist_ok=True)
            (args.out / "curves" / f"{point.id}.csv").write_text(curve.to_csv())
            continue
        objective = (ExactRadius(model, point.x) if args.exact
                     else MonteCarloRadius(model, point.x, args.n, args.alpha, model.classify(point.x)))
        rep = sqc_estimate(objective, sigmas, tau=args.tau, seed=derive_seed(pseed, "sqc"))
        reports.append({"id": point.id, "true_label": point.label, **rep.to_dict()})
    if diagnose:
        write_jsonl(reports, args.out / "sqc.jsonl")
        quasi = np.mean([r["quasiconcave"] for r in reports])
        concave = np.mean([r["concave"] for r in reports])
        summary = {"points": len(reports), "quasiconcave_fraction": float(quasi),
                   "concave_fraction": float(concave)}
        (args.out / "sqc_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        print(f"quasiconcave {quasi:.4f}  concave {concave:.4f}  ({len(reports)} points)")
    else:
        print(f"wrote {len(points)} curves to {args.out / 'curves'}")
    return EXIT_OK


def _report(args) -> int:
    records = read_jsonl(args.records)
    if not records:
        raise DataError(f"{args.records}: no records")
    args.out.mkdir(parents=True, exist_ok=True)
    has_sigma_choice = any(r.get("mode") in ("qcrs", "grid") for r in records)
    report = summarize(records, args.thresholds, has_sigma_choice, str(args.records))
    write_report(report, args.out)
    print(f"ACR {report.acr:.6f} over {report.num_points} points")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "certify":
            return _run_mode(args, "fixed")
        if args.command == "optimize":
            return _run_mode(args, "qcrs")
        if args.command == "grid":
            return _run_mode(args, "grid")
        if args.command in ("curve", "diagnose"):
            return _curves(args, args.command == "diagnose")
        return _report(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
