"""Command-line pipeline: ingest, simulate, fit, baseline, cv, report.

Exit codes: 0 success, 1 data error, 2 usage error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .baseline import DEFAULT_SIGMA_DAYS, cumulative_baseline, smooth_baseline, write_baseline_csv
from .covariates import EffectKind, build_case_control, parse_effects
from .data_model import Event, EventLog, NodeAttributes, read_event_log, write_event_log
from .exceptions import CacheVersionError, ConfigMismatch, DataError, NumericError, StreamError
from .likelihood import EffectConfig, ModelFit, effect_curve
from .optimizer import AdamConfig, config_hash, curve_band, fit, resample_fits
from .sampler import sample_controls, write_controls
from .selection import (
    CvPlan,
    compare_effect_groups,
    run_cv,
    select,
    write_criteria_csv,
    write_cv_csv,
)
from .synthgen import Curve, SynthConfig, generate, write_truth_curves

log_ = logging.getLogger("stream_rem")

CACHE_MAGIC = b"STRMREM\x00"
CACHE_VERSION = 1


class UsageError(StreamError):
    pass


# ---------------------------------------------------------------- cache


def write_cache(log: EventLog, path) -> str:
    """Write the binary cache; returns its content hash."""
    table = log.table
    attrs = list(log.attributes.values())
    emb = table.embedding if table.embedding is not None else np.zeros((len(attrs), 0))
    payload = io.BytesIO()
    np.savez(
        payload,
        ids=np.array(table.ids, dtype=str),
        pub_date=table.pub_date,
        outdegree=table.outdegree,
        ipc=np.array([";".join(sorted(a.ipc_classes)) for a in attrs], dtype=str),
        embedding=emb,
        has_embedding=np.array([a.embedding is not None for a in attrs]),
        sender=table.sender,
        receiver=table.receiver,
        time=table.time,
    )
    blob = payload.getvalue()
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(CACHE_VERSION.to_bytes(4, "little"))
        fh.write(blob)
    return hashlib.sha256(blob).hexdigest()[:16]


def read_cache(path) -> tuple[EventLog, str]:
    with open(path, "rb") as fh:
        magic = fh.read(len(CACHE_MAGIC))
        if magic != CACHE_MAGIC:
            raise CacheVersionError(f"{path} is not a stream-rem cache")
        version = int.from_bytes(fh.read(4), "little")
        if version != CACHE_VERSION:
            raise CacheVersionError(f"cache version {version}, expected {CACHE_VERSION}")
        blob = fh.read()
    z = np.load(io.BytesIO(blob))
    ids = z["ids"].tolist()
    attrs = {}
    for i, node in enumerate(ids):
        emb = tuple(z["embedding"][i].tolist()) if z["has_embedding"][i] else None
        ipc = frozenset(c for c in str(z["ipc"][i]).split(";") if c)
        attrs[node] = NodeAttributes(node, int(z["pub_date"][i]), ipc, emb, int(z["outdegree"][i]))
    events = tuple(
        Event(ids[s], ids[r], int(t))
        for s, r, t in zip(z["sender"].tolist(), z["receiver"].tolist(), z["time"].tolist())
    )
    return EventLog(events, attrs), hashlib.sha256(blob).hexdigest()[:16]


def write_manifest(path, command, config: dict, outputs) -> str:
    h = config_hash(command, config)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"command": command, "config": config, "config_hash": h, "outputs": list(outputs)},
                  fh, indent=2, default=str)
    return h


# ---------------------------------------------------------------- helpers


def _effects(args) -> list[EffectConfig]:
    kinds = parse_effects(args.effects)
    linear = set(parse_effects(args.linear)) if args.linear else set()
    return [
        EffectConfig(k, "linear" if k in linear else "spline", df=args.df, degree=args.degree)
        for k in kinds
    ]


def _adam(args) -> AdamConfig:
    return AdamConfig(
        xi1=args.xi1, xi2=args.xi2, psi=args.psi, epsilon=args.epsilon,
        batch_size=args.batch_size, max_epochs=args.max_epochs, patience=args.patience,
        val_fraction=args.val_fraction, seed=args.seed,
    )


def _grid(fit_: ModelFit, kind, n) -> np.ndarray:
    """Grid on the raw covariate scale spanning the fitted spline domain."""
    eff = next(e for e in fit_.effects if e.kind is kind)
    if eff.spline is None:
        return np.linspace(0.0, 1.0, n)
    z = np.linspace(eff.spline.lo, eff.spline.hi, n)
    return np.expm1(z) if eff.transform == "log1p" else z


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _parse_curve(text: str) -> tuple:
    kind, _, spec = text.partition("=")
    parts = spec.split(":")
    name = parts[0]
    vals = [float(v) for v in parts[1:]]
    if name == "zero":
        curve = Curve.zero()
    elif name == "linear":
        curve = Curve.linear(*vals)
    elif name == "sine":
        curve = Curve.sine(*vals)
    else:
        raise UsageError(f"unknown curve {name!r} (zero, linear:SLOPE, sine:AMP:PERIOD)")
    return EffectKind.parse(kind), curve


# ---------------------------------------------------------------- commands


def cmd_ingest(args) -> int:
    log, report = read_event_log(args.events, args.attributes, drop_invalid=args.allow_warnings)
    for v in report:
        where = f"line {v.line}" if v.line is not None else "attributes"
        print(f"{v.kind}: {where}: {v.message}", file=sys.stderr)
    if report and not args.allow_warnings:
        print(f"{len(report)} violations; cache not written", file=sys.stderr)
        return 1
    dropped = len({v.event_index for v in report if v.event_index is not None})
    h = write_cache(log, args.out)
    write_manifest(
        str(args.out) + ".json", "ingest",
        {"events": str(args.events), "attributes": str(args.attributes), "cache_hash": h,
         "dropped_events": dropped, "violations": len(report)},
        [str(args.out)],
    )
    print(f"{len(log)} events, {log.n_nodes} nodes, {dropped} dropped; cache {h}")
    return 0


def cmd_simulate(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cites = ("poisson", args.cites_mean) if args.cites_mean is not None else args.cites
    config = SynthConfig(
        n_patents=args.n_patents, arrivals=args.arrivals, cites_per_patent=cites,
        true_effects=tuple(_parse_curve(e) for e in args.effect), seed=args.seed,
        citation_rate=args.citation_rate,
    )
    log, truth = generate(config)
    write_event_log(log, out / "events.csv", out / "attributes.csv")
    write_truth_curves(truth, _truth_grids(log, config), out / "truth_curves.csv")
    write_manifest(out / "manifest.json", "simulate", asdict(config),
                   ["events.csv", "attributes.csv", "truth_curves.csv"])
    print(f"{len(log)} events over {log.n_nodes} patents written to {out}")
    return 0


def _truth_grids(log, config, n=101):
    """Truth curves are tabulated over the range each statistic takes on the log."""
    from .covariates import statistics_matrix

    kinds = [k for k, _ in config.true_effects]
    if not kinds or not len(log):
        return {}
    t = log.table
    x = statistics_matrix(t, kinds, t.sender, t.receiver, t.time)
    return {k: np.linspace(x[:, i].min(), x[:, i].max(), n) for i, k in enumerate(kinds)}


def _case_control(log, kinds, seed):
    return build_case_control(log, sample_controls(log, seed), kinds)


def cmd_fit(args) -> int:
    log, cache_hash = read_cache(args.cache)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    effects = _effects(args)
    adam = _adam(args)
    controls = sample_controls(log, args.seed)
    data = build_case_control(log, controls, [e.kind for e in effects])
    model = fit(data, effects, adam, workers=args.workers)
    run_config = {"cache_hash": cache_hash, "effects": [e.to_dict() for e in effects],
                  "adam": asdict(adam), "replicates": args.replicates}
    model.config_hash = config_hash("fit", run_config)
    model.metadata.update({"cache_hash": cache_hash, "command": "fit"})
    model.save(out / "fit.json")
    write_controls(controls, out / "controls.csv")
    _write_csv(out / "trace.csv", ["epoch", "train_nll", "val_nll", "wall_seconds"],
               [[r["epoch"], repr(r["train_nll"]), repr(r["val_nll"]), repr(r["wall_seconds"])]
                for r in model.trace])
    outputs = ["fit.json", "controls.csv", "trace.csv"]
    fits = None
    if args.replicates:
        fits = resample_fits(log, effects, adam, args.replicates, workers=args.workers)
    for eff in model.effects:
        grid = _grid(model, eff.kind, args.grid_points)
        name = f"curve_{eff.kind.value}.csv"
        if fits is None:
            _write_csv(out / name, ["x", "f_centered"],
                       [[repr(float(x)), repr(float(f))] for x, f in zip(grid, effect_curve(model, eff.kind, grid))])
        else:
            mid, lo, hi, _ = curve_band(fits, eff.kind, grid)
            _write_csv(out / name, ["x", "f_centered", "band_lo", "band_hi"],
                       [[repr(float(v)) for v in row] for row in zip(grid, mid, lo, hi)])
        outputs.append(name)
    write_manifest(out / "manifest.json", "fit", run_config, outputs)
    print(f"nll={model.nll:.6f} aic={model.aic:.3f} bic={model.bic:.3f} epochs={len(model.trace)}")
    return 0


def cmd_baseline(args) -> int:
    log, cache_hash = read_cache(args.cache)
    model = ModelFit.load(args.fit)
    if model.metadata.get("cache_hash") != cache_hash:
        raise ConfigMismatch(
            f"fit was produced from cache {model.metadata.get('cache_hash')}, not {cache_hash}"
        )
    data = _case_control(log, [e.kind for e in model.effects], model.seed)
    est = smooth_baseline(cumulative_baseline(model, data), args.sigma)
    write_baseline_csv(est, args.out)
    write_manifest(str(args.out) + ".json", "baseline",
                   {"cache_hash": cache_hash, "fit_hash": model.config_hash, "sigma": args.sigma},
                   [str(args.out)])
    return 0


def cmd_cv(args) -> int:
    log, cache_hash = read_cache(args.cache)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    effects = _effects(args)
    plan = CvPlan(folds=args.folds, batch_sizes=tuple(args.batch_sizes),
                  df_grid=tuple(args.df_grid), seed=args.seed)
    data = _case_control(log, [e.kind for e in effects], args.seed)
    result = run_cv(data, effects, plan, _adam(args), workers=args.workers)
    write_cv_csv(result, out / "cv_results.csv")
    bs, df = select(result)
    with open(out / "selected.json", "w", encoding="utf-8") as fh:
        json.dump({"batch_size": bs, "df": df, "mean": result.mean((bs, df)),
                   "se": result.se((bs, df))}, fh, indent=2)
    write_manifest(out / "manifest.json", "cv",
                   {"cache_hash": cache_hash, "plan": asdict(plan), "adam": asdict(_adam(args)),
                    "effects": [e.to_dict() for e in effects]},
                   ["cv_results.csv", "selected.json"])
    print(f"selected batch_size={bs} df={df}")
    return 0


def cmd_report(args) -> int:
    log, cache_hash = read_cache(args.cache)
    names = [g.strip() for g in args.groups.split(";") if g.strip()]
    groups = []
    for g in names:
        args_g = argparse.Namespace(**{**vars(args), "effects": g})
        groups.append(_effects(args_g))
    kinds = [e.kind for grp in groups for e in grp]
    data = _case_control(log, kinds, args.seed)
    rows = compare_effect_groups(data, groups, _adam(args), names=names, workers=args.workers)
    write_criteria_csv(rows, args.out)
    write_manifest(str(args.out) + ".json", "report",
                   {"cache_hash": cache_hash, "groups": names, "adam": asdict(_adam(args))},
                   [str(args.out)])
    for r in rows:
        print(f"{r.group}: P={r.P} nll={r.nll:.4f} aic={r.aic:.3f} bic={r.bic:.3f}")
    return 0


# ---------------------------------------------------------------- parser


def _add_model_flags(p):
    p.add_argument("--effects", default="nodal,similarity,time_varying",
                   help="groups (nodal, similarity, time_varying) and/or effect names")
    p.add_argument("--linear", default="", help="effects to fit with a single linear coefficient")
    p.add_argument("--df", type=int, default=12)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--psi", type=float, default=1e-3)
    p.add_argument("--xi1", type=float, default=0.9)
    p.add_argument("--xi2", type=float, default=0.999)
    p.add_argument("--epsilon", type=float, default=1e-8)
    p.add_argument("--batch-size", type=int, default=2**14)
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--val-fraction", type=float, default=0.05)


def _global_flags(p, suppress=False):
    def d(value):
        return argparse.SUPPRESS if suppress else value

    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--workers", type=int, default=d(os.cpu_count() or 1))
    p.add_argument("--config", type=Path, default=d(None), help="JSON file of flag defaults")


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the command; the subcommand
    # copy only overrides when actually given
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    parser = argparse.ArgumentParser(prog="stream-rem", description=__doc__)
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="validate CSVs and write a binary cache")
    p.add_argument("--events", required=True, type=Path)
    p.add_argument("--attributes", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--allow-warnings", action="store_true", help="drop violating events instead of failing")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("simulate", parents=[common], help="write a synthetic dataset")
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--n-patents", type=int, default=2000)
    p.add_argument("--arrivals", type=float, default=5.0)
    p.add_argument("--cites", type=int, default=4)
    p.add_argument("--cites-mean", type=float, default=None, help="Poisson mean citations per patent")
    p.add_argument("--citation-rate", type=float, default=None, help="per-receiver daily rate")
    p.add_argument("--effect", action="append", default=[],
                   help="KIND=zero | KIND=linear:SLOPE | KIND=sine:AMP:PERIOD (repeatable)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="fit the model")
    p.add_argument("--cache", required=True, type=Path)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--replicates", type=int, default=0)
    p.add_argument("--grid-points", type=int, default=100)
    _add_model_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("baseline", parents=[common], help="recover the baseline hazard")
    p.add_argument("--cache", required=True, type=Path)
    p.add_argument("--fit", required=True, type=Path)
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA_DAYS)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("cv", parents=[common], help="cross-validate batch size and df")
    p.add_argument("--cache", required=True, type=Path)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--folds", type=int, default=6)
    p.add_argument("--batch-sizes", type=int, nargs="+", default=[2**10, 2**14, 2**18])
    p.add_argument("--df-grid", type=int, nargs="+", default=list(range(4, 21)))
    _add_model_flags(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("report", parents=[common], help="AIC/BIC of nested effect groups")
    p.add_argument("--cache", required=True, type=Path)
    p.add_argument("--groups", default="nodal;similarity;time_varying",
                   help="';'-separated groups, fitted cumulatively")
    p.add_argument("--out", required=True, type=Path)
    _add_model_flags(p)
    p.set_defaults(func=cmd_report)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        try:
            defaults = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read --config: {exc}")
        # explicit flags win over the config file
        for key, value in defaults.items():
            key = key.replace("-", "_")
            if not hasattr(args, key):
                parser.error(f"unknown config key {key!r}")
            if _was_given(key, argv):
                continue
            setattr(args, key, value)
    return args


def _was_given(dest, argv) -> bool:
    flag = "--" + dest.replace("_", "-")
    return any(a == flag or a.startswith(flag + "=") for a in (argv or sys.argv[1:]))


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except StreamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
