"""Model selection: information criteria across effect groups and k-fold CV
over batch size and spline degrees of freedom."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .covariates import CaseControlData
from .exceptions import AllCellsFailed, StreamError
from .likelihood import evaluate, information_criteria
from .optimizer import AdamConfig, fit

log_ = logging.getLogger(__name__)


@dataclass(frozen=True)
class CvPlan:
    folds: int = 6
    batch_sizes: tuple = (2**10, 2**14, 2**18)
    df_grid: tuple = tuple(range(4, 21))
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")


@dataclass
class CvResult:
    """Rescaled held-out NLL per (batch_size, df) cell, one value per fold (NaN if failed)."""

    folds: int
    values: dict = field(default_factory=dict)

    def cells(self):
        return list(self.values)

    def ok(self, cell) -> bool:
        v = self.values[cell]
        return bool(np.all(np.isfinite(v)))

    def mean(self, cell) -> float:
        return float(np.mean(self.values[cell]))

    def sd(self, cell) -> float:
        v = self.values[cell]
        return float(np.std(v, ddof=1)) if len(v) > 1 else 0.0

    def se(self, cell) -> float:
        return self.sd(cell) / math.sqrt(len(self.values[cell]))

    def rows(self):
        for (bs, df), vals in self.values.items():
            for f, v in enumerate(vals):
                yield bs, df, f, float(v)


def fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold label per event from a seeded permutation cut into near-equal blocks."""
    perm = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=np.int64)
    for f, block in enumerate(np.array_split(perm, folds)):
        labels[block] = f
    return labels


def with_df(effects, df: int):
    return [replace(e, df=df, spline=None) if e.mode == "spline" else e for e in effects]


def heldout_nll(data: CaseControlData, effects, adam: AdamConfig, train, test, workers=1) -> float:
    """Fit on ``train`` rows and return the test NLL divided by the test size."""
    model = fit(data.subset(train), effects, adam, workers=workers)
    return evaluate(model.theta, model.effects, data, test, grad=False) / len(test)


def run_cv(data: CaseControlData, effects, plan: CvPlan = CvPlan(), adam: AdamConfig = AdamConfig(), workers: int = 1) -> CvResult:
    """Evaluate every (batch_size, df) cell on the same fold split."""
    labels = fold_assignment(len(data), plan.folds, plan.seed)
    if np.bincount(labels, minlength=plan.folds).min() == 0:
        raise ValueError(f"{len(data)} events cannot fill {plan.folds} folds")
    jobs = [(bs, df, f) for bs in plan.batch_sizes for df in plan.df_grid for f in range(plan.folds)]

    def run(job):
        bs, df, f = job
        train = np.flatnonzero(labels != f)
        test = np.flatnonzero(labels == f)
        try:
            return heldout_nll(data, with_df(effects, df), replace(adam, batch_size=bs), train, test)
        except StreamError as exc:
            log_.warning("cv cell batch_size=%d df=%d fold=%d failed: %s", bs, df, f, exc)
            return math.nan

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(run, jobs))
    else:
        out = [run(j) for j in jobs]
    result = CvResult(plan.folds)
    for (bs, df, f), v in zip(jobs, out):
        result.values.setdefault((bs, df), np.full(plan.folds, np.nan))[f] = v
    return result


def select(result: CvResult):
    """One-standard-error rule: smallest df within one SE of the best cell,
    then the largest batch size qualifying at that df."""
    good = [c for c in result.cells() if result.ok(c)]
    if not good:
        raise AllCellsFailed("no CV cell completed")
    best = min(good, key=result.mean)
    threshold = result.mean(best) + result.se(best)
    within = [c for c in good if result.mean(c) <= threshold]
    df = min(c[1] for c in within)
    bs = max(c[0] for c in within if c[1] == df)
    return bs, df


@dataclass(frozen=True)
class CriteriaRow:
    group: str
    P: int
    nll: float
    aic: float
    bic: float


def compare_effect_groups(data: CaseControlData, groups, adam: AdamConfig = AdamConfig(), names=None, workers=1):
    """Fit the nested models group_1, group_1+group_2, ... on identical data.

    An empty model has NLL = n log 2 (theta = 0 is its only point).
    """
    if not groups:
        raise ValueError("groups must be non-empty")
    names = names or [f"group{i + 1}" for i in range(len(groups))]
    rows = []
    effects: list = []
    label: list[str] = []
    for name, group in zip(names, groups):
        effects = effects + [e for e in group if e.kind not in {x.kind for x in effects}]
        label.append(name)
        if effects:
            model = fit(data, effects, adam, workers=workers)
            p, nll = len(model.theta), model.nll
        else:
            p, nll = 0, len(data) * math.log(2)
        aic, bic = information_criteria(p, nll, len(data))
        rows.append(CriteriaRow("+".join(label), p, nll, aic, bic))
    return rows


def write_cv_csv(result: CvResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["batch_size", "df", "fold", "rescaled_nll"])
        for bs, df, f, v in result.rows():
            w.writerow([bs, df, f, repr(v)])


def write_criteria_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "P", "nll", "aic", "bic"])
        for r in rows:
            w.writerow([r.group, r.P, repr(r.nll), repr(r.aic), repr(r.bic)])
