"""Mini-batch ADAM fitting of the case-control likelihood."""
from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .covariates import CaseControlData, build_case_control
from .exceptions import Diverged, NoData, NonFiniteGradient, StreamError
from .likelihood import (
    ModelFit,
    bind_effects,
    compute_centering,
    effect_curve,
    evaluate,
    information_criteria,
    n_params,
)
from .sampler import sample_controls

log_ = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamConfig:
    xi1: float = 0.9
    xi2: float = 0.999
    psi: float = 1e-3
    epsilon: float = 1e-8
    batch_size: int = 2**14
    max_epochs: int = 200
    patience: int = 5
    val_fraction: float = 0.05
    seed: int = 0
    tol: float = 0.0

    def __post_init__(self):
        if not (0 <= self.xi1 < 1 and 0 <= self.xi2 < 1):
            raise ValueError("xi1 and xi2 must lie in [0, 1)")
        if self.psi <= 0 or self.epsilon <= 0:
            raise ValueError("psi and epsilon must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class AdamState:
    m1: np.ndarray
    m2: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(state: AdamState, grad, config: AdamConfig, theta):
    """One bias-corrected ADAM descent step; returns ``(new_state, new_theta)``."""
    g = np.asarray(grad, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if g.shape != theta.shape or g.shape != state.m1.shape:
        raise ValueError(f"shape mismatch: grad {g.shape}, theta {theta.shape}, state {state.m1.shape}")
    if not np.all(np.isfinite(g)):
        bad = np.flatnonzero(~np.isfinite(g))
        raise NonFiniteGradient(f"non-finite gradient at step {state.step + 1}, coordinates {bad[:10].tolist()}")
    step = state.step + 1
    m1 = config.xi1 * state.m1 + (1 - config.xi1) * g
    m2 = config.xi2 * state.m2 + (1 - config.xi2) * g * g
    m1_hat = m1 / (1 - config.xi1**step)
    m2_hat = m2 / (1 - config.xi2**step)
    theta = theta - config.psi * m1_hat / (np.sqrt(m2_hat) + config.epsilon)
    return AdamState(m1, m2, step), theta


def config_hash(*parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def split_validation(n: int, config: AdamConfig, rng):
    """(train, validation) row indices; no holdout when ``val_fraction`` is 0."""
    if config.val_fraction == 0:
        return np.arange(n), np.empty(0, dtype=np.int64)
    perm = rng.permutation(n)
    n_val = int(round(config.val_fraction * n))
    n_val = min(max(n_val, 1), n - 1) if n > 1 else 0
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def fit(data: CaseControlData, effects, config: AdamConfig = AdamConfig(), workers: int = 1) -> ModelFit:
    """Fit by mini-batch ADAM with early stopping on a held-out validation split.

    Bases are built per batch. The returned coefficients are those with the
    lowest validation NLL; NLL, AIC and BIC are recomputed on all of ``data``.
    With ``val_fraction == 0`` every row trains and the monitored quantity is
    the full-data NLL.
    """
    if len(data) == 0:
        raise NoData("no case-control rows to fit")
    if not effects:
        raise ValueError("at least one effect is required")
    effects = bind_effects(effects, data)
    rng = np.random.default_rng(config.seed)
    train, val = split_validation(len(data), config, rng)
    if len(val) == 0:
        val = train
    theta = np.zeros(n_params(effects))
    state = AdamState.zeros(len(theta))
    best = (np.inf, theta.copy(), -1)
    trace = []
    stale = 0
    t0 = time.perf_counter()
    for epoch in range(config.max_epochs):
        order = train[rng.permutation(len(train))]
        train_nll = 0.0
        for start in range(0, len(order), config.batch_size):
            rows = order[start : start + config.batch_size]
            nll, g = evaluate(theta, effects, data, rows, workers=workers)
            train_nll += nll
            state, theta = adam_step(state, g / len(rows), config, theta)
        val_nll = evaluate(theta, effects, data, val, grad=False, workers=workers) / len(val)
        if not np.isfinite(val_nll):
            raise Diverged(f"validation NLL became {val_nll} at epoch {epoch}")
        trace.append(
            {
                "epoch": epoch,
                "train_nll": train_nll / len(train),
                "val_nll": val_nll,
                "wall_seconds": time.perf_counter() - t0,
            }
        )
        if val_nll < best[0] - config.tol * abs(best[0] if np.isfinite(best[0]) else 0.0):
            best = (val_nll, theta.copy(), epoch)
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    theta = best[1]
    full = evaluate(theta, effects, data, grad=False, workers=workers)
    aic, bic = information_criteria(theta, full, len(data))
    return ModelFit(
        effects=effects,
        theta=theta,
        centering=compute_centering(effects, theta, data),
        nll=full,
        aic=aic,
        bic=bic,
        n_events=len(data),
        seed=config.seed,
        config_hash=config_hash([e.to_dict() for e in effects], asdict(config)),
        trace=trace,
        best_epoch=best[2],
        metadata={"never_cited_time_from_last_event": "t - pub_date(receiver)"},
    )


def resample_fits(log, effects, config: AdamConfig, replicates: int, workers: int = 1):
    """Refit with freshly sampled controls under seeds ``seed+1 .. seed+replicates``.

    Failed replicates are logged and returned as their exception objects.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    kinds = [e.kind for e in effects]

    def one(r):
        seed = config.seed + r
        try:
            data = build_case_control(log, sample_controls(log, seed), kinds)
            return fit(data, effects, replace(config, seed=seed))
        except StreamError as exc:
            log_.warning("replicate %d failed: %s", r, exc)
            return exc

    seeds = range(1, replicates + 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, seeds))
    return [one(r) for r in seeds]


def curve_band(fits, effect, grid, level: float = 0.95):
    """Pointwise median and percentile band of centered curves across fits."""
    curves = np.array([effect_curve(f, effect, grid) for f in fits if isinstance(f, ModelFit)])
    if len(curves) == 0:
        raise NoData("no successful fits")
    alpha = (1 - level) / 2
    lo, hi = np.quantile(curves, [alpha, 1 - alpha], axis=0)
    return np.median(curves, axis=0), lo, hi, curves
