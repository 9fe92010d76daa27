"""One-control case-control partial likelihood for linear and spline effects."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .bsplines import SplineSpec, basis_batch, make_spec
from .covariates import CaseControlData, EffectKind
from .exceptions import DimensionMismatch, UnknownEffect

CHUNK_ROWS = 4096

_TRANSFORMS = {"identity": lambda x: x, "log1p": np.log1p}


@dataclass(frozen=True)
class EffectConfig:
    """How one statistic enters the linear predictor.

    ``spline`` is filled in by :func:`bind_effects` from the training data
    unless given explicitly.
    """

    kind: EffectKind
    mode: str = "spline"
    df: int = 12
    degree: int = 3
    transform: str | None = None
    spline: SplineSpec | None = None

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", EffectKind.parse(self.kind))
        if self.transform is None:
            object.__setattr__(self, "transform", self.kind.default_transform)
        if self.mode not in ("linear", "spline"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.spline is not None:
            object.__setattr__(self, "df", self.spline.df)
            object.__setattr__(self, "degree", self.spline.degree)

    @property
    def n_coef(self) -> int:
        return 1 if self.mode == "linear" else self.df

    def transformed(self, x):
        return _TRANSFORMS[self.transform](np.asarray(x, dtype=float))

    def expand(self, x) -> np.ndarray:
        z = self.transformed(x)
        if self.mode == "linear":
            return z.reshape(-1, 1)
        if self.spline is None:
            raise ValueError(f"{self.kind.value}: spline domain not bound")
        return basis_batch(self.spline, z)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "mode": self.mode,
            "df": self.df,
            "degree": self.degree,
            "transform": self.transform,
            "spline": None if self.spline is None else self.spline.to_dict(),
        }

    @classmethod
    def from_dict(cls, d) -> "EffectConfig":
        spline = SplineSpec.from_dict(d["spline"]) if d.get("spline") else None
        return cls(EffectKind(d["kind"]), d["mode"], d["df"], d["degree"], d["transform"], spline)


def bind_effects(effects, data: CaseControlData) -> list[EffectConfig]:
    """Freeze each spline domain to the min/max of cases and controls pooled."""
    out = []
    for eff in effects:
        if eff.mode == "spline" and eff.spline is None:
            k = data.column(eff.kind)
            z = eff.transformed(np.concatenate([data.case[:, k], data.control[:, k]]))
            lo, hi = float(z.min()), float(z.max())
            if lo == hi:
                lo, hi = lo - 0.5, hi + 0.5
            eff = replace(eff, spline=make_spec(lo, hi, eff.degree, eff.df))
        out.append(eff)
    return out


def offsets(effects) -> np.ndarray:
    return np.cumsum([0] + [e.n_coef for e in effects])


def n_params(effects) -> int:
    return int(sum(e.n_coef for e in effects))


def design(effects, data: CaseControlData, rows=None, role="case") -> np.ndarray:
    raw = data.case if role == "case" else data.control
    if rows is not None:
        raw = raw[rows]
    blocks = [eff.expand(raw[:, data.column(eff.kind)]) for eff in effects]
    return np.hstack(blocks) if blocks else np.zeros((raw.shape[0], 0))


def delta_block(effects, data: CaseControlData, rows=None) -> np.ndarray:
    """Case-minus-control expansion for the selected rows."""
    return design(effects, data, rows, "case") - design(effects, data, rows, "control")


def _check(theta, delta):
    theta = np.asarray(theta, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if delta.ndim != 2 or delta.shape[1] != theta.shape[0]:
        raise DimensionMismatch(f"delta {delta.shape} vs theta {theta.shape}")
    return theta, delta


def neg_log_pl(theta, delta) -> float:
    """Sum of softplus(-delta @ theta) over rows."""
    theta, delta = _check(theta, delta)
    return float(np.logaddexp(0.0, -(delta @ theta)).sum())


def grad_neg_log_pl(theta, delta) -> np.ndarray:
    theta, delta = _check(theta, delta)
    return -(delta.T @ expit(-(delta @ theta)))


def _chunks(rows, size):
    rows = np.asarray(rows)
    return [rows[i : i + size] for i in range(0, len(rows), size)]


def evaluate(theta, effects, data, rows=None, grad=True, workers=1, chunk=CHUNK_ROWS):
    """NLL (and gradient) over ``rows`` with bases built chunk by chunk.

    Chunk boundaries do not depend on ``workers`` and partial sums are
    combined in chunk order, so every worker count gives identical results.
    """
    if rows is None:
        rows = np.arange(len(data))
    theta = np.asarray(theta, dtype=float)

    def work(r):
        d = delta_block(effects, data, r)
        return neg_log_pl(theta, d), (grad_neg_log_pl(theta, d) if grad else None)

    parts = _chunks(rows, chunk)
    if workers > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, parts))
    else:
        results = [work(r) for r in parts]
    nll = math.fsum(r[0] for r in results)
    if not grad:
        return nll
    g = np.zeros(len(theta))
    for _, gi in results:
        g = g + gi
    return nll, g


def information_criteria(theta, full_data_neg_log_pl: float, n_events: int):
    """(AIC, BIC) with P the total coefficient count."""
    if n_events < 1:
        raise ValueError("n_events must be >= 1")
    p = theta if isinstance(theta, (int, np.integer)) else len(np.atleast_1d(theta))
    return 2 * p + 2 * full_data_neg_log_pl, p * math.log(n_events) + 2 * full_data_neg_log_pl


def effect_values(eff: EffectConfig, coef, x) -> np.ndarray:
    """Uncentered f_k on raw covariate values ``x``."""
    return eff.expand(x) @ np.asarray(coef, dtype=float)


def compute_centering(effects, theta, data: CaseControlData) -> np.ndarray:
    """Mean of each f_k over the pooled case and control covariates."""
    off = offsets(effects)
    out = []
    for i, eff in enumerate(effects):
        k = data.column(eff.kind)
        x = np.concatenate([data.case[:, k], data.control[:, k]])
        out.append(float(effect_values(eff, theta[off[i] : off[i + 1]], x).mean()))
    return np.array(out)


@dataclass
class ModelFit:
    """Fitted coefficients plus everything needed to re-evaluate the curves."""

    effects: list
    theta: np.ndarray
    centering: np.ndarray
    nll: float
    aic: float
    bic: float
    n_events: int
    seed: int = 0
    config_hash: str = ""
    trace: list = field(default_factory=list)
    best_epoch: int = -1
    metadata: dict = field(default_factory=dict)

    def block(self, kind) -> np.ndarray:
        off = offsets(self.effects)
        i = self._position(kind)
        return self.theta[off[i] : off[i + 1]]

    def _position(self, kind) -> int:
        kind = EffectKind.parse(kind) if isinstance(kind, str) else kind
        for i, eff in enumerate(self.effects):
            if eff.kind is kind:
                return i
        raise UnknownEffect(kind)

    def predictor(self, raw: np.ndarray, kinds, centered=True) -> np.ndarray:
        """Sum over effects of f_k for rows of raw covariates (columns = ``kinds``)."""
        off = offsets(self.effects)
        eta = np.zeros(raw.shape[0])
        for i, eff in enumerate(self.effects):
            f = effect_values(eff, self.theta[off[i] : off[i + 1]], raw[:, list(kinds).index(eff.kind)])
            eta += f - self.centering[i] if centered else f
        return eta

    def to_dict(self) -> dict:
        return {
            "effects": [
                {**e.to_dict(), "coefficients": self.block(e.kind).tolist(), "centering": float(c)}
                for e, c in zip(self.effects, self.centering)
            ],
            "nll": self.nll,
            "aic": self.aic,
            "bic": self.bic,
            "n_events": self.n_events,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "best_epoch": self.best_epoch,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d) -> "ModelFit":
        effects = [EffectConfig.from_dict(e) for e in d["effects"]]
        theta = np.array([c for e in d["effects"] for c in e["coefficients"]], dtype=float)
        centering = np.array([e["centering"] for e in d["effects"]], dtype=float)
        return cls(effects, theta, centering, d["nll"], d["aic"], d["bic"], d["n_events"],
                   d.get("seed", 0), d.get("config_hash", ""), [], d.get("best_epoch", -1),
                   d.get("metadata", {}))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "ModelFit":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def effect_curve(fit: ModelFit, effect, grid, centered=True) -> np.ndarray:
    """f_k on ``grid`` (raw covariate units), minus the stored centering constant."""
    i = fit._position(effect)
    f = effect_values(fit.effects[i], fit.block(fit.effects[i].kind), grid)
    return f - fit.centering[i] if centered else f
