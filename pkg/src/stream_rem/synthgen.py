"""Synthetic citation networks with a known additive intensity, and an exact
full-batch Newton fitter for small instances.

Each new patent chooses its receivers from the current risk set without
replacement with probabilities proportional to ``exp(sum_k f_k(x_sr))``
(Gumbel top-k), which is the conditional that the partial likelihood models.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import expit

from .covariates import EffectKind, days_to_year
from .data_model import Event, EventLog, NodeAttributes
from .exceptions import InfeasibleConfig, SingularHessian
from .likelihood import neg_log_pl, offsets

log_ = logging.getLogger(__name__)


@dataclass(frozen=True)
class Curve:
    """Ground-truth effect curve on the raw statistic scale.

    ``kind`` is one of ``zero``, ``linear`` (``slope``), ``sine``
    (``amplitude``, ``period``) or ``table`` (``xs``, ``ys``, linearly
    interpolated).
    """

    kind: str = "zero"
    slope: float = 0.0
    amplitude: float = 0.0
    period: float = 1.0
    xs: tuple = ()
    ys: tuple = ()

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def linear(cls, slope):
        return cls("linear", slope=slope)

    @classmethod
    def sine(cls, amplitude, period):
        return cls("sine", amplitude=amplitude, period=period)

    @classmethod
    def table(cls, xs, ys):
        return cls("table", xs=tuple(xs), ys=tuple(ys))

    @property
    def is_zero(self):
        return self.kind == "zero"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "linear":
            return self.slope * x
        if self.kind == "sine":
            return self.amplitude * np.sin(2 * np.pi * x / self.period)
        if self.kind == "table":
            return np.interp(x, self.xs, self.ys)
        raise ValueError(f"unknown curve kind {self.kind!r}")


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic network settings.

    ``cites_per_patent`` is an int (fixed) or ``("poisson", mu)``. When
    ``citation_rate`` is set, each day's citation total is instead
    Poisson(rate * risk-set size), split uniformly over that day's patents.
    """

    n_patents: int = 2000
    arrivals: float = 5.0
    cites_per_patent: object = 4
    true_effects: tuple = ()
    seed: int = 0
    citation_rate: float | None = None
    embedding_dim: int = 8
    n_ipc_codes: int = 20
    start_day: int = 3650

    def __post_init__(self):
        if self.n_patents < 2:
            raise InfeasibleConfig("need at least two patents")
        if self.arrivals <= 0:
            raise InfeasibleConfig("arrival rate must be positive")


@dataclass
class Truth:
    curves: dict = field(default_factory=dict)
    truncated: int = 0

    def __call__(self, kind, x):
        return self.curves.get(kind, Curve.zero())(x)


def gumbel_top_k(logw: np.ndarray, k: int, rng) -> np.ndarray:
    """Indices of ``k`` draws without replacement, P(i) proportional to exp(logw[i])."""
    keys = logw + rng.gumbel(size=logw.shape[0])
    if k >= len(keys):
        return np.argsort(-keys)
    top = np.argpartition(-keys, k - 1)[:k]
    return top[np.argsort(-keys[top])]


def _cites(config: SynthConfig, rng) -> int:
    c = config.cites_per_patent
    if isinstance(c, (tuple, list)):
        if c[0] != "poisson":
            raise InfeasibleConfig(f"unknown citation distribution {c!r}")
        return int(rng.poisson(c[1]))
    return int(c)


def generate(config: SynthConfig):
    """Simulate a citation log; returns ``(EventLog, Truth)``."""
    rng = np.random.default_rng(config.seed)
    n = config.n_patents
    effects = {EffectKind.parse(k) if isinstance(k, str) else k: c for k, c in config.true_effects}
    active = {k: c for k, c in effects.items() if not c.is_zero}

    emb = rng.normal(size=(n, config.embedding_dim))
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    n_codes = rng.integers(1, 4, size=n)
    ipc = np.zeros((n, config.n_ipc_codes), dtype=bool)
    for i in range(n):
        ipc[i, rng.choice(config.n_ipc_codes, size=min(n_codes[i], config.n_ipc_codes), replace=False)] = True
    ipc_size = ipc.sum(axis=1)

    pub = np.zeros(n, dtype=np.int64)
    outdeg = np.zeros(n, dtype=np.int64)
    indeg = np.zeros(n, dtype=np.int64)
    last = np.zeros(n, dtype=np.int64)
    events: list[tuple[int, int, int]] = []
    truncated = 0
    count = 0
    day = config.start_day
    while count < n:
        m = int(rng.poisson(config.arrivals))
        if count == 0:
            m = max(m, 1)
        m = min(m, n - count)
        new = np.arange(count, count + m)
        pub[new] = day
        n_risk = count
        if config.citation_rate is not None:
            total = int(rng.poisson(config.citation_rate * n_risk)) if m else 0
            ks = rng.multinomial(total, np.full(m, 1.0 / m)) if m else []
        else:
            ks = [_cites(config, rng) for _ in range(m)]
        day_events = []
        for s, k in zip(new.tolist(), ks):
            k = int(k)
            if k > n_risk:
                truncated += k - n_risk
                k = n_risk
            if k == 0:
                continue
            r = np.arange(n_risk)
            logw = np.zeros(n_risk)
            for kind, curve in active.items():
                logw += curve(_statistic(kind, s, r, day, pub, outdeg, indeg, last, emb, ipc, ipc_size))
            chosen = gumbel_top_k(logw, k, rng)
            outdeg[s] = k
            day_events.extend((s, int(c), day) for c in chosen)
        for _, rcv, t in day_events:
            indeg[rcv] += 1
            last[rcv] = t
        events.extend(day_events)
        count += m
        day += 1
    if truncated:
        log_.warning("%d citations truncated to the available risk set", truncated)

    ids = [f"p{i:06d}" for i in range(n)]
    codes = [f"C{j:02d}" for j in range(config.n_ipc_codes)]
    attrs = {
        ids[i]: NodeAttributes(
            ids[i],
            int(pub[i]),
            frozenset(codes[j] for j in np.flatnonzero(ipc[i])),
            tuple(float(v) for v in emb[i]),
            int(outdeg[i]),
        )
        for i in range(n)
    }
    log = EventLog(tuple(Event(ids[s], ids[r], t) for s, r, t in events), attrs)
    return log, Truth(dict(effects), truncated)


def _statistic(kind, s, r, t, pub, outdeg, indeg, last, emb, ipc, ipc_size):
    if kind is EffectKind.RECEIVER_PUB_YEAR:
        return days_to_year(pub[r])
    if kind is EffectKind.TIME_LAG:
        return (t - pub[r]).astype(float)
    if kind is EffectKind.RECEIVER_OUTDEGREE:
        return outdeg[r].astype(float)
    if kind is EffectKind.TEXTUAL_SIMILARITY:
        return np.clip(emb[r] @ emb[s], -1.0, 1.0)
    if kind is EffectKind.IPC_JACCARD:
        inter = (ipc[r] & ipc[s]).sum(axis=1)
        return inter / (ipc_size[r] + ipc_size[s] - inter)
    if kind is EffectKind.CUMULATIVE_CITATIONS:
        return indeg[r].astype(float)
    if kind is EffectKind.TIME_FROM_LAST_EVENT:
        return np.where(indeg[r] > 0, t - last[r], t - pub[r]).astype(float)
    raise ValueError(kind)


def write_truth_curves(truth: Truth, grids: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["effect", "x", "f_x"])
        for kind, grid in grids.items():
            for x, f in zip(np.asarray(grid, dtype=float), truth(kind, grid)):
                w.writerow([kind.value, repr(float(x)), repr(float(f))])


def gauge_basis(effects) -> np.ndarray:
    """P x P' map onto coefficients whose spline blocks sum to zero."""
    cols = []
    for eff in effects:
        if eff.mode == "linear":
            cols.append(np.eye(1))
        else:
            q, _ = np.linalg.qr(np.hstack([np.ones((eff.n_coef, 1)), np.eye(eff.n_coef)[:, :-1]]))
            cols.append(q[:, 1:])
    return scipy.linalg.block_diag(*cols) if cols else np.zeros((0, 0))


def newton_oracle(delta, effects, tol: float = 1e-10, max_iter: int = 100, theta0=None):
    """Exact minimiser of the case-control NLL by damped Newton iterations.

    Each spline block is constrained to sum to zero. Returns
    ``(theta, nll)``; raises ``SingularHessian`` if the reduced Hessian is
    not positive definite.
    """
    delta = np.asarray(delta, dtype=float)
    if offsets(effects)[-1] != delta.shape[1]:
        raise ValueError("effects do not match delta columns")
    if delta.shape[1] > 500 or delta.shape[0] > 10**5:
        raise InfeasibleConfig("instance too large for the Newton oracle")
    T = gauge_basis(effects)
    D = delta @ T
    beta = np.zeros(D.shape[1]) if theta0 is None else np.linalg.lstsq(T, np.asarray(theta0, float), rcond=None)[0]

    def nll(b):
        return float(np.logaddexp(0.0, -(D @ b)).sum())

    f = nll(beta)
    for _ in range(max_iter):
        p = expit(-(D @ beta))
        full_grad = -(delta.T @ p)
        if np.max(np.abs(full_grad), initial=0.0) < tol:
            break
        g = -(D.T @ p)
        H = (D * (p * (1 - p))[:, None]).T @ D
        try:
            step = scipy.linalg.cho_solve(scipy.linalg.cho_factor(H), g)
        except np.linalg.LinAlgError:
            raise SingularHessian("reduced Hessian is not positive definite; reduce df") from None
        if not np.all(np.isfinite(step)):
            raise SingularHessian("Newton step is not finite")
        t = 1.0
        while True:
            cand = beta - t * step
            fc = nll(cand)
            if fc <= f or t < 1e-12:
                break
            t /= 2
        if fc > f:
            break
        beta, f = cand, fc
    theta = T @ beta
    return theta, neg_log_pl(theta, delta)
