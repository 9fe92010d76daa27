"""Post-hoc cumulative and pointwise baseline hazard."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .covariates import CaseControlData
from .likelihood import ModelFit

log_ = logging.getLogger(__name__)

DEFAULT_SIGMA_DAYS = 30.0


@dataclass
class BaselineEstimate:
    """Baseline hazard on the distinct event days.

    ``pointwise[0]`` and ``smoothed[0]`` are NaN: the first day has no
    predecessor to difference against.
    """

    times: np.ndarray
    cumulative: np.ndarray
    pointwise: np.ndarray
    smoothed: np.ndarray


def baseline_increments(fit: ModelFit, data: CaseControlData, at_risk=None, centered=True) -> np.ndarray:
    """Per-event increment 2 / (n(t_i) * (exp(eta_case) + exp(eta_control)))."""
    n = data.at_risk if at_risk is None else np.asarray(at_risk)
    eta_case = fit.predictor(data.case, data.kinds, centered)
    eta_ctrl = fit.predictor(data.control, data.kinds, centered)
    with np.errstate(divide="ignore"):
        inc = 2.0 * np.exp(-np.logaddexp(eta_case, eta_ctrl)) / n
    zero = n <= 0
    if zero.any():
        log_.warning("%d events with an empty risk set skipped", int(zero.sum()))
        inc = np.where(zero, 0.0, inc)
    return inc


def cumulative_baseline(fit: ModelFit, data: CaseControlData, log=None, centered=True) -> BaselineEstimate:
    """Cumulative baseline at each distinct event day (same-day increments summed)."""
    at_risk = None
    if log is not None:
        from .sampler import risk_set_sizes

        at_risk = risk_set_sizes(log, data.time)
    inc = baseline_increments(fit, data, at_risk, centered)
    times, inverse = np.unique(data.time, return_inverse=True)
    daily = np.bincount(inverse, weights=inc, minlength=len(times))
    cumulative = np.cumsum(daily)
    pointwise = np.concatenate([[np.nan], pointwise_baseline(times, cumulative)])
    return BaselineEstimate(times, cumulative, pointwise, np.full(len(times), np.nan))


def pointwise_baseline(times, cumulative) -> np.ndarray:
    """Difference quotient of the cumulative hazard between consecutive times."""
    times = np.asarray(times, dtype=float)
    cumulative = np.asarray(cumulative, dtype=float)
    if (np.diff(times) <= 0).any():
        raise ValueError("times must be strictly increasing; aggregate same-day events first")
    return np.diff(cumulative) / np.diff(times)


def gaussian_smooth(values, sigma: float, times=None) -> np.ndarray:
    """Gaussian kernel smoother, truncated at 4 sigma and renormalised at the edges.

    ``sigma`` is in units of ``times`` (sample index when ``times`` is None).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    v = np.asarray(values, dtype=float)
    t = np.arange(len(v), dtype=float) if times is None else np.asarray(times, dtype=float)
    lo = np.searchsorted(t, t - 4 * sigma, side="left")
    hi = np.searchsorted(t, t + 4 * sigma, side="right")
    out = np.empty_like(v)
    for i in range(len(v)):
        w = np.exp(-0.5 * ((t[lo[i] : hi[i]] - t[i]) / sigma) ** 2)
        out[i] = w @ v[lo[i] : hi[i]] / w.sum()
    return out


def smooth_baseline(est: BaselineEstimate, sigma: float = DEFAULT_SIGMA_DAYS) -> BaselineEstimate:
    smoothed = np.full(len(est.times), np.nan)
    if len(est.times) > 1:
        smoothed[1:] = gaussian_smooth(est.pointwise[1:], sigma, est.times[1:])
    return BaselineEstimate(est.times, est.cumulative, est.pointwise, smoothed)


def write_baseline_csv(est: BaselineEstimate, path) -> None:
    from .data_model import days_to_date

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "cumulative", "pointwise", "smoothed"])
        for t, c, p, s in zip(est.times, est.cumulative, est.pointwise, est.smoothed):
            w.writerow([days_to_date(t).isoformat(), repr(float(c)),
                        "" if np.isnan(p) else repr(float(p)), "" if np.isnan(s) else repr(float(s))])
