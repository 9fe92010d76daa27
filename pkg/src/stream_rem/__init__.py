"""Relational event additive models fitted by case-control sampling, B-spline
effects and mini-batch ADAM."""

from .bsplines import SplineSpec, basis_batch, basis_eval, make_spec
from .covariates import EffectKind, GROUPS, build_case_control, stream_time_varying
from .data_model import Event, EventLog, NodeAttributes, load_event_log, make_event_log, read_event_log, validate
from .likelihood import EffectConfig, ModelFit, effect_curve, neg_log_pl, grad_neg_log_pl
from .optimizer import AdamConfig, adam_step, fit, resample_fits
from .sampler import risk_set_size, sample_candidates, sample_controls

__version__ = "0.1.0"

__all__ = [
    "AdamConfig", "EffectConfig", "EffectKind", "Event", "EventLog", "GROUPS", "ModelFit",
    "NodeAttributes", "SplineSpec", "adam_step", "basis_batch", "basis_eval", "build_case_control",
    "effect_curve", "fit", "grad_neg_log_pl", "load_event_log", "make_event_log", "make_spec",
    "neg_log_pl", "read_event_log", "resample_fits", "risk_set_size", "sample_candidates",
    "sample_controls", "stream_time_varying", "validate",
]
