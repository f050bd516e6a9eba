"""Task-level production models: initial, non-automated and automated.

Per-sample functions take log-scale inputs with ``None`` standing for an
"off" channel (no labour, no capital, or no upstream production in that
bin).  A log value of 0 with the channel on is a real value, ln(1).

:func:`run_task` evaluates a whole signal at once and is what the simulator
uses; it also applies the accuracy-metric feedback filter on automated
tasks, which the per-sample functions cannot do since it carries state.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from prodfreq.control import MetricConfig, closed_loop_tf, filter_signal
from prodfreq.econ import CobbDouglasFit
from prodfreq.errors import InputError, ParameterError, SchemaError
from prodfreq.eventlog import ProductionSignal, to_log_scale

__all__ = [
    "AliasingWarning",
    "Automation",
    "MetricConfig",
    "TaskKind",
    "TaskModel",
    "automated_task_step",
    "carrier",
    "initial_task_step",
    "make_omega_c",
    "non_automated_task_step",
    "run_task",
    "technology_gate",
]


class AliasingWarning(UserWarning):
    """The carrier's modulated component sits above Nyquist and will fold."""


class TaskKind(str, enum.Enum):
    INITIAL = "Initial"
    NON_AUTOMATED = "NonAutomated"
    AUTOMATED = "Automated"


@dataclass(frozen=True)
class Automation:
    kappa: float
    f_m: float
    metric: MetricConfig | None = None

    def __post_init__(self):
        if not 0.0 < self.f_m <= 0.5:
            raise ParameterError("f_m must lie in (0, 0.5] cycles/sample", f_m=self.f_m)
        if not 1.0 + self.kappa > 0:
            raise ParameterError("kappa must exceed -1", kappa=self.kappa)

    @property
    def omega_c(self) -> float:
        return make_omega_c(self.kappa, self.f_m)


@dataclass(frozen=True)
class TaskModel:
    name: str
    kind: TaskKind
    fit: CobbDouglasFit
    C: float | None = None
    automation: Automation | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", TaskKind(self.kind))
        if self.C is None:
            object.__setattr__(self, "C", self.fit.ln_A)
        if self.kind is TaskKind.AUTOMATED and self.automation is None:
            raise SchemaError(f"automated task {self.name!r} needs kappa and f_m")
        if self.kind is not TaskKind.AUTOMATED and self.automation is not None:
            raise SchemaError(f"task {self.name!r} of kind {self.kind.value} cannot carry automation parameters")

    @property
    def alpha(self) -> float:
        return self.fit.alpha


def technology_gate(l, k, y_i, C: float, kind) -> float:
    kind = TaskKind(kind)
    is_open = l is not None and k is not None
    if kind is TaskKind.AUTOMATED:
        is_open = is_open and y_i is not None
    return C if is_open else 0.0


def _own_term(l: float, k: float, m: TaskModel) -> float:
    return technology_gate(l, k, None, m.C, TaskKind.INITIAL) + (1.0 - m.alpha) * l + m.alpha * k


def initial_task_step(l, k, m: TaskModel) -> float:
    if l is None or k is None:
        return 0.0
    return _own_term(l, k, m)


def non_automated_task_step(l, k, y_i, m: TaskModel):
    if l is None or k is None or y_i is None:
        return y_i
    return 0.5 * (_own_term(l, k, m) + y_i)


def make_omega_c(kappa: float, f_m: float) -> float:
    """Carrier frequency 2*pi*(1 + kappa)*f_m in rad/sample."""
    if not (1.0 + kappa) * f_m > 0:
        raise ParameterError("(1 + kappa) * f_m must be positive", kappa=kappa, f_m=f_m)
    omega = 2 * math.pi * (1.0 + kappa) * f_m
    if 2 * omega > math.pi:
        warnings.warn(
            f"modulated component 2*omega_c = {2 * omega:.4f} rad/sample exceeds pi; it will alias",
            AliasingWarning,
            stacklevel=2,
        )
    return omega


def carrier(n, omega_c: float):
    """cos^2 carrier, 0.5 * (1 + cos(2 * omega_c * n)), in [0, 1]."""
    out = 0.5 * (1.0 + np.cos(2.0 * omega_c * np.asarray(n, dtype=float)))
    return float(out) if out.ndim == 0 else out


def automated_task_step(l, k, y_i, n: int, m: TaskModel):
    """Open-loop automated output for one sample.

    The metric feedback filter is stateful and only applied by :func:`run_task`.
    """
    if l is None or k is None or y_i is None:
        return y_i
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        omega = m.automation.omega_c
    return non_automated_task_step(l, k, y_i, m) * carrier(n, omega)


# ---------------------------------------------------------------------------
# whole-signal evaluation


def _as_log(sig: ProductionSignal) -> ProductionSignal:
    return to_log_scale(sig) if sig.scale == "linear" else sig


def run_task(
    m: TaskModel,
    l: ProductionSignal,
    k: ProductionSignal,
    y_i: ProductionSignal | None = None,
    *,
    apply_metric: bool = True,
) -> ProductionSignal:
    """Evaluate a task over whole signals.

    Linear-scale inputs are converted to log scale first, so the gate
    conditions (L > 0, K > 0, Y_i > 0) are decided on the linear values.
    The carrier phase is anchored at the first sample.
    """
    l, k = _as_log(l), _as_log(k)
    n = len(l)
    if len(k) != n or (y_i is not None and len(y_i) != n):
        raise InputError(f"task {m.name!r}: input lengths differ")
    own = m.C + (1.0 - m.alpha) * l.values + m.alpha * k.values
    lk_open = l.on & k.on

    if m.kind is TaskKind.INITIAL:
        values = np.where(lk_open, own, 0.0)
        off = ~lk_open
    else:
        if y_i is None:
            raise InputError(f"task {m.name!r} needs an upstream production signal")
        y_i = _as_log(y_i)
        is_open = lk_open & y_i.on
        base = 0.5 * (own + y_i.values)
        if m.kind is TaskKind.AUTOMATED:
            auto = m.automation
            if apply_metric and auto.metric is not None:
                base = filter_signal(closed_loop_tf(auto.metric), np.where(is_open, base, 0.0))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", AliasingWarning)
                omega = auto.omega_c
            base = base * carrier(np.arange(n), omega)
        values = np.where(is_open, base, y_i.values)
        off = np.where(is_open, False, y_i.off)
    return ProductionSignal(values, l.sample_period, m.name, "log", off)
