"""Z-domain analysis of the accuracy-metric feedback loop.

The accuracy ramp ``A[n] = R_o (1 - e^{-n/tau})`` has the Z-transform

    G(z) = R_o (1 - a) z / ((z - 1)(z - a)),    a = e^{-1/tau}

and closing a unity negative-feedback loop around it gives

    H(z) = 1 / (1 + G(z)) = (z - 1)(z - a) / ((z - 1)(z - a) + R_o (1 - a) z).

Multiplying numerator and denominator by e^{1/tau} yields the closed form
used throughout the package:

    num = e^{1/tau} z^2 - (e^{1/tau} + 1) z + 1
    den = e^{1/tau} z^2 + ((e^{1/tau} - 1) R_o - (e^{1/tau} + 1)) z + 1

Since the constant term of ``den`` is 1 and the leading term e^{1/tau}, a
complex pole pair always has magnitude e^{-1/(2 tau)}.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from datetime import timedelta
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from prodfreq.errors import (
    ConversionError,
    DegeneratePolynomialError,
    NoResonanceError,
    ParameterError,
)

log = logging.getLogger(__name__)

RESONANCE_GRID = 4096
RESONANCE_TOL = 1e-6


@dataclass(frozen=True)
class MetricConfig:
    R_o: float
    tau: float

    def __post_init__(self):
        if not 0.0 < self.R_o <= 1.0:
            raise ParameterError("R_o must lie in (0, 1]", R_o=self.R_o)
        if not self.tau > 0:
            raise ParameterError("tau must be positive", tau=self.tau)

    def to_dict(self) -> dict:
        return {"R_o": self.R_o, "tau": self.tau}


def _trim(coeffs: Sequence[float]) -> tuple[float, ...]:
    c = [float(x) for x in coeffs]
    while len(c) > 1 and c[0] == 0.0:
        c.pop(0)
    return tuple(c) if c else (0.0,)


@dataclass(frozen=True)
class TransferFunction:
    """Rational function of z; coefficients in descending powers."""

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __post_init__(self):
        num, den = _trim(self.num), _trim(self.den)
        if not all(math.isfinite(x) for x in num + den):
            raise ParameterError("transfer-function coefficients must be finite")
        if den[0] == 0.0:
            raise DegeneratePolynomialError("denominator is the zero polynomial")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __call__(self, z):
        return np.polyval(self.num, z) / np.polyval(self.den, z)

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.num)

    def normalized(self) -> "TransferFunction":
        """Pad to equal length and scale so the leading denominator term is 1."""
        n = max(len(self.num), len(self.den))
        num = (0.0,) * (n - len(self.num)) + self.num
        den = (0.0,) * (n - len(self.den)) + self.den
        lead = next(d for d in den if d != 0.0)
        return _RawTF(tuple(x / lead for x in num), tuple(x / lead for x in den))

    def is_identity(self, tol: float = 1e-14) -> bool:
        a = self.normalized()
        return all(abs(x - y) <= tol for x, y in zip(a.num, a.den))

    def to_dict(self) -> dict:
        return {"num": list(self.num), "den": list(self.den)}


class _RawTF(TransferFunction):
    """Padded, normalized coefficients; skips leading-zero trimming."""

    def __post_init__(self):
        pass


IDENTITY = TransferFunction((1.0,), (1.0,))


# ---------------------------------------------------------------------------
# accuracy metric


def accuracy_time(n, m: MetricConfig):
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ParameterError("sample index must be non-negative")
    out = m.R_o * -np.expm1(-n / m.tau)
    return float(out) if out.ndim == 0 else out


def accuracy_tf(m: MetricConfig) -> TransferFunction:
    a = math.exp(-1.0 / m.tau)
    gain = m.R_o * -math.expm1(-1.0 / m.tau)  # R_o (1 - a)
    return TransferFunction((gain, 0.0), (1.0, -(1.0 + a), a))


def feedback(g: TransferFunction) -> TransferFunction:
    """Unity negative feedback around ``g``: 1 / (1 + g)."""
    n = max(len(g.num), len(g.den))
    num = np.pad(g.num, (n - len(g.num), 0))
    den = np.pad(g.den, (n - len(g.den), 0))
    return TransferFunction(tuple(den), tuple(den + num))


def closed_loop_tf(m: MetricConfig) -> TransferFunction:
    e = math.exp(1.0 / m.tau)
    num = (e, -(e + 1.0), 1.0)
    den = (e, math.expm1(1.0 / m.tau) * m.R_o - (e + 1.0), 1.0)
    tf = TransferFunction(num, den)
    if tf.is_identity():
        return IDENTITY
    return tf


# ---------------------------------------------------------------------------
# roots and stability


def companion_matrix(coeffs: Sequence[float]) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float)
    c = c / c[0]
    n = len(c) - 1
    mat = np.zeros((n, n))
    mat[0, :] = -c[1:]
    if n > 1:
        mat[1:, :-1] = np.eye(n - 1)
    return mat


def _quadratic_roots(a: float, b: float, c: float) -> list[complex]:
    disc = b * b - 4 * a * c
    if disc >= 0:
        # avoid cancellation: compute the larger-magnitude root first
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        if q == 0.0:
            return [0j, 0j]
        return [complex(q / a), complex(c / q)]
    re = -b / (2 * a)
    im = math.sqrt(-disc) / (2 * a)
    return [complex(re, im), complex(re, -im)]


def polynomial_roots(coeffs: Sequence[float], polish: int = 3) -> list[complex]:
    """Roots of a real polynomial (descending coefficients).

    Eigenvalues of the companion matrix, refined by a few Newton steps and
    symmetrized into exact conjugate pairs.  Quadratics use the stable
    closed-form formula instead.
    """
    c = list(_trim(coeffs))
    if all(x == 0.0 for x in c):
        raise DegeneratePolynomialError("cannot take roots of the zero polynomial")
    n_zero = 0
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
        n_zero += 1
    deg = len(c) - 1
    if deg == 0:
        roots: list[complex] = []
    elif deg == 1:
        roots = [complex(-c[1] / c[0])]
    elif deg == 2:
        roots = _quadratic_roots(*c)
    else:
        roots = [complex(r) for r in np.linalg.eigvals(companion_matrix(c))]
        dc = np.polyder(c)
        for _ in range(polish):
            roots = [_newton_step(c, dc, r) for r in roots]
        roots = _symmetrize(roots)
    return sorted(roots + [0j] * n_zero, key=lambda z: (round(z.real, 12), round(z.imag, 12)))


def _newton_step(c, dc, r: complex) -> complex:
    p = np.polyval(c, r)
    d = np.polyval(dc, r)
    with np.errstate(over="ignore", invalid="ignore"):
        step = p / d if d != 0 else complex("nan")
    if not cmath.isfinite(step):
        return r
    nxt = r - step
    return nxt if abs(np.polyval(c, nxt)) <= abs(p) else r


def _symmetrize(roots: list[complex], tol: float = 1e-8) -> list[complex]:
    out: list[complex] = []
    remaining = list(roots)
    while remaining:
        r = remaining.pop(0)
        if abs(r.imag) <= tol * max(1.0, abs(r)):
            out.append(complex(r.real, 0.0))
            continue
        j = min(range(len(remaining)), key=lambda i: abs(remaining[i] - r.conjugate()), default=None)
        if j is None:
            out.append(r)
            continue
        partner = remaining.pop(j)
        re = 0.5 * (r.real + partner.real)
        im = 0.5 * (abs(r.imag) + abs(partner.imag))
        out.extend([complex(re, im), complex(re, -im)])
    return out


@dataclass(frozen=True)
class StabilityReport:
    poles: tuple[complex, ...]
    zeros: tuple[complex, ...]
    stable: bool
    max_pole_magnitude: float
    resonance_frequency: float | None = None

    def to_dict(self, sample_period: timedelta | None = None) -> dict:
        def pts(rs):
            return [{"re": r.real, "im": r.imag} for r in rs]

        res = None
        if self.resonance_frequency is not None:
            res = {"rad_per_sample": self.resonance_frequency}
            res.update(frequency_units(self.resonance_frequency, sample_period))
        return {
            "poles": pts(self.poles),
            "zeros": pts(self.zeros),
            "stable": self.stable,
            "max_pole_magnitude": self.max_pole_magnitude,
            "resonance": res,
        }

    def pz_rows(self) -> list[tuple[float, float, str]]:
        return [(p.real, p.imag, "pole") for p in self.poles] + [(z.real, z.imag, "zero") for z in self.zeros]


def poles_zeros(tf: TransferFunction, with_resonance: bool = True) -> StabilityReport:
    if len(tf.den) < 2:
        raise DegeneratePolynomialError("denominator must have degree >= 1")
    if tf.is_zero:
        raise DegeneratePolynomialError("numerator is the zero polynomial")
    poles = polynomial_roots(tf.den)
    zeros = polynomial_roots(tf.num)
    max_mag = max(abs(p) for p in poles)
    stable = max_mag < 1.0
    omega_r = None
    if with_resonance and stable:
        try:
            omega_r = resonance_frequency(tf)
        except NoResonanceError:
            omega_r = None
    return StabilityReport(tuple(poles), tuple(zeros), stable, max_mag, omega_r)


# ---------------------------------------------------------------------------
# frequency response


def frequency_response(tf: TransferFunction, omega):
    """H(e^{jw}).  Evaluating on a unit-circle pole yields complex infinity."""
    z = np.exp(1j * np.asarray(omega, dtype=float))
    num = np.polyval(tf.num, z)
    den = np.polyval(tf.den, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(den == 0, complex(math.inf, 0.0), num / np.where(den == 0, 1.0, den))
    if np.any(den == 0):
        log.warning("frequency response evaluated on a pole; response is infinite")
    return complex(h) if h.ndim == 0 else h


def resonance_frequency(tf: TransferFunction, grid: int = RESONANCE_GRID, tol: float = RESONANCE_TOL) -> float:
    """Frequency (rad/sample) of the interior maximum of |H| on (0, pi].

    A coarse grid locates the peak; golden-section search refines it.
    """
    if len(tf.den) > 1 and max(abs(p) for p in polynomial_roots(tf.den)) >= 1.0:
        raise ParameterError("resonance search requires a stable system")
    w = np.linspace(math.pi / grid, math.pi, grid)
    mag = np.abs(frequency_response(tf, w))
    i = int(np.argmax(mag))
    spread = float(mag.max() - mag.min())
    if spread <= 1e-12 * max(1.0, float(mag.max())) or i == 0 or i == grid - 1:
        raise NoResonanceError("magnitude response has no interior peak")
    res = minimize_scalar(
        lambda x: -abs(frequency_response(tf, x)),
        bracket=(w[i - 1], w[i], w[i + 1]),
        method="golden",
        tol=tol * 1e-3,
    )
    omega = float(res.x)
    if not w[i - 1] <= omega <= w[i + 1]:
        omega = float(w[i])
    return omega


# ---------------------------------------------------------------------------
# units

UNITS = ("rad_per_sample", "cycles_per_sample", "hz_paper", "requests_per_hour")


def unit_convert(value: float, from_unit: str, to_unit: str, sample_period: timedelta | float | None = None) -> float:
    """Convert between frequency units.

    One paper-Hz is one event per sampling period, so it equals one cycle per
    sample numerically; ``requests_per_hour`` scales by samples per hour.
    ``sample_period`` is a timedelta or seconds.
    """
    if from_unit not in UNITS or to_unit not in UNITS:
        raise ConversionError(f"unknown unit pair {from_unit!r} -> {to_unit!r}")
    if isinstance(sample_period, timedelta):
        ts = sample_period.total_seconds()
    else:
        ts = sample_period
    needs_ts = "requests_per_hour" in (from_unit, to_unit) and from_unit != to_unit
    if needs_ts and (ts is None or not ts > 0):
        raise ConversionError("a positive sample period is required for requests_per_hour")

    if from_unit == "rad_per_sample":
        cycles = value / (2 * math.pi)
    elif from_unit == "requests_per_hour":
        cycles = value * ts / 3600.0
    else:
        cycles = value

    if to_unit == "rad_per_sample":
        return cycles * 2 * math.pi
    if to_unit == "requests_per_hour":
        return cycles * 3600.0 / ts
    return cycles


def frequency_units(rad_per_sample: float, sample_period: timedelta | None = None) -> dict:
    out = {
        "cycles_per_sample": unit_convert(rad_per_sample, "rad_per_sample", "cycles_per_sample"),
        "paper_hz": unit_convert(rad_per_sample, "rad_per_sample", "hz_paper"),
    }
    out["requests_per_hour"] = (
        unit_convert(rad_per_sample, "rad_per_sample", "requests_per_hour", sample_period)
        if sample_period is not None
        else None
    )
    return out


# ---------------------------------------------------------------------------
# time-domain realization


def filter_signal(tf: TransferFunction, x) -> np.ndarray:
    """Run ``x`` through ``tf`` as a causal difference equation with zero state.

    The transfer function must be proper (deg num <= deg den).
    """
    if len(tf.num) > len(tf.den):
        raise ParameterError("improper transfer function cannot be realized causally")
    norm = tf.normalized()
    b, a = norm.num, norm.den
    x = np.asarray(x, dtype=float)
    y = np.zeros_like(x)
    order = len(a) - 1
    for n in range(len(x)):
        acc = 0.0
        for i in range(order + 1):
            if n - i < 0:
                break
            acc += b[i] * x[n - i]
            if i:
                acc -= a[i] * y[n - i]
        y[n] = acc
    return y


def impulse_response(tf: TransferFunction, n: int) -> np.ndarray:
    """First ``n`` samples of the inverse Z-transform, by power-series long division."""
    norm = tf.normalized()
    b, a = list(norm.num), list(norm.den)
    out = np.zeros(n)
    for k in range(n):
        acc = b[k] if k < len(b) else 0.0
        for i in range(1, min(k, len(a) - 1) + 1):
            acc -= a[i] * out[k - i]
        out[k] = acc
    return out
