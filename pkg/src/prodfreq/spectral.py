"""Magnitude spectra and productivity-as-frequency summaries.

``f_m`` (medium frequency) is the spectral centroid of the one-sided
magnitude spectrum and ``f_0`` (fundamental) the frequency of its largest
peak, both excluding DC and both in cycles/sample.  The signal mean is
removed first so the cumulative trend does not swamp periodic structure.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from prodfreq.errors import DomainError, PairingError, UndefinedImprovementError
from prodfreq.eventlog import ProductionSignal

TIE_RTOL = 1e-9


@dataclass(frozen=True)
class SpectrumSummary:
    frequencies: np.ndarray
    magnitudes: np.ndarray
    f_m: float
    f_0: float
    n_samples: int
    empty: bool = False
    label: str = ""

    def to_dict(self, include_spectrum: bool = False) -> dict:
        out = {"label": self.label, "f_m": self.f_m, "f_0": self.f_0, "n_samples": self.n_samples, "empty": self.empty}
        if include_spectrum:
            out["frequencies"] = self.frequencies.tolist()
            out["magnitudes"] = self.magnitudes.tolist()
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frequency", "magnitude"])
        for f, m in zip(self.frequencies, self.magnitudes):
            w.writerow([repr(float(f)), repr(float(m))])
        return buf.getvalue()


def _values(sig) -> tuple[np.ndarray, str]:
    if isinstance(sig, ProductionSignal):
        return sig.values, sig.label
    return np.asarray(sig, dtype=float), ""


def spectrum(sig: ProductionSignal | Sequence[float], window: str = "hann") -> SpectrumSummary:
    x, label = _values(sig)
    n = len(x)
    if n < 4:
        raise DomainError("spectrum needs at least 4 samples", n=n)
    x = x - x.mean()
    if window == "hann":
        x = x * np.hanning(n)
    elif window != "rect":
        raise ValueError(f"unknown window {window!r}")
    mags = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(n)
    pos_f, pos_m = freqs[1:], mags[1:]
    total = float(pos_m.sum())
    if total <= 1e-12 * max(1.0, float(np.abs(x).max(initial=0.0))) * n:
        return SpectrumSummary(freqs, mags, 0.0, 0.0, n, empty=True, label=label)
    f_m = float(pos_f @ pos_m / total)
    peak = float(pos_m.max())
    f_0 = float(pos_f[np.flatnonzero(pos_m >= peak * (1 - TIE_RTOL))[0]])
    return SpectrumSummary(freqs, mags, f_m, f_0, n, label=label)


def kappa(f_before: float, f_after: float) -> float:
    """Relative change in frequency, as a fraction."""
    if f_before == 0:
        raise UndefinedImprovementError("improvement undefined for a zero reference frequency")
    return (f_after - f_before) / f_before


@dataclass
class ComparisonRow:
    path: str
    f_m_before: float
    f_m_after: float
    f_0_before: float
    f_0_after: float
    kappa_m: float | None
    kappa_0: float | None
    filtered_variant: bool = False

    def as_list(self) -> list:
        return [
            self.path,
            self.f_m_before,
            self.f_m_after,
            self.f_0_before,
            self.f_0_after,
            self.kappa_m,
            self.kappa_0,
            self.filtered_variant,
        ]


COMPARISON_COLUMNS = (
    "path",
    "f_m_before",
    "f_m_after",
    "f_0_before",
    "f_0_after",
    "kappa_m",
    "kappa_0",
    "filtered_variant",
)


@dataclass
class ComparisonTable:
    rows: list[ComparisonRow] = field(default_factory=list)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def get(self, path: str, filtered: bool = False) -> ComparisonRow:
        for r in self.rows:
            if r.path == path and r.filtered_variant == filtered:
                return r
        raise KeyError(path)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COMPARISON_COLUMNS)
        for r in self.rows:
            w.writerow(["" if v is None else v for v in r.as_list()])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps([dict(zip(COMPARISON_COLUMNS, r.as_list())) for r in self.rows], indent=2)


def _safe_kappa(before: float, after: float) -> float | None:
    try:
        return kappa(before, after)
    except UndefinedImprovementError:
        return None


def compare_logs(
    before: Mapping[str, SpectrumSummary],
    after: Mapping[str, SpectrumSummary],
    pairing: Mapping[str, str] | None = None,
    filtered_after: Mapping[str, SpectrumSummary] | None = None,
) -> ComparisonTable:
    """Per-path f_m/f_0 and their kappas between two variants of a process.

    ``pairing`` maps each before-path to its after-path (identity when
    omitted).  ``filtered_after`` holds after-side summaries computed with
    manual tasks removed; each yields an extra row flagged
    ``filtered_variant``.  A kappa is ``None`` when the before frequency is 0.
    """
    if pairing is None:
        pairing = {p: p for p in before}
    table = ComparisonTable()
    for b_name, a_name in pairing.items():
        if b_name not in before or a_name not in after:
            raise PairingError(f"unmatched path pair {b_name!r} -> {a_name!r}")
        variants = [(after[a_name], False)]
        if filtered_after is not None:
            if a_name not in filtered_after:
                raise PairingError(f"filtered summary missing for {a_name!r}")
            variants.append((filtered_after[a_name], True))
        b = before[b_name]
        for a, flag in variants:
            table.rows.append(
                ComparisonRow(
                    path=b_name,
                    f_m_before=b.f_m,
                    f_m_after=a.f_m,
                    f_0_before=b.f_0,
                    f_0_after=a.f_0,
                    kappa_m=_safe_kappa(b.f_m, a.f_m),
                    kappa_0=_safe_kappa(b.f_0, a.f_0),
                    filtered_variant=flag,
                )
            )
    return table
