"""Event-log ingestion, main-path mining and production-signal sampling.

Logs are read from a flattened CSV with the columns
``case_id,activity,timestamp,resource,lifecycle``.  Timestamps are kept as
timezone-aware UTC datetimes truncated to millisecond precision.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from prodfreq.errors import (
    DegenerateLogError,
    DomainError,
    EmptyLogError,
    FormatError,
    GeneratorSpecError,
    ResolutionError,
    UnknownActivityError,
    UnknownSelectorError,
)

log = logging.getLogger(__name__)

COLUMNS = ("case_id", "activity", "timestamp", "resource", "lifecycle")

# XES attribute names as they appear in common XES -> CSV exports.
XES_COLUMNS = {
    "case:concept:name": "case_id",
    "concept:name": "activity",
    "time:timestamp": "timestamp",
    "org:resource": "resource",
    "lifecycle:transition": "lifecycle",
}

START = "start"
COMPLETE = "complete"

_US_PER_HOUR = 3_600_000_000


@dataclass(frozen=True)
class EventRecord:
    case_id: str
    activity: str
    timestamp: datetime
    resource: str
    lifecycle: str = COMPLETE

    def __post_init__(self):
        if not self.activity:
            raise FormatError("activity must be non-empty", case_id=self.case_id)
        if self.timestamp.tzinfo is None:
            raise FormatError("timestamp must be timezone-aware", case_id=self.case_id)


@dataclass(frozen=True)
class RejectedRow:
    line: int
    reason: str


class EventLog:
    """Immutable, case-indexed collection of event records.

    ``records`` keeps input order. ``cases`` maps each case id to the indices
    of its records, sorted by timestamp with ties broken by input position.
    """

    def __init__(self, records: Iterable[EventRecord], rejected: Sequence[RejectedRow] = ()):
        self.records: tuple[EventRecord, ...] = tuple(records)
        self.rejected: tuple[RejectedRow, ...] = tuple(rejected)
        buckets: dict[str, list[int]] = {}
        for i, rec in enumerate(self.records):
            buckets.setdefault(rec.case_id, []).append(i)
        self.cases: dict[str, tuple[int, ...]] = {
            cid: tuple(sorted(idx, key=lambda i: (self.records[i].timestamp, i)))
            for cid, idx in buckets.items()
        }
        self.activities: frozenset[str] = frozenset(r.activity for r in self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventLog):
            return NotImplemented
        return self.records == other.records

    def __repr__(self) -> str:
        return f"EventLog({len(self.records)} records, {len(self.cases)} cases)"

    def case_records(self, case_id: str) -> list[EventRecord]:
        return [self.records[i] for i in self.cases[case_id]]

    @property
    def start_time(self) -> datetime:
        return min(r.timestamp for r in self.records)

    @property
    def end_time(self) -> datetime:
        return max(r.timestamp for r in self.records)


# ---------------------------------------------------------------------------
# parsing / serialization


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z") or text.endswith("z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        # naive stamps are read as UTC
        ts = ts.replace(tzinfo=timezone.utc)
    ts = ts.astimezone(timezone.utc)
    return ts.replace(microsecond=ts.microsecond - ts.microsecond % 1000)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat(timespec="milliseconds")


def _open_text(source) -> IO[str]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, encoding="utf-8", newline="")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline="")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def parse_log(source, format: str = "csv") -> EventLog:
    """Parse a flattened CSV event log.

    ``source`` may be a path, raw bytes, or a binary/text stream.  With
    ``format="xes-flattened-csv"`` the XES attribute names
    (``case:concept:name`` etc.) are accepted as column headers.

    Rows with an unparseable timestamp or an empty activity are skipped and
    listed in ``EventLog.rejected``.
    """
    if format not in ("csv", "xes-flattened-csv"):
        raise FormatError(f"unknown log format {format!r}")
    stream = _open_text(source)
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyLogError("log is empty") from None
        header = [h.strip().lstrip("﻿") for h in header]
        if format == "xes-flattened-csv":
            header = [XES_COLUMNS.get(h, h) for h in header]
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise FormatError("malformed header", missing=missing, header=header)
        pos = {c: header.index(c) for c in COLUMNS}

        records: list[EventRecord] = []
        rejected: list[RejectedRow] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                rejected.append(RejectedRow(lineno, "short row"))
                continue
            activity = row[pos["activity"]].strip()
            if not activity:
                rejected.append(RejectedRow(lineno, "empty activity"))
                continue
            try:
                ts = parse_timestamp(row[pos["timestamp"]])
            except ValueError as exc:
                rejected.append(RejectedRow(lineno, f"bad timestamp: {exc}"))
                continue
            records.append(
                EventRecord(
                    case_id=row[pos["case_id"]],
                    activity=activity,
                    timestamp=ts,
                    resource=row[pos["resource"]],
                    lifecycle=row[pos["lifecycle"]].strip().lower(),
                )
            )
    finally:
        if stream is source:
            pass
        elif isinstance(stream, io.TextIOWrapper) and not isinstance(source, (str, os.PathLike)):
            stream.detach()  # leave the caller's binary stream open
        else:
            stream.close()

    if not records and not rejected:
        raise EmptyLogError("log has a header but no rows")
    for r in rejected:
        log.warning("rejected row %d: %s", r.line, r.reason)
    return EventLog(records, rejected)


def serialize_log(event_log: EventLog) -> str:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in event_log.records:
        writer.writerow([r.case_id, r.activity, format_timestamp(r.timestamp), r.resource, r.lifecycle])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# sampling period


def _to_us(td: timedelta) -> int:
    return (td.days * 86_400 + td.seconds) * 1_000_000 + td.microseconds


def total_labour_hours(event_log: EventLog) -> float:
    return _total_labour_us(event_log) / _US_PER_HOUR


def _total_labour_us(event_log: EventLog) -> int:
    total = 0
    for idx in event_log.cases.values():
        first = event_log.records[idx[0]].timestamp
        last = event_log.records[idx[-1]].timestamp
        total += _to_us(last - first)
    return total


def compute_sampling_period(event_log: EventLog, rounding: str = "none") -> timedelta:
    """Largest sampling period allowed by the Nyquist-style bound
    ``T_s <= labour_hours / (2 * cases)``.

    Labour hours are the sum over cases of last-minus-first timestamp.  The
    division is done on integer microseconds and floored, so the bound holds
    exactly.  ``rounding="minute"`` further floors to whole minutes (falling
    back to the unrounded value when that would give zero).
    """
    n_cases = len(event_log.cases)
    if n_cases == 0:
        raise DegenerateLogError("log has no cases")
    labour = _total_labour_us(event_log)
    if labour <= 0:
        raise DegenerateLogError("log has zero total labour time")
    ts_us = labour // (2 * n_cases)
    if ts_us <= 0:
        raise DegenerateLogError("sampling period below timestamp resolution")
    if rounding == "minute":
        minute = 60_000_000
        if ts_us >= minute:
            ts_us -= ts_us % minute
    elif rounding != "none":
        raise ValueError(f"unknown rounding mode {rounding!r}")
    return timedelta(microseconds=ts_us)


def parse_duration(text: str) -> timedelta:
    """Parse ``"5m"``, ``"2h"``, ``"30s"``, ``"1d"`` or bare seconds."""
    text = text.strip().lower()
    units = {"s": 1, "m": 60, "h": 3600, "d": 86400}
    if text and text[-1] in units:
        value, scale = float(text[:-1]), units[text[-1]]
    else:
        value, scale = float(text), 1
    if not value > 0:
        raise DomainError(f"duration must be positive: {text!r}")
    return timedelta(seconds=value * scale)


# ---------------------------------------------------------------------------
# main paths


@dataclass(frozen=True)
class MainPath:
    name: str
    initial_activity: str
    final_activity: str
    activity_sequence: tuple[str, ...]
    case_ids: frozenset[str]

    def __post_init__(self):
        seq = self.activity_sequence
        if seq and (seq[0] != self.initial_activity or seq[-1] != self.final_activity):
            raise ValueError("activity_sequence must run from initial to final activity")


@dataclass
class PathExtraction:
    paths: list[MainPath]
    excluded_cases: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter(self.paths)

    def __len__(self) -> int:
        return len(self.paths)

    def __getitem__(self, item):
        if isinstance(item, str):
            for p in self.paths:
                if p.name == item:
                    return p
            raise KeyError(item)
        return self.paths[item]


def _path_window(acts: Sequence[str], initial: str, finals: Iterable[str]):
    """Index of the first ``initial`` and of the first final after it."""
    try:
        i0 = acts.index(initial)
    except ValueError:
        return None
    final_set = set(finals)
    for j in range(i0 + 1, len(acts)):
        if acts[j] in final_set:
            return i0, j
    return None


def extract_main_paths(event_log: EventLog, initial: str, finals: Iterable[str]) -> PathExtraction:
    """Group cases by the first final activity reached after ``initial``.

    Each case lands in at most one path, so path case sets are disjoint.  The
    representative ``activity_sequence`` is the most frequent trace variant
    between initial and final (ties broken lexicographically).
    """
    if initial not in event_log.activities:
        raise UnknownActivityError(f"initial activity {initial!r} not in log", activity=initial)
    finals = list(finals) if not isinstance(finals, (set, frozenset)) else sorted(finals)

    members: dict[str, list[str]] = {f: [] for f in finals}
    variants: dict[str, Counter] = {f: Counter() for f in finals}
    excluded: list[str] = []
    for cid, idx in event_log.cases.items():
        acts = [event_log.records[i].activity for i in idx]
        window = _path_window(acts, initial, finals)
        if window is None:
            excluded.append(cid)
            continue
        i0, j = window
        final = acts[j]
        members[final].append(cid)
        variants[final][_dedupe_consecutive(acts[i0 : j + 1])] += 1

    paths = []
    for f in finals:
        if not members[f]:
            continue
        # most frequent variant; ties go to the lexicographically smallest
        top = max(variants[f].values())
        best = min(v for v, c in variants[f].items() if c == top)
        paths.append(
            MainPath(
                name=f"{initial}_{f}",
                initial_activity=initial,
                final_activity=f,
                activity_sequence=best,
                case_ids=frozenset(members[f]),
            )
        )
    if excluded:
        log.info("%d cases reach none of the final activities", len(excluded))
    return PathExtraction(paths, sorted(excluded))


def _dedupe_consecutive(acts: Sequence[str]) -> tuple[str, ...]:
    # start/complete pairs produce the same activity twice in a row
    out: list[str] = []
    for a in acts:
        if not out or out[-1] != a:
            out.append(a)
    return tuple(out)


# ---------------------------------------------------------------------------
# production signals


@dataclass(frozen=True)
class SamplingConfig:
    sample_period: timedelta
    origin: datetime
    n_bins: int | None = None
    max_bins: int = 5_000_000

    def __post_init__(self):
        if self.sample_period <= timedelta(0):
            raise DomainError("sample_period must be positive")

    @classmethod
    def for_log(cls, event_log: EventLog, sample_period: timedelta | None = None, **kw) -> "SamplingConfig":
        if sample_period is None:
            sample_period = compute_sampling_period(event_log, rounding="minute")
        return cls(sample_period=sample_period, origin=event_log.start_time, **kw)

    def bin_of(self, ts: datetime) -> int:
        return _to_us(ts - self.origin) // _to_us(self.sample_period)

    def bins_for(self, event_log: EventLog) -> int:
        if self.n_bins is not None:
            n = self.n_bins
        else:
            n = self.bin_of(event_log.end_time) + 1
        if n > self.max_bins:
            raise ResolutionError(
                f"{n} bins exceed the configured cap of {self.max_bins}", n_bins=n, max_bins=self.max_bins
            )
        return max(n, 0)


class ProductionSignal:
    """Uniformly sampled production (or labour/capital) sequence.

    ``off`` marks bins where the channel carries no input.  For linear-scale
    signals it is ``values == 0``; in log scale a 0 value may be either ln(1)
    or an off bin, and the mask is what tells them apart.
    """

    def __init__(self, values, sample_period: timedelta, label: str = "", scale: str = "linear", off=None):
        values = np.asarray(values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise DomainError("signal values must be finite", label=label)
        if scale not in ("linear", "log"):
            raise ValueError(f"unknown scale {scale!r}")
        if scale == "linear" and np.any(values < 0):
            raise DomainError("linear-scale signal has negative values", label=label)
        if off is None:
            off = values == 0 if scale == "linear" else np.zeros(values.shape, dtype=bool)
        off = np.asarray(off, dtype=bool).reshape(-1)
        if off.shape != values.shape:
            raise ValueError("off mask length differs from values")
        values.setflags(write=False)
        off.setflags(write=False)
        self.values = values
        self.off = off
        self.sample_period = sample_period
        self.label = label
        self.scale = scale

    def __len__(self) -> int:
        return len(self.values)

    def __repr__(self) -> str:
        return f"ProductionSignal({self.label!r}, n={len(self)}, scale={self.scale}, Ts={self.sample_period})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProductionSignal):
            return NotImplemented
        return (
            self.scale == other.scale
            and self.sample_period == other.sample_period
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.off, other.off)
        )

    @property
    def on(self) -> np.ndarray:
        return ~self.off

    def replace(self, **kw) -> "ProductionSignal":
        args = dict(values=self.values, sample_period=self.sample_period, label=self.label, scale=self.scale, off=self.off)
        args.update(kw)
        return ProductionSignal(**args)


def to_log_scale(sig: ProductionSignal) -> ProductionSignal:
    """ln(v) for v > 0; zero bins map to 0 with the off flag set."""
    if sig.scale != "linear":
        raise DomainError("signal is already log-scale", label=sig.label)
    v = sig.values
    if np.any(v < 0):
        raise DomainError("negative production value", label=sig.label)
    off = v == 0
    out = np.zeros_like(v)
    np.log(v, out=out, where=~off)
    return ProductionSignal(out, sig.sample_period, sig.label, "log", off)


@dataclass(frozen=True)
class _Interval:
    case_id: str
    activity: str
    resource: str
    start: datetime
    end: datetime


def _case_intervals(event_log: EventLog, case_id: str) -> list[_Interval]:
    """Busy intervals of one case.

    A ``start`` event opens an interval closed by the next non-start event of
    the same activity.  Events without a matching start fall back to the span
    since the previous event of the case, attributed to their own resource.
    """
    recs = event_log.case_records(case_id)
    open_starts: dict[str, list[EventRecord]] = defaultdict(list)
    out: list[_Interval] = []
    prev_ts: datetime | None = None
    for r in recs:
        if r.lifecycle == START:
            open_starts[r.activity].append(r)
        else:
            pending = open_starts.get(r.activity)
            if pending:
                s = pending.pop(0)
                out.append(_Interval(case_id, r.activity, r.resource or s.resource, s.timestamp, r.timestamp))
            else:
                begin = prev_ts if prev_ts is not None else r.timestamp
                out.append(_Interval(case_id, r.activity, r.resource, begin, r.timestamp))
        prev_ts = r.timestamp
    for pending in open_starts.values():
        for s in pending:
            out.append(_Interval(case_id, s.activity, s.resource, s.timestamp, s.timestamp))
    return out


def _path_span(event_log: EventLog, path: MainPath, case_id: str):
    recs = event_log.case_records(case_id)
    acts = [r.activity for r in recs]
    window = _path_window(acts, path.initial_activity, [path.final_activity])
    if window is None:
        return None
    i0, j = window
    # include the complete event of the final activity if it follows directly
    while j + 1 < len(recs) and recs[j + 1].activity == path.final_activity and recs[j].lifecycle == START:
        j += 1
    return recs[i0].timestamp, recs[j].timestamp


def _resolve_selector(event_log: EventLog, selector) -> MainPath | str:
    if isinstance(selector, MainPath):
        unknown = [c for c in selector.case_ids if c not in event_log.cases]
        if unknown or not selector.case_ids:
            raise UnknownSelectorError(f"path {selector.name!r} does not match the log", unknown_cases=len(unknown))
        return selector
    if isinstance(selector, str) and selector in event_log.activities:
        return selector
    raise UnknownSelectorError(f"selector {selector!r} matches nothing in the log")


def _selected_intervals(event_log: EventLog, selector, exclude: frozenset[str]) -> list[_Interval]:
    if isinstance(selector, MainPath):
        out = []
        for cid in sorted(selector.case_ids):
            span = _path_span(event_log, selector, cid)
            if span is None:
                continue
            lo, hi = span
            out.extend(
                iv
                for iv in _case_intervals(event_log, cid)
                if iv.activity not in exclude and iv.end >= lo and iv.start <= hi
            )
        return out
    out = []
    for cid in event_log.cases:
        out.extend(iv for iv in _case_intervals(event_log, cid) if iv.activity == selector)
    return out


def _hours(cfg: SamplingConfig, ts: datetime) -> float:
    return _to_us(ts - cfg.origin) / _US_PER_HOUR


def _busy_hours_per_bin(cfg: SamplingConfig, intervals: Sequence[_Interval], n_bins: int) -> np.ndarray:
    if n_bins == 0:
        return np.zeros(0)
    ts_h = _to_us(cfg.sample_period) / _US_PER_HOUR
    edges = np.arange(n_bins + 1) * ts_h
    if not intervals:
        return np.zeros(n_bins)
    starts = np.sort([_hours(cfg, iv.start) for iv in intervals])
    ends = np.sort([_hours(cfg, iv.end) for iv in intervals])

    def ramp(points: np.ndarray) -> np.ndarray:
        # sum_i max(0, t - p_i) evaluated at every edge t
        csum = np.concatenate([[0.0], np.cumsum(points)])
        k = np.searchsorted(points, edges, side="left")
        return k * edges - csum[k]

    cumulative = ramp(starts) - ramp(ends)
    return np.clip(np.diff(cumulative), 0.0, None)


def _active_resources_per_bin(cfg: SamplingConfig, intervals: Sequence[_Interval], n_bins: int) -> np.ndarray:
    per_resource: dict[str, np.ndarray] = {}
    for iv in intervals:
        b0 = max(cfg.bin_of(iv.start), 0)
        b1 = min(cfg.bin_of(iv.end), n_bins - 1)
        if b1 < b0:
            continue
        diff = per_resource.setdefault(iv.resource, np.zeros(n_bins + 1, dtype=np.int64))
        diff[b0] += 1
        diff[b1 + 1] -= 1
    total = np.zeros(n_bins)
    for diff in per_resource.values():
        total += np.cumsum(diff[:-1]) > 0
    return total


def sample_production(
    event_log: EventLog,
    selector,
    cfg: SamplingConfig,
    channel: str = "Y",
    *,
    capital: Sequence[float] | None = None,
    exclude: Iterable[str] = (),
) -> ProductionSignal:
    """Materialize one channel of a task or path as a linear-scale signal.

    channel ``Y``
        For an activity, completion events (any lifecycle other than
        ``start``) counted per bin.  For a :class:`MainPath`, the number of
        path cases alive in each bin, a case being alive from its initial to
        its final activity.  Time spent in ``exclude`` activities is carved
        out of the alive span.
    channel ``L``
        Resource-busy hours per bin.
    channel ``K``
        Capital proxy: distinct resources active per bin, unless a per-bin
        ``capital`` sequence is supplied.
    """
    channel = channel.upper()
    if channel not in ("Y", "L", "K"):
        raise ValueError(f"unknown channel {channel!r}")
    sel = _resolve_selector(event_log, selector)
    exclude = frozenset(exclude)
    n_bins = cfg.bins_for(event_log)
    name = sel.name if isinstance(sel, MainPath) else sel
    label = f"{name}:{channel}"

    if channel == "K" and capital is not None:
        values = np.asarray(capital, dtype=float)
        if len(values) != n_bins:
            raise ResolutionError("capital override length differs from bin count", expected=n_bins, got=len(values))
        return ProductionSignal(values, cfg.sample_period, label)

    if channel == "Y":
        values = np.zeros(n_bins)
        if isinstance(sel, MainPath):
            values = _path_aliveness(event_log, sel, cfg, n_bins, exclude)
        else:
            for r in event_log.records:
                if r.activity == sel and r.lifecycle != START:
                    b = cfg.bin_of(r.timestamp)
                    if 0 <= b < n_bins:
                        values[b] += 1
        return ProductionSignal(values, cfg.sample_period, label)

    intervals = _selected_intervals(event_log, sel, exclude)
    if channel == "L":
        values = _busy_hours_per_bin(cfg, intervals, n_bins)
    else:
        values = _active_resources_per_bin(cfg, intervals, n_bins)
    return ProductionSignal(values, cfg.sample_period, label)


def _path_aliveness(event_log: EventLog, path: MainPath, cfg: SamplingConfig, n_bins: int, exclude) -> np.ndarray:
    diff = np.zeros(n_bins + 1)
    for cid in sorted(path.case_ids):
        span = _path_span(event_log, path, cid)
        if span is None:
            continue
        pieces = [span]
        if exclude:
            cuts = sorted(
                (iv.start, iv.end) for iv in _case_intervals(event_log, cid) if iv.activity in exclude and iv.end > iv.start
            )
            pieces = _subtract(span, cuts)
        last = -1
        for lo, hi in pieces:
            b0 = max(cfg.bin_of(lo), last + 1, 0)
            b1 = min(cfg.bin_of(hi), n_bins - 1)
            if b1 >= b0:
                diff[b0] += 1
                diff[b1 + 1] -= 1
                last = b1
    return np.cumsum(diff[:-1])


def _subtract(span, cuts):
    lo, hi = span
    if lo == hi:
        return [span]
    out = []
    cur = lo
    for c0, c1 in cuts:
        if c1 <= cur or c0 >= hi:
            continue
        if c0 > cur:
            out.append((cur, c0))
        cur = max(cur, c1)
    if cur < hi:
        out.append((cur, hi))
    return out


# ---------------------------------------------------------------------------
# synthetic logs

_DISTRIBUTIONS = {
    "constant": ("hours",),
    "exponential": ("mean_hours",),
    "uniform": ("low_hours", "high_hours"),
    "lognormal": ("mu", "sigma"),
}


def _check_distribution(name: str, d: Mapping) -> None:
    kind = d.get("dist")
    if kind not in _DISTRIBUTIONS:
        raise GeneratorSpecError(f"{name}: unknown distribution {kind!r}")
    for p in _DISTRIBUTIONS[kind]:
        if p not in d:
            raise GeneratorSpecError(f"{name}: {kind} needs parameter {p!r}")
        if not isinstance(d[p], (int, float)) or not math.isfinite(d[p]):
            raise GeneratorSpecError(f"{name}: parameter {p!r} must be a finite number")
    if kind == "constant" and d["hours"] < 0:
        raise GeneratorSpecError(f"{name}: constant duration must be >= 0")
    if kind == "exponential" and d["mean_hours"] <= 0:
        raise GeneratorSpecError(f"{name}: mean_hours must be > 0")
    if kind == "uniform" and not 0 <= d["low_hours"] <= d["high_hours"]:
        raise GeneratorSpecError(f"{name}: need 0 <= low_hours <= high_hours")
    if kind == "lognormal" and d["sigma"] < 0:
        raise GeneratorSpecError(f"{name}: sigma must be >= 0")


def _draw(rng: np.random.Generator, d: Mapping) -> float:
    kind = d["dist"]
    if kind == "constant":
        return float(d["hours"])
    if kind == "exponential":
        return float(rng.exponential(d["mean_hours"]))
    if kind == "uniform":
        return float(rng.uniform(d["low_hours"], d["high_hours"]))
    return float(rng.lognormal(d["mu"], d["sigma"]))


@dataclass
class GeneratorSpec:
    """Parameters for :func:`generate_synthetic_log` (see ``schemas/generator.schema.json``)."""

    seed: int
    case_count: int
    paths: list[dict]
    durations: dict[str, dict] = field(default_factory=dict)
    default_duration: dict = field(default_factory=lambda: {"dist": "exponential", "mean_hours": 1.0})
    arrival: dict = field(default_factory=lambda: {"dist": "exponential", "mean_hours": 1.0})
    gap: dict = field(default_factory=lambda: {"dist": "constant", "hours": 0.0})
    resources: dict[str, list[str]] = field(default_factory=dict)
    resource_pool: int = 5
    split: str = "exact"
    start: str = "2020-01-01T00:00:00+00:00"

    @classmethod
    def from_dict(cls, doc: Mapping) -> "GeneratorSpec":
        import jsonschema
        from importlib import resources

        schema = json.loads(resources.files("prodfreq.schemas").joinpath("generator.schema.json").read_text())
        try:
            jsonschema.validate(dict(doc), schema)
        except jsonschema.ValidationError as exc:
            raise GeneratorSpecError(f"generator spec invalid: {exc.message}") from None
        try:
            spec = cls(**doc)
        except TypeError as exc:
            raise GeneratorSpecError(str(exc)) from None
        spec.validate()
        return spec

    def validate(self) -> None:
        if not isinstance(self.case_count, int) or self.case_count < 1:
            raise GeneratorSpecError("case_count must be a positive integer")
        if not self.paths:
            raise GeneratorSpecError("at least one path is required")
        for p in self.paths:
            if not p.get("activities"):
                raise GeneratorSpecError(f"path {p.get('name')!r} has no activities")
            if p.get("weight", 1.0) < 0:
                raise GeneratorSpecError(f"path {p.get('name')!r} has a negative weight")
        if sum(p.get("weight", 1.0) for p in self.paths) <= 0:
            raise GeneratorSpecError("path weights sum to zero")
        if self.split not in ("exact", "random"):
            raise GeneratorSpecError("split must be 'exact' or 'random'")
        if self.resource_pool < 1:
            raise GeneratorSpecError("resource_pool must be >= 1")
        _check_distribution("arrival", self.arrival)
        _check_distribution("gap", self.gap)
        _check_distribution("default_duration", self.default_duration)
        for act, d in self.durations.items():
            _check_distribution(f"durations[{act}]", d)
        try:
            parse_timestamp(self.start)
        except ValueError as exc:
            raise GeneratorSpecError(f"bad start timestamp: {exc}") from None


@dataclass
class SyntheticLog:
    log: EventLog
    truth: dict


def _allocate_exact(weights: np.ndarray, total: int) -> np.ndarray:
    # largest-remainder apportionment
    quotas = weights / weights.sum() * total
    counts = np.floor(quotas).astype(int)
    order = np.argsort(-(quotas - counts), kind="stable")
    counts[order[: total - counts.sum()]] += 1
    return counts


def generate_synthetic_log(spec: GeneratorSpec | Mapping) -> SyntheticLog:
    """Deterministic synthetic log plus ground-truth metadata.

    Cases arrive with inter-arrival times drawn from ``spec.arrival`` and walk
    their path's activities sequentially; every activity instance emits a
    ``start`` and a ``complete`` record.
    """
    if not isinstance(spec, GeneratorSpec):
        spec = GeneratorSpec.from_dict(spec)
    else:
        spec.validate()
    rng = np.random.default_rng(spec.seed)
    weights = np.array([p.get("weight", 1.0) for p in spec.paths], dtype=float)
    names = [p.get("name", f"path{i}") for i, p in enumerate(spec.paths)]

    if spec.split == "exact":
        counts = _allocate_exact(weights, spec.case_count)
        assignment = np.repeat(np.arange(len(names)), counts)
        rng.shuffle(assignment)
    else:
        assignment = rng.choice(len(names), size=spec.case_count, p=weights / weights.sum())

    start = parse_timestamp(spec.start)
    width = len(str(spec.case_count))
    records: list[EventRecord] = []
    t_arrival = 0.0
    for case_no, path_idx in enumerate(assignment):
        if case_no > 0:
            t_arrival += _draw(rng, spec.arrival)
        case_id = f"case_{case_no:0{width}d}"
        t = t_arrival
        acts = spec.paths[path_idx]["activities"]
        for k, act in enumerate(acts):
            if k > 0:
                t += _draw(rng, spec.gap)
            pool = spec.resources.get(act) or [f"R{j}" for j in range(spec.resource_pool)]
            res = pool[int(rng.integers(len(pool)))]
            dur = _draw(rng, spec.durations.get(act, spec.default_duration))
            t0 = start + timedelta(milliseconds=round(t * 3_600_000))
            t += dur
            t1 = start + timedelta(milliseconds=round(t * 3_600_000))
            records.append(EventRecord(case_id, act, t0, res, START))
            records.append(EventRecord(case_id, act, t1, res, COMPLETE))

    realized = np.bincount(assignment, minlength=len(names))
    arrival_rate = 1.0 / _mean_of(spec.arrival) if _mean_of(spec.arrival) > 0 else math.inf
    truth = {
        "seed": spec.seed,
        "case_count": spec.case_count,
        "split_mode": spec.split,
        "path_split": {
            n: {
                "weight": float(w / weights.sum()),
                "count": int(c),
                "fraction": float(c / spec.case_count),
                "activities": list(spec.paths[i]["activities"]),
            }
            for i, (n, w, c) in enumerate(zip(names, weights, realized))
        },
        "arrival_rate_per_hour": arrival_rate,
        "activity_completion_rate_per_hour": {
            act: arrival_rate * float(sum(w for p, w in zip(spec.paths, weights / weights.sum()) if act in p["activities"]))
            for act in sorted({a for p in spec.paths for a in p["activities"]})
        },
    }
    return SyntheticLog(EventLog(records), truth)


def _mean_of(d: Mapping) -> float:
    kind = d["dist"]
    if kind == "constant":
        return float(d["hours"])
    if kind == "exponential":
        return float(d["mean_hours"])
    if kind == "uniform":
        return (d["low_hours"] + d["high_hours"]) / 2
    return math.exp(d["mu"] + d["sigma"] ** 2 / 2)


def rate_per_bin(truth: Mapping, sample_period: timedelta, activity: str | None = None) -> float:
    """Expected events per bin implied by the generator ground truth."""
    hours = sample_period.total_seconds() / 3600
    if activity is None:
        return truth["arrival_rate_per_hour"] * hours
    return truth["activity_completion_rate_per_hour"][activity] * hours
