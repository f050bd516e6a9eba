"""Business-process networks of task models and their simulation.

A network is a DAG of :class:`~prodfreq.ltitasks.TaskModel` nodes with a
single Initial task as entry.  Simulation walks the DAG in topological order;
each task reads its predecessor's output at the same sample index unless an
edge carries an explicit delay.  Tasks with several predecessors take the
equal-weight geometric mean (in log scale, the average) of those that are on.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from datetime import timedelta
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import jsonschema
import numpy as np

from prodfreq.control import StabilityReport, closed_loop_tf, frequency_units, poles_zeros
from prodfreq.econ import CobbDouglasFit, compose_geometric, fit_cobb_douglas
from prodfreq.errors import (
    InputError,
    ParameterError,
    SchemaError,
    TopologyError,
    UnitError,
)
from prodfreq.eventlog import EventLog, ProductionSignal, SamplingConfig, sample_production, to_log_scale
from prodfreq.ltitasks import Automation, MetricConfig, TaskKind, TaskModel, run_task
from prodfreq.spectral import ComparisonTable, SpectrumSummary, compare_logs, kappa, spectrum


def _schema() -> dict:
    text = resources.files("prodfreq.schemas").joinpath("network.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    delay: int = 0


@dataclass
class BPNetwork:
    tasks: dict[str, TaskModel]
    edges: list[Edge]
    paths: dict[str, list[str]]
    entry: str

    def __post_init__(self):
        self.validate()

    def predecessors(self, task: str) -> list[Edge]:
        return [e for e in self.edges if e.dst == task]

    def successors(self, task: str) -> list[Edge]:
        return [e for e in self.edges if e.src == task]

    def validate(self) -> None:
        for e in self.edges:
            for t in (e.src, e.dst):
                if t not in self.tasks:
                    raise TopologyError(f"edge references unknown task {t!r}")
            if e.delay < 0:
                raise TopologyError("edge delays must be non-negative")
        initials = [n for n, t in self.tasks.items() if t.kind is TaskKind.INITIAL]
        if len(initials) != 1:
            raise TopologyError(f"network needs exactly one Initial task, found {len(initials)}", initial=initials)
        if self.entry != initials[0]:
            raise TopologyError(f"entry {self.entry!r} is not the Initial task {initials[0]!r}")
        if self.predecessors(self.entry):
            raise TopologyError("entry task has an incoming edge")
        self.topological_order()  # raises on cycles
        edge_set = {(e.src, e.dst) for e in self.edges}
        for name, seq in self.paths.items():
            if not seq or seq[0] != self.entry:
                raise TopologyError(f"path {name!r} must start at the entry task")
            for t in seq:
                if t not in self.tasks:
                    raise TopologyError(f"path {name!r} references unknown task {t!r}")
            for a, b in zip(seq, seq[1:]):
                if (a, b) not in edge_set:
                    raise TopologyError(f"path {name!r} is not a walk: no edge {a!r} -> {b!r}")
            if self.successors(seq[-1]):
                raise TopologyError(f"path {name!r} does not end at a sink")

    def topological_order(self, subset: set[str] | None = None) -> list[str]:
        names = [n for n in self.tasks if subset is None or n in subset]
        indeg = {n: 0 for n in names}
        for e in self.edges:
            if e.src in indeg and e.dst in indeg:
                indeg[e.dst] += 1
        ready = sorted(n for n, d in indeg.items() if d == 0)
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for e in self.successors(n):
                if e.dst in indeg:
                    indeg[e.dst] -= 1
                    if indeg[e.dst] == 0:
                        ready.append(e.dst)
                        ready.sort()
        if len(order) != len(names):
            raise TopologyError("edges contain a cycle")
        return order

    def restrict(self, path_names: Sequence[str]) -> "BPNetwork":
        """Sub-network made of the named paths only."""
        missing = [p for p in path_names if p not in self.paths]
        if missing:
            raise TopologyError(f"unknown paths {missing}")
        keep = {t for p in path_names for t in self.paths[p]}
        pairs = {(a, b) for p in path_names for a, b in zip(self.paths[p], self.paths[p][1:])}
        return BPNetwork(
            tasks={n: t for n, t in self.tasks.items() if n in keep},
            edges=[e for e in self.edges if (e.src, e.dst) in pairs],
            paths={p: list(self.paths[p]) for p in path_names},
            entry=self.entry,
        )

    def with_task(self, task: TaskModel) -> "BPNetwork":
        tasks = dict(self.tasks)
        tasks[task.name] = task
        return BPNetwork(tasks, list(self.edges), {k: list(v) for k, v in self.paths.items()}, self.entry)

    def to_dict(self) -> dict:
        tasks = {}
        for name, t in self.tasks.items():
            d = {"kind": t.kind.value, "ln_A": t.fit.ln_A, "alpha": t.fit.alpha, "C": t.C}
            if t.automation is not None:
                a = {"kappa": t.automation.kappa, "f_m": t.automation.f_m}
                if t.automation.metric is not None:
                    a["metric"] = t.automation.metric.to_dict()
                d["automation"] = a
            tasks[name] = d
        edges = [[e.src, e.dst] if e.delay == 0 else [e.src, e.dst, e.delay] for e in self.edges]
        return {"tasks": tasks, "edges": edges, "paths": self.paths, "entry": self.entry}


def _task_from_doc(name: str, d: Mapping) -> TaskModel:
    kind = TaskKind(d["kind"])
    fit = CobbDouglasFit(ln_A=float(d.get("ln_A", 0.0)), alpha=float(d.get("alpha", 0.5)), residual_rms=0.0, n_points=0, activity=name)
    automation = None
    auto = d.get("automation")
    if kind is TaskKind.AUTOMATED:
        if not auto or "kappa" not in auto or "f_m" not in auto:
            raise SchemaError(f"automated task {name!r} is missing kappa/f_m")
        metric = auto.get("metric")
        try:
            automation = Automation(
                kappa=float(auto["kappa"]),
                f_m=float(auto["f_m"]),
                metric=MetricConfig(float(metric["R_o"]), float(metric["tau"])) if metric else None,
            )
        except ParameterError as exc:
            raise SchemaError(f"task {name!r}: {exc.message}") from None
    elif auto:
        raise SchemaError(f"task {name!r} of kind {kind.value} cannot carry automation parameters")
    return TaskModel(name=name, kind=kind, fit=fit, C=d.get("C"), automation=automation)


def load_network(doc: Mapping | str | Path) -> BPNetwork:
    """Build a validated network from a JSON document (dict or file path)."""
    if isinstance(doc, (str, Path)):
        doc = json.loads(Path(doc).read_text(encoding="utf-8"))
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"network document invalid: {exc.message}", path=list(exc.absolute_path)) from None
    tasks = {name: _task_from_doc(name, d) for name, d in doc["tasks"].items()}
    edges = [Edge(e[0], e[1], int(e[2]) if len(e) > 2 else 0) for e in doc.get("edges", [])]
    return BPNetwork(tasks=tasks, edges=edges, paths={k: list(v) for k, v in doc.get("paths", {}).items()}, entry=doc["entry"])


# ---------------------------------------------------------------------------
# inputs


@dataclass(frozen=True)
class TaskInputs:
    L: ProductionSignal
    K: ProductionSignal


def load_task_inputs(source, sample_period: timedelta, task: str = "") -> TaskInputs:
    """Read a per-task CSV with columns ``bin_index,L,K`` (linear scale)."""
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, (str, Path)) else source.read()
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and not {"bin_index", "L", "K"} <= set(rows[0]):
        raise InputError(f"input CSV for {task!r} needs columns bin_index,L,K")
    rows.sort(key=lambda r: int(r["bin_index"]))
    idx = [int(r["bin_index"]) for r in rows]
    if idx != list(range(len(idx))):
        raise InputError(f"input CSV for {task!r} must cover bins 0..n-1 without gaps")
    L = ProductionSignal([float(r["L"]) for r in rows], sample_period, f"{task}:L")
    K = ProductionSignal([float(r["K"]) for r in rows], sample_period, f"{task}:K")
    return TaskInputs(L, K)


def inputs_from_log(event_log: EventLog, network: BPNetwork, cfg: SamplingConfig) -> dict[str, TaskInputs]:
    """Pull L and K for every task whose name is an activity in ``event_log``."""
    out = {}
    for name in network.tasks:
        if name in event_log.activities:
            out[name] = TaskInputs(
                sample_production(event_log, name, cfg, "L"),
                sample_production(event_log, name, cfg, "K"),
            )
    return out


def fit_task(event_log: EventLog, activity: str, cfg: SamplingConfig) -> CobbDouglasFit:
    y, l, k = (to_log_scale(sample_production(event_log, activity, cfg, ch)) for ch in "YLK")
    return fit_cobb_douglas(y, l, k, activity=activity)


# ---------------------------------------------------------------------------
# simulation


@dataclass
class SimulationRun:
    network: BPNetwork
    inputs: dict[str, TaskInputs]
    outputs: dict[str, ProductionSignal]
    path_summaries: dict[str, SpectrumSummary]
    config: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.config.get("horizon", 0)

    @property
    def sample_period(self) -> timedelta | None:
        for sig in self.outputs.values():
            return sig.sample_period
        return None

    def task_summary(self, task: str) -> SpectrumSummary | None:
        sig = self.outputs[task]
        return spectrum(sig) if len(sig) >= 4 else None


def _delay(sig: ProductionSignal, d: int) -> ProductionSignal:
    if d == 0:
        return sig
    n = len(sig)
    values = np.concatenate([np.zeros(min(d, n)), sig.values[: max(n - d, 0)]])
    off = np.concatenate([np.ones(min(d, n), dtype=bool), sig.off[: max(n - d, 0)]])
    return sig.replace(values=values, off=off)


def _merge(signals: list[ProductionSignal]) -> ProductionSignal:
    if len(signals) == 1:
        return signals[0]
    vals = np.stack([s.values for s in signals])
    on = np.stack([s.on for s in signals])
    n_on = on.sum(axis=0)
    merged = np.zeros(vals.shape[1])
    for j in np.flatnonzero(n_on):
        merged[j] = compose_geometric(vals[on[:, j], j].tolist())
    return signals[0].replace(values=merged, off=n_on == 0, label="+".join(s.label for s in signals))


def _truncate(sig: ProductionSignal, n: int) -> ProductionSignal:
    return sig if len(sig) == n else sig.replace(values=sig.values[:n], off=sig.off[:n])


def simulate(
    network: BPNetwork,
    inputs: Mapping[str, TaskInputs | Mapping[str, ProductionSignal]],
    horizon: int | None = None,
    paths: Sequence[str] | None = None,
) -> SimulationRun:
    """Run the network on per-task labour/capital signals.

    Only tasks on the selected ``paths`` (all paths by default) are
    evaluated.  ``horizon`` defaults to the shortest input; longer inputs are
    truncated to it.
    """
    net = network.restrict(list(paths)) if paths is not None else network
    if not net.paths:
        net_tasks = set(net.tasks)
    else:
        net_tasks = {t for seq in net.paths.values() for t in seq}

    task_inputs: dict[str, TaskInputs] = {}
    for t in sorted(net_tasks):
        if t not in inputs:
            raise InputError(f"no input signals for task {t!r}")
        ti = inputs[t]
        task_inputs[t] = ti if isinstance(ti, TaskInputs) else TaskInputs(ti["L"], ti["K"])

    periods = {s.sample_period for ti in task_inputs.values() for s in (ti.L, ti.K)}
    if len(periods) > 1:
        raise UnitError("input signals do not share one sample period", periods=sorted(str(p) for p in periods))
    shortest = min((min(len(ti.L), len(ti.K)) for ti in task_inputs.values()), default=0)
    if horizon is None:
        horizon = shortest
    elif horizon > shortest:
        raise InputError(f"horizon {horizon} exceeds the shortest input ({shortest} samples)")
    task_inputs = {t: TaskInputs(_truncate(ti.L, horizon), _truncate(ti.K, horizon)) for t, ti in task_inputs.items()}

    outputs: dict[str, ProductionSignal] = {}
    for t in net.topological_order(net_tasks):
        model = net.tasks[t]
        ti = task_inputs[t]
        preds = [e for e in net.predecessors(t) if e.src in outputs]
        upstream = _merge([_delay(outputs[e.src], e.delay) for e in preds]) if preds else None
        if model.kind is not TaskKind.INITIAL and upstream is None:
            raise TopologyError(f"task {t!r} has no upstream task in the simulated paths")
        outputs[t] = run_task(model, ti.L, ti.K, upstream)

    summaries = {}
    for p, seq in net.paths.items():
        if horizon >= 4:
            summaries[p] = replace(spectrum(outputs[seq[-1]]), label=p)
    config = {"horizon": horizon, "paths": sorted(net.paths), "network": net.to_dict()}
    return SimulationRun(net, task_inputs, outputs, summaries, config)


# ---------------------------------------------------------------------------
# what-if


@dataclass(frozen=True)
class Edit:
    task: str
    new_kind: TaskKind | str | None = None
    kappa: float | None = None
    f_m: float | None = None
    metric: MetricConfig | None = None


@dataclass
class WhatIfResult:
    baseline: SimulationRun
    edited: SimulationRun
    edit: Edit
    comparison: ComparisonTable
    task_kappa_m: float | None
    task_kappa_0: float | None
    stability: StabilityReport | None = None
    resonance_proximity: bool = False
    modulation_frequency: float | None = None


def _fold(omega: float) -> float:
    """Alias a rad/sample frequency into [0, pi]."""
    return abs((omega + math.pi) % (2 * math.pi) - math.pi)


RESONANCE_BAND = 0.1


def what_if(
    network: BPNetwork,
    edit: Edit,
    inputs: Mapping[str, TaskInputs],
    horizon: int | None = None,
) -> WhatIfResult:
    """Simulate ``network`` before and after ``edit`` on identical inputs.

    When the edit automates a task without giving ``f_m``, the medium
    frequency of that task's baseline output is used.  With a metric
    configured, the result flags when the modulated component 2*omega_c
    (folded into [0, pi]) lies within 10% of the loop's resonance.
    """
    if edit.task not in network.tasks:
        raise InputError(f"edit names unknown task {edit.task!r}")
    baseline = simulate(network, inputs, horizon)
    old = network.tasks[edit.task]
    kind = TaskKind(edit.new_kind) if edit.new_kind is not None else old.kind

    automation = old.automation
    if kind is TaskKind.AUTOMATED:
        prev = old.automation
        k = edit.kappa if edit.kappa is not None else (prev.kappa if prev else 0.0)
        f_m = edit.f_m if edit.f_m is not None else (prev.f_m if prev else None)
        if f_m is None:
            summary = baseline.task_summary(edit.task)
            if summary is None or summary.f_m <= 0:
                raise ParameterError(f"cannot infer f_m for {edit.task!r} from its baseline output")
            f_m = summary.f_m
        metric = edit.metric if edit.metric is not None else (prev.metric if prev else None)
        automation = Automation(kappa=k, f_m=f_m, metric=metric)
    else:
        automation = None
    new_task = TaskModel(name=old.name, kind=kind, fit=old.fit, C=old.C, automation=automation)
    edited_net = network.with_task(new_task)
    edited = simulate(edited_net, inputs, horizon)

    comparison = compare_logs(baseline.path_summaries, edited.path_summaries)
    kb, ke = baseline.task_summary(edit.task), edited.task_summary(edit.task)
    km = k0 = None
    if kb is not None and ke is not None:
        km = kappa(kb.f_m, ke.f_m) if kb.f_m else None
        k0 = kappa(kb.f_0, ke.f_0) if kb.f_0 else None

    stability = None
    near = False
    mod = None
    if automation is not None:
        mod = _fold(2 * automation.omega_c)
        if automation.metric is not None:
            stability = poles_zeros(closed_loop_tf(automation.metric))
            if stability.resonance_frequency is not None:
                near = abs(mod - stability.resonance_frequency) <= RESONANCE_BAND * stability.resonance_frequency
    return WhatIfResult(baseline, edited, edit, comparison, km, k0, stability, near, mod)


# ---------------------------------------------------------------------------
# reports


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _tables(run: SimulationRun, whatif: WhatIfResult | None = None) -> dict[str, tuple[list[str], list[list]]]:
    ts = run.sample_period
    task_rows = []
    stab_rows = []
    for name in sorted(run.outputs):
        sig = run.outputs[name]
        model = run.network.tasks[name]
        if len(sig) == 0:
            continue
        s = run.task_summary(name)
        task_rows.append(
            [
                name,
                model.kind.value,
                s.f_m if s else None,
                s.f_0 if s else None,
                float(np.mean(sig.on)),
                len(sig),
            ]
        )
        auto = model.automation
        if auto is not None and auto.metric is not None:
            rep = poles_zeros(closed_loop_tf(auto.metric))
            units = frequency_units(rep.resonance_frequency, ts) if rep.resonance_frequency is not None else {}
            stab_rows.append(
                [
                    name,
                    auto.metric.R_o,
                    auto.metric.tau,
                    rep.stable,
                    rep.max_pole_magnitude,
                    rep.resonance_frequency,
                    units.get("paper_hz"),
                    units.get("requests_per_hour"),
                ]
            )
    path_rows = [
        [p, run.network.paths[p][-1], s.f_m, s.f_0, s.n_samples] for p, s in sorted(run.path_summaries.items())
    ]
    tables = {
        "tasks": (["task", "kind", "f_m", "f_0", "gate_open_fraction", "n_samples"], task_rows),
        "paths": (["path", "terminal_task", "f_m", "f_0", "n_samples"], path_rows),
        "stability": (
            ["task", "R_o", "tau", "stable", "max_pole_magnitude", "resonance_rad_per_sample", "resonance_paper_hz", "resonance_requests_per_hour"],
            stab_rows,
        ),
    }
    kappa_rows = []
    if whatif is not None:
        kappa_rows = [r.as_list() for r in whatif.comparison]
    tables["kappa"] = (["path", "f_m_before", "f_m_after", "f_0_before", "f_0_after", "kappa_m", "kappa_0", "filtered_variant"], kappa_rows)
    return tables


def report(run: SimulationRun | WhatIfResult, format: str = "json") -> str:
    """Render per-task, per-path, stability and kappa tables.

    A :class:`WhatIfResult` reports its edited run plus the kappa comparison
    against the baseline.  Output ordering is deterministic.
    """
    whatif = run if isinstance(run, WhatIfResult) else None
    sim = run.edited if whatif is not None else run
    tables = _tables(sim, whatif)
    meta = {"horizon": sim.horizon, "sample_period_seconds": sim.sample_period.total_seconds() if sim.sample_period else None}
    if whatif is not None:
        meta["edit"] = {
            "task": whatif.edit.task,
            "new_kind": TaskKind(whatif.edit.new_kind).value if whatif.edit.new_kind else None,
            "kappa": whatif.edit.kappa,
            "task_kappa_m": whatif.task_kappa_m,
            "task_kappa_0": whatif.task_kappa_0,
            "resonance_proximity": whatif.resonance_proximity,
            "modulation_rad_per_sample": whatif.modulation_frequency,
        }

    if format == "json":
        doc = {"meta": meta}
        for name, (cols, rows) in tables.items():
            doc[name] = [dict(zip(cols, r)) for r in rows]
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for name, (cols, rows) in tables.items():
            buf.write(f"# {name}\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
            buf.write("\n")
        return buf.getvalue()
    if format == "markdown":
        out = [f"# Simulation report\n\nhorizon: {meta['horizon']} samples\n"]
        if whatif is not None:
            out.append("edit: " + ", ".join(f"{k}={_fmt(v)}" for k, v in meta["edit"].items()) + "\n")
        for name, (cols, rows) in tables.items():
            out.append(f"## {name}\n")
            out.append("| " + " | ".join(cols) + " |")
            out.append("|" + "---|" * len(cols))
            for r in rows:
                out.append("| " + " | ".join(_fmt(v) for v in r) + " |")
            out.append("")
        return "\n".join(out) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def dump_signal_csv(sig: ProductionSignal) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_index", "value"])
    for i, v in enumerate(sig.values):
        w.writerow([i, repr(float(v))])
    return buf.getvalue()
