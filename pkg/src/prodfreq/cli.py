"""Command-line entry point.

Exit codes: 0 success, 1 domain error, 2 usage error.  Errors are written
to stderr as a single JSON object ``{"error": code, "message": ...}``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from prodfreq import __version__
from prodfreq.control import (
    MetricConfig,
    closed_loop_tf,
    frequency_response,
    frequency_units,
    poles_zeros,
)
from prodfreq.errors import ProdFreqError
from prodfreq.eventlog import (
    GeneratorSpec,
    SamplingConfig,
    compute_sampling_period,
    extract_main_paths,
    generate_synthetic_log,
    parse_duration,
    parse_log,
    sample_production,
    serialize_log,
)
from prodfreq.ltitasks import TaskKind
from prodfreq.simkit import (
    Edit,
    dump_signal_csv,
    fit_task,
    inputs_from_log,
    load_network,
    load_task_inputs,
    report,
    simulate,
    what_if,
)
from prodfreq.spectral import compare_logs, spectrum

log = logging.getLogger("prodfreq")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _generated_at(args) -> str:
    if args.epoch is not None:
        return datetime.fromtimestamp(args.epoch, tz=timezone.utc).isoformat()
    return datetime.now(timezone.utc).isoformat()


def _sampling(args, event_log):
    if args.ts:
        ts, rounding = parse_duration(args.ts), "override"
    else:
        ts, rounding = compute_sampling_period(event_log, rounding="minute"), "floor_minute"
    return SamplingConfig.for_log(event_log, ts), rounding


def _parse_pairs(text: str) -> dict[str, list[str]]:
    groups: dict[str, list[str]] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise UsageError(f"--paths entries look like INITIAL:FINAL, got {item!r}")
        a, b = item.split(":", 1)
        groups.setdefault(a, []).append(b)
    return groups


def _csv_list(text: str | None) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()] if text else []


def _freq_block(f_cycles: float, ts) -> dict:
    omega = 2 * np.pi * f_cycles
    units = frequency_units(omega, ts)
    units["cycles_per_sample"] = f_cycles
    return {"rad_per_sample": omega, **units}


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> dict:
    if args.spec:
        doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.cases is not None:
            doc["case_count"] = args.cases
    else:
        doc = {
            "seed": 0 if args.seed is None else args.seed,
            "case_count": 100 if args.cases is None else args.cases,
            "paths": [
                {"name": "A", "activities": ["A_SUBMITTED", "A_PREACCEPTED", "A_CANCELLED"], "weight": 0.4},
                {"name": "B", "activities": ["A_SUBMITTED", "A_PREACCEPTED", "A_ACCEPTED", "A_REGISTERED"], "weight": 0.35},
                {"name": "C", "activities": ["A_SUBMITTED", "A_DECLINED"], "weight": 0.25},
            ],
        }
    synth = generate_synthetic_log(GeneratorSpec.from_dict(doc))
    out = Path(args.out)
    _write(out / "log.csv", serialize_log(synth.log))
    _write(out / "truth.json", _json(synth.truth))
    return {"artifacts": ["log.csv", "truth.json"], "records": len(synth.log), "cases": len(synth.log.cases)}


def cmd_analyze(args) -> dict:
    event_log = parse_log(args.log)
    cfg, rounding = _sampling(args, event_log)
    ts = cfg.sample_period
    groups = _parse_pairs(args.paths)
    manual = _csv_list(args.manual)
    out = Path(args.out)
    artifacts = []
    summary = {
        "log": {"records": len(event_log), "cases": len(event_log.cases), "rejected_rows": len(event_log.rejected)},
        "sample_period_seconds": ts.total_seconds(),
        "sample_period_rounding": rounding,
        "paths": {},
    }

    def analyze_one(lg, cfg_, groups_, tag=""):
        result, filtered = {}, {}
        for initial, finals in groups_.items():
            extraction = extract_main_paths(lg, initial, finals)
            for p in extraction:
                sig = sample_production(lg, p, cfg_, "Y")
                s = spectrum(sig)
                result[p.name] = s
                fname = f"spectrum{tag}_{p.name}.csv"
                _write(out / fname, s.to_csv())
                artifacts.append(fname)
                if manual:
                    filtered[p.name] = spectrum(sample_production(lg, p, cfg_, "Y", exclude=manual))
                if not tag:
                    summary["paths"][p.name] = {
                        "cases": len(p.case_ids),
                        "activity_sequence": list(p.activity_sequence),
                        "f_m": _freq_block(s.f_m, ts),
                        "f_0": _freq_block(s.f_0, ts),
                        "empty_spectrum": s.empty,
                    }
            summary.setdefault("excluded_cases" + tag, {})[initial] = len(extraction.excluded_cases)
        return result, filtered

    before, _ = analyze_one(event_log, cfg, groups)
    if args.after_log:
        after_log = parse_log(args.after_log)
        after_cfg = SamplingConfig.for_log(after_log, ts)
        after_groups = _parse_pairs(args.after_paths) if args.after_paths else groups
        after, filtered = analyze_one(after_log, after_cfg, after_groups, tag="_after")
        before_names, after_names = list(before), list(after)
        if len(before_names) != len(after_names):
            raise ProdFreqError("before and after logs yield different path counts")
        table = compare_logs(before, after, dict(zip(before_names, after_names)), filtered or None)
        _write(out / "comparison.csv", table.to_csv())
        _write(out / "comparison.json", table.to_json() + "\n")
        artifacts += ["comparison.csv", "comparison.json"]
    summary["generated_at"] = _generated_at(args)
    _write(out / "summary.json", _json(summary))
    artifacts.append("summary.json")
    return {"artifacts": sorted(artifacts)}


def cmd_fit(args) -> dict:
    event_log = parse_log(args.log)
    cfg, rounding = _sampling(args, event_log)
    activities = _csv_list(args.activities) or sorted(event_log.activities)
    fits, failures = [], []
    for act in activities:
        try:
            fits.append(fit_task(event_log, act, cfg).to_dict())
        except ProdFreqError as exc:
            failures.append({"activity": act, **exc.to_dict()})
    out = Path(args.out)
    _write(
        out / "fits.json",
        _json({"sample_period_seconds": cfg.sample_period.total_seconds(), "sample_period_rounding": rounding, "fits": fits, "failures": failures}),
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["activity", "ln_A", "alpha", "residual_rms", "n_points", "clamped"]
    w.writerow(cols)
    for f in fits:
        w.writerow([f[c] for c in cols])
    _write(out / "fits.csv", buf.getvalue())
    return {"artifacts": ["fits.csv", "fits.json"], "fitted": len(fits), "failed": len(failures)}


def cmd_stability(args) -> dict:
    metric = MetricConfig(R_o=args.r0, tau=args.tau)
    tf = closed_loop_tf(metric)
    rep = poles_zeros(tf) if len(tf.den) > 1 else None
    ts = parse_duration(args.ts) if args.ts else None
    out = Path(args.out)
    doc = {
        "metric": metric.to_dict(),
        "transfer_function": tf.to_dict(),
        "sample_period_seconds": ts.total_seconds() if ts else None,
        "note": "paper_hz counts one cycle per sampling period",
    }
    if rep is None:
        doc["report"] = {"poles": [], "zeros": [], "stable": True, "max_pole_magnitude": 0.0, "resonance": None}
        rows = []
    else:
        doc["report"] = rep.to_dict(ts)
        rows = rep.pz_rows()
    _write(out / "stability.json", _json(doc))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re", "im", "kind"])
    for re, im, kind in rows:
        w.writerow([repr(re), repr(im), kind])
    _write(out / "pz.csv", buf.getvalue())
    omega = np.linspace(0.0, np.pi, 1025)
    mag = np.abs(frequency_response(tf, omega))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["omega_rad_per_sample", "magnitude"])
    for o, m in zip(omega, mag):
        w.writerow([repr(float(o)), repr(float(m))])
    _write(out / "response.csv", buf.getvalue())
    return {"artifacts": ["pz.csv", "response.csv", "stability.json"], "stable": doc["report"]["stable"]}


def _load_inputs(args, network):
    if args.log:
        event_log = parse_log(args.log)
        cfg, _ = _sampling(args, event_log)
        return inputs_from_log(event_log, network, cfg)
    if args.inputs:
        if not args.ts:
            raise UsageError("--inputs requires --ts")
        ts = parse_duration(args.ts)
        d = Path(args.inputs)
        return {name: load_task_inputs(d / f"{name}.csv", ts, name) for name in network.tasks if (d / f"{name}.csv").exists()}
    raise UsageError("simulate needs --log or --inputs")


_EXT = {"json": "json", "csv": "csv", "markdown": "md"}


def cmd_simulate(args) -> dict:
    network = load_network(args.network)
    inputs = _load_inputs(args, network)
    run = simulate(network, inputs, args.horizon)
    out = Path(args.out)
    name = f"report.{_EXT[args.format]}"
    _write(out / name, report(run, args.format))
    artifacts = [name]
    for task in sorted(run.outputs):
        fname = f"signals/{task}.csv"
        _write(out / fname, dump_signal_csv(run.outputs[task]))
        artifacts.append(fname)
    return {"artifacts": artifacts}


def cmd_whatif(args) -> dict:
    network = load_network(args.network)
    inputs = _load_inputs(args, network)
    metric = None
    if args.tau is not None or args.r0 is not None:
        if args.tau is None or args.r0 is None:
            raise UsageError("--tau and --r0 go together")
        metric = MetricConfig(R_o=args.r0, tau=args.tau)
    edit = Edit(
        task=args.task,
        new_kind=TaskKind(args.kind) if args.kind else None,
        kappa=args.kappa,
        f_m=args.f_m,
        metric=metric,
    )
    result = what_if(network, edit, inputs, args.horizon)
    out = Path(args.out)
    name = f"whatif.{_EXT[args.format]}"
    _write(out / name, report(result, args.format))
    _write(out / "comparison.csv", result.comparison.to_csv())
    return {"artifacts": ["comparison.csv", name], "resonance_proximity": result.resonance_proximity}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="prodfreq", description="Frequency-domain business-process productivity toolkit")
    p.add_argument("--version", action="version", version=f"prodfreq {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, ts=True):
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--epoch", type=int, help="fixed UNIX time for generated_at stamps")
        if ts:
            sp.add_argument("--ts", help="sampling period override, e.g. 5m, 2h, 30s")

    sp = sub.add_parser("synth", help="generate a synthetic event log")
    common(sp, ts=False)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--cases", type=int)
    sp.add_argument("--spec", help="generator parameters (JSON)")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("analyze", help="path spectra, f_m/f_0 and optional before/after kappa")
    common(sp)
    sp.add_argument("--log", required=True)
    sp.add_argument("--paths", required=True, help="INITIAL:FINAL pairs, comma separated")
    sp.add_argument("--after-log")
    sp.add_argument("--after-paths")
    sp.add_argument("--manual", help="comma-separated manual activities to filter (after log)")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("fit", help="fit Cobb-Douglas parameters per activity")
    common(sp)
    sp.add_argument("--log", required=True)
    sp.add_argument("--activities", help="comma-separated; default all")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("stability", help="poles, zeros and resonance of the metric loop")
    common(sp)
    sp.add_argument("--tau", type=float, required=True)
    sp.add_argument("--r0", type=float, required=True)
    sp.set_defaults(func=cmd_stability)

    for name, func in (("simulate", cmd_simulate), ("whatif", cmd_whatif)):
        sp = sub.add_parser(name, help=f"{name} a network definition")
        common(sp)
        sp.add_argument("--network", required=True)
        sp.add_argument("--log")
        sp.add_argument("--inputs", help="directory of <task>.csv files (bin_index,L,K)")
        sp.add_argument("--horizon", type=int)
        sp.add_argument("--format", choices=sorted(_EXT), default="json")
        if name == "whatif":
            sp.add_argument("--task", required=True)
            sp.add_argument("--kind", choices=[k.value for k in TaskKind])
            sp.add_argument("--kappa", type=float)
            sp.add_argument("--f-m", dest="f_m", type=float)
            sp.add_argument("--tau", type=float)
            sp.add_argument("--r0", type=float)
        sp.set_defaults(func=func)
    return p


def run_cli(argv: list[str] | None = None) -> int:
    level = os.environ.get("PRODFREQ_LOG_LEVEL", "warn").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        result = args.func(args)
    except UsageError as exc:
        sys.stderr.write(json.dumps({"error": "usage_error", "message": str(exc)}) + "\n")
        return 2
    except ProdFreqError as exc:
        sys.stderr.write(json.dumps(exc.to_dict(), default=str) + "\n")
        return 1
    except (OSError, ValueError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__.lower(), "message": str(exc)}) + "\n")
        return 1
    sys.stdout.write(json.dumps(result, sort_keys=True) + "\n")
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
