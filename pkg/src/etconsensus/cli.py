"""Command-line entry point.

Exit codes: 0 ok, 1 a certified guarantee was violated, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import engine, metrics
from . import scenarios as sc_mod

log = logging.getLogger("etconsensus")

EXIT_OK, EXIT_VERDICT, EXIT_INPUT = 0, 1, 2

# keys accepted by --override; values are parsed as JSON, falling back to strings
OVERRIDE_KEYS = (
    "alpha",
    "beta",
    "eps",
    "delta",
    "h",
    "horizon",
    "integrator",
    "formulation",
    "event_location",
    "switch_resample",
    "name",
    "x0",
    "v0",
)


class InputError(Exception):
    pass


@dataclass
class CliConfig:
    subcommand: str
    paths: list[str] = field(default_factory=list)
    out: Path = Path("out")
    overrides: dict = field(default_factory=dict)
    uncertified_ok: bool = False
    decimation: int = 10
    figure: str | None = None


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or key not in OVERRIDE_KEYS:
            raise InputError(f"bad override {item!r}; expected k=v with k in {', '.join(OVERRIDE_KEYS)}")
        out[key] = _parse_value(val.strip())
    return out


def apply_overrides(d: dict, overrides: dict) -> dict:
    """Return a copy of a scenario dict with overrides applied."""
    d = json.loads(json.dumps(d))
    for key, val in overrides.items():
        if key == "eps":
            law = d.get("trigger", {}).get("law")
            if law not in ("directed", "undirected"):
                raise InputError(f"eps override needs a threshold law, scenario uses {law!r}")
            d["trigger"]["eps"] = val
        elif key == "delta":
            if d.get("trigger", {}).get("law") != "periodic":
                raise InputError("delta override needs the periodic law")
            d["trigger"]["delta"] = val
        else:
            d[key] = val
    return d


def load_scenario_dict(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"scenario file not found: {p}")
    try:
        d = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{p}: invalid JSON ({exc})") from None
    if not isinstance(d, dict):
        raise InputError(f"{p}: scenario must be a JSON object")
    return d


def build_scenario(path, cfg: CliConfig) -> engine.Scenario:
    d = apply_overrides(load_scenario_dict(path), cfg.overrides)
    if cfg.uncertified_ok:
        d["require_certified"] = False
    return sc_mod.scenario_from_dict(d)


def _report_run(rec: engine.RunRecord, verdict: engine.Verdict) -> None:
    s = metrics.summarize(rec)
    print(f"{rec.scenario.name}: law={s.law} certified={s.certified} events={list(s.event_count)}")
    print(f"  tail error {s.tail_error:.4g}" + (f", bound {s.ultimate_bound:.4g}" if s.ultimate_bound is not None else ""))
    for name, c in verdict.checks.items():
        mark = {True: "pass", False: "FAIL", None: "n/a"}[c.passed]
        print(f"  [{mark}] {name}: {c.detail}")


def cmd_run(cfg: CliConfig) -> int:
    sc = build_scenario(cfg.paths[0], cfg)
    rec = engine.run(sc)
    verdict = engine.check_guarantees(rec)
    stem = sc.name
    metrics.write_series_csv(rec, cfg.out / f"{stem}_series.csv", cfg.decimation)
    metrics.write_record_json(rec, cfg.out / f"{stem}_run.json", verdict)
    metrics.emit_plots(rec, cfg.out, stem)
    _report_run(rec, verdict)
    return EXIT_OK if verdict.passed else EXIT_VERDICT


def _write_comparison(cmp: engine.Comparison, cfg: CliConfig, stem: str, notes: str | None = None) -> int:
    report = metrics.comparison_json(cmp)
    if notes:
        report["notes"] = notes
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / f"{stem}_comparison.json").write_text(json.dumps(report, indent=2))
    metrics.write_summary_csv([metrics.summarize(r) for r in cmp.records], cfg.out / f"{stem}_summary.csv")
    metrics.emit_plots(cmp, cfg.out, stem)
    ok = True
    for rec in cmp.records:
        verdict = engine.check_guarantees(rec)
        _report_run(rec, verdict)
        ok &= verdict.passed
    print("totals: " + ", ".join(f"{k}={v}" for k, v in cmp.totals().items()))
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_compare(cfg: CliConfig) -> int:
    scs = [build_scenario(p, cfg) for p in cfg.paths]
    return _write_comparison(engine.run_comparison(scs), cfg, "compare")


def cmd_bounds(cfg: CliConfig) -> int:
    sc = build_scenario(cfg.paths[0], cfg)
    print(json.dumps(engine.guarantee_report(sc).to_dict(), indent=2))
    return EXIT_OK


def cmd_reproduce(cfg: CliConfig) -> int:
    make = sc_mod.FIGURES[cfg.figure]
    ov = dict(cfg.overrides)
    scs = make(float(ov.pop("h"))) if "h" in ov else make()
    if "horizon" in ov:
        horizon = float(ov.pop("horizon"))
        scs = [s.replace(horizon=horizon) for s in scs]
    if ov:
        # law-specific keys only touch the scenarios whose law they fit
        def fits(key, law):
            return {"eps": law in ("directed", "undirected"), "delta": law == "periodic"}.get(key, True)

        scs = [
            sc_mod.scenario_from_dict(
                apply_overrides(sc_mod.scenario_to_dict(s), {k: v for k, v in ov.items() if fits(k, s.law_name)})
            )
            for s in scs
        ]
    return _write_comparison(engine.run_comparison(scs), cfg, cfg.figure, sc_mod.FIGURE_NOTES[cfg.figure])


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "bounds": cmd_bounds, "reproduce": cmd_reproduce}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--out", default=None, help="output directory (default $ETC_OUT_DIR or ./out)")
    common.add_argument("--h", type=float, dest="h", help="integration step")
    common.add_argument("--horizon", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--eps", type=float, help="threshold for every agent")
    common.add_argument("--override", action="append", metavar="K=V", default=[])
    common.add_argument("--uncertified-ok", action="store_true", help="run even if the scenario requires certification and none is available")
    common.add_argument("--decimation", type=int, default=10, help="CSV keeps every n-th grid sample")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="etconsensus", description="Event-triggered dynamic average consensus simulator")
    sub = p.add_subparsers(dest="subcommand", required=True)
    r = sub.add_parser("run", parents=[common], help="simulate one scenario")
    r.add_argument("scenario")
    c = sub.add_parser("compare", parents=[common], help="simulate scenarios sharing inputs and horizon")
    c.add_argument("scenarios", nargs="+")
    b = sub.add_parser("bounds", parents=[common], help="print the analytic guarantees as JSON")
    b.add_argument("scenario")
    rp = sub.add_parser("reproduce", parents=[common], help="run a built-in figure study")
    rp.add_argument("figure", choices=sorted(sc_mod.FIGURES))
    return p


def config_from_args(ns: argparse.Namespace) -> CliConfig:
    overrides = parse_overrides(ns.override)
    for key in ("h", "horizon", "alpha", "beta", "eps"):
        val = getattr(ns, key)
        if val is not None:
            overrides[key] = val
    paths = [ns.scenario] if hasattr(ns, "scenario") else list(getattr(ns, "scenarios", []))
    out = ns.out or os.environ.get("ETC_OUT_DIR") or "out"
    return CliConfig(
        subcommand=ns.subcommand,
        paths=paths,
        out=Path(out),
        overrides=overrides,
        uncertified_ok=ns.uncertified_ok,
        decimation=ns.decimation,
        figure=getattr(ns, "figure", None),
    )


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        return COMMANDS[cfg.subcommand](cfg)
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
