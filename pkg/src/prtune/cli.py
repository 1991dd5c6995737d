"""Command-line front end.

Exit codes: 0 success, 1 analysis failure, 2 usage or file error.
"""

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .batch import format_number, load_plant, load_spec, run_batch, write_batch
from .evalsim import TrackingConfig, evaluate
from .foi import RELAY_PHASES, flatness_table, make_phase_element, phase_flatness
from .freq import NoCrossover, margins, nyquist_data, sweep
from .identify import IdentificationError, identify
from .lti import SingularFrequencyError, series
from .relay import RelayConfig, run_relay
from .tuner import PerformanceWarning, PRController, design_point_for, pr_transfer_function, tune

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class AnalysisError(Exception):
    pass


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default)


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(format_number(v) if not isinstance(v, str) else v for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def _flat(d, prefix=""):
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flat(v, f"{prefix}{k}."))
        elif isinstance(v, (list, tuple)):
            out[prefix + k] = ";".join(str(x) for x in v)
        else:
            out[prefix + k] = v
    return out


def _record_csv(d) -> str:
    flat = _flat(d)
    vals = [v if isinstance(v, str) else ("" if v is None else
            (str(v).lower() if isinstance(v, bool) else format_number(v))) for v in flat.values()]
    return ",".join(flat) + "\n" + ",".join(vals) + "\n"


class _Output:
    """Writes the primary result to stdout and artifacts to the output directory."""

    def __init__(self, args):
        self.fmt = args.format
        self.dir = Path(args.seed_output_dir) if args.seed_output_dir else None
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def record(self, name, d):
        text = _dumps(d) + "\n" if self.fmt == "json" else _record_csv(d)
        sys.stdout.write(text)
        if self.dir is not None:
            (self.dir / f"{name}.json").write_text(_dumps(d) + "\n")

    def table(self, name, header, rows, summary=None):
        """Series output: CSV on stdout in csv mode, the summary in json mode."""
        csv_text = _csv(header, rows)
        if self.fmt == "csv" or summary is None:
            if self.fmt == "json" and summary is None:
                sys.stdout.write(_dumps([dict(zip(header, r)) for r in rows]) + "\n")
            else:
                sys.stdout.write(csv_text)
        else:
            sys.stdout.write(_dumps(summary) + "\n")
        if self.dir is not None:
            (self.dir / f"{name}.csv").write_text(csv_text)
            if summary is not None:
                (self.dir / f"{name}.json").write_text(_dumps(summary) + "\n")


def _plant(args):
    try:
        return load_plant(args.plant)
    except FileNotFoundError as exc:
        raise UsageError(f"cannot read plant file: {exc}") from None
    except (ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"invalid plant file {args.plant}: {exc}") from None


def _controller(path) -> PRController:
    try:
        with open(path) as fh:
            data = json.load(fh)
        return PRController.from_dict(data.get("controller", data))
    except FileNotFoundError as exc:
        raise UsageError(f"cannot read controller file: {exc}") from None
    except (ValueError, json.JSONDecodeError, AttributeError) as exc:
        raise UsageError(f"invalid controller file {path}: {exc}") from None


def _relay_cfg(args, **kw):
    return RelayConfig(h=args.step, **kw)


def _identify(G, args):
    try:
        return identify(G, args.method, _relay_cfg(args, d=args.d))
    except IdentificationError as exc:
        raise AnalysisError(str(exc)) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_identify(args, out):
    G = _plant(args)
    pt = _identify(G, args)
    out.record("identify", pt.to_dict())


def cmd_tune(args, out):
    G = _plant(args)
    pt = _identify(G, args)
    if (args.omega_r is None) == (args.ratio is None):
        raise UsageError("give exactly one of --omega-r and --ratio")
    omega_r = args.omega_r if args.omega_r is not None else args.ratio * pt.omega_nu
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", PerformanceWarning)
        try:
            c = tune(pt, omega_r, args.xi, args.eta)
        except ValueError as exc:
            raise AnalysisError(str(exc)) from None
    p = design_point_for(pt.plant_class, omega_r / pt.omega_nu)
    out.record("tune", {
        "class": pt.plant_class, "point": pt.to_dict(),
        "p": {"m_rho": p.m_rho, "rho_deg": p.rho},
        "kp": c.kp, "kr1": c.kr1, "kr2": c.kr2, "omega_r": c.omega_r, "xi": c.xi, "eta": c.eta,
        "warnings": [str(w.message) for w in caught]})


def cmd_simulate(args, out):
    G = _plant(args)
    C = _controller(args.controller)
    omega_r = args.omega_r if args.omega_r is not None else C.omega_r
    try:
        cfg = TrackingConfig(a_r=args.amplitude, omega_r=omega_r, epsilon=args.epsilon,
                             h=args.step)
        rep, run = evaluate(G, C, cfg, return_run=True)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out.table("simulate", ("t", "r", "e", "u", "y"), run.as_array(), rep.to_dict())
    if not rep.stable:
        raise AnalysisError("closed loop unstable")


def cmd_simulate_relay(args, out):
    G = _plant(args)
    try:
        F = make_phase_element(args.gamma)
        cfg = _relay_cfg(args, d=args.d, r=args.r, b0=args.b0)
        run = run_relay(F, G, cfg, record=True)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    c = run.cycle
    summary = {"A": c.amplitude if c else None, "T": c.period if c else None,
               "bias": run.bias, "converged": c is not None,
               "cycles_used": int(run.cycles.shape[0]), "status": run.status,
               "gamma_deg": F.gamma, "h": run.config.h}
    out.table("simulate_relay", ("t", "r", "e", "u", "y"), run.series, summary)
    if c is None:
        raise AnalysisError(f"no limit cycle ({run.status})")


def _parse_band(text):
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--band expects lo,hi; got {text!r}") from None
    return lo, hi


def _loop(args):
    G = _plant(args)
    if args.controller:
        return series(pr_transfer_function(_controller(args.controller)), G)
    return G


def cmd_freqresp(args, out):
    L = _loop(args)
    band = _parse_band(args.band)
    try:
        if args.kind == "bode":
            s = sweep(L, band, args.points)
            rows = np.column_stack([s.omega, s.magnitude_db, s.phase])
            header = ("omega", "magnitude_dB", "phase_deg")
        else:
            rows = nyquist_data(L, band, args.points)
            header = ("re", "im")
    except (ValueError, SingularFrequencyError) as exc:
        raise UsageError(str(exc)) from None
    out.table("freqresp", header, rows)


def cmd_margins(args, out):
    L = _loop(args)
    try:
        m = margins(L, omega_r=args.omega_r)
    except NoCrossover as exc:
        raise AnalysisError(str(exc)) from None
    out.record("margins", m.to_dict())


def cmd_foi_check(args, out):
    try:
        F = make_phase_element(args.gamma)
        band = _parse_band(args.band)
        dev = phase_flatness(F, band, args.points)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = flatness_table(F, band, args.points)
    out.table("foi_check", ("omega", "magnitude_dB", "phase_deg"), rows,
              {"gamma_deg": F.gamma, "band": list(band), "points": args.points,
               "max_phase_deviation_deg": dev})


def cmd_batch(args, out):
    try:
        spec = load_spec(args.spec)
        for e in spec.plants:
            load_plant(e.file, spec.base)
    except FileNotFoundError as exc:
        raise UsageError(f"cannot read batch spec: {exc}") from None
    except (ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"invalid batch spec: {exc}") from None
    outdir = Path(args.seed_output_dir) if args.seed_output_dir else Path(spec.output)
    results = run_batch(spec, step=args.step, jobs=args.jobs)
    index = write_batch(results, spec, outdir)
    index["output"] = str(outdir)
    sys.stdout.write(_dumps(index) + "\n")
    if any(c.status != "ok" for r in results for c in r.cases):
        raise AnalysisError("some batch cases failed; see index.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prtune", description="Relay-based identification and PR controller tuning.")
    parser.add_argument("--seed-output-dir", metavar="DIR",
                        help="also write CSV/JSON artifacts into DIR")
    parser.add_argument("--step", type=float, default=None,
                        help="fixed integration step in seconds (default: automatic)")
    parser.add_argument("--format", choices=("json", "csv"), default="json",
                        help="stdout format (default json)")
    sub = parser.add_subparsers(dest="command", required=True)

    def plant_arg(p):
        p.add_argument("--plant", required=True,
                       help="plant JSON file, or builtin:NAME for a bundled plant")

    def method_arg(p):
        p.add_argument("--method", choices=("relay", "analytic"), default="relay")
        p.add_argument("--d", type=float, default=1.0, help="relay amplitude")

    p = sub.add_parser("identify", help="identify one frequency-response point")
    plant_arg(p)
    method_arg(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("tune", help="identify and tune a PR controller")
    plant_arg(p)
    method_arg(p)
    p.add_argument("--omega-r", type=float)
    p.add_argument("--ratio", type=float, help="omega_r as a fraction of omega_nu")
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--eta", type=float, default=0.1)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("simulate", help="sinusoidal tracking with a PR controller")
    plant_arg(p)
    p.add_argument("--controller", required=True, help="controller JSON (tune output works)")
    p.add_argument("--omega-r", type=float, help="reference frequency (default: controller omega_r)")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.02)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("simulate-relay", help="relay experiment at one relay phase")
    plant_arg(p)
    p.add_argument("--gamma", type=float, default=0.0, choices=RELAY_PHASES)
    p.add_argument("--d", type=float, default=1.0)
    p.add_argument("--r", type=float, default=0.0)
    p.add_argument("--b0", type=float, default=None)
    p.set_defaults(func=cmd_simulate_relay)

    p = sub.add_parser("freqresp", help="Bode or Nyquist samples")
    plant_arg(p)
    p.add_argument("--controller")
    p.add_argument("--kind", choices=("bode", "nyquist"), default="bode")
    p.add_argument("--band", default="0.01,100")
    p.add_argument("--points", type=int, default=500)
    p.set_defaults(func=cmd_freqresp)

    p = sub.add_parser("margins", help="gain and phase margins")
    plant_arg(p)
    p.add_argument("--controller")
    p.add_argument("--omega-r", type=float, default=None)
    p.set_defaults(func=cmd_margins)

    p = sub.add_parser("foi-check", help="phase flatness of a relay phase element")
    p.add_argument("--gamma", type=float, default=-60.0, choices=RELAY_PHASES)
    p.add_argument("--band", default="0.01,100")
    p.add_argument("--points", type=int, default=1000)
    p.set_defaults(func=cmd_foi_check)

    p = sub.add_parser("batch", help="run a batch spec")
    p.add_argument("--spec", required=True, help="batch JSON, or builtin:reference_batch")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.step is not None and not args.step > 0:
        sys.stderr.write("prtune: --step must be > 0\n")
        return EXIT_USAGE
    try:
        out = _Output(args)
        args.func(args, out)
    except UsageError as exc:
        sys.stderr.write(f"prtune: {exc}\n")
        return EXIT_USAGE
    except AnalysisError as exc:
        sys.stderr.write(f"prtune: {exc}\n")
        return EXIT_FAIL
    except OSError as exc:
        sys.stderr.write(f"prtune: {exc}\n")
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
