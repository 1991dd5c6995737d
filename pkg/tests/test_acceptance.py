"""Acceptance criteria 1-10.

Each ``check_N`` returns ``(passed, detail)``.  The pytest wrappers log one
``criterion N: PASS|FAIL - detail`` line, shown in the terminal summary, and
then assert.  Running this file directly prints the same lines.
"""

import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from oracles import first_phase_crossing, ultimate_point_delay_double_pole  # noqa: E402
from reference_data import DEFAULT_RATIOS, PLANTS, RATIOS, RELAY, TABLES  # noqa: E402

from prtune.batch import load_spec, run_batch, write_batch  # noqa: E402
from prtune.evalsim import TrackingConfig, evaluate  # noqa: E402
from prtune.foi import make_phase_element, phase_flatness  # noqa: E402
from prtune.freq import margins  # noqa: E402
from prtune.identify import IdentifiedPoint, analytic_identify, analytic_point, rap_identify  # noqa: E402
from prtune.lti import TransferFunction, series  # noqa: E402
from prtune.relay import RelayConfig, run_relay  # noqa: E402
from prtune.tuner import (  # noqa: E402
    DesignPoint,
    PerformanceWarning,
    PRController,
    pr_transfer_function,
    tune,
    tune_generic,
    verify_tuning_equation,
)

NU_GAMMA = {"A": (-180.0, 0.0), "B": (-120.0, -60.0), "C": (-60.0, -120.0)}
BENCHMARK = ("Ga", "Gb", "Gc")

# measured maxima of |phase - gamma| over [1e-2, 1e2], 1000 log points
FLATNESS_BASELINE = {-60.0: 0.2445929839570482, -120.0: 0.17765440393385745}


def _plant(name):
    return TransferFunction.from_dict(PLANTS[name])


def _rows(table):
    plant, cls, m, w, rows = TABLES[table]
    ratios = RATIOS.get(table, DEFAULT_RATIOS)
    for ratio, row in zip(ratios, rows):
        yield plant, cls, m, w, ratio, row


def _quiet_tune(point, omega_r, xi=0.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PerformanceWarning)
        return tune(point, omega_r, xi)


def _point(cls, m, w):
    nu, gamma = NU_GAMMA[cls]
    return IdentifiedPoint(cls, nu, w, m, "relay", gamma, nu)


def check_1():
    """Printed identified values fed to the tuner reproduce the printed gains within 1%."""
    worst, where, n = 0.0, "", 0
    for table in TABLES:
        for plant, cls, m, w, ratio, row in _rows(table):
            c = _quiet_tune(_point(cls, m, w), ratio * w)
            for got, ref, name in zip((c.kp, c.kr1, c.kr2), row[1:4], ("kp", "kr1", "kr2")):
                err = abs(got / ref - 1)
                if err > worst:
                    worst, where = err, f"table {table} ratio {ratio} {name}"
            n += 1
    return worst <= 0.01, f"{n} rows, worst gain error {100 * worst:.2f}% ({where})"


def _random_cases(n=10_000, seed=0):
    rng = np.random.default_rng(seed)
    cls = rng.choice(list("ABC"), n)
    m_nu = 10 ** rng.uniform(-3, 3, n)
    w_nu = 10 ** rng.uniform(-2, 2, n)
    w_r = w_nu * rng.uniform(1e-3, 0.95, n)
    xi = rng.uniform(0, 1, n)
    m_rho = rng.uniform(0.1, 2.0, n)
    rho = rng.uniform(-270, 0, n)
    for i in range(n):
        nu = NU_GAMMA[cls[i]][0]
        p = DesignPoint(m_rho[i], rho[i])
        yield cls[i], m_nu[i], w_nu[i], nu, p, w_r[i], xi[i]


def check_2():
    worst = 0.0
    for cls, m_nu, w_nu, nu, p, w_r, xi in _random_cases():
        c = tune_generic(m_nu, w_nu, nu, p, w_r, xi)
        pt = IdentifiedPoint(cls, nu, w_nu, m_nu, "analytic", NU_GAMMA[cls][1], nu)
        worst = max(worst, verify_tuning_equation(c, pt, p) / (p.m_rho / m_nu))
    return worst <= 1e-9, f"10000 samples, worst relative residual {worst:.2e}"


def check_3():
    worst = 0.0
    for cls, m_nu, w_nu, nu, p, w_r, xi in _random_cases():
        c = tune_generic(m_nu, w_nu, nu, p, w_r, xi)
        ref = (c.eta**2 - 1) * c.omega_r**2 * c.kp
        worst = max(worst, abs(c.kr2 - ref) / abs(ref))
    return worst <= 1e-12, f"10000 samples, worst relative deviation {worst:.2e}"


def check_4():
    w_u, m_u = ultimate_point_delay_double_pole()
    cases = [
        (TransferFunction([1], [1, 2, 1]), -120, (np.sqrt(3), 0.25), 1e-8),
        (TransferFunction([1], [1, 1]), -60, (np.sqrt(3), 0.5), 1e-8),
        (TransferFunction([1], [1, 2, 1], 1.0), -180, (1.3066, 0.3694), 1e-4),
    ]
    errs = []
    for G, nu, ref, tol in cases:
        w, m = analytic_identify(G, nu)
        errs.append((max(abs(w - ref[0]), abs(m - ref[1])), tol))
    w, m = analytic_identify(cases[2][0], -180)
    bisect = max(abs(w - w_u), abs(m - m_u))
    ok = all(e <= t for e, t in errs) and bisect <= 1e-8
    return ok, ("abs errors " + ", ".join(f"{e:.1e}" for e, _ in errs)
                + f"; delay plant vs bisection {bisect:.1e}")


def _printed_within(printed, oracle, band, digits=3):
    """Whether a printed value, read as the interval of its last printed digit, meets the band."""
    half = 0.5 * 10 ** (np.floor(np.log10(abs(printed))) - (digits - 1))
    lo, hi = printed - half, printed + half
    nearest = min(max(oracle, lo), hi)
    return abs(nearest / oracle - 1) <= band


def check_5():
    failures, worst_w, worst_m = [], (0.0, ""), (0.0, "")
    for name, d in PLANTS.items():
        G = _plant(name)
        ref = analytic_point(G)
        pt = rap_identify(G)
        ew = pt.omega_nu / ref.omega_nu - 1
        em = pt.m_nu / ref.m_nu - 1
        if abs(ew) > abs(worst_w[0]):
            worst_w = (ew, name)
        if abs(em) > abs(worst_m[0]):
            worst_m = (em, name)
        if pt.plant_class != ref.plant_class:
            failures.append(f"{name} class {pt.plant_class} vs {ref.plant_class}")
        if abs(ew) > 0.03:
            failures.append(f"{name} omega {100 * ew:+.2f}%")
        if abs(em) > 0.10:
            failures.append(f"{name} magnitude {100 * em:+.2f}%")
    printed = []
    for name in BENCHMARK:
        m_p, w_p = RELAY[name][5], RELAY[name][6]
        ref = analytic_point(_plant(name))
        ew, em = w_p / ref.omega_nu - 1, m_p / ref.m_nu - 1
        printed.append(f"{name} printed omega {100 * ew:+.3f}% M {100 * em:+.2f}%")
        if not _printed_within(w_p, ref.omega_nu, 0.03):
            failures.append(f"{name} printed omega {100 * ew:+.3f}%")
        if not _printed_within(m_p, ref.m_nu, 0.10):
            failures.append(f"{name} printed magnitude {100 * em:+.2f}%")
    detail = (f"{len(PLANTS)} plants, worst omega {100 * worst_w[0]:+.2f}% ({worst_w[1]}), "
              f"worst M {100 * worst_m[0]:+.2f}% ({worst_m[1]}); " + "; ".join(printed)
              + " (printed values read to +-half a unit in the last digit)")
    if failures:
        detail += "; out of band: " + ", ".join(failures)
    return not failures, detail


def check_6():
    worst, checked, skipped, bad = 0.0, 0, [], []
    for name, target in (("Gb", 50), ("Gc", 90), ("G3_a0.1", 50), ("G3_a0.7", 50),
                         ("G4_a0.1", 90), ("G4_a100", 90)):
        G = _plant(name)
        pt = analytic_point(G)
        for ratio in DEFAULT_RATIOS:
            c = _quiet_tune(pt, ratio * pt.omega_nu)
            m = margins(series(pr_transfer_function(c), G))
            if not m.crossover_unique:
                skipped.append(f"{name}@{ratio}")
                continue
            checked += 1
            err = abs(m.phase_margin - target)
            worst = max(worst, err)
            if err > 0.5:
                bad.append(f"{name}@{ratio} PM {m.phase_margin:.3f}")
    detail = f"{checked} designs, worst |PM - target| {worst:.2e} deg"
    if skipped:
        detail += "; non-unique crossover: " + ", ".join(skipped)
    if bad:
        detail += "; failing: " + ", ".join(bad)
    return not bad and checked > 0, detail


def check_7():
    bad, n, identity = [], 0, 0.0
    worst = {"t_s": (0.0, ""), "n_s": (0.0, ""), "m_o": (0.0, "")}
    for table in TABLES:
        for plant, cls, m, w, ratio, row in _rows(table):
            w_r = ratio * w
            _, kp, kr1, kr2, t_s, n_s, m_o = row
            rep = evaluate(_plant(plant), PRController(kp, kr1, kr2, w_r), TrackingConfig(omega_r=w_r))
            n += 1
            tag = f"{table}@{ratio}"
            if not rep.converged:
                bad.append(f"{tag} unsettled")
                continue
            identity = max(identity, abs(rep.n_s - w_r * rep.t_s / (2 * np.pi)))
            e_t = abs(rep.t_s / t_s - 1)
            e_m = abs(rep.m_o - m_o)
            checks = [("t_s", e_t, 0.10), ("n_s", abs(rep.n_s / n_s - 1), 0.10), ("m_o", e_m, 2.0)]
            if n_s < 3:
                checks.append(("n_s", abs(rep.n_s - n_s), 0.3))
            for key, e, lim in checks:
                if e / lim > worst[key][0]:
                    worst[key] = (e / lim, tag)
                if e > lim:
                    bad.append(f"{tag} {key}")
    detail = (f"{n} rows; worst fraction of tolerance used: "
              + ", ".join(f"{k} {v[0]:.2f} ({v[1]})" for k, v in worst.items())
              + f"; max |n_s - w_r t_s/2pi| = {identity:.1e}")
    if bad:
        detail += "; failing: " + ", ".join(bad)
    return not bad and identity == 0.0, detail


def _reference_batch():
    return run_batch(load_spec("builtin:reference_batch"), jobs=4)


def check_8(results=None):
    results = results if results is not None else _reference_batch()
    bad, parts = [], []
    for res in results:
        if not res.name.startswith(("g1", "g2")):
            continue
        by_ratio = {c.ratio: c.values.get("n_s", np.nan) for c in res.cases}
        seq = [by_ratio[r] for r in (0.5, 0.7, 0.9)]
        parts.append(f"{res.name} " + "<".join(f"{v:.3g}" for v in seq))
        if not (seq[0] < seq[1] < seq[2]):
            bad.append(res.name)
    shape_ok = all(len(r.cases) == 5 for r in results)
    detail = "n_s at ratios 0.5/0.7/0.9: " + ", ".join(parts)
    if bad:
        detail += "; not increasing: " + ", ".join(bad)
    return not bad and shape_ok and len(parts) == 4, detail


def check_9():
    parts, ok = [], True
    for gamma, base in FLATNESS_BASELINE.items():
        dev = phase_flatness(make_phase_element(gamma), (1e-2, 1e2), 1000)
        ok &= dev <= 2.0 and abs(dev - base) <= 1e-9
        parts.append(f"gamma {gamma:g}: {dev:.4f} deg (baseline {base:.4f})")
    return ok, "; ".join(parts)


def check_10():
    parts, ok = [], True
    gammas = {"Ga": 0.0, "Gb": -60.0, "Gc": -120.0}
    worst_relay = 0.0
    for name in BENCHMARK:
        G, F = _plant(name), make_phase_element(gammas[name])
        coarse = run_relay(F, G, RelayConfig())
        fine = run_relay(F, G, RelayConfig(h=coarse.config.h / 2))
        for a, b in ((coarse.cycle.amplitude, fine.cycle.amplitude),
                     (coarse.cycle.period, fine.cycle.period)):
            worst_relay = max(worst_relay, abs(b / a - 1))
    ok &= worst_relay <= 2e-3
    parts.append(f"relay A/T change {100 * worst_relay:.4f}%")
    worst_t, worst_m = 0.0, 0.0
    for name in BENCHMARK:
        G = _plant(name)
        pt = analytic_point(G)
        for ratio in DEFAULT_RATIOS:
            c = _quiet_tune(pt, ratio * pt.omega_nu)
            cfg = TrackingConfig(omega_r=c.omega_r)
            a, run = evaluate(G, c, cfg, return_run=True)
            b = evaluate(G, c, TrackingConfig(omega_r=c.omega_r, h=run.h / 2))
            worst_t = max(worst_t, abs(a.t_s - b.t_s) / cfg.period)
            worst_m = max(worst_m, abs(a.m_o - b.m_o))
    ok &= worst_t < 1.0 and worst_m < 0.5
    parts.append(f"tracking t_s change {worst_t:.3g} periods, m_o change {worst_m:.3g} pp")
    spec = load_spec("builtin:benchmark_batch")
    with tempfile.TemporaryDirectory() as tmp:
        dirs = [Path(tmp) / "a", Path(tmp) / "b"]
        for d, jobs in zip(dirs, (1, 3)):
            write_batch(run_batch(spec, jobs=jobs), spec, d)
        files = sorted(p.name for p in dirs[0].iterdir())
        same = all((dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes() for f in files)
    ok &= same
    parts.append(f"batch output {'bit-identical' if same else 'DIFFERS'} over {len(files)} files")
    return ok, "; ".join(parts)


CHECKS = {i: globals()[f"check_{i}"] for i in range(1, 11)}


def _run(n, log):
    passed, detail = CHECKS[n]()
    log.append(f"criterion {n}: {'PASS' if passed else 'FAIL'} - {detail}")
    print(log[-1])
    assert passed, detail


def test_criterion_1_tuning_reproduction(acceptance_log):
    _run(1, acceptance_log)


def test_criterion_2_tuning_closure(acceptance_log):
    _run(2, acceptance_log)


def test_criterion_3_zero_product(acceptance_log):
    _run(3, acceptance_log)


def test_criterion_4_analytic_identification(acceptance_log):
    _run(4, acceptance_log)


def test_criterion_5_relay_vs_oracle(acceptance_log):
    _run(5, acceptance_log)


def test_criterion_6_phase_margins(acceptance_log):
    _run(6, acceptance_log)


def test_criterion_7_time_domain(acceptance_log):
    _run(7, acceptance_log)


def test_criterion_8_degradation_ordering(acceptance_log):
    _run(8, acceptance_log)


def test_criterion_9_foi_flatness(acceptance_log):
    _run(9, acceptance_log)


def test_criterion_10_numerical_hygiene(acceptance_log):
    _run(10, acceptance_log)


if __name__ == "__main__":
    failed = 0
    for n, check in CHECKS.items():
        passed, detail = check()
        failed += not passed
        print(f"criterion {n}: {'PASS' if passed else 'FAIL'} - {detail}")
    sys.exit(1 if failed else 0)
