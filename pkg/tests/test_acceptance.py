"""Acceptance criteria, one test per criterion.

Each test records a one-line verdict that is printed in the terminal
summary (see ``conftest.py``).  Criteria 2, 4, 5 and 11 share one
Monte Carlo experiment built by a session fixture; it takes tens of
minutes on one core.
"""
import itertools
import json
import math
import time

import numpy as np
import pytest
from scipy import integrate, optimize

from rdbp import records
from rdbp.brs import greedy_count
from rdbp.cli import main
from rdbp.dists import Exponential, LogNormal, Uniform
from rdbp.equilibrium import solve_equilibrium
from rdbp.sim import balance_residual, monte_carlo, ratio_recursion_check, run_trajectory
from rdbp.society import SubPopulationSpec
from rdbp.transport import (brute_force_optimal, check_monge, control_search, discretize,
                            distance_cost, northwest_plan, quantile_coupling_cost)

from conftest import worked_specs

pytestmark = pytest.mark.acceptance

REPORT: dict[int, str] = {}

HORIZON, RUNS, CAP = 300, 200, 10**6
STARTS = {"1000x1000": ((1000, 1000), 2000), "1000x3000": ((1000, 3000), 3000)}


def report(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    REPORT[k] = line
    print(line)


def oracle_equilibrium():
    """Worked config solved with scipy alone: brentq for tau, quad for the partial means."""
    tau = optimize.brentq(lambda t: 2.0 * t - 3.0 * (1.0 - math.exp(-t)), 0.5, 1.0, xtol=1e-15)
    mh = integrate.quad(lambda x: x, 0.0, tau, epsabs=1e-15)[0]
    mi = integrate.quad(lambda x: x * math.exp(-x), 0.0, tau, epsabs=1e-15)[0]
    return tau, (0.9 - 2.0 * mh) / (3.0 * mi - 0.5)


def worked_config(initial, seed):
    law = {"h": ({"family": "poisson", "mean": 2.0}, {"family": "deterministic", "value": 0.9},
                 {"family": "uniform", "lower": 0.0, "upper": 1.0}),
           "i": ({"family": "poisson", "mean": 3.0}, {"family": "deterministic", "value": 0.5},
                 {"family": "exponential", "rate": 1.0})}
    subs = [{"label": lab, "initial_count": n, "offspring": o, "resource": r, "claims": c}
            for (lab, (o, r, c)), n in zip(law.items(), initial)]
    return {"seed": seed, "horizon": HORIZON, "runs": RUNS, "population_cap": CAP, "subpopulations": subs}


# ---------------------------------------------------------------------------
# shared experiment for criteria 2, 4, 5 and 11
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def experiment(tmp_path_factory):
    """Criterion 2's Monte Carlo runs, kept in memory and written as CLI output files."""
    out = tmp_path_factory.mktemp("criterion2")
    specs = list(worked_specs())
    data = {}
    for name, (initial, seed) in STARTS.items():
        t0 = time.perf_counter()
        mc = monte_carlo(specs, initial, horizon=HORIZON, runs=RUNS, base_seed=seed,
                         population_cap=CAP, keep_traces=True)
        cfg = out / f"{name}.json"
        cfg.write_text(json.dumps(worked_config(initial, seed)))
        records.write_trace_csv(out / f"{name}_trace.csv", mc.outcomes, ["h", "i"])
        records.atomic_write(out / f"{name}_summary.json",
                             records.dumps(records.summary_record(mc, ["h", "i"], HORIZON)))
        data[name] = {"mc": mc, "config": cfg, "seconds": time.perf_counter() - t0}
    return {"dir": out, "runs": data, "specs": specs}


@pytest.fixture(scope="session")
def solver_star():
    (sol,) = solve_equilibrium(*worked_specs())
    return sol


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def test_criterion_01_solver_exactness():
    t0 = time.perf_counter()
    sols = solve_equilibrium(*worked_specs())
    elapsed = time.perf_counter() - t0
    tau_o, alpha_o = oracle_equilibrium()
    strict = [s for s in sols if s.classification == "Strict"]
    ok = (len(sols) == 1 and len(strict) == 1 and max(sols[0].residuals) < 1e-9
          and abs(sols[0].tau - tau_o) < 1e-6 and abs(sols[0].alpha - alpha_o) < 1e-6 and elapsed < 1.0)
    s = sols[0] if sols else None
    report(1, ok, f"solutions={len(sols)} tau={s.tau:.10f} (oracle {tau_o:.10f}) "
                  f"alpha={s.alpha:.10f} (oracle {alpha_o:.10f}) residuals={max(s.residuals):.1e} "
                  f"time={elapsed:.3f}s")
    assert ok


def test_criterion_02_sufficiency(experiment, solver_star):
    parts, ok = [], True
    for name, d in experiment["runs"].items():
        mc = d["mc"]
        med = mc.conditional_ratio_stats["median"] if mc.conditional_ratio_stats else float("nan")
        rel = abs(med - solver_star.alpha) / solver_star.alpha
        good = mc.joint_survival_fraction > 0.5 and rel <= 0.15
        ok &= good
        parts.append(f"[{name}: joint={mc.joint_survival_fraction:.3f} median alpha_T={med:.4g} "
                     f"rel.err={rel:.3g} {d['seconds']:.0f}s]")
    report(2, ok, f"alpha*={solver_star.alpha:.6f} " + " ".join(parts))
    assert ok


def test_criterion_03_extinction():
    tau = oracle_equilibrium()[0]
    c = 0.8 / (2.0 * tau)
    specs = worked_specs(m_h=2.0 * c, r_h=0.9 * c, m_i=3.0 * c, r_i=0.5 * c)
    sols = solve_equilibrium(*specs)
    mc = monte_carlo(specs, (1000, 1000), horizon=400, runs=200, base_seed=4000)
    last = max(o.status.generation for o in mc.outcomes if hasattr(o.status, "generation"))
    ok = (len(sols) == 1 and abs(sols[0].effective_mean - 0.8) < 1e-9
          and mc.joint_survival_fraction == 0.0)
    report(3, ok, f"effective mean={sols[0].effective_mean:.9f} joint survival={mc.joint_survival_fraction} "
                  f"latest first extinction at t={last}")
    assert ok


def test_criterion_04_threshold_convergence(experiment, solver_star):
    sds, finals = [], []
    for d in experiment["runs"].values():
        for o in d["mc"].surviving():
            taus = np.array([r.threshold for r in o.trace[-50:]])
            sds.append(taus.std())
            finals.append(o.final_record.threshold)
    if not sds:
        report(4, False, "no jointly surviving runs")
        pytest.fail("no jointly surviving runs")
    tau_star = solver_star.tau
    mean_sd, mean_final = float(np.mean(sds)), float(np.mean(finals))
    ok = mean_sd < 0.05 * tau_star and abs(mean_final - tau_star) <= 0.10 * tau_star
    report(4, ok, f"tau*={tau_star:.6f} mean sd(last 50)={mean_sd:.3g} ({mean_sd / tau_star:.2%}) "
                  f"mean tau_T={mean_final:.6f} ({abs(mean_final - tau_star) / tau_star:.2%} off) "
                  f"over {len(sds)} runs")
    assert ok


def test_criterion_05_balance(experiment):
    res = [balance_residual(r) for d in experiment["runs"].values()
           for o in d["mc"].outcomes for r in o.trace if r.counts[0] >= 10**5]
    share = float(np.mean(np.array(res) < 1e-3)) if res else 0.0
    ok = bool(res) and share >= 0.99
    report(5, ok, f"{len(res)} generations with Gamma_h >= 1e5, share below 1e-3 = {share:.4f}, "
                  f"max residual = {max(res) if res else float('nan'):.2e}")
    assert ok


def test_criterion_06_ratio_recursion():
    specs = worked_specs()

    def median_residual(n):
        vals = []
        for seed in range(50):
            o = run_trajectory(specs, (n, n), horizon=2, seed=6000 + seed)
            vals.append(ratio_recursion_check(o.trace[0], o.trace[1], specs))
        return float(np.median(vals))

    small, large = median_residual(10**3), median_residual(10**5)
    ok = large < small / 2
    report(6, ok, f"median residual Gamma~1e3: {small:.3e}, Gamma~1e5: {large:.3e} (ratio {large / small:.3f})")
    assert ok


BRS_CASES = [(name, law, n, 0.2 * n * law.mean())
             for name, law in [("uniform", Uniform(0.0, 1.0)), ("exponential", Exponential(1.0)),
                               ("lognormal", LogNormal(0.0, 0.5))]
             for n in (10**2, 10**3, 10**4)]


def run_brs_cases(out_dir):
    paths = []
    for k, (name, law, n, s) in enumerate(BRS_CASES):
        path = out_dir / f"brs_{name}_{n}.json"
        code = main(["brs", "--dist", json.dumps(law.to_record()), "--n", str(n), "--budget", repr(s),
                     "--runs", "10000", "--seed", str(7000 + k), "--out", str(path)])
        assert code == 0
        paths.append(path)
    return paths


def exhaustive_max(claims, budget):
    n = len(claims)
    masks = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
    sums = masks @ claims
    return int(masks.sum(axis=1)[sums <= budget].max())


@pytest.fixture(scope="session")
def brs_outputs(tmp_path_factory):
    out = tmp_path_factory.mktemp("criterion7")
    return out, run_brs_cases(out)


def test_criterion_07_brs(brs_outputs):
    _, paths = brs_outputs
    worst, ok = [], True
    for (name, _, n, _), path in zip(BRS_CASES, paths):
        rec = json.loads(path.read_text())
        margin = rec["bound"] + rec["ci"] - rec["estimate"]
        ok &= margin >= 0
        worst.append((margin, f"{name} n={n}"))
    rng = np.random.default_rng(7500)
    mismatches = 0
    for _ in range(500):
        n = int(rng.integers(1, 16))
        claims = [rng.random, rng.exponential, lambda size: rng.lognormal(0, 0.5, size)][int(rng.integers(3))](size=n)
        budget = float(rng.uniform(0, claims.sum()))
        mismatches += greedy_count(claims, budget) != exhaustive_max(claims, budget)
    ok &= mismatches == 0
    m, where = min(worst)
    report(7, ok, f"9 combos, smallest bound+ci-estimate margin {m:.3f} ({where}); "
                  f"greedy vs exhaustive mismatches {mismatches}/500")
    assert ok


def test_criterion_08_monge_optimality():
    rng = np.random.default_rng(8000)
    worst_cost = worst_marg = 0.0
    identity_ok = True
    for _ in range(100):
        m = int(rng.integers(1, 7))
        n = int(rng.integers(1, 9 - m))
        total = int(rng.integers(max(m, n), 15))
        a = (rng.multinomial(total - m, np.ones(m) / m) + 1).astype(float)
        b = (rng.multinomial(total - n, np.ones(n) / n) + 1).astype(float)
        c = distance_cost(np.sort(rng.uniform(0, 5, m)), np.sort(rng.uniform(0, 5, n)), 2.0)
        assert check_monge(c, 1e-12)
        plan = northwest_plan(a, b, c)
        worst_cost = max(worst_cost, abs(plan.total_cost - brute_force_optimal(a, b, c)))
        cum = np.cumsum(np.cumsum(plan.flows, axis=0), axis=1)
        identity_ok &= bool(np.array_equal(cum, np.minimum.outer(np.cumsum(a), np.cumsum(b))))
        worst_marg = max(worst_marg, np.abs(plan.flows.sum(1) - a).max(), np.abs(plan.flows.sum(0) - b).max())
    ok = worst_cost <= 1e-9 and identity_ok and worst_marg <= 1e-9
    report(8, ok, f"100 instances: max |NW - optimum| = {worst_cost:.1e}, cumulative-min identity exact: "
                  f"{identity_ok}, max marginal error = {worst_marg:.1e}")
    assert ok


def test_criterion_09_continuous_coupling():
    third = quantile_coupling_cost(Uniform(0, 1), Uniform(0, 2), 2.0)
    ident = quantile_coupling_cost(LogNormal(0.0, 0.5), LogNormal(0.0, 0.5), 2.0)
    rels = []
    for src, dst in [(Uniform(0, 1), Uniform(0, 2)), (Exponential(1.0), Exponential(2.0)),
                     (LogNormal(0.0, 0.5), Exponential(1.0))]:
        a, b = discretize(src, 200), discretize(dst, 200)
        disc = northwest_plan(a, b, distance_cost(a.labels, b.labels, 2.0)).total_cost
        cont = quantile_coupling_cost(src, dst, 2.0)
        rels.append(abs(disc - cont) / cont)
    ok = abs(third - 1 / 3) <= 1e-6 and ident == 0.0 and max(rels) <= 0.01
    report(9, ok, f"U(0,1)->U(0,2) = {third:.10f}, identity = {ident}, "
                  f"200-bin rel. errors = {', '.join(f'{r:.2e}' for r in rels)}")
    assert ok


def test_criterion_10_control_loop():
    spec_h, spec_i = worked_specs()
    grid = np.linspace(0.25, 4.0, 16)
    ranked = control_search(spec_h.claims, [({"theta": float(t)}, Uniform(0.0, float(t))) for t in grid],
                            spec_h, spec_i, p=2.0)
    strict_ok = True
    for cand in ranked:
        law = Uniform(0.0, cand.params["theta"])
        sols = solve_equilibrium(SubPopulationSpec("h", spec_h.offspring, spec_h.resource, law), spec_i)
        strict_ok &= any(s.classification == "Strict" and s.tau == cand.demand.tau_tilde for s in sols)
    recomputed = [quantile_coupling_cost(spec_h.claims, Uniform(0.0, c.params["theta"]), 2.0) for c in ranked]
    order_ok = recomputed == [c.cost for c in ranked] and recomputed == sorted(recomputed)
    ok = bool(ranked) and strict_ok and order_ok
    report(10, ok, f"{len(ranked)}/16 admissible, all strict on re-solve: {strict_ok}, "
                   f"ranking consistent: {order_ok}, best theta = {ranked[0].params['theta'] if ranked else None}")
    assert ok


def test_criterion_11_determinism(experiment, brs_outputs, tmp_path):
    same = []
    for name, d in experiment["runs"].items():
        trace, summary = tmp_path / f"{name}_trace.csv", tmp_path / f"{name}_summary.json"
        assert main(["simulate", "--config", str(d["config"]), "--out", str(trace), "--summary", str(summary)]) == 0
        same.append(trace.read_bytes() == (experiment["dir"] / f"{name}_trace.csv").read_bytes())
        same.append(summary.read_bytes() == (experiment["dir"] / f"{name}_summary.json").read_bytes())
    first_dir, first = brs_outputs
    again = run_brs_cases(tmp_path)
    same += [a.read_bytes() == b.read_bytes() for a, b in zip(first, again)]
    ok = all(same)
    report(11, ok, f"{sum(same)}/{len(same)} output files byte-identical on repeat "
                   f"(4 simulate files, 9 brs files)")
    assert ok
