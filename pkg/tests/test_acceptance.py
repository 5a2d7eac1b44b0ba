"""Acceptance suite: one test per primary criterion, each recording a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are repeated
in the "acceptance criteria" section of the terminal summary.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from gpbo.acq import expected_improvement
from gpbo.bench import check_final_trace, make_problem, read_run
from gpbo.fidelity import FidelityParams, TrialStatus, run_final
from gpbo.gp import fit_unit, predict_unit
from gpbo.loop import LoopParams, run_preliminary
from oracles import ei_quadrature, posterior_naive

N_SEEDS = 20
GRID = (50, 50)


def bench(*args):
    return subprocess.run([sys.executable, "-m", "gpbo.cli", *map(str, args)],
                          capture_output=True, text=True)


def test_c1_ei_matches_quadrature(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for y_min in (-1.0, 0.0, 1.0):
        for std in (0.1, 0.5, 1.0, 2.0):
            for mean in np.linspace(-3, 3, 61):
                err = abs(expected_improvement(mean, std, y_min) - ei_quadrature(mean, std, y_min))
                worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 10
    verdict("C1 EI oracle", ok, f"max abs err {worst:.2e} (tol 1e-6), {elapsed:.1f}s")
    assert ok


def test_c2_gp_matches_dense_inverse(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(50):
        n, d = int(rng.integers(2, 21)), int(rng.integers(1, 6))
        X = rng.random((n, d))
        y = np.sin(3 * X).sum(axis=1) + 0.1 * rng.normal(size=n)
        model = fit_unit(X, y, seed=i)
        Xs = rng.random((10, d))
        mean, var = predict_unit(model, Xs)
        p = model.params
        m_ref, v_ref = posterior_naive(X, model.z, Xs, p.lengthscales, p.signal_variance,
                                       p.noise_variance + model.jitter)
        m_ref = m_ref * model.y_std + model.y_mean
        v_ref = v_ref * model.y_std**2
        worst = max(worst,
                    np.max(np.abs(mean - m_ref) / np.abs(m_ref)),
                    np.max(np.abs(var - v_ref) / np.abs(v_ref)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 30
    verdict("C2 GP oracle", ok, f"max rel err {worst:.2e} over 50 fitted problems (tol 1e-8), {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_c3_preliminary_regret(verdict):
    t0 = time.perf_counter()
    bo, rs, hits = [], [], 0
    for seed in range(N_SEEDS):
        problem = make_problem("branin_grid", GRID, seed=seed)
        opt = problem.grid_optimum()
        best = run_preliminary(problem, 100, LoopParams(batch_size=5), seed=seed).best_reward()
        rand = run_preliminary(problem, 100, LoopParams(batch_size=5, random_search=True),
                               seed=seed).best_reward()
        hits += opt - best <= 0.01 * abs(opt)
        bo.append(opt - best)
        rs.append(opt - rand)
    elapsed = time.perf_counter() - t0
    ok = hits >= 0.8 * N_SEEDS and np.median(bo) < np.median(rs) and elapsed < 600
    verdict("C3 preliminary regret", ok,
            f"{hits}/{N_SEEDS} seeds within 1% of optimum, median regret BO {np.median(bo):.4g} "
            f"vs random {np.median(rs):.4g}, {elapsed:.0f}s")
    assert ok


def _parse_verify(stdout):
    vals, per_iter = {}, []
    for line in stdout.splitlines():
        parts = line.split()
        if parts[0] == "iteration":
            per_iter.append({parts[i]: float(parts[i + 1]) for i in range(2, len(parts), 2)})
        else:
            vals[parts[0]] = parts[1]
    return vals, per_iter


def test_c4_noise_fidelity(verdict):
    t0 = time.perf_counter()
    proc = bench("verify-noise", "--problem", "branin_grid", "--draws", 10_000, "--seed", 0)
    elapsed = time.perf_counter() - t0
    assert proc.returncode == 0, proc.stderr
    vals, per_iter = _parse_verify(proc.stdout)
    cov, exc = float(vals["coverage"]), float(vals["exceedance"])
    widths = [r["ci_width"] for r in per_iter]
    # Per-iteration rates rest on 10k draws each (binomial sd ~0.005); 0.025 is a
    # 5-sd guard against a biased iteration, not the criterion's tolerance.
    dev = max(max(abs(r["coverage"] - 0.95), abs(r["exceedance"] - 0.50)) for r in per_iter)
    ok = (abs(cov - 0.95) <= 0.015 and abs(exc - 0.50) <= 0.015 and dev <= 0.025
          and len(widths) == 13 and all(a > b for a, b in zip(widths, widths[1:]))
          and vals["widths_strictly_decreasing"] == "true" and elapsed < 60)
    verdict("C4 noise fidelity", ok,
            f"coverage {cov:.4f}, exceedance {exc:.4f} (tol 0.015), worst per-iteration deviation "
            f"{dev:.4f}, widths decreasing over t=1..13, {elapsed:.1f}s")
    assert ok


def test_c5_consistency(verdict):
    t0 = time.perf_counter()
    proc = bench("verify-noise", "--problem", "branin_grid", "--draws", 1, "--seed", 0)
    elapsed = time.perf_counter() - t0
    assert proc.returncode == 0, proc.stderr
    vals, _ = _parse_verify(proc.stdout)
    allp, top = float(vals["consistency_t7"]), float(vals["consistency_t7_top1pct"])
    ok = allp > 0.95 and top < allp and elapsed < 60
    verdict("C5 consistency", ok, f"all-pairs {allp:.4f} (> 0.95), top-1% {top:.4f}, {elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def final_runs(tmp_path_factory):
    """Final-protocol runs with and without early stopping over the seed set."""
    out = tmp_path_factory.mktemp("final")
    t0 = time.perf_counter()
    runs = []
    for seed in range(N_SEEDS):
        problem = make_problem("branin_grid", GRID, seed=seed)
        with_es = run_final(problem, FidelityParams(), LoopParams(), seed=seed)
        without = run_final(problem, FidelityParams.without_stopping(), LoopParams(), seed=seed)
        path = out / f"final_{seed}.jsonl"
        with_es.write_jsonl(path)
        runs.append((problem, with_es, without, path))
    return runs, time.perf_counter() - t0


@pytest.mark.slow
def test_c6_trace_invariants(final_runs, verdict):
    runs, _ = final_runs
    problems, worst_time, n_stops = [], 0.0, 0
    for _, report, _, path in runs:
        t0 = time.perf_counter()
        issues = check_final_trace(read_run(path), warmup=40, decision_iteration=7, budget=700)
        worst_time = max(worst_time, time.perf_counter() - t0)
        problems += [f"{path.name}: {i}" for i in issues]
        n_stops += report.counts["stopped"]
    ok = not problems and n_stops > 0 and worst_time < 60
    detail = f"{len(runs)} traces, {n_stops} early stops audited, 0 violations" if not problems \
        else f"{len(problems)} violations, first: {problems[0]}"
    verdict("C6 stopping invariants", ok, f"{detail}, {worst_time:.2f}s max per trace")
    assert ok, problems[:5]


def _best_valid(report):
    return max(t.final_reward for t in report.trials if t.status is TrialStatus.COMPLETED)


@pytest.mark.slow
def test_c7_early_stopping_efficacy(final_runs, verdict):
    runs, elapsed = final_runs
    more = all(a.counts["attempted"] > b.counts["attempted"] for _, a, b, _ in runs)
    best_es = np.median([_best_valid(a) for _, a, _, _ in runs])
    best_no = np.median([_best_valid(b) for _, _, b, _ in runs])
    reward_range = runs[0][0].reward_range
    stopped, completed_late = [], []
    for problem, report, _, _ in runs:
        n_done = 0
        for t in report.trials:
            if t.status is TrialStatus.COMPLETED:
                if n_done >= 40:
                    completed_late.append(t.final_reward)
                n_done += 1
            elif not t.budget_truncated:
                stopped.append(problem.evaluate_full(t.config))
    ok = (more and best_es >= best_no - 0.01 * reward_range
          and np.median(stopped) <= np.median(completed_late) and elapsed < 900)
    attempted = [a.counts["attempted"] for _, a, _, _ in runs]
    verdict("C7 early-stopping efficacy", ok,
            f"attempted {min(attempted)}-{max(attempted)} vs 50 without, median best {best_es:.4g} "
            f"vs {best_no:.4g}, median true final stopped {np.median(stopped):.4g} "
            f"<= completed {np.median(completed_late):.4g}, {elapsed:.0f}s")
    assert ok


DETERMINISM_CASES = [
    ("preliminary", ["--budget", 30]),
    ("preliminary", ["--budget", 30, "--random-search"]),
    ("final", []),
    ("final", ["--no-early-stop"]),
]


def test_c8_determinism(tmp_path, verdict):
    mismatched, sizes = [], []
    for k, (protocol, extra) in enumerate(DETERMINISM_CASES):
        outputs = []
        for i in range(2):
            out = tmp_path / f"run{k}_{i}.jsonl"
            proc = bench("run", "--protocol", protocol, "--problem", "branin_grid", "--grid", "50x50",
                         "--seed", 11, *extra, "--out", out)
            assert proc.returncode == 0, proc.stderr
            outputs.append(out.read_bytes())
        sizes.append(len(outputs[0]))
        if outputs[0] != outputs[1] or not outputs[0]:
            mismatched.append(" ".join(map(str, [protocol, *extra])))
    ok = not mismatched
    verdict("C8 determinism", ok,
            f"{len(DETERMINISM_CASES) - len(mismatched)}/{len(DETERMINISM_CASES)} run commands "
            f"byte-identical on repeat ({min(sizes)}-{max(sizes)} bytes)")
    assert ok, mismatched
