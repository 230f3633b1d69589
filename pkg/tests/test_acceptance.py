"""Acceptance criteria 1 to 10, one test each.

Every test prints a single PASS/FAIL line (collected again in the terminal
summary) and then asserts the same condition.
"""

import io
import time
from contextlib import redirect_stdout
from dataclasses import replace

import numpy as np
import pytest

from qdbcast import oracle, qsim
from qdbcast.adversary import SenderSplit, strategy_catalog
from qdbcast.bcast import BroadcastParams, run_broadcast
from qdbcast.netsim import Network
from qdbcast.oracle import OutcomeClass
from qdbcast.players import Player
from qdbcast.runner import RunConfig, dumps_report, main, run_experiment

from conftest import ACCEPTANCE_LINES

S, R0, R1 = Player.S, Player.R0, Player.R1
SEED = 2026
TRIALS = 1000


def record(n: int, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {n:>2}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def shared_results(rng, m=600):
    rows = oracle.sample_triplets(rng, m)
    return {S: rows[:, 0], R0: rows[:, 1], R1: rows[:, 2]}


def trial_rng(i):
    return np.random.default_rng(np.random.SeedSequence(SEED, spawn_key=(i,)))


@pytest.fixture(scope="module")
def catalog_runs():
    """Every catalog strategy, 1000 end-to-end trials each, oracle path."""
    out = {}
    for strat in strategy_catalog():
        cfg = RunConfig(trials=TRIALS, master_seed=SEED, adversary=strat.label())
        out[strat.label()] = (strat, run_experiment(cfg)["aggregate"])
    return out


def test_criterion_01_quantum_core_exactness():
    t0 = time.perf_counter()
    ket = lambda a, b: np.eye(9)[3 * a + b]
    pair = np.zeros((9, 9))
    for a, b in ((0, 1), (0, 2), (1, 2)):
        v = (ket(a, b) - ket(b, a)) / np.sqrt(2)
        pair += np.outer(v, v) / 3
    state = qsim.aharonov_state()
    errs = []
    for keep in ((0, 1), (0, 2), (1, 2)):
        errs.append(np.abs(qsim.partial_trace(state, keep) - pair).max())
    eig = np.sort(np.linalg.eigvalsh(qsim.partial_trace(state, (0, 1))))
    eig_err = np.abs(eig - np.r_[np.zeros(6), np.full(3, 1 / 3)]).max()
    marg_err = max(np.abs(qsim.partial_trace(state, [k]) - np.eye(3) / 3).max() for k in range(3))
    dt = time.perf_counter() - t0
    ok = max(errs) <= 1e-12 and eig_err <= 1e-10 and marg_err <= 1e-12 and dt < 1
    record(1, ok, f"pair err {max(errs):.1e}, eigen err {eig_err:.1e}, marginal err {marg_err:.1e}, {dt:.3f} s")


def test_criterion_02_correlation_law():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    start = np.tile(qsim.aharonov_state().amplitudes, (100_000, 1))
    hist = np.zeros(6, dtype=np.int64)
    repeats = 0
    for _ in range(10):
        amps = start.copy()
        cols = []
        for slot in range(3):
            out, amps = qsim.measure_slot_many(amps, slot, rng)
            cols.append(out)
        rows = np.stack(cols, axis=1)
        distinct = (rows[:, 0] != rows[:, 1]) & (rows[:, 0] != rows[:, 2]) & (rows[:, 1] != rows[:, 2])
        repeats += int(np.count_nonzero(~distinct))
        hist += oracle.class_histogram(rows[distinct])
    p = oracle.uniformity_pvalue(hist)
    dt = time.perf_counter() - t0
    record(2, repeats == 0 and p > 0.001 and dt < 30,
           f"10^6 z-measurements, {repeats} repeated digits, uniformity p={p:.3f}, {dt:.1f} s")


def test_criterion_03_basis_invariance():
    rng = np.random.default_rng(SEED)
    state = qsim.aharonov_state()
    worst, violations = 0.0, 0
    for _ in range(100):
        u = qsim.random_unitary(rng)
        rotated = qsim.apply_common_basis(state, u)
        worst = max(worst, abs(abs(np.vdot(state.amplitudes, rotated.amplitudes)) - 1))
        amps = np.tile(state.amplitudes, (10_000, 1))
        cols = []
        for slot in range(3):
            out, amps = qsim.measure_slot_many(amps, slot, rng, basis=u)
            cols.append(out)
        rows = np.stack(cols, axis=1)
        violations += int(np.count_nonzero((np.sort(rows, axis=1) != np.arange(3)).any(axis=1)))
    record(3, worst <= 1e-10 and violations == 0,
           f"100 unitaries, max ||<A|uuu|A>|-1| = {worst:.1e}, {violations} repeated outcomes in 10^6 samples")


def test_criterion_04_oracle_equivalence():
    rng = np.random.default_rng(SEED)
    classical = oracle.class_histogram(oracle.sample_triplets(rng, 60_000))
    amps = np.tile(qsim.aharonov_state().amplitudes, (60_000, 1))
    cols = []
    for slot in range(3):
        out, amps = qsim.measure_slot_many(amps, slot, rng)
        cols.append(out)
    quantum = oracle.class_histogram(np.stack(cols, axis=1))
    p = oracle.two_sample_pvalue(classical, quantum)
    record(4, p > 0.001, f"two-sample chi-square over 6 classes, n=60000 each, p={p:.3f}")


def test_criterion_05_honest_broadcast():
    failures = 0
    for x in (0, 1):
        for i in range(TRIALS):
            rng = trial_rng(2 * i + x)
            out = run_broadcast(Network(), shared_results(rng), x, BroadcastParams())
            if out.outputs != {S: x, R0: x, R1: x}:
                failures += 1
    e2e = [run_experiment(RunConfig(trials=TRIALS, master_seed=SEED, sender_input=x))["aggregate"] for x in (0, 1)]
    live_ok = all(a["live_agreement_rate"] == 1 and a["sender_validity_rate"] == 1 for a in e2e)
    aborts = [a["abort_rate"] for a in e2e]
    record(5, failures == 0 and live_ok,
           f"m=600, 2x1000 sessions, {failures} agreement/validity failures; "
           f"end-to-end live trials all valid (abort rates {aborts[0]:.3f}, {aborts[1]:.3f})")


def test_criterion_06_sender_split():
    bad, accepted = 0, 0
    for i in range(TRIALS):
        res = shared_results(trial_rng(i))
        out = run_broadcast(Network(), res, 0, BroadcastParams(), behaviors={S: SenderSplit()})
        rows = np.stack([res[S], res[R0], res[R1]], axis=1)
        class_one = int(np.count_nonzero(oracle.class_codes(rows) == oracle.CLASS_ORDER.index(OutcomeClass.I)))
        if out.outputs[R0] != out.outputs[R1]:
            bad += 1
        if out.conflict and out.proof_verdict and out.proof_size == class_one and out.outputs[R1] == 0:
            accepted += 1
    record(6, bad == 0 and accepted == TRIALS,
           f"1000 split sessions, {bad} disagreements, {accepted} R1 adoptions via class-I proof")


def test_criterion_07_cheating_r0():
    big = run_experiment(RunConfig(trials=TRIALS, master_seed=SEED, adversary="R0BitFlip"))
    sizes = [t["proof_size"] for t in big["per_trial"] if t["cheat_attempt"]]
    agg = big["aggregate"]
    cfg = RunConfig(
        trials=TRIALS, master_seed=SEED, adversary="R0BitFlip:proof_size=3",
        bcast=replace(BroadcastParams(), k_min=3),
    )
    small = run_experiment(cfg)["aggregate"]
    lo, hi = small["cheat_acceptance_wilson95"]
    ok = (
        agg["cheat_attempts"] > 0 and min(sizes) >= 20 and agg["cheat_accepted"] == 0
        and small["cheat_attempts"] > 0 and lo <= 0.125 <= hi
    )
    record(7, ok,
           f"|K|>=20: {agg['cheat_accepted']}/{agg['cheat_attempts']} accepted (min |K|={min(sizes)}); "
           f"|K|=3: {small['cheat_accepted']}/{small['cheat_attempts']} = {small['cheat_acceptance_rate']:.3f}, Wilson95 [{lo:.3f}, {hi:.3f}] vs 0.125")


def test_criterion_08_global_consistency(catalog_runs):
    split = [lbl for lbl, (_, a) in catalog_runs.items() if a["status_consistency_rate"] != 1]
    bad_fail = {lbl: catalog_runs[lbl][1]["abort_rate"] for lbl in ("R1BadStatesProduct", "R1BadStatesClassicalMix")}
    honest_ok = 1 - catalog_runs["HonestAll"][1]["abort_rate"]
    ok = not split and min(bad_fail.values()) >= 0.999 and honest_ok >= 0.99
    record(8, ok,
           f"{len(catalog_runs)} strategies x 1000: split statuses in {split or 'none'}; "
           f"bad-state Failure {min(bad_fail.values()):.3f}; honest Success {honest_ok:.3f}")


def test_criterion_09_detectable_broadcast(catalog_runs):
    failing, stress = [], []
    for lbl, (strat, agg) in catalog_runs.items():
        if strat.guarantee:
            if agg["detectable_broadcast_rate"] != 1:
                failing.append(lbl)
        else:
            stress.append(f"{lbl} agreement {agg['agreement_rate']:.3f}")
    n = sum(1 for s, _ in catalog_runs.values() if s.guarantee)
    record(9, not failing,
           f"{n} guaranteed strategies, failures: {failing or 'none'}; stress (reported): {'; '.join(stress)}")


def test_criterion_10_determinism_and_suite(tmp_path):
    cfg = RunConfig(trials=200, master_seed=SEED, adversary="R0BitFlip")
    same = dumps_report(run_experiment(cfg)).encode() == dumps_report(run_experiment(cfg)).encode()
    buf = io.StringIO()
    t0 = time.perf_counter()
    with redirect_stdout(buf):
        code = main(["--suite", "paper", "--seed", str(SEED), "--report", str(tmp_path / "suite.json")])
    dt = time.perf_counter() - t0
    fails = [l for l in buf.getvalue().splitlines() if l.startswith("FAIL")]
    record(10, same and code == 0 and not fails and dt < 300,
           f"byte-identical reports: {same}; suite exit {code}, {len(fails)} failing rows, {dt:.0f} s")
