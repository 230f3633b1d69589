import numpy as np
import pytest

from qdbcast import qsim
from qdbcast.adversary import Honest, R1BadStatesClassicalMix, R1BadStatesProduct, make_strategy
from qdbcast.dist import (
    MARGINAL_BASES,
    ConfigError,
    DistParams,
    DistView,
    GlobalStatus,
    marginal_test,
    pair_state_test,
    prepare_and_distribute,
    run_distribution,
)
from qdbcast.netsim import Network
from qdbcast.players import PLAYERS, Player
from qdbcast.sources import Preparation

S, R0, R1 = Player.S, Player.R0, Player.R1


def rngs(seed):
    ss = np.random.SeedSequence(seed).spawn(5)
    keys = ["public", "quantum", S, R0, R1]
    return {k: np.random.default_rng(s) for k, s in zip(keys, ss)}


def behaviors(r1=None):
    b = {p: Honest() for p in PLAYERS}
    if r1 is not None:
        b[R1] = r1
    return b


def test_honest_preparation_has_unit_fidelity():
    prep = Honest().prepare(DistView(R1, DistParams(), np.random.default_rng(0)))
    assert qsim.fidelity(prep.components[0][1], qsim.aharonov_state()) == pytest.approx(1, abs=1e-12)
    assert prep.is_aharonov


def test_product_preparation():
    prep = R1BadStatesProduct().prepare(None)
    assert qsim.fidelity(prep.components[0][1], qsim.aharonov_state()) == pytest.approx(1 / 6)
    assert prep.slot_probs(0).tolist() == [1, 0, 0]


@pytest.mark.parametrize("path", ["oracle", "qsim"])
def test_distribution_moves_home_slots(path):
    net = Network()
    src = prepare_and_distribute(net, Honest(), None, 12, path, np.random.default_rng(0))
    ledger = src.ledger
    assert ledger.owned_by(S, 0).size == 12
    assert ledger.owned_by(R0, 1).size == 12
    assert ledger.owned_by(R1, 2).size == 12
    assert ledger.owned_by(R1, 0).size == 0


def test_marginal_test_uniform_and_skewed():
    rng = np.random.default_rng(3)
    uniform = [rng.integers(0, 3, 100) for _ in MARGINAL_BASES]
    assert marginal_test(uniform, 0.001)
    assert not marginal_test([np.zeros(100, int)] + uniform[1:], 0.001)
    with pytest.raises(ConfigError):
        marginal_test([np.zeros(20, int)], 0.001)


def test_marginal_sample_size_config_error():
    with pytest.raises(ConfigError):
        DistParams(n_marginal=60)


def test_pair_state_test():
    assert pair_state_test(np.ones(20, bool))
    assert not pair_state_test(np.r_[np.ones(19, bool), False])
    assert pair_state_test(np.r_[np.ones(19, bool), False], max_fail_fraction=0.05)


def antisym_pass_from_matrices(prep, a, b):
    """P = Tr[(I - SWAP)/2 rho_ab], with rho_ab built by summing over the third digit."""
    rho = prep.density().reshape([3] * 6)
    c = ({0, 1, 2} - {a, b}).pop()
    rho_ab = np.zeros((9, 9), dtype=complex)
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    for t in range(3):
                        ket, bra = [0] * 3, [0] * 3
                        ket[a], ket[b], ket[c] = i, j, t
                        bra[a], bra[b], bra[c] = k, l, t
                        rho_ab[3 * i + j, 3 * k + l] += rho[tuple(ket + bra)]
    swap = np.zeros((9, 9))
    for i in range(3):
        for j in range(3):
            swap[3 * j + i, 3 * i + j] = 1
    return float(np.real(np.trace((np.eye(9) - swap) / 2 @ rho_ab)))


@pytest.mark.parametrize("pair", [(0, 1), (0, 2), (1, 2)])
def test_pair_pass_probabilities(pair):
    assert antisym_pass_from_matrices(Preparation.aharonov(), *pair) == pytest.approx(1)
    mix = Preparation.permutation_mixture()
    assert antisym_pass_from_matrices(mix, *pair) == pytest.approx(0.5)
    assert mix.antisym_pass_prob(*pair) == pytest.approx(0.5)
    prod = Preparation.product((0, 1, 2))
    assert prod.antisym_pass_prob(*pair) == pytest.approx(0.5)


def test_layout_is_a_disjoint_partition():
    p = DistParams()
    lay = p.layout(np.random.default_rng(0))
    allidx = np.concatenate(list(lay.values()))
    assert np.array_equal(np.sort(allidx), np.arange(p.n_total))


@pytest.mark.parametrize("path", ["oracle", "qsim"])
def test_honest_distribution_succeeds(path):
    res = run_distribution(behaviors(), DistParams(), rngs(1), path)
    assert all(res.status[p] is GlobalStatus.SUCCESS for p in PLAYERS)
    assert res.events == []
    payload = res.layout["payload"]
    assert not res.source.ledger.is_measured(payload).any()
    others = np.setdiff1d(np.arange(res.source.n), payload)
    assert res.source.ledger.is_measured(others).all()


@pytest.mark.parametrize("bad", [R1BadStatesProduct, R1BadStatesClassicalMix])
@pytest.mark.parametrize("path", ["oracle", "qsim"])
def test_bad_states_fail_everywhere(bad, path):
    res = run_distribution(behaviors(bad()), DistParams(), rngs(2), path)
    assert {res.status[p] for p in PLAYERS} == {GlobalStatus.FAILURE}
    assert any(e.startswith(("pair_fail", "marginal_fail")) for e in res.events)


def test_only_classical_mixture_passes_marginals():
    res = run_distribution(behaviors(R1BadStatesClassicalMix()), DistParams(), rngs(3))
    assert not any(e.startswith("marginal_fail") for e in res.events)
    assert any(e.startswith("pair_fail") for e in res.events)


def test_retained_payload_is_untouched_aharonov():
    res = run_distribution(behaviors(), DistParams(), rngs(4), "qsim")
    ref = qsim.aharonov_state()
    fids = [qsim.fidelity(res.source.state(j), ref) for j in res.layout["payload"]]
    assert min(fids) == pytest.approx(1, abs=1e-12)


def test_flag_blocker_on_s_or_r0_fails_everyone():
    for p in (S, R0):
        b = behaviors()
        b[p] = make_strategy("FlagBlocker", player=p.value).behavior
        res = run_distribution(b, DistParams(), rngs(5))
        honest = [q for q in PLAYERS if q != p]
        assert {res.status[q] for q in honest} == {GlobalStatus.FAILURE}
