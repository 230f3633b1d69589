"""Distribution and testing of the triplets before any payload broadcast.

R1 prepares every triplet and hands one qutrit to S and one to R0. S and R0
check their single-qutrit marginals, then test pairs they are given by the
other players. They swap flags, broadcast them with two bootstrapped
broadcast sessions (R1 always receiving quietly), and finally everybody
agrees on success or failure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from . import qsim
from .bcast import BroadcastParams, BroadcastRoles, run_broadcast
from .netsim import FlagBit, Network, QutritTransfer, SlotLedger, first_payload
from .players import HOME_SLOT, PLAYERS, Player
from .sources import Preparation, TripletSource, make_source

MIN_PER_BASIS = 30

# z plus the eigenbases of S_x and S_y.
MARGINAL_BASES = (
    qsim.BasisRotation.identity(),
    qsim.direction_basis((1, 0, 0)),
    qsim.direction_basis((0, 1, 0)),
)

FLAG_ROLES_S = BroadcastRoles(Player.S, Player.R0, Player.R1)
FLAG_ROLES_R0 = BroadcastRoles(Player.R0, Player.S, Player.R1)


class ConfigError(ValueError):
    pass


class GlobalStatus(str, enum.Enum):
    SUCCESS = "Success"
    FAILURE = "Failure"


@dataclass(frozen=True)
class DistParams:
    n_marginal: int = 300
    n_pair_r0s: int = 20
    n_pair_r1: int = 20
    n_flag_session: int = 480
    alpha: float = 0.001
    payload: int = 600
    slack: int = 0

    def __post_init__(self):
        for name in ("n_marginal", "n_pair_r0s", "n_pair_r1", "n_flag_session", "payload", "slack"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.n_marginal // len(MARGINAL_BASES) < MIN_PER_BASIS:
            raise ConfigError(
                f"n_marginal={self.n_marginal} leaves fewer than {MIN_PER_BASIS} samples per basis"
            )
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.n_flag_session < 6:
            raise ConfigError("flag sessions need at least 6 triplets")

    @property
    def consumed(self) -> int:
        return 2 * self.n_marginal + self.n_pair_r0s + 2 * self.n_pair_r1 + 2 * self.n_flag_session

    @property
    def n_total(self) -> int:
        return self.consumed + self.payload + self.slack

    def flag_params(self) -> BroadcastParams:
        return BroadcastParams.for_size(self.n_flag_session)

    def layout(self, rng: np.random.Generator) -> dict:
        """Disjoint, randomly placed index blocks for every use of the triplets."""
        sizes = [
            ("marginal_S", self.n_marginal),
            ("marginal_R0", self.n_marginal),
            ("pair_R0_to_S", self.n_pair_r0s),
            ("pair_R1_to_S", self.n_pair_r1),
            ("pair_R1_to_R0", self.n_pair_r1),
            ("flag_S", self.n_flag_session),
            ("flag_R0", self.n_flag_session),
            ("payload", self.payload),
        ]
        perm = rng.permutation(self.n_total)
        out, start = {}, 0
        for name, size in sizes:
            out[name] = np.sort(perm[start:start + size])
            start += size
        return out


def marginal_test(samples_by_basis: Sequence[np.ndarray], alpha: float) -> bool:
    """Chi-square test of each basis' outcome histogram against uniform.

    ``alpha`` is the family-wise level for the player; each basis is tested
    at ``alpha / len(samples_by_basis)``.
    """
    level = alpha / len(samples_by_basis)
    for outcomes in samples_by_basis:
        outcomes = np.asarray(outcomes)
        if outcomes.size < MIN_PER_BASIS:
            raise ConfigError(f"marginal sample of {outcomes.size} is below {MIN_PER_BASIS}")
        counts = np.bincount(outcomes, minlength=3)
        if stats.chisquare(counts).pvalue < level:
            return False
    return True


def pair_state_test(passes, max_fail_fraction: float = 0.0) -> bool:
    passes = np.asarray(passes, dtype=bool)
    if passes.size == 0:
        return True
    return np.count_nonzero(~passes) / passes.size <= max_fail_fraction


@dataclass
class DistView:
    player: Player
    params: DistParams
    rng: np.random.Generator
    flag: int = 1


class HonestDistributor:
    """Distribution-phase behavior of an honest player."""

    def prepare(self, view: DistView) -> Preparation:
        return Preparation.aharonov()

    def exchange_flag(self, view: DistView):
        return view.flag

    def broadcast_flag(self, view: DistView):
        return view.flag


@dataclass
class DistResult:
    status: dict
    flags: dict
    events: list
    layout: dict
    source: TripletSource
    sessions: list = field(default_factory=list)

    def status_of(self, p: Player) -> GlobalStatus:
        return self.status[p]


def prepare_and_distribute(
    net: Network,
    preparer,
    view: DistView,
    n_total: int,
    quantum_path: str,
    rng: np.random.Generator,
) -> TripletSource:
    """R1 prepares ``n_total`` triplets and hands slot 0 to S and slot 1 to R0.

    Attaches a fresh slot ledger to ``net`` and returns the measurement source
    backing the prepared triplets.
    """
    prep = preparer.prepare(view)
    ledger = SlotLedger(n_total, preparer=Player.R1)
    net.ledger = ledger
    source = make_source(quantum_path, prep, ledger, rng)
    ids = tuple(range(n_total))

    def r1(ep):
        return [
            ep.message(Player.S, QutritTransfer(ids, HOME_SLOT[Player.S])),
            ep.message(Player.R0, QutritTransfer(ids, HOME_SLOT[Player.R0])),
        ]

    net.run_round({Player.R1: r1, Player.S: lambda ep: [], Player.R0: lambda ep: []})
    return source


def _as_flag(v) -> int:
    return 1 if v == 1 and not isinstance(v, bool) else 0


def run_distribution(
    behaviors: Mapping[Player, object],
    params: DistParams,
    rngs: Mapping,
    quantum_path: str = "oracle",
    net: Optional[Network] = None,
    pair_fail_fraction: float = 0.0,
) -> DistResult:
    """Run the seven distribution-and-test steps.

    ``rngs`` maps each player to its private generator and has two extra
    entries: ``"public"`` for the index layout and ``"quantum"`` for the
    measurement source. The returned source still holds the untouched payload
    block on success.
    """
    net = net if net is not None else Network()
    views = {p: DistView(p, params, rngs[p]) for p in PLAYERS}
    layout = params.layout(rngs["public"])
    events = []
    silent = lambda ep: []

    # Step 1: distribution.
    source = prepare_and_distribute(
        net, behaviors[Player.R1], views[Player.R1], params.n_total, quantum_path, rngs["quantum"]
    )
    ledger = source.ledger
    for p in (Player.S, Player.R0):
        if ledger.owned_by(p, HOME_SLOT[p]).size != params.n_total:
            views[p].flag = 0
            events.append(f"missing_qutrits:{p}")

    # Step 2: marginal tests.
    for p in (Player.S, Player.R0):
        block = layout[f"marginal_{p}"]
        chunks = np.array_split(block, len(MARGINAL_BASES))
        samples = [
            source.measure_in_basis(p, ids, HOME_SLOT[p], basis)
            for ids, basis in zip(chunks, MARGINAL_BASES)
        ]
        for s in samples:
            net.transcript.record_measurement(p, "marginal", s)
        if not marginal_test(samples, params.alpha):
            views[p].flag = 0
            events.append(f"marginal_fail:{p}")

    # Step 3: R0 sends a sample of its qutrits to S, who tests the pairs.
    r0s = layout["pair_R0_to_S"]
    net.run_round({
        Player.R0: lambda ep: [ep.message(Player.S, QutritTransfer(tuple(r0s), HOME_SLOT[Player.R0]))],
        Player.S: silent,
        Player.R1: silent,
    })
    _pair_test(net, source, views, events, Player.S, r0s, (0, 1), pair_fail_fraction)

    # Step 4: R1 sends samples to both.
    r1s, r1r0 = layout["pair_R1_to_S"], layout["pair_R1_to_R0"]
    net.run_round({
        Player.R1: lambda ep: [
            ep.message(Player.S, QutritTransfer(tuple(r1s), HOME_SLOT[Player.R1])),
            ep.message(Player.R0, QutritTransfer(tuple(r1r0), HOME_SLOT[Player.R1])),
        ],
        Player.S: silent,
        Player.R0: silent,
    })
    _pair_test(net, source, views, events, Player.S, r1s, (0, 2), pair_fail_fraction)
    _pair_test(net, source, views, events, Player.R0, r1r0, (1, 2), pair_fail_fraction)

    # Step 5: S and R0 exchange flags.
    def exchange(p, q):
        return lambda ep: [ep.message(q, FlagBit(behaviors[p].exchange_flag(views[p])))]

    net.run_round({
        Player.S: exchange(Player.S, Player.R0),
        Player.R0: exchange(Player.R0, Player.S),
        Player.R1: silent,
    })
    for p, q in ((Player.S, Player.R0), (Player.R0, Player.S)):
        got = first_payload(net.endpoints[p].received(net.round), q, FlagBit)
        if got is None or _as_flag(got.bit) == 0:
            if views[p].flag:
                events.append(f"flag_zeroed_by_exchange:{p}")
            views[p].flag = 0

    # Step 6: both flags are broadcast; R1 stays the quiet receiver.
    sessions = []
    for name, roles in (("flag_S", FLAG_ROLES_S), ("flag_R0", FLAG_ROLES_R0)):
        block = layout[name]
        results = {}
        for p in PLAYERS:
            results[p] = source.measure_z(p, block, HOME_SLOT[p])
            net.transcript.record_measurement(p, name, results[p])
        sender = roles.sender
        x = behaviors[sender].broadcast_flag(views[sender])
        sessions.append(
            run_broadcast(
                net,
                results,
                x,
                params.flag_params(),
                roles=roles,
                behaviors=behaviors,
                rngs={p: rngs[p] for p in PLAYERS},
                session=name,
            )
        )

    # Step 7: anyone who heard a 0 flag fails.
    heard = {
        Player.S: _as_flag(sessions[1].outputs[Player.S]),
        Player.R0: _as_flag(sessions[0].outputs[Player.R0]),
        Player.R1: min(
            _as_flag(sessions[0].outputs[Player.R1]), _as_flag(sessions[1].outputs[Player.R1])
        ),
    }
    final = {
        Player.S: min(views[Player.S].flag, heard[Player.S]),
        Player.R0: min(views[Player.R0].flag, heard[Player.R0]),
        Player.R1: heard[Player.R1],
    }
    status = {
        p: GlobalStatus.SUCCESS if final[p] == 1 else GlobalStatus.FAILURE for p in PLAYERS
    }
    return DistResult(status, final, events, layout, source, sessions)


def _pair_test(net, source, views, events, holder, ids, slots, fail_fraction):
    passes = source.antisym_test(holder, ids, slots)
    net.transcript.record_measurement(holder, f"pair{slots[0]}{slots[1]}", passes)
    if not pair_state_test(passes, fail_fraction):
        views[holder].flag = 0
        events.append(f"pair_fail:{holder}:{slots[0]}{slots[1]}")
