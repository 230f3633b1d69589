"""Detectable broadcast of one bit over pre-shared correlated trits.

Three roles take part in a session: the *sender*, the *prover* receiver (who
may have to justify its value) and the *quiet* receiver (who only ever sends
its flag). In the payload broadcast these are S, R0 and R1; the flag
broadcasts of the distribution phase reuse the same machinery with other
players in the sender and prover roles.

All index sets are session-local positions ``0..m-1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .netsim import (
    FlagMsg,
    IndexSet,
    Network,
    ProofSet,
    ValueBit,
    first_payload,
)
from .players import BOTTOM, Player


class ProtocolError(Exception):
    """Internal failure of a session (never a silent wrong outcome)."""


@dataclass(frozen=True)
class BroadcastParams:
    m: int = 600
    j_min: int = 100
    k_min: int = 50
    eps_overlap: float = 0.0
    eps_mismatch: float = 0.0
    composition_check: bool = True
    comp_tol: float = 0.15

    def __post_init__(self):
        if self.m < 6:
            raise ValueError("m must be at least 6")
        if self.j_min < 1 or self.k_min < 1:
            raise ValueError("j_min and k_min must be at least 1")
        for name in ("eps_overlap", "eps_mismatch", "comp_tol"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def for_size(cls, m: int, **overrides) -> "BroadcastParams":
        """Defaults scaled to ``m``: expected |J| is m/3 and expected |K| is m/6."""
        kw = dict(m=m, j_min=max(1, m // 6), k_min=max(1, m // 12))
        kw.update(overrides)
        return cls(**kw)


def _is_bit(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool) and v in (0, 1)


def select_indices(results_s, x: int) -> np.ndarray:
    if not _is_bit(x):
        raise ValueError(f"sender input must be 0 or 1, got {x!r}")
    return np.flatnonzero(np.asarray(results_s) == x)


def consistency_check(J, results_p, x_p, params: BroadcastParams):
    """Receiver's flag: ``x_p`` if its data is consistent with ``J``, else ⊥."""
    if not _is_bit(x_p) or J is None:
        return BOTTOM
    results_p = np.asarray(results_p)
    J = np.unique(np.asarray(J, dtype=np.int64))
    if J.size and (J[0] < 0 or J[-1] >= results_p.size):
        return BOTTOM
    if J.size < params.j_min:
        return BOTTOM
    seen = results_p[J]
    if (seen == x_p).any():
        return BOTTOM
    if params.composition_check:
        for digit in {0, 1, 2} - {int(x_p)}:
            frac = np.count_nonzero(seen == digit) / J.size
            if abs(frac - 0.5) > params.comp_tol + 1e-12:
                return BOTTOM
    return int(x_p)


def build_proof(J0, results_0, y0: int) -> np.ndarray:
    """Indices of ``J0`` where the prover saw ``1 - y0``."""
    J0 = np.asarray(J0, dtype=np.int64)
    results_0 = np.asarray(results_0)
    return J0[results_0[J0] == 1 - y0]


def verify_proof(K, J1, results_1, params: BroadcastParams) -> bool:
    results_1 = np.asarray(results_1)
    K = np.unique(np.asarray(K, dtype=np.int64))
    if K.size < params.k_min:
        return False
    if K[0] < 0 or K[-1] >= results_1.size:
        return False
    J1 = np.asarray(J1 if J1 is not None else [], dtype=np.int64)
    inside = np.isin(K, J1)
    if np.count_nonzero(inside) / K.size > params.eps_overlap + 1e-12:
        return False
    outside = K[~inside]
    if outside.size == 0:
        return True
    mismatch = np.count_nonzero(results_1[outside] != 2) / outside.size
    return mismatch <= params.eps_mismatch + 1e-12


@dataclass(frozen=True)
class BroadcastRoles:
    sender: Player
    prover: Player
    quiet: Player

    @property
    def receivers(self):
        return (self.prover, self.quiet)

    def other_receiver(self, p: Player) -> Player:
        return self.quiet if p == self.prover else self.prover

    def role_of(self, p: Player) -> str:
        return {self.sender: "sender", self.prover: "prover", self.quiet: "quiet"}[p]


PAYLOAD_ROLES = BroadcastRoles(Player.S, Player.R0, Player.R1)


@dataclass
class SenderView:
    session: str
    roles: BroadcastRoles
    x: object
    results: np.ndarray
    params: BroadcastParams
    rng: np.random.Generator


@dataclass
class ReceiverView:
    session: str
    roles: BroadcastRoles
    player: Player
    x_p: object
    J: Optional[np.ndarray]
    results: np.ndarray
    params: BroadcastParams
    rng: np.random.Generator
    flag: object = BOTTOM
    other_flag: object = BOTTOM

    @property
    def role(self) -> str:
        return self.roles.role_of(self.player)


class HonestBroadcaster:
    """Message behavior of an honest player in a broadcast session.

    Adversaries subclass this and override individual hooks. Decisions are not
    hooks: an honest player's output is always computed by :func:`run_broadcast`.
    """

    def announce(self, view: SenderView) -> dict:
        J = select_indices(view.results, view.x)
        return {r: (view.x, J) for r in view.roles.receivers}

    def flag_to_send(self, view: ReceiverView, peek) -> object:
        return view.flag

    def proof_to_send(self, view: ReceiverView, peek) -> Optional[np.ndarray]:
        if in_conflict(view.flag, view.other_flag):
            return build_proof(view.J, view.results, view.flag)
        return None


def in_conflict(own, other) -> bool:
    return own is not BOTTOM and other is not BOTTOM and own != other


@dataclass
class BroadcastResult:
    session: str
    roles: BroadcastRoles
    x: object
    outputs: dict
    flags: dict
    received_flags: dict
    conflict: bool = False
    proof_sent: bool = False
    proof_size: Optional[int] = None
    proof_verdict: Optional[bool] = None


def _flag_value(payload):
    if payload is None:
        return BOTTOM
    f = payload.flag
    return int(f) if _is_bit(f) else BOTTOM


def run_broadcast(
    net: Network,
    results: Mapping[Player, np.ndarray],
    x,
    params: BroadcastParams,
    roles: BroadcastRoles = PAYLOAD_ROLES,
    behaviors: Optional[Mapping[Player, HonestBroadcaster]] = None,
    rngs: Optional[Mapping[Player, np.random.Generator]] = None,
    session: str = "payload",
) -> BroadcastResult:
    """Run one broadcast session in three network rounds and decide outputs."""
    honest = HonestBroadcaster()
    behaviors = {p: (behaviors or {}).get(p, honest) for p in (roles.sender, *roles.receivers)}
    rngs = rngs or {}

    def rng(p):
        return rngs.get(p) or np.random.default_rng(0)

    for p in behaviors:
        if np.asarray(results[p]).shape != (params.m,):
            raise ProtocolError(f"{p} holds {np.asarray(results[p]).shape} results, expected ({params.m},)")

    # Round 1: value bit and index set to each receiver.
    def sender_round1(ep):
        view = SenderView(session, roles, x, np.asarray(results[roles.sender]), params, rng(roles.sender))
        out = []
        for receiver, (bit, J) in behaviors[roles.sender].announce(view).items():
            if bit is not None:
                out.append(ep.message(receiver, ValueBit(bit)))
            if J is not None:
                out.append(ep.message(receiver, IndexSet(tuple(J))))
        return out

    silent = lambda ep: []
    net.run_round({roles.sender: sender_round1, roles.prover: silent, roles.quiet: silent})
    r1 = net.round

    views = {}
    for p in roles.receivers:
        ep = net.endpoints[p]
        got = ep.received(r1)
        vb = first_payload(got, roles.sender, ValueBit)
        js = first_payload(got, roles.sender, IndexSet)
        x_p = vb.bit if vb is not None else BOTTOM
        J = np.asarray(js.indices, dtype=np.int64) if js is not None else None
        view = ReceiverView(session, roles, p, x_p, J, np.asarray(results[p]), params, rng(p))
        view.flag = consistency_check(J, view.results, x_p, params)
        views[p] = view

    # Round 2: receivers exchange flags.
    def flag_round(p):
        def act(ep):
            peek = ep.peek if ep.rushing else None
            sent = behaviors[p].flag_to_send(views[p], peek)
            return [ep.message(roles.other_receiver(p), FlagMsg(sent))]
        return act

    net.run_round({roles.sender: silent, **{p: flag_round(p) for p in roles.receivers}})
    r2 = net.round
    for p in roles.receivers:
        got = net.endpoints[p].received(r2)
        views[p].other_flag = _flag_value(first_payload(got, roles.other_receiver(p), FlagMsg))

    # Round 3: the prover may justify its value to the quiet receiver.
    def prover_round3(ep):
        peek = ep.peek if ep.rushing else None
        K = behaviors[roles.prover].proof_to_send(views[roles.prover], peek)
        if K is None:
            return []
        return [ep.message(roles.quiet, ProofSet(tuple(K)))]

    net.run_round({roles.sender: silent, roles.prover: prover_round3, roles.quiet: silent})
    r3 = net.round

    outputs = {roles.sender: x if _is_bit(x) else BOTTOM}
    result = BroadcastResult(
        session,
        roles,
        x,
        outputs,
        flags={p: views[p].flag for p in roles.receivers},
        received_flags={p: views[p].other_flag for p in roles.receivers},
    )
    for p in roles.receivers:
        own, other = views[p].flag, views[p].other_flag
        if own == other:
            outputs[p] = own
        elif own is BOTTOM:
            outputs[p] = other
        elif other is BOTTOM:
            outputs[p] = own
        elif p == roles.prover:
            outputs[p] = own
        else:
            result.conflict = True
            proof = first_payload(net.endpoints[p].received(r3), roles.prover, ProofSet)
            if proof is None:
                result.proof_verdict = False
            else:
                result.proof_sent = True
                result.proof_size = len(proof.indices)
                result.proof_verdict = verify_proof(
                    proof.indices, views[p].J, views[p].results, params
                )
            outputs[p] = other if result.proof_verdict else own
    return result
