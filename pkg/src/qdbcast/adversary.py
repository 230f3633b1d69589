"""Corruption strategies.

A strategy replaces the behavior object of exactly one player. Behaviors are
plain classes: :class:`Honest` implements every hook honestly and each
adversary overrides only the hooks it cheats in. Hooks see nothing beyond the
player's own view (its results, the messages addressed to it and, when
rushing, the ones already committed to it in the current round).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .bcast import BOTTOM, HonestBroadcaster, ReceiverView, SenderView, select_indices
from .dist import DistView, HonestDistributor
from .netsim import FlagMsg, first_payload
from .players import PLAYERS, Player
from .sources import Preparation


class Honest(HonestBroadcaster, HonestDistributor):
    pass


def _is_bit(v) -> bool:
    return v in (0, 1) and not isinstance(v, bool)


class SenderSplit(Honest):
    """Sends bit 0 with its result-0 indices to the prover, bit 1 with its result-1 indices to the quiet receiver."""

    def __init__(self, sessions=("payload",)):
        self.sessions = tuple(sessions)

    def announce(self, view: SenderView) -> dict:
        if view.session not in self.sessions:
            return super().announce(view)
        return {
            view.roles.prover: (0, select_indices(view.results, 0)),
            view.roles.quiet: (1, select_indices(view.results, 1)),
        }


class SenderInconsistentToOne(Honest):
    """Honest towards one receiver; hands the target the wrong bit with the true index set."""

    def __init__(self, target: Player = Player.R1):
        self.target = Player(target)

    def announce(self, view: SenderView) -> dict:
        out = super().announce(view)
        if view.session == "payload" and self.target in out:
            bit, J = out[self.target]
            out[self.target] = (1 - bit, J)
        return out


class SenderPoisonedProof(Honest):
    """Pads the prover's index set with result-2 indices to spoil its proof.

    Not covered by the protocol's guarantees; outcomes are reported only.
    """

    def __init__(self, poison: int = 1):
        self.poison = int(poison)

    def announce(self, view: SenderView) -> dict:
        if view.session != "payload":
            return super().announce(view)
        twos = np.flatnonzero(np.asarray(view.results) == 2)
        extra = view.rng.choice(twos, size=min(self.poison, twos.size), replace=False)
        j0 = np.union1d(select_indices(view.results, 0), extra)
        return {
            view.roles.prover: (0, j0),
            view.roles.quiet: (1, select_indices(view.results, 1)),
        }


class R0BitFlip(Honest):
    """Claims the opposite bit and backs it with indices where it saw the true bit.

    ``proof_size`` limits the proof to a random subset of that size.
    """

    def __init__(self, proof_size: Optional[int] = None):
        self.proof_size = None if proof_size is None else int(proof_size)

    def _claim(self, view: ReceiverView):
        return 1 - view.x_p if _is_bit(view.x_p) else BOTTOM

    def flag_to_send(self, view: ReceiverView, peek):
        if view.session != "payload" or view.role != "prover":
            return super().flag_to_send(view, peek)
        return self._claim(view)

    def _candidates(self, view: ReceiverView) -> np.ndarray:
        idx = np.flatnonzero(view.results == view.x_p)
        return np.setdiff1d(idx, view.J if view.J is not None else [])

    def proof_to_send(self, view: ReceiverView, peek):
        if view.session != "payload" or view.role != "prover":
            return super().proof_to_send(view, peek)
        claim = self._claim(view)
        if claim is BOTTOM or view.other_flag is BOTTOM or view.other_flag == claim:
            return None
        cand = self._candidates(view)
        if self.proof_size is not None and self.proof_size < cand.size:
            cand = np.sort(view.rng.choice(cand, size=self.proof_size, replace=False))
        return cand


class R0RandomProof(R0BitFlip):
    """Claims the opposite bit and sends a random proof drawn from outside its index set."""

    def _candidates(self, view: ReceiverView) -> np.ndarray:
        outside = np.setdiff1d(np.arange(view.results.size), view.J if view.J is not None else [])
        size = self.proof_size if self.proof_size is not None else view.params.m // 6
        size = min(size, outside.size)
        return np.sort(view.rng.choice(outside, size=size, replace=False))


class R1FalseConflict(Honest):
    """Quiet receiver announcing the opposite of the honest value to force the conflict branch.

    When rushing it contradicts the prover's flag seen in the same round.
    """

    def flag_to_send(self, view: ReceiverView, peek):
        if view.session != "payload" or view.role != "quiet":
            return super().flag_to_send(view, peek)
        target = view.flag
        if peek is not None:
            seen = first_payload(peek(), view.roles.prover, FlagMsg)
            if seen is not None and _is_bit(seen.flag):
                target = seen.flag
        return 1 - target if _is_bit(target) else 0


class R1BadStatesProduct(Honest):
    def prepare(self, view: DistView) -> Preparation:
        return Preparation.product((0, 1, 2))


class R1BadStatesClassicalMix(Honest):
    def prepare(self, view: DistView) -> Preparation:
        return Preparation.permutation_mixture()


class R1BiasedPermutations(Honest):
    """Classical permutations with extra weight ``bias`` on (0, 1, 2)."""

    def __init__(self, bias: float = 0.3):
        self.bias = float(bias)

    def prepare(self, view: DistView) -> Preparation:
        w = np.full(6, (1 - self.bias) / 6)
        w[0] += self.bias
        return Preparation.permutation_mixture(w)


class FlagBlocker(Honest):
    """Tries to spoil the distribution phase through its flag messages.

    ``mode="zero"`` sends and broadcasts flag 0; ``mode="split"`` reports 1 in
    the exchange but broadcasts inconsistently. As R1 it can only lie about
    its flag inside the flag broadcasts.
    """

    def __init__(self, player: Player, mode: str = "zero"):
        self.player = Player(player)
        if mode not in ("zero", "split"):
            raise ValueError(f"unknown FlagBlocker mode {mode!r}")
        self.mode = mode

    def exchange_flag(self, view: DistView):
        return 0 if self.mode == "zero" else 1

    def broadcast_flag(self, view: DistView):
        return 0 if self.mode == "zero" else 1

    def announce(self, view: SenderView) -> dict:
        if self.mode == "split" and view.session.startswith("flag"):
            return {
                view.roles.prover: (0, select_indices(view.results, 0)),
                view.roles.quiet: (1, select_indices(view.results, 1)),
            }
        return super().announce(view)

    def flag_to_send(self, view: ReceiverView, peek):
        if view.session.startswith("flag"):
            return 0
        return super().flag_to_send(view, peek)


@dataclass(frozen=True)
class Strategy:
    name: str
    corrupted: Optional[Player]
    behavior: Honest
    rushing: bool = False
    guarantee: bool = True
    params: dict = field(default_factory=dict)

    def label(self) -> str:
        if not self.params:
            return self.name
        args = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}:{args}"


# name -> (corrupted player or None when given by parameter, factory, guarantee)
_REGISTRY: dict = {
    "HonestAll": (None, Honest, True),
    "SenderSplit": (Player.S, SenderSplit, True),
    "SenderInconsistentToOne": (Player.S, SenderInconsistentToOne, True),
    "SenderPoisonedProof": (Player.S, SenderPoisonedProof, False),
    "R0BitFlip": (Player.R0, R0BitFlip, True),
    "R0RandomProof": (Player.R0, R0RandomProof, True),
    "R1FalseConflict": (Player.R1, R1FalseConflict, True),
    "R1BadStatesProduct": (Player.R1, R1BadStatesProduct, True),
    "R1BadStatesClassicalMix": (Player.R1, R1BadStatesClassicalMix, True),
    "R1BiasedPermutations": (Player.R1, R1BiasedPermutations, True),
    "FlagBlocker": ("player", FlagBlocker, True),
}

STRATEGY_NAMES = tuple(_REGISTRY)


def make_strategy(name: str, rushing: bool = False, **params) -> Strategy:
    try:
        corrupted, factory, guarantee = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGY_NAMES)}") from None
    if corrupted == "player":
        if "player" not in params:
            raise ValueError(f"{name} needs a player parameter")
        params["player"] = Player(params["player"]).value
        corrupted = Player(params["player"])
    try:
        behavior = factory(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {name}: {exc}") from None
    if corrupted is None and rushing:
        raise ValueError("HonestAll has no player to grant rushing to")
    return Strategy(name, corrupted, behavior, rushing, guarantee, dict(params))


def strategy_catalog() -> list:
    """Every built-in strategy with default parameters; FlagBlocker once per player."""
    out = []
    for name in STRATEGY_NAMES:
        if name == "FlagBlocker":
            out.extend(make_strategy(name, player=p.value) for p in PLAYERS)
        else:
            out.append(make_strategy(name))
    return out


def _coerce(value: str):
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def parse_adversary(spec: str) -> Strategy:
    """Parse ``NAME`` or ``NAME:key=value,...`` (``rushing=true`` is accepted)."""
    name, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            if name == "FlagBlocker" and "player" not in params:
                params["player"] = item
                continue
            raise ValueError(f"malformed adversary parameter {item!r}")
        params[key.strip()] = _coerce(value.strip())
    rushing = bool(params.pop("rushing", False))
    return make_strategy(name.strip(), rushing=rushing, **params)


@dataclass(frozen=True)
class SessionSetup:
    behaviors: dict
    corrupted: Optional[Player] = None
    rushing: frozenset = frozenset()
    guarantee: bool = True

    @classmethod
    def honest(cls) -> "SessionSetup":
        return cls({p: Honest() for p in PLAYERS})


class CorruptionError(ValueError):
    pass


def apply_strategy(setup: SessionSetup, strategy: Strategy) -> SessionSetup:
    """Install ``strategy`` on a not-yet-started session."""
    if strategy.corrupted is None:
        return setup
    if setup.corrupted is not None:
        raise CorruptionError(
            f"{setup.corrupted} is already corrupted; at most one player may be"
        )
    behaviors = dict(setup.behaviors)
    behaviors[strategy.corrupted] = strategy.behavior
    return replace(
        setup,
        behaviors=behaviors,
        corrupted=strategy.corrupted,
        rushing=frozenset([strategy.corrupted]) if strategy.rushing else frozenset(),
        guarantee=strategy.guarantee,
    )
