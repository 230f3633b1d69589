"""Synchronous simulated network among the three players.

Every pair of players shares an authenticated, error-free classical channel
and a quantum channel. Time advances in rounds: within a round each player
commits the messages it wants to send, then everything is delivered at once.
A player flagged as *rushing* commits last and may peek at the messages that
are already addressed to it in the current round.

Quantum transfers are modelled as ownership changes of triplet slots, tracked
by a :class:`SlotLedger`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .players import BOTTOM, HOME_SLOT, PLAYERS, Player


class ChannelError(Exception):
    pass


class AuthenticationError(ChannelError):
    pass


class RoundError(ChannelError):
    pass


class DeadlockError(ChannelError):
    pass


class OwnershipError(ChannelError):
    pass


def _indices(xs) -> tuple:
    return tuple(sorted(int(x) for x in xs))


@dataclass(frozen=True)
class ValueBit:
    bit: int

    def to_json(self):
        return {"bit": self.bit}


@dataclass(frozen=True)
class IndexSet:
    indices: tuple

    def __post_init__(self):
        object.__setattr__(self, "indices", _indices(self.indices))

    def to_json(self):
        return {"indices": list(self.indices)}


@dataclass(frozen=True)
class FlagMsg:
    flag: Optional[int]

    def to_json(self):
        return {"flag": "⊥" if self.flag is BOTTOM else self.flag}


@dataclass(frozen=True)
class ProofSet:
    indices: tuple

    def __post_init__(self):
        object.__setattr__(self, "indices", _indices(self.indices))

    def to_json(self):
        return {"indices": list(self.indices)}


@dataclass(frozen=True)
class FlagBit:
    bit: int

    def to_json(self):
        return {"bit": self.bit}


@dataclass(frozen=True)
class QutritTransfer:
    """Hands over one slot of each listed triplet to the receiver."""

    triplets: tuple
    slot: int

    def __post_init__(self):
        object.__setattr__(self, "triplets", _indices(self.triplets))

    def to_json(self):
        return {"triplets": list(self.triplets), "slot": self.slot}


PAYLOAD_TYPES = {
    cls.__name__: cls
    for cls in (ValueBit, IndexSet, FlagMsg, ProofSet, FlagBit, QutritTransfer)
}


def payload_from_json(kind: str, data: dict):
    cls = PAYLOAD_TYPES[kind]
    if cls is FlagMsg:
        flag = data["flag"]
        return FlagMsg(BOTTOM if flag == "⊥" else flag)
    if cls is QutritTransfer:
        return QutritTransfer(tuple(data["triplets"]), data["slot"])
    if cls in (IndexSet, ProofSet):
        return cls(tuple(data["indices"]))
    return cls(data["bit"])


@dataclass(frozen=True)
class ProtocolMessage:
    sender: Player
    receiver: Player
    round: int
    payload: object

    def __post_init__(self):
        if self.sender == self.receiver:
            raise ChannelError("a player cannot message itself")

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "sender": self.sender.value,
            "receiver": self.receiver.value,
            "payload_type": type(self.payload).__name__,
            "payload": self.payload.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "ProtocolMessage":
        return cls(
            Player(d["sender"]),
            Player(d["receiver"]),
            d["round"],
            payload_from_json(d["payload_type"], d["payload"]),
        )


@dataclass
class Transcript:
    messages: list = field(default_factory=list)
    measurements: list = field(default_factory=list)

    def append(self, msg: ProtocolMessage):
        self.messages.append(msg)

    def record_measurement(self, player: Player, label: str, outcomes):
        outcomes = np.asarray(outcomes)
        self.measurements.append(
            {
                "player": player.value,
                "label": label,
                "count": int(outcomes.size),
                "sha256": hashlib.sha256(outcomes.astype(np.int8).tobytes()).hexdigest()[:16],
            }
        )

    def __len__(self):
        return len(self.messages)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(m.to_json(), ensure_ascii=False, separators=(",", ":")) + "\n"
            for m in self.messages
        )

    def digest(self) -> str:
        h = hashlib.sha256(self.to_jsonl().encode())
        h.update(json.dumps(self.measurements, sort_keys=True).encode())
        return h.hexdigest()

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @staticmethod
    def read_messages(path) -> list:
        with open(path, encoding="utf-8") as fh:
            return [ProtocolMessage.from_json(json.loads(line)) for line in fh if line.strip()]


class SlotLedger:
    """Who holds which slot of which triplet, and what has been measured."""

    _CODE = {p: i for i, p in enumerate(PLAYERS)}

    def __init__(self, n_triplets: int, preparer: Player = Player.R1):
        self.n = n_triplets
        self._owner = np.full((n_triplets, 3), self._CODE[preparer], dtype=np.int8)
        self._measured = np.zeros((n_triplets, 3), dtype=bool)

    def owner(self, triplet: int, slot: int) -> Player:
        return PLAYERS[self._owner[triplet, slot]]

    def owned_by(self, player: Player, slot: int) -> np.ndarray:
        return np.flatnonzero(self._owner[:, slot] == self._CODE[player])

    def is_measured(self, ids) -> np.ndarray:
        """Per-triplet mask: has any slot been measured?"""
        return self._measured[self._ids(ids)].any(axis=1)

    def _ids(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.n):
            raise OwnershipError("triplet index out of range")
        return ids

    def check_owned(self, player: Player, ids, slot: int):
        ids = self._ids(ids)
        if not np.all(self._owner[ids, slot] == self._CODE[player]):
            raise OwnershipError(f"{player} does not own slot {slot} of every requested triplet")

    def transfer(self, ids, slot: int, src: Player, dst: Player):
        ids = self._ids(ids)
        self.check_owned(src, ids, slot)
        if self._measured[ids, slot].any():
            raise OwnershipError("cannot transfer a measured qutrit")
        self._owner[ids, slot] = self._CODE[dst]

    def mark_measured(self, player: Player, ids, slots: Sequence[int]):
        ids = self._ids(ids)
        for slot in slots:
            self.check_owned(player, ids, slot)
            if self._measured[ids, slot].any():
                raise OwnershipError(f"slot {slot} already measured on some triplet")
        for slot in slots:
            self._measured[ids, slot] = True


class Endpoint:
    """A player's authenticated handle on the network."""

    def __init__(self, net: "Network", player: Player):
        self._net = net
        self.player = player

    @property
    def rushing(self) -> bool:
        return self.player in self._net.rushing

    @property
    def round(self) -> int:
        return self._net.round

    def message(self, receiver: Player, payload) -> ProtocolMessage:
        return ProtocolMessage(self.player, receiver, self._net.round, payload)

    def send(self, msg: ProtocolMessage):
        self._net.send(msg, invoker=self.player)

    def received(self, round: Optional[int] = None) -> list:
        msgs = self._net._inbox[self.player]
        if round is None:
            return list(msgs)
        return [m for m in msgs if m.round == round]

    def peek(self) -> list:
        """Messages already committed to this player in the open round (rushing only)."""
        if not self.rushing:
            raise RoundError(f"{self.player} is not allowed to rush")
        return [m for m in self._net._pending if m.receiver == self.player]


RoundAction = Callable[[Endpoint], Optional[Iterable[ProtocolMessage]]]


class Network:
    def __init__(
        self,
        ledger: Optional[SlotLedger] = None,
        transcript: Optional[Transcript] = None,
        rushing: Iterable[Player] = (),
    ):
        self.ledger = ledger
        self.transcript = transcript if transcript is not None else Transcript()
        self.rushing = frozenset(rushing)
        self.round = 0
        self._open = False
        self._committing: Optional[Player] = None
        self._pending: list = []
        self._inbox = {p: [] for p in PLAYERS}
        self.endpoints = {p: Endpoint(self, p) for p in PLAYERS}

    def send(self, msg: ProtocolMessage, invoker: Player):
        if msg.sender != invoker:
            raise AuthenticationError(f"{invoker} tried to send as {msg.sender}")
        if not self._open or self._committing != invoker:
            raise RoundError(f"{invoker} is not committing in an open round")
        if msg.round != self.round:
            raise RoundError(f"message for round {msg.round} sent in round {self.round}")
        if isinstance(msg.payload, QutritTransfer):
            if self.ledger is None:
                raise OwnershipError("no quantum ledger attached")
            self.ledger.check_owned(invoker, msg.payload.triplets, msg.payload.slot)
        self._pending.append(msg)
        self.transcript.append(msg)

    def run_round(self, actions: Mapping[Player, RoundAction]) -> dict:
        """Run one synchronous round.

        Each action is called with its player's endpoint and must return the
        messages to send (an empty list for silence). Returning ``None`` counts
        as failing to commit. Returns the delivered messages per receiver.
        """
        self.round += 1
        self._open = True
        self._pending = []
        order = [p for p in PLAYERS if p in actions and p not in self.rushing]
        order += [p for p in PLAYERS if p in actions and p in self.rushing]
        try:
            for player in order:
                self._committing = player
                msgs = actions[player](self.endpoints[player])
                if msgs is None:
                    raise DeadlockError(f"{player} did not commit round {self.round}")
                for msg in msgs:
                    self.send(msg, invoker=player)
        finally:
            self._committing = None
            self._open = False
        delivered = {p: [] for p in PLAYERS}
        for msg in self._pending:
            if isinstance(msg.payload, QutritTransfer):
                self.ledger.transfer(
                    msg.payload.triplets, msg.payload.slot, msg.sender, msg.receiver
                )
            self._inbox[msg.receiver].append(msg)
            delivered[msg.receiver].append(msg)
        self._pending = []
        return delivered

    def idle_round(self) -> dict:
        return self.run_round({})


def first_payload(msgs: Iterable[ProtocolMessage], sender: Player, kind) -> Optional[object]:
    """First payload of type ``kind`` from ``sender`` among ``msgs``."""
    for m in msgs:
        if m.sender == sender and isinstance(m.payload, kind):
            return m.payload
    return None


def home_slot(player: Player) -> int:
    return HOME_SLOT[player]
