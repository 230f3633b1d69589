"""Backends that hand out measurement results for distributed triplets.

Two interchangeable paths are provided. :class:`QsimSource` holds one state
vector per triplet and runs every measurement through :mod:`qdbcast.qsim`.
:class:`OracleSource` samples from the exact outcome distributions of the
prepared ensemble instead, using :mod:`qdbcast.oracle` for the ideal state;
it is much faster but only supports one kind of measurement per triplet.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Optional, Sequence

import numpy as np

from . import oracle, qsim
from .netsim import SlotLedger
from .players import Player


@dataclass(frozen=True)
class Preparation:
    """An i.i.d. per-triplet ensemble: ``(weight, state)`` components."""

    name: str
    components: tuple

    def __post_init__(self):
        w = np.array([c[0] for c in self.components], dtype=float)
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("component weights must be a probability vector")

    @classmethod
    def aharonov(cls) -> "Preparation":
        return cls("aharonov", ((1.0, qsim.aharonov_state()),))

    @classmethod
    def product(cls, digits=(0, 1, 2)) -> "Preparation":
        return cls("product", ((1.0, qsim.basis_state(*digits)),))

    @classmethod
    def permutation_mixture(cls, weights: Optional[Sequence[float]] = None) -> "Preparation":
        """Classical mixture of the six permutation product states."""
        perms = list(permutations(range(3)))
        if weights is None:
            weights = [1 / 6] * 6
        weights = np.asarray(weights, dtype=float)
        weights = weights / weights.sum()
        return cls(
            "permutation_mixture",
            tuple((float(w), qsim.basis_state(*p)) for w, p in zip(weights, perms)),
        )

    @property
    def is_aharonov(self) -> bool:
        return (
            len(self.components) == 1
            and qsim.fidelity(self.components[0][1], qsim.aharonov_state()) > 1 - 1e-12
        )

    def density(self) -> np.ndarray:
        return sum(w * qsim.density_matrix(s) for w, s in self.components)

    def z_joint_probs(self) -> np.ndarray:
        return np.clip(np.real(np.diag(self.density())), 0, None)

    def slot_probs(self, slot: int, basis=None) -> np.ndarray:
        rho = qsim.reduce_density(self.density(), [slot])
        if basis is not None:
            u = basis.u if isinstance(basis, qsim.BasisRotation) else np.asarray(basis)
            rho = u.conj().T @ rho @ u
        return np.clip(np.real(np.diag(rho)), 0, None)

    def antisym_pass_prob(self, slot_a: int, slot_b: int) -> float:
        # Kept slots come back in ascending order; the projector is invariant
        # under swapping the two factors, so that is harmless.
        rho = qsim.reduce_density(self.density(), [slot_a, slot_b])
        return float(np.real(np.trace(qsim.antisym_projector() @ rho)))

    def sample_state(self, rng: np.random.Generator) -> qsim.TripletState:
        if len(self.components) == 1:
            return self.components[0][1]
        w = np.array([c[0] for c in self.components])
        return self.components[int(rng.choice(len(w), p=w))][1]


class OracleUnsupported(Exception):
    pass


class TripletSource:
    def __init__(self, prep: Preparation, ledger: SlotLedger, rng: np.random.Generator):
        self.prep = prep
        self.ledger = ledger
        self.rng = rng

    @property
    def n(self) -> int:
        return self.ledger.n

    def measure_z(self, player: Player, ids, slot: int) -> np.ndarray:
        raise NotImplementedError

    def measure_in_basis(self, player: Player, ids, slot: int, basis) -> np.ndarray:
        raise NotImplementedError

    def antisym_test(self, player: Player, ids, slots) -> np.ndarray:
        raise NotImplementedError


_UNTOUCHED, _JOINT_Z, _LOCAL = 0, 1, 2


class OracleSource(TripletSource):
    def __init__(self, prep, ledger, rng):
        super().__init__(prep, ledger, rng)
        self._mode = np.zeros(ledger.n, dtype=np.int8)
        self._z = np.full((ledger.n, 3), -1, dtype=np.int8)
        self._zprobs = None if prep.is_aharonov else prep.z_joint_probs()

    def _sample_joint(self, count: int) -> np.ndarray:
        if self._zprobs is None:
            return oracle.sample_triplets(self.rng, count)
        flat = self.rng.choice(27, size=count, p=self._zprobs / self._zprobs.sum())
        return np.stack([flat // 9, (flat // 3) % 3, flat % 3], axis=1)

    def measure_z(self, player, ids, slot):
        ids = np.asarray(ids, dtype=np.int64)
        if (self._mode[ids] == _LOCAL).any():
            raise OracleUnsupported("triplet already used for a local test")
        self.ledger.mark_measured(player, ids, [slot])
        fresh = ids[self._mode[ids] == _UNTOUCHED]
        if fresh.size:
            self._z[fresh] = self._sample_joint(fresh.size)
            self._mode[fresh] = _JOINT_Z
        return self._z[ids, slot].astype(np.int64)

    def _claim_local(self, ids):
        if (self._mode[ids] != _UNTOUCHED).any():
            raise OracleUnsupported("oracle path supports one measurement kind per triplet")
        self._mode[ids] = _LOCAL

    def measure_in_basis(self, player, ids, slot, basis):
        ids = np.asarray(ids, dtype=np.int64)
        self.ledger.mark_measured(player, ids, [slot])
        self._claim_local(ids)
        p = self.prep.slot_probs(slot, basis)
        return self.rng.choice(3, size=ids.size, p=p / p.sum()).astype(np.int64)

    def antisym_test(self, player, ids, slots):
        ids = np.asarray(ids, dtype=np.int64)
        self.ledger.mark_measured(player, ids, list(slots))
        self._claim_local(ids)
        p = self.prep.antisym_pass_prob(*slots)
        return self.rng.random(ids.size) < p


class QsimSource(TripletSource):
    """State-vector path: one 27-amplitude row per triplet."""

    def __init__(self, prep, ledger, rng):
        super().__init__(prep, ledger, rng)
        self.amplitudes = np.stack(
            [prep.sample_state(rng).amplitudes for _ in range(ledger.n)]
        ) if ledger.n else np.zeros((0, 27), dtype=complex)

    def state(self, j: int) -> qsim.TripletState:
        return qsim.TripletState(self.amplitudes[j])

    def measure_z(self, player, ids, slot):
        return self.measure_in_basis(player, ids, slot, None)

    def measure_in_basis(self, player, ids, slot, basis):
        ids = np.asarray(ids, dtype=np.int64)
        self.ledger.mark_measured(player, ids, [slot])
        out, self.amplitudes[ids] = qsim.measure_slot_many(self.amplitudes[ids], slot, self.rng, basis)
        return out.astype(np.int64)

    def antisym_test(self, player, ids, slots):
        ids = np.asarray(ids, dtype=np.int64)
        self.ledger.mark_measured(player, ids, list(slots))
        out, self.amplitudes[ids] = qsim.antisym_measure_many(
            self.amplitudes[ids], slots[0], slots[1], self.rng
        )
        return out


QUANTUM_PATHS = {"oracle": OracleSource, "qsim": QsimSource}


def make_source(path: str, prep: Preparation, ledger: SlotLedger, rng) -> TripletSource:
    try:
        cls = QUANTUM_PATHS[path]
    except KeyError:
        raise ValueError(f"unknown quantum path {path!r}") from None
    return cls(prep, ledger, rng)
