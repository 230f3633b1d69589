"""Exact state-vector simulation of three qutrits.

Amplitudes are stored flat with index ``9*a + 3*b + c`` where ``a, b, c`` are
the digits held by slots 0, 1, 2, i.e. by S, R0 and R1 of a freshly prepared
triplet. All operations are value-semantic: they return new states.

Qutrits are read as spin-1 systems with ``|0>, |1>, |2>`` the eigenvectors of
``S_z`` for eigenvalues ``+1, 0, -1``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import permutations
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.linalg

from .players import PLAYERS, Player

DIM = 3
N_SLOTS = 3
EQ_TOL = 1e-12
UNITARY_TOL = 1e-10
# Outcome branches below this probability are never sampled.
MIN_BRANCH_PROB = 1e-15


class QuantumError(Exception):
    pass


class AlreadyMeasured(QuantumError):
    pass


def basis_index(a: int, b: int, c: int) -> int:
    return 9 * a + 3 * b + c


@dataclass(frozen=True)
class TripletState:
    amplitudes: np.ndarray
    slot_owner: tuple = PLAYERS
    measured: tuple = (False, False, False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(27)
        object.__setattr__(self, "amplitudes", amps)
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > EQ_TOL:
            raise QuantumError(f"state is not normalised (norm^2 = {norm!r})")

    @property
    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(DIM, DIM, DIM)

    def amplitude(self, a: int, b: int, c: int) -> complex:
        return complex(self.amplitudes[basis_index(a, b, c)])

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def owner(self, slot: int) -> Player:
        return self.slot_owner[slot]


@dataclass(frozen=True)
class BasisRotation:
    """A single-qutrit unitary; its columns are the measurement basis vectors."""

    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex)
        if u.shape != (DIM, DIM):
            raise QuantumError(f"basis rotation must be 3x3, got {u.shape}")
        if not np.allclose(u.conj().T @ u, np.eye(DIM), atol=UNITARY_TOL, rtol=0):
            raise QuantumError("basis rotation is not unitary")
        object.__setattr__(self, "u", u)

    @classmethod
    def identity(cls) -> "BasisRotation":
        return cls(np.eye(DIM))


def _as_rotation(u) -> BasisRotation:
    return u if isinstance(u, BasisRotation) else BasisRotation(u)


def basis_state(a: int, b: int, c: int) -> TripletState:
    amps = np.zeros(27, dtype=complex)
    amps[basis_index(a, b, c)] = 1.0
    return TripletState(amps)


def aharonov_state() -> TripletState:
    """The totally antisymmetric three-qutrit state.

    Each permutation of ``(0, 1, 2)`` carries amplitude ``sign(perm)/sqrt(6)``.
    """
    amps = np.zeros(27, dtype=complex)
    for perm in permutations(range(3)):
        amps[basis_index(*perm)] = _perm_sign(perm) / np.sqrt(6)
    return TripletState(amps)


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


def _check_unmeasured(state: TripletState, slots: Iterable[int]):
    for s in slots:
        if not 0 <= s < N_SLOTS:
            raise QuantumError(f"no slot {s}")
        if state.measured[s]:
            raise AlreadyMeasured(f"slot {s} has already been measured")


def _apply_on_axis(tensor: np.ndarray, op: np.ndarray, axis: int) -> np.ndarray:
    out = np.tensordot(op, tensor, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def apply_local(state: TripletState, slot: int, u) -> TripletState:
    """Apply a single-qutrit unitary to one slot."""
    _check_unmeasured(state, [slot])
    rot = _as_rotation(u)
    t = _apply_on_axis(state.tensor, rot.u, slot)
    return replace(state, amplitudes=t.reshape(27))


def apply_common_basis(state: TripletState, u) -> TripletState:
    """Return ``(u ⊗ u ⊗ u) |state>``."""
    _check_unmeasured(state, range(N_SLOTS))
    rot = _as_rotation(u)
    t = np.einsum("ia,jb,kc,abc->ijk", rot.u, rot.u, rot.u, state.tensor)
    return replace(state, amplitudes=t.reshape(27))


def slot_probabilities(state: TripletState, slot: int, basis=None) -> np.ndarray:
    t = state.tensor
    if basis is not None:
        t = _apply_on_axis(t, _as_rotation(basis).u.conj().T, slot)
    axes = tuple(a for a in range(N_SLOTS) if a != slot)
    return np.sum(np.abs(t) ** 2, axis=axes)


def measure_slot(
    state: TripletState,
    slot: int,
    rng: np.random.Generator,
    basis=None,
    by: Optional[Player] = None,
) -> tuple[int, TripletState]:
    """Projectively measure one slot and collapse the state.

    ``basis`` is a rotation whose columns are the measurement vectors; ``None``
    means the z basis. If ``by`` is given, the slot must be owned by that player.
    """
    _check_unmeasured(state, [slot])
    if by is not None and state.slot_owner[slot] != by:
        raise QuantumError(f"{by} does not own slot {slot}")
    t = state.tensor
    u = None
    if basis is not None:
        u = _as_rotation(basis).u
        t = _apply_on_axis(t, u.conj().T, slot)
    axes = tuple(a for a in range(N_SLOTS) if a != slot)
    probs = np.sum(np.abs(t) ** 2, axis=axes)
    probs = np.where(probs < MIN_BRANCH_PROB, 0.0, probs)
    total = probs.sum()
    if total <= 0:
        raise QuantumError("all outcome branches have vanishing probability")
    cdf = np.cumsum(probs / total)
    outcome = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    outcome = min(outcome, DIM - 1)
    while probs[outcome] == 0.0:  # guard against landing on an excluded branch
        outcome -= 1
    collapsed = np.zeros_like(t)
    index = [slice(None)] * N_SLOTS
    index[slot] = outcome
    collapsed[tuple(index)] = t[tuple(index)] / np.sqrt(probs[outcome])
    if u is not None:
        collapsed = _apply_on_axis(collapsed, u, slot)
    measured = list(state.measured)
    measured[slot] = True
    return outcome, replace(
        state, amplitudes=collapsed.reshape(27), measured=tuple(measured)
    )


def measure_all_z(state: TripletState, rng: np.random.Generator) -> tuple[int, int, int]:
    out = []
    for slot in range(N_SLOTS):
        t, state = measure_slot(state, slot, rng)
        out.append(t)
    return tuple(out)


def density_matrix(state: TripletState) -> np.ndarray:
    return np.outer(state.amplitudes, state.amplitudes.conj())


def reduce_density(rho: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    """Partial trace of a 27x27 density matrix onto the slots in ``keep``."""
    keep = sorted(set(keep))
    if not keep or len(keep) == N_SLOTS or any(not 0 <= k < N_SLOTS for k in keep):
        raise QuantumError(f"keep must be a proper non-empty subset of slots, got {keep}")
    letters_in = "abc"
    letters_out = "def"
    ket = "".join(letters_in)
    bra = "".join(letters_in[i] if i not in keep else letters_out[i] for i in range(N_SLOTS))
    out = "".join(letters_in[i] for i in keep) + "".join(letters_out[i] for i in keep)
    r = np.einsum(f"{ket}{bra}->{out}", rho.reshape((DIM,) * 6))
    d = DIM ** len(keep)
    return r.reshape(d, d)


def partial_trace(state: TripletState, keep: Iterable[int]) -> np.ndarray:
    """Reduced density matrix of ``state`` over the slots in ``keep``.

    Returns a 3x3 matrix for one kept slot and a 9x9 matrix (row index
    ``3*first + second``) for two.
    """
    keep = sorted(set(keep))
    _check_unmeasured(state, keep)
    t = state.tensor
    traced = tuple(a for a in range(N_SLOTS) if a not in keep)
    if len(keep) in (0, N_SLOTS):
        raise QuantumError(f"keep must be a proper non-empty subset of slots, got {keep}")
    psi = np.moveaxis(t, keep + list(traced), range(N_SLOTS))
    d = DIM ** len(keep)
    m = psi.reshape(d, -1)
    return m @ m.conj().T


def is_density_matrix(m: np.ndarray, tol: float = EQ_TOL, psd_tol: float = 1e-10) -> bool:
    if not np.allclose(m, m.conj().T, atol=tol, rtol=0):
        return False
    if abs(np.trace(m) - 1.0) > tol:
        return False
    return float(np.linalg.eigvalsh(m).min()) >= -psd_tol


def swap_operator() -> np.ndarray:
    swap = np.zeros((9, 9))
    for a in range(DIM):
        for b in range(DIM):
            swap[3 * b + a, 3 * a + b] = 1.0
    return swap


def antisym_projector() -> np.ndarray:
    """Projector onto the 3-dimensional antisymmetric subspace of two qutrits."""
    return (np.eye(9) - swap_operator()) / 2


def antisym_probability(state: TripletState, slot_a: int, slot_b: int) -> float:
    if slot_a == slot_b:
        raise QuantumError("antisymmetric test needs two distinct slots")
    t = state.tensor
    swapped = np.swapaxes(t, slot_a, slot_b)
    overlap = np.vdot(t, swapped).real
    return float((1.0 - overlap) / 2)


def antisym_projector_measure(
    state: TripletState, slot_a: int, slot_b: int, rng: np.random.Generator
) -> tuple[bool, TripletState]:
    """Two-outcome test: is the (slot_a, slot_b) pair in the antisymmetric subspace?

    Both slots count as measured afterwards.
    """
    if slot_a == slot_b:
        raise QuantumError("antisymmetric test needs two distinct slots")
    _check_unmeasured(state, [slot_a, slot_b])
    t = state.tensor
    swapped = np.swapaxes(t, slot_a, slot_b)
    p_in = float((1.0 - np.vdot(t, swapped).real) / 2)
    p_in = min(max(p_in, 0.0), 1.0)
    inside = rng.random() < p_in
    if inside:
        p = p_in
        post = (t - swapped) / 2
    else:
        p = 1.0 - p_in
        post = (t + swapped) / 2
    if p < MIN_BRANCH_PROB:
        raise QuantumError("sampled a vanishing-probability branch")
    measured = list(state.measured)
    measured[slot_a] = measured[slot_b] = True
    return inside, replace(
        state, amplitudes=(post / np.sqrt(p)).reshape(27), measured=tuple(measured)
    )


def fidelity(a: TripletState, b: TripletState) -> float:
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


# Spin-1 operators in the (+1, 0, -1) eigenbasis of S_z.
_S_PLUS = np.sqrt(2) * np.array([[0, 1, 0], [0, 0, 1], [0, 0, 0]], dtype=complex)
SPIN_X = (_S_PLUS + _S_PLUS.conj().T) / 2
SPIN_Y = (_S_PLUS - _S_PLUS.conj().T) / 2j
SPIN_Z = np.diag([1.0, 0.0, -1.0]).astype(complex)


def spin_along(direction: Sequence[float]) -> np.ndarray:
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    return n[0] * SPIN_X + n[1] * SPIN_Y + n[2] * SPIN_Z


def direction_basis(direction: Sequence[float]) -> BasisRotation:
    """Eigenbasis of ``n·S`` ordered by eigenvalue +1, 0, -1."""
    vals, vecs = np.linalg.eigh(spin_along(direction))
    order = np.argsort(-vals)
    return BasisRotation(vecs[:, order])


def spin_rotation(axis: Sequence[float], angle: float) -> BasisRotation:
    return BasisRotation(scipy.linalg.expm(-1j * angle * spin_along(axis)))


def random_unitary(rng: np.random.Generator, dim: int = DIM) -> BasisRotation:
    """Haar-distributed unitary from a QR decomposition of a Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return BasisRotation(q)


# Batched forms over an (n, 27) amplitude array, one row per triplet. They
# implement the same measurements as the single-state functions above.

def _batch_sample(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    probs = np.where(probs < MIN_BRANCH_PROB, 0.0, probs)
    total = probs.sum(axis=1, keepdims=True)
    if (total <= 0).any():
        raise QuantumError("all outcome branches have vanishing probability")
    cdf = np.cumsum(probs / total, axis=1)
    u = rng.random((probs.shape[0], 1)) * cdf[:, -1:]
    out = np.minimum((u >= cdf).sum(axis=1), probs.shape[1] - 1)
    # Step back over excluded (zero-probability) branches at the top end.
    rows = np.arange(probs.shape[0])
    while True:
        bad = probs[rows, out] == 0.0
        if not bad.any():
            return out
        out = np.where(bad, out - 1, out)


def measure_slot_many(
    amplitudes: np.ndarray, slot: int, rng: np.random.Generator, basis=None
) -> tuple[np.ndarray, np.ndarray]:
    """Measure ``slot`` of every row; returns outcomes and collapsed rows."""
    n = amplitudes.shape[0]
    t = amplitudes.reshape(n, DIM, DIM, DIM)
    u = None
    if basis is not None:
        u = _as_rotation(basis).u
        t = np.moveaxis(np.tensordot(t, u.conj(), axes=([slot + 1], [0])), -1, slot + 1)
    axes = tuple(a + 1 for a in range(N_SLOTS) if a != slot)
    probs = np.sum(np.abs(t) ** 2, axis=axes)
    out = _batch_sample(probs, rng)
    keep = np.zeros((n, DIM), dtype=bool)
    keep[np.arange(n), out] = True
    shape = [n, 1, 1, 1]
    shape[slot + 1] = DIM
    collapsed = t * keep.reshape(shape) / np.sqrt(probs[np.arange(n), out]).reshape(n, 1, 1, 1)
    if u is not None:
        collapsed = np.moveaxis(np.tensordot(collapsed, u.T, axes=([slot + 1], [0])), -1, slot + 1)
    return out, collapsed.reshape(n, 27)


def antisym_measure_many(
    amplitudes: np.ndarray, slot_a: int, slot_b: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    if slot_a == slot_b:
        raise QuantumError("antisymmetric test needs two distinct slots")
    n = amplitudes.shape[0]
    t = amplitudes.reshape(n, DIM, DIM, DIM)
    swapped = np.swapaxes(t, slot_a + 1, slot_b + 1)
    overlap = np.einsum("nabc,nabc->n", t.conj(), swapped).real
    p_in = np.clip((1.0 - overlap) / 2, 0.0, 1.0)
    inside = rng.random(n) < p_in
    p = np.where(inside, p_in, 1.0 - p_in)
    sign = np.where(inside, -1.0, 1.0).reshape(n, 1, 1, 1)
    post = (t + sign * swapped) / 2 / np.sqrt(np.maximum(p, MIN_BRANCH_PROB)).reshape(n, 1, 1, 1)
    return inside, post.reshape(n, 27)
