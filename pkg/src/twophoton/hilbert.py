"""Truncated Fock (x) qubit Hilbert space and its elementary operators.

Basis ordering is photon-major: the state |n, q> sits at index ``2*n + q``
with ``q = 0`` for the qubit ground state |g> and ``q = 1`` for |e>.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from numbers import Number

import numpy as np

from .errors import InvalidArgumentError

QUBIT_G = 0
QUBIT_E = 1


def basis_index(n: int, q: int) -> int:
    """Index of |n, q> in the photon-major ordering."""
    return 2 * n + q


@dataclass(frozen=True)
class SpaceDescriptor:
    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise InvalidArgumentError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def n_levels(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    def photon_numbers(self) -> np.ndarray:
        """Photon number of every basis state, in basis order."""
        return np.repeat(np.arange(self.n_levels), 2)

    def qubit_states(self) -> np.ndarray:
        return np.tile([QUBIT_G, QUBIT_E], self.n_levels)

    def ket(self, n: int, q: int) -> np.ndarray:
        if not (0 <= n <= self.n_max) or q not in (QUBIT_G, QUBIT_E):
            raise InvalidArgumentError(f"|{n},{q}> is outside the truncated space")
        v = np.zeros(self.dim, dtype=complex)
        v[basis_index(n, q)] = 1.0
        return v


def make_space(n_max: int) -> SpaceDescriptor:
    return SpaceDescriptor(n_max)


@dataclass(frozen=True, eq=False)
class LabeledOperator:
    """Dense matrix acting on a :class:`SpaceDescriptor`.

    The wrapped array is made read-only; arithmetic returns new operators and
    refuses to mix operators living on different spaces.
    """

    space: SpaceDescriptor
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise InvalidArgumentError(
                f"matrix shape {m.shape} does not match space dim {self.space.dim}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def _check(self, other: "LabeledOperator"):
        if not isinstance(other, LabeledOperator):
            return NotImplemented
        if other.space != self.space:
            raise InvalidArgumentError("operators live on different spaces")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return LabeledOperator(self.space, self.matrix + other.matrix)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return LabeledOperator(self.space, self.matrix - other.matrix)

    def __neg__(self):
        return LabeledOperator(self.space, -self.matrix)

    def __matmul__(self, other):
        if isinstance(other, np.ndarray):
            return self.matrix @ other
        if self._check(other) is NotImplemented:
            return NotImplemented
        return LabeledOperator(self.space, self.matrix @ other.matrix)

    def __mul__(self, scalar):
        if not isinstance(scalar, Number):
            return NotImplemented
        return LabeledOperator(self.space, scalar * self.matrix)

    __rmul__ = __mul__

    def dag(self) -> "LabeledOperator":
        return LabeledOperator(self.space, self.matrix.conj().T)

    def commutator(self, other: "LabeledOperator") -> "LabeledOperator":
        return self @ other - other @ self

    def expect(self, state: np.ndarray) -> complex:
        """<psi|O|psi> for a ket, Tr[O rho] for a density matrix."""
        state = np.asarray(state)
        if state.ndim == 1:
            return complex(np.vdot(state, self.matrix @ state))
        return complex(np.trace(self.matrix @ state))

    def is_hermitian(self, atol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) <= atol)


def identity(space: SpaceDescriptor) -> LabeledOperator:
    return LabeledOperator(space, np.eye(space.dim))


def annihilation(space: SpaceDescriptor) -> LabeledOperator:
    a = np.diag(np.sqrt(np.arange(1, space.n_levels, dtype=float)), 1)
    return LabeledOperator(space, np.kron(a, np.eye(2)))


def creation(space: SpaceDescriptor) -> LabeledOperator:
    return annihilation(space).dag()


def number(space: SpaceDescriptor) -> LabeledOperator:
    return LabeledOperator(space, np.diag(space.photon_numbers().astype(float)))


_PAULI = {
    # qubit ordering (g, e); sigma_z |g> = -|g>
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "z": np.array([[-1, 0], [0, 1]], dtype=complex),
    "plus": np.array([[0, 0], [1, 0]], dtype=complex),
    "minus": np.array([[0, 1], [0, 0]], dtype=complex),
}


def pauli(space: SpaceDescriptor, which: str) -> LabeledOperator:
    """Qubit operator ``1 (x) sigma`` with ``which`` in x, y, z, plus, minus."""
    try:
        s = _PAULI[which]
    except KeyError:
        raise InvalidArgumentError(f"unknown Pauli operator {which!r}") from None
    return LabeledOperator(space, np.kron(np.eye(space.n_levels), s))


def photon_parity(space: SpaceDescriptor) -> LabeledOperator:
    return LabeledOperator(space, np.diag((-1.0) ** space.photon_numbers()))


def quadrature(space: SpaceDescriptor) -> LabeledOperator:
    """a + a^dagger."""
    a = annihilation(space)
    return a + a.dag()
