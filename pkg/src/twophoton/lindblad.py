"""Dressed-state master equation and the emitted output field.

All superoperators act on density matrices written in the retained dressed
basis and vectorised row-major: ``vec(rho)[a*d + b] = rho[a, b]``, so that
``vec(A rho B) = kron(A, B.T) @ vec(rho)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import hilbert
from .errors import InvalidArgumentError
from .hilbert import LabeledOperator
from .model import DEFAULT_LEVELS_PER_PARITY, DressedSpectrum, DriveConfig, parity_sign


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1)


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    d = d or int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape(d, d)


def spre(a) -> sp.csr_matrix:
    """Superoperator rho -> a rho."""
    a = sp.csr_matrix(a)
    return sp.kron(a, sp.identity(a.shape[0]), format="csr")


def spost(b) -> sp.csr_matrix:
    """Superoperator rho -> rho b."""
    b = sp.csr_matrix(b)
    return sp.kron(sp.identity(b.shape[0]), b.T, format="csr")


def commutator_super(h) -> sp.csr_matrix:
    """Superoperator rho -> -i [h, rho]."""
    return (-1j * (spre(h) - spost(h))).tocsr()


def lindblad_term(op) -> sp.csr_matrix:
    """Superoperator D[op] rho = op rho op^+ - (op^+ op rho + rho op^+ op)/2."""
    op = sp.csr_matrix(op)
    od = op.conj().T
    ood = (od @ op).tocsr()
    return (sp.kron(op, op.conj(), format="csr") - 0.5 * spre(ood) - 0.5 * spost(ood)).tocsr()


@dataclass(frozen=True)
class DissipationRates:
    gamma: float
    kappa: float

    def __post_init__(self):
        if not (self.gamma >= 0 and self.kappa >= 0):
            raise InvalidArgumentError("decay rates must be non-negative")


@dataclass(frozen=True, eq=False)
class DressedBasis:
    """Lowest ``n_per_parity`` dressed levels of each parity, even first."""

    spectrum: DressedSpectrum
    n_per_parity: int = DEFAULT_LEVELS_PER_PARITY
    energies: np.ndarray = field(init=False, repr=False)
    parities: np.ndarray = field(init=False, repr=False)
    indices: np.ndarray = field(init=False, repr=False)
    vectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        levels = self.spectrum.retained(self.n_per_parity)
        for name, val in (
            ("energies", np.array([lv.energy for lv in levels])),
            ("parities", np.array([lv.parity for lv in levels])),
            ("indices", np.array([lv.index for lv in levels])),
            ("vectors", np.column_stack([lv.vector for lv in levels])),
        ):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def dim(self) -> int:
        return len(self.energies)

    def position(self, parity, index: int) -> int:
        s = parity_sign(parity)
        hits = np.flatnonzero((self.parities == s) & (self.indices == index))
        if not hits.size:
            raise InvalidArgumentError(f"level ({parity},{index}) is not retained")
        return int(hits[0])

    def project(self, op: LabeledOperator | np.ndarray) -> np.ndarray:
        """Matrix elements <Psi_j| op |Psi_k> between retained levels."""
        m = op.matrix if isinstance(op, LabeledOperator) else op
        return self.vectors.conj().T @ m @ self.vectors

    def embed(self, m: np.ndarray) -> LabeledOperator:
        """Dressed-basis matrix back on the Fock (x) qubit space."""
        return LabeledOperator(self.spectrum.space, self.vectors @ m @ self.vectors.conj().T)

    def gaps(self) -> np.ndarray:
        """Delta[j, k] = E_k - E_j."""
        return self.energies[None, :] - self.energies[:, None]

    def labels(self) -> list[str]:
        return [f"{'+' if p > 0 else '-'}{i}" for p, i in zip(self.parities, self.indices)]


@dataclass(frozen=True, eq=False)
class RateTables:
    """Gamma[j, k], K[j, k]: rates for the jump from level k down to level j."""

    basis: DressedBasis
    cavity: np.ndarray
    qubit: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.cavity + self.qubit


def transition_rates(basis: DressedBasis, rates: DissipationRates) -> RateTables:
    params = basis.spectrum.params
    if params is None:
        raise InvalidArgumentError("spectrum carries no model parameters")
    space = basis.spectrum.space
    a = hilbert.annihilation(space)
    sm = hilbert.pauli(space, "minus")
    delta = basis.gaps()
    up = delta > 0
    dpos = np.where(up, delta, 0.0)
    xa = np.abs(basis.project(a - a.dag())) ** 2
    xs = np.abs(basis.project(sm - sm.dag())) ** 2
    cav = rates.gamma * dpos / params.omega_c * xa
    qub = rates.kappa * dpos / params.omega_q * xs
    for t in (cav, qub):
        t[~up] = 0.0
        t.setflags(write=False)
    return RateTables(basis, cav, qub)


@dataclass(frozen=True)
class Jump:
    source: tuple
    target: tuple
    rate: float


@dataclass(frozen=True, eq=False)
class LindbladModel:
    basis: DressedBasis
    tables: RateTables
    dissipator: sp.csr_matrix = field(repr=False)

    @property
    def hamiltonian(self) -> np.ndarray:
        """Undriven Hamiltonian in the retained dressed basis."""
        return np.diag(self.basis.energies).astype(complex)

    def jumps(self) -> list[Jump]:
        lab = list(zip(self.basis.parities.tolist(), self.basis.indices.tolist()))
        total = self.tables.total
        return [
            Jump(lab[k], lab[j], float(total[j, k]))
            for j, k in zip(*np.nonzero(total))
        ]


def build_dissipator(tables: RateTables) -> LindbladModel:
    """Sum of rate-weighted D[|Psi_j><Psi_k|] over all downward pairs.

    Each jump is rank one, so it only feeds population j from population k and
    damps every matrix element touching k. That structure gives the sparse
    matrix directly without summing d^2 Kronecker products.
    """
    r = tables.total
    if np.any(r < 0):
        raise InvalidArgumentError("negative transition rate")
    d = r.shape[0]
    out = r.sum(axis=0)
    diag = -0.5 * (out[:, None] + out[None, :]).reshape(-1)
    j, k = np.nonzero(r)
    rows = np.concatenate([np.arange(d * d), j * d + j])
    cols = np.concatenate([np.arange(d * d), k * d + k])
    data = np.concatenate([diag, r[j, k]]).astype(complex)
    D = sp.csr_matrix((data, (rows, cols)), shape=(d * d, d * d))
    D.sum_duplicates()
    return LindbladModel(tables.basis, tables, D)


@dataclass(frozen=True, eq=False)
class LiouvillianComponents:
    """L(t) = L0 + Lp exp(-i w t) + Lm exp(+i w t)."""

    L0: sp.csr_matrix
    Lp: sp.csr_matrix
    Lm: sp.csr_matrix
    omega_d: float
    d: int

    def at(self, t: float) -> sp.csr_matrix:
        return (self.L0 + np.exp(-1j * self.omega_d * t) * self.Lp + np.exp(1j * self.omega_d * t) * self.Lm).tocsr()

    def apply(self, t: float, v: np.ndarray) -> np.ndarray:
        w = self.omega_d * t
        return self.L0 @ v + np.exp(-1j * w) * (self.Lp @ v) + np.exp(1j * w) * (self.Lm @ v)

    @property
    def base_dim(self) -> int:
        return self.d * self.d


def drive_operator(basis: DressedBasis, channel: str) -> np.ndarray:
    """c + c^+ in the dressed basis, with c = a (cavity) or sigma_minus (qubit)."""
    space = basis.spectrum.space
    if channel == "cavity":
        c = hilbert.annihilation(space)
    elif channel == "qubit":
        c = hilbert.pauli(space, "minus")
    else:
        raise InvalidArgumentError(f"unknown drive channel {channel!r}")
    return basis.project(c + c.dag())


def liouvillian(model: LindbladModel, drive: DriveConfig) -> LiouvillianComponents:
    """Fourier components of -i[H0 + F cos(w t)(c + c^+), .] + dissipator.

    The dissipator comes from the undriven spectrum only.
    """
    d = model.basis.dim
    L0 = (commutator_super(model.hamiltonian) + model.dissipator).tocsr()
    if drive.amplitude == 0:
        zero = sp.csr_matrix((d * d, d * d), dtype=complex)
        return LiouvillianComponents(L0, zero, zero.copy(), drive.omega_d, d)
    x = drive_operator(model.basis, drive.channel)
    x[np.abs(x) < 1e-14] = 0.0
    L1 = (0.5 * drive.amplitude * commutator_super(x)).tocsr()
    L1.eliminate_zeros()
    return LiouvillianComponents(L0, L1, L1.copy(), drive.omega_d, d)


@dataclass(frozen=True, eq=False)
class OutputFieldOperator:
    basis: DressedBasis
    x_plus: np.ndarray

    def __post_init__(self):
        self.x_plus.setflags(write=False)

    @property
    def x_minus(self) -> np.ndarray:
        return self.x_plus.conj().T

    def in_fock(self) -> tuple[LabeledOperator, LabeledOperator]:
        xp = self.basis.embed(self.x_plus)
        return xp, xp.dag()


def output_field(basis: DressedBasis) -> OutputFieldOperator:
    """X+[j, k] = Delta_jk <Psi_j| i(a^+ - a) |Psi_k> for Delta_jk > 0, opposite parity."""
    a = hilbert.annihilation(basis.spectrum.space)
    delta = basis.gaps()
    mask = (delta > 0) & (basis.parities[:, None] != basis.parities[None, :])
    elems = basis.project(1j * (a.dag() - a))
    return OutputFieldOperator(basis, np.where(mask, delta * elems, 0.0))
