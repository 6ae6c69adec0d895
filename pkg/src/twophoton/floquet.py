"""Floquet-Liouville treatment of the periodically driven master equation.

A periodic solution is written ``rho(t) = sum_n R[n] exp(-i n w t)`` with
harmonics ``|n| <= k_max``. The Fourier components of the generator assemble
into a time-independent block-tridiagonal matrix whose block ``(n, n)`` is
``L0 + i n w``, block ``(n, n-1)`` is ``Lp`` and block ``(n, n+1)`` is ``Lm``.
Its eigenvalues ``lam`` relate to the complex frequencies by ``Omega = i lam``;
the replica of family ``alpha`` at harmonic ``k`` sits at
``lam_alpha + i k w``, i.e. ``Omega_alpha - k w``.

Floquet vectors are stored harmonic-major: component ``n`` of a vector ``x``
is ``x[(n + k_max) * D:(n + k_max + 1) * D]`` with ``D = d**2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.signal import find_peaks
from scipy.sparse.csgraph import connected_components

from .errors import (
    ConvergenceError,
    DefectiveSpectrumError,
    InvalidArgumentError,
    UndefinedCorrelatorError,
)
from .lindblad import LiouvillianComponents, OutputFieldOperator

PAIRING_TOL = 1e-6
DELTA_BROADENING = 1e-8
DEFAULT_PERIOD_SAMPLES = 16


@dataclass(frozen=True)
class FloquetSpace:
    base_dim: int
    k_max: int
    omega_d: float

    def __post_init__(self):
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise InvalidArgumentError(f"k_max must be an integer >= 1, got {self.k_max!r}")

    @property
    def n_harmonics(self) -> int:
        return 2 * self.k_max + 1

    @property
    def total_dim(self) -> int:
        return self.base_dim * self.n_harmonics

    @property
    def d(self) -> int:
        return int(round(np.sqrt(self.base_dim)))

    def harmonics(self) -> np.ndarray:
        return np.arange(-self.k_max, self.k_max + 1)

    def embed(self, components: dict[int, np.ndarray] | np.ndarray) -> np.ndarray:
        """Floquet vector from {n: d x d matrix} or an array of all harmonics."""
        out = np.zeros((self.n_harmonics, self.base_dim), dtype=complex)
        if isinstance(components, dict):
            for n, m in components.items():
                out[n + self.k_max] = np.asarray(m).reshape(-1)
        else:
            out[:] = np.asarray(components).reshape(self.n_harmonics, -1)
        return out.reshape(-1)

    def split(self, x: np.ndarray) -> np.ndarray:
        """Floquet vector -> array of shape (n_harmonics, d, d)."""
        return np.asarray(x).reshape(self.n_harmonics, self.d, self.d)


@dataclass(frozen=True, eq=False)
class FloquetLiouvillian:
    space: FloquetSpace
    matrix: sp.csr_matrix = field(repr=False)


def build_floquet_liouvillian(comps: LiouvillianComponents, k_max: int) -> FloquetLiouvillian:
    space = FloquetSpace(comps.base_dim, k_max, comps.omega_d)
    N, D = space.n_harmonics, space.base_dim
    ident = sp.identity(D, dtype=complex, format="csr")
    diag = sp.block_diag([comps.L0 + 1j * n * comps.omega_d * ident for n in space.harmonics()], format="csr")
    lower = sp.kron(sp.eye(N, k=-1), comps.Lp, format="csr")
    upper = sp.kron(sp.eye(N, k=1), comps.Lm, format="csr")
    m = (diag + lower + upper).tocsr()
    m.eliminate_zeros()
    return FloquetLiouvillian(space, m)


def invariant_sectors(matrix: sp.spmatrix) -> list[np.ndarray]:
    """Index sets of the decoupled blocks of a sparse matrix, largest first."""
    graph = sp.csr_matrix(matrix)
    graph = sp.csr_matrix((np.ones_like(graph.data, dtype=float), graph.indices, graph.indptr), shape=graph.shape)
    n, lab = connected_components(graph, directed=True, connection="weak")
    secs = [np.flatnonzero(lab == c) for c in range(n)]
    secs.sort(key=lambda s: (-len(s), s[0]))
    return secs


@dataclass(frozen=True, eq=False)
class SectorEigensystem:
    indices: np.ndarray
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray

    def coefficients(self, x: np.ndarray) -> np.ndarray:
        """<<L_i|x>> for a full Floquet vector x."""
        return self.left.conj().T @ x[self.indices]


@dataclass(frozen=True, eq=False)
class FloquetDecomposition:
    """Biorthonormal eigensystem of the Floquet-Liouville matrix.

    Only the requested invariant sectors are decomposed; eigenpairs from
    other sectors do not contribute to quantities supported elsewhere.
    """

    space: FloquetSpace
    sectors: tuple
    pairing_residual: float

    @property
    def eigenvalues(self) -> np.ndarray:
        """lam; the complex frequencies are Omega = i lam."""
        return np.concatenate([s.eigenvalues for s in self.sectors])

    @property
    def frequencies(self) -> np.ndarray:
        return 1j * self.eigenvalues

    def harmonic_index(self) -> np.ndarray:
        """Harmonic on which each right eigenvector has most weight."""
        out = []
        N, D = self.space.n_harmonics, self.space.base_dim
        for s in self.sectors:
            w = np.zeros((N, s.right.shape[1]))
            blk = s.indices // D
            np.add.at(w, blk, np.abs(s.right) ** 2)
            out.append(self.space.harmonics()[np.argmax(w, axis=0)])
        return np.concatenate(out)

    def canonical_eigenvalues(self) -> np.ndarray:
        """Every eigenvalue folded back to harmonic 0."""
        return self.eigenvalues - 1j * self.harmonic_index() * self.space.omega_d

    def right_vector(self, i: int) -> np.ndarray:
        for s in self.sectors:
            if i < len(s.eigenvalues):
                x = np.zeros(self.space.total_dim, dtype=complex)
                x[s.indices] = s.right[:, i]
                return x
            i -= len(s.eigenvalues)
        raise IndexError(i)

    def expand(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Eigen-coefficients of x, per sector."""
        return self.eigenvalues, [s.coefficients(x) for s in self.sectors]

    def evolve(self, x: np.ndarray, tau: float) -> np.ndarray:
        """exp(M tau) x via the eigenbasis; x must lie in the decomposed sectors."""
        out = np.zeros_like(x, dtype=complex)
        for s in self.sectors:
            c = s.coefficients(x)
            out[s.indices] = s.right @ (np.exp(s.eigenvalues * tau) * c)
        return out

    def propagate(self, rho: np.ndarray, t0: float, tau: float) -> np.ndarray:
        """U(t0 + tau, t0) rho for a d x d density matrix."""
        x = self.space.embed({0: rho})
        comps = self.space.split(self.evolve(x, tau))
        ph = np.exp(-1j * self.space.harmonics() * self.space.omega_d * (t0 + tau))
        return np.tensordot(ph, comps, axes=1)


def biorthogonal_eigensystem(
    fl: FloquetLiouvillian,
    sectors: Sequence[np.ndarray] | None = None,
    tol: float = PAIRING_TOL,
) -> FloquetDecomposition:
    """Right and left eigenvectors with <<L_i|R_j>> = delta_ij.

    Left vectors are the rows of the inverse of the right-vector matrix. The
    pairing is therefore the identity by construction, and its quality is
    measured through the residual of the left eigen-equation.
    """
    if sectors is None:
        sectors = invariant_sectors(fl.matrix)
    scale = max(1.0, float(abs(fl.matrix).max()))
    out = []
    worst = 0.0
    for idx in sectors:
        a = fl.matrix[idx][:, idx].toarray()
        lam, vr = la.eig(a, overwrite_a=False, check_finite=True)
        vr /= np.linalg.norm(vr, axis=0)[None, :]
        try:
            vl = la.inv(vr).conj().T
        except la.LinAlgError as exc:
            raise DefectiveSpectrumError("right eigenvectors are linearly dependent") from exc
        res_left = np.abs(vl.conj().T @ a - lam[:, None] * vl.conj().T).max(axis=1)
        res_left /= np.linalg.norm(vl, axis=0) * scale
        pair = np.abs(vl.conj().T @ vr - np.eye(len(lam))).max()
        r = max(float(res_left.max()), float(pair))
        if r > tol:
            bad = int(np.argmax(res_left))
            cluster = lam[np.abs(lam - lam[bad]) < 1e-6 * scale]
            raise DefectiveSpectrumError(
                f"biorthogonal pairing residual {r:.3g} exceeds {tol:g} near lambda={lam[bad]:.6g}",
                cluster=cluster,
            )
        worst = max(worst, r)
        out.append(SectorEigensystem(np.asarray(idx), lam, vr, vl))
    return FloquetDecomposition(fl.space, tuple(out), worst)


def sectors_supporting(fl: FloquetLiouvillian, x: np.ndarray, atol: float = 0.0) -> list[np.ndarray]:
    """Invariant sectors on which the Floquet vector x has non-zero weight."""
    return [s for s in invariant_sectors(fl.matrix) if np.abs(x[s]).max() > atol]


@dataclass(frozen=True, eq=False)
class PeriodicSteadyState:
    space: FloquetSpace
    components: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.components.setflags(write=False)

    def component(self, n: int) -> np.ndarray:
        return self.components[n + self.space.k_max]

    def at(self, t: float) -> np.ndarray:
        ph = np.exp(-1j * self.space.harmonics() * self.space.omega_d * t)
        return np.tensordot(ph, self.components, axes=1)

    def sample_times(self, n: int = DEFAULT_PERIOD_SAMPLES) -> np.ndarray:
        return np.arange(n) * (2 * np.pi / self.space.omega_d) / n

    def period_average(self, op: np.ndarray, n: int = DEFAULT_PERIOD_SAMPLES) -> complex:
        """Mean of Tr[op rho(t)] over ``n`` uniform samples of one period."""
        return complex(np.mean([np.trace(op @ self.at(t)) for t in self.sample_times(n)]))

    def as_vector(self) -> np.ndarray:
        return self.components.reshape(-1)


def _normalised_state(space: FloquetSpace, x: np.ndarray) -> PeriodicSteadyState:
    comps = space.split(x).copy()
    tr = np.trace(comps[space.k_max])
    if abs(tr) < 1e-300:
        raise ConvergenceError("steady-state vector has zero trace")
    comps /= tr
    # remove rounding-level anti-Hermitian parts: R[-n] = R[n]^+
    comps = 0.5 * (comps + np.conj(np.transpose(comps[::-1], (0, 2, 1))))
    return PeriodicSteadyState(space, comps)


def steady_state(decomp: FloquetDecomposition, tol: float = 1e-8) -> PeriodicSteadyState:
    """State attached to the single eigenvalue at 0 on harmonic 0."""
    lam = decomp.eigenvalues
    k = decomp.harmonic_index()
    cand = np.flatnonzero((np.abs(lam) < tol) & (k == 0))
    if len(cand) == 0:
        raise ConvergenceError("no eigenvalue at zero in the decomposed sectors")
    if len(cand) > 1:
        raise ConvergenceError(f"{len(cand)} eigenvalues at zero: the steady manifold is degenerate")
    return _normalised_state(decomp.space, decomp.right_vector(int(cand[0])))


def steady_state_direct(fl: FloquetLiouvillian) -> PeriodicSteadyState:
    """Same state from one sparse solve, trading one row for the trace condition.

    The replaced row is the harmonic-0 equation for the first population,
    which is redundant because the generator conserves trace.
    """
    sp_ = fl.space
    D, d = sp_.base_dim, sp_.d
    row = sp_.k_max * D
    m = fl.matrix.tolil(copy=True)
    trace_row = np.zeros(sp_.total_dim, dtype=complex)
    trace_row[row + np.arange(d) * (d + 1)] = 1.0
    m[row, :] = trace_row
    b = np.zeros(sp_.total_dim, dtype=complex)
    b[row] = 1.0
    x = spla.spsolve(m.tocsc(), b)
    if not np.all(np.isfinite(x)):
        raise ConvergenceError("steady-state solve produced non-finite values")
    resid = np.abs(fl.matrix @ x).max()
    if resid > 1e-8 * max(1.0, float(abs(fl.matrix).max())):
        raise ConvergenceError(f"steady-state residual {resid:.3g}: the steady manifold is degenerate")
    return _normalised_state(sp_, x)


def _xminus_floquet(space: FloquetSpace, x_minus: np.ndarray) -> np.ndarray:
    return space.embed({0: x_minus})


def _regression_source(steady: PeriodicSteadyState, x_minus: np.ndarray) -> np.ndarray:
    """Floquet vector with harmonics rho[m] X-."""
    return (steady.components @ x_minus).reshape(-1)


@dataclass(frozen=True, eq=False)
class RegressionWeights:
    """Eigenvalues and weights c_i = <<X-,0|R_i>> <<L_i|rho X->>."""

    eigenvalues: np.ndarray
    weights: np.ndarray

    def pruned(self, rel: float = 0.0) -> "RegressionWeights":
        if rel <= 0:
            return self
        keep = np.abs(self.weights) > rel * np.abs(self.weights).max()
        return RegressionWeights(self.eigenvalues[keep], self.weights[keep])


def regression_weights(
    decomp: FloquetDecomposition, steady: PeriodicSteadyState, field_op: OutputFieldOperator
) -> RegressionWeights:
    space = decomp.space
    src = _regression_source(steady, field_op.x_minus)
    probe = _xminus_floquet(space, field_op.x_minus)
    lam, w = [], []
    for s in decomp.sectors:
        if not np.any(src[s.indices]):
            continue
        c_right = probe[s.indices].conj() @ s.right
        w.append(c_right * s.coefficients(src))
        lam.append(s.eigenvalues)
    if not lam:
        return RegressionWeights(np.zeros(0, complex), np.zeros(0, complex))
    return RegressionWeights(np.concatenate(lam), np.concatenate(w))


def correlation_gplus(
    decomp: FloquetDecomposition,
    steady: PeriodicSteadyState,
    field_op: OutputFieldOperator,
    tau_grid: np.ndarray,
    chunk: int = 512,
) -> np.ndarray:
    """Period-averaged <X-(t) X+(t + tau)> on the tau grid."""
    tau = np.asarray(tau_grid, dtype=float)
    if np.any(tau < 0):
        raise InvalidArgumentError("tau must be non-negative")
    rw = regression_weights(decomp, steady, field_op)
    out = np.empty(tau.shape, dtype=complex)
    for i in range(0, len(tau), chunk):
        out[i : i + chunk] = np.exp(np.outer(tau[i : i + chunk], rw.eigenvalues)) @ rw.weights
    return out


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    omega: np.ndarray
    S: np.ndarray
    metadata: dict = field(default_factory=dict)


def spectrum_from_weights(
    rw: RegressionWeights, omega_grid: np.ndarray, eps: float = DELTA_BROADENING, chunk: int = 512
) -> np.ndarray:
    """S(w) = 2 Re sum_i c_i / (-(lam_i + i w)).

    Eigenvalues on the real-frequency axis are pushed to Im Omega = -eps;
    the remaining real part is the principal-value contribution.
    """
    lam = rw.eigenvalues.copy()
    flat = np.abs(lam.real) < 1e-10
    lam[flat] = -eps + 1j * lam[flat].imag
    w = np.asarray(omega_grid, dtype=float)
    out = np.empty(w.shape)
    for i in range(0, len(w), chunk):
        ww = w[i : i + chunk]
        out[i : i + chunk] = 2 * np.real((rw.weights[None, :] / (-(lam[None, :] + 1j * ww[:, None]))).sum(axis=1))
    return out


def fluorescence_spectrum(
    decomp: FloquetDecomposition,
    steady: PeriodicSteadyState,
    field_op: OutputFieldOperator,
    omega_grid: np.ndarray,
    metadata: dict | None = None,
) -> SpectrumResult:
    rw = regression_weights(decomp, steady, field_op)
    S = spectrum_from_weights(rw, omega_grid)
    return SpectrumResult(np.asarray(omega_grid, dtype=float), S, dict(metadata or {}))


def find_spectral_peaks(result: SpectrumResult, rel_height: float = 0.05) -> np.ndarray:
    """Frequencies of local maxima reaching ``rel_height`` of the global maximum."""
    S = result.S
    idx, _ = find_peaks(S, height=rel_height * S.max())
    return result.omega[idx]


def normalized_moments(rho_op_average, lowering: np.ndarray, orders=(2, 3)) -> dict[int, float]:
    """<(L^+)^k L^k> / <L^+ L>^k using an expectation functional on operators."""
    raising = lowering.conj().T
    n1 = rho_op_average(raising @ lowering).real
    if not abs(n1) > 1e-14:
        raise UndefinedCorrelatorError(f"denominator <L^+ L> = {n1:.3g} is too small")
    out = {}
    for k in orders:
        num = rho_op_average(np.linalg.matrix_power(raising, k) @ np.linalg.matrix_power(lowering, k)).real
        out[k] = float(num / n1**k)
    return out


def equal_time_correlators(
    steady: PeriodicSteadyState, field_op: OutputFieldOperator, n_samples: int = DEFAULT_PERIOD_SAMPLES
) -> tuple[float, float]:
    """Period-averaged g2(0) and g3(0) of the output field."""
    mom = normalized_moments(lambda op: steady.period_average(op, n_samples), field_op.x_plus)
    return mom[2], mom[3]


def replica_defect(decomp: FloquetDecomposition, margin: int = 2) -> float:
    """Largest distance from lam + i w to the nearest eigenvalue, for eigenvectors
    living at least ``margin`` harmonics away from the truncation edge."""
    lam = decomp.eigenvalues
    k = decomp.harmonic_index()
    w = decomp.space.omega_d
    inner = np.abs(k) <= decomp.space.k_max - margin
    worst = 0.0
    for shift in (1j * w, -1j * w):
        targets = lam[inner] + shift
        for t in targets:
            worst = max(worst, float(np.min(np.abs(lam - t))))
    return worst
