"""Superconducting-circuit constants mapped onto the effective two-photon model.

Energies are in units of the SQUID junction energy E_J unless stated
otherwise, with hbar = 1 so frequencies share the same unit. Flux biases
are angles in radians.

The flux qubit is a pair of large junctions in series, shunted by a small
junction of relative size alpha. In the coordinates phi_p, phi_m its
Hamiltonian is diagonalised in a plane-wave (charge) basis restricted to
the sublattice k_p + k_m even, which corresponds to integer junction charges.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .errors import ConvergenceError, DegenerateSquidError, InvalidArgumentError
from .model import EffectiveModelParams

DEFAULT_CUTOFF = 24
CUTOFF_TOL = 1e-8
COMPENSATION_TOL = 1e-8
QUARTIC_FLAG = 0.05


@dataclass(frozen=True)
class CircuitParams:
    E_J: float = 1.0
    E_C: float = 2e-3
    E_L: float = 30.0
    Etilde_J: float = 11.6
    Etilde_C: float = 11.6 / 80
    alpha: float = 0.8
    f_s: float = 0.86 * np.pi
    f_q: float = np.pi

    def __post_init__(self):
        for name in ("E_J", "E_C", "E_L", "Etilde_J", "Etilde_C"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if not 0 < self.alpha < 1:
            raise InvalidArgumentError("alpha must lie in (0, 1)")
        if not (np.isfinite(self.f_s) and np.isfinite(self.f_q)):
            raise InvalidArgumentError("flux biases must be finite")
        if self.E_C / self.E_J > 0.05:
            warnings.warn("E_C/E_J > 0.05: the harmonic SQUID approximation is questionable", stacklevel=2)


def flux_to_radians(f: float) -> float:
    """Flux in units where the SQUID degeneracy sits at 1.0, as an angle."""
    return float(f) * np.pi


@dataclass(frozen=True)
class DerivedCircuitQuantities:
    K: float
    S: float
    K_eff: float
    L_eff: float
    omega_c: float
    omega_L: float
    omega_q: float
    T_fq: float
    f_q_offset: float
    g2: float
    g4: float
    Omega_quartic: float

    def effective_model(self) -> EffectiveModelParams:
        return EffectiveModelParams(self.omega_c, self.omega_q, self.g2, self.g4, self.Omega_quartic)


def squid_constants(E_J: float, f_s: float) -> tuple[float, float]:
    """K = 2 E_J cos(f_s/2), S = E_J sin(f_s/2)."""
    if not E_J > 0:
        raise InvalidArgumentError("E_J must be positive")
    return 2 * E_J * np.cos(f_s / 2), E_J * np.sin(f_s / 2)


def _k_eff(K: float, S: float, E_L: float) -> float:
    k = float(K + S**2 / (2 * E_L))
    if not k > 0:
        raise DegenerateSquidError(f"K + S^2/2E_L = {k:.4g} <= 0: SQUID at or beyond its degeneracy point")
    return k


def resonator(E_C: float, K: float, S: float, E_L: float) -> tuple[float, float, float]:
    """(omega_c, L_eff, Omega_quartic); L_eff = 1/K_eff in units of the squared flux quantum."""
    k = _k_eff(K, S, E_L)
    omega_c = np.sqrt(4 * E_C * k)
    quartic = E_C * (K + 2 * S**2 / E_L) / (24 * k)
    return float(omega_c), 1.0 / k, float(quartic)


def coupler_mode(E_C: float, Etilde_C: float, alpha: float, E_L: float) -> float:
    """sqrt(2 / (L (C + alpha C~))) with C = e^2/2E_C and L = phi0^2/2E_L, phi0 = 1/2e."""
    if min(E_C, Etilde_C, E_L) <= 0 or alpha < 0:
        raise InvalidArgumentError("energies must be positive")
    return float(np.sqrt(32 * E_L / (1 / E_C + alpha / Etilde_C)))


@dataclass(frozen=True, eq=False)
class _ChargeBasis:
    kp: np.ndarray
    km: np.ndarray
    shift_pm: dict
    shift_m2: dict


def _charge_basis(cutoff: int) -> _ChargeBasis:
    ks = np.arange(-cutoff, cutoff + 1)
    P, M = np.meshgrid(ks, ks, indexing="ij")
    keep = (P + M) % 2 == 0
    kp, km = P[keep], M[keep]
    pos = {(p, m): i for i, (p, m) in enumerate(zip(kp.tolist(), km.tolist()))}

    def shift(dp, dm):
        rows, cols = [], []
        for i, (p, m) in enumerate(zip(kp.tolist(), km.tolist())):
            j = pos.get((p + dp, m + dm))
            if j is not None:
                rows.append(j)
                cols.append(i)
        n = len(kp)
        return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))

    shift_pm = {(a, b): shift(a, b) for a in (1, -1) for b in (1, -1)}
    shift_m2 = {s: shift(0, 2 * s) for s in (1, -1)}
    return _ChargeBasis(kp, km, shift_pm, shift_m2)


def _sin2m(basis: _ChargeBasis, f: float) -> sp.csr_matrix:
    """sin(2 phi_m + f) in the charge basis."""
    return ((np.exp(1j * f) * basis.shift_m2[1] - np.exp(-1j * f) * basis.shift_m2[-1]) / 2j).tocsr()


def _flux_qubit_hamiltonian(basis, Etilde_J, Etilde_C, alpha, f, E_L, S):
    kin = 2 * Etilde_C * (basis.kp**2 + basis.km**2 / (1 + 2 * alpha))
    h = sp.diags(kin.astype(complex))
    for m in basis.shift_pm.values():
        h = h - 0.5 * Etilde_J * m
    h = h - 0.5 * alpha * Etilde_J * (np.exp(1j * f) * basis.shift_m2[1] + np.exp(-1j * f) * basis.shift_m2[-1])
    sig = alpha * Etilde_J * _sin2m(basis, f)
    h = h - (sig @ sig) / (4 * E_L) - (S / (2 * E_L)) * sig
    return h.tocsr(), sig


def _lowest_two(h: sp.csr_matrix):
    v0 = np.ones(h.shape[0], dtype=complex)
    e, v = spla.eigsh(h, k=2, which="SA", tol=0, v0=v0)
    order = np.argsort(e)
    return e[order], v[:, order]


def _asymmetry(basis, Etilde_J, Etilde_C, alpha, f, E_L, S) -> float:
    h, _ = _flux_qubit_hamiltonian(basis, Etilde_J, Etilde_C, alpha, f, E_L, S)
    _, v = _lowest_two(h)
    s2 = _sin2m(basis, 0.0)
    return float(np.real(v[:, 0].conj() @ (s2 @ v[:, 0])))


def _solve_flux_qubit(Etilde_J, Etilde_C, alpha, f_q, E_L, S, cutoff, compensate):
    basis = _charge_basis(cutoff)
    delta = 0.0
    if compensate and S != 0:
        g = lambda d: _asymmetry(basis, Etilde_J, Etilde_C, alpha, f_q + d, E_L, S)
        lo, hi = -0.25, 0.25
        if np.sign(g(lo)) == np.sign(g(hi)):
            raise ConvergenceError("could not bracket the flux-bias compensation")
        delta = brentq(g, lo, hi, xtol=COMPENSATION_TOL, rtol=4 * np.finfo(float).eps)
    f = f_q + delta
    h, sig = _flux_qubit_hamiltonian(basis, Etilde_J, Etilde_C, alpha, f, E_L, S)
    e, v = _lowest_two(h)
    T = abs(v[:, 0].conj() @ (_sin2m(basis, f) @ v[:, 1]))
    return float(e[1] - e[0]), float(T), float(delta)


def flux_qubit_diagonalize(
    Etilde_J: float,
    Etilde_C: float,
    alpha: float,
    f_q: float,
    E_L: float,
    S: float,
    cutoff: int = DEFAULT_CUTOFF,
    compensate: bool = True,
    check_convergence: bool = True,
) -> tuple[float, float, float]:
    """(omega_q, T_fq, f_q offset) of the flux qubit coupled to the SQUID.

    The tilt -(S/2E_L) Sigma_m is nulled by shifting the qubit bias until the
    ground state has no net sin(2 phi_m) moment. T_fq is the modulus of
    <0|sin(2 phi_m + f)|1> at the compensated bias f.
    """
    if not 0 <= alpha < 1:
        raise InvalidArgumentError("alpha must lie in [0, 1)")
    wq, T, delta = _solve_flux_qubit(Etilde_J, Etilde_C, alpha, f_q, E_L, S, cutoff, compensate)
    if check_convergence:
        wq2, T2, _ = _solve_flux_qubit(Etilde_J, Etilde_C, alpha, f_q, E_L, S, cutoff + 2, compensate)
        shift = max(abs(wq2 - wq) / abs(wq), abs(T2 - T) / max(abs(T), 1e-300))
        if shift > CUTOFF_TOL:
            raise ConvergenceError(f"charge cutoff {cutoff} not converged (relative shift {shift:.3g})")
    return wq, T, delta


def effective_couplings(
    S: float, E_L: float, E_C: float, K: float, alpha: float, Etilde_J: float, T_fq: float
) -> tuple[float, float]:
    """Two- and four-photon couplings with <0|Sigma_m|1> = alpha Etilde_J T_fq."""
    k = _k_eff(K, S, E_L)
    sigma01 = alpha * Etilde_J * T_fq
    g2 = S / (4 * E_L) * np.sqrt(E_C / k) * sigma01
    g4 = S / (48 * E_L) * (E_C / k) * sigma01
    return float(g2), float(g4)


def derive(params: CircuitParams, cutoff: int = DEFAULT_CUTOFF, check_convergence: bool = True) -> DerivedCircuitQuantities:
    K, S = squid_constants(params.E_J, params.f_s)
    omega_c, L_eff, quartic = resonator(params.E_C, K, S, params.E_L)
    omega_L = coupler_mode(params.E_C, params.Etilde_C, params.alpha, params.E_L)
    wq, T, delta = flux_qubit_diagonalize(
        params.Etilde_J, params.Etilde_C, params.alpha, params.f_q, params.E_L, S,
        cutoff=cutoff, check_convergence=check_convergence,
    )
    g2, g4 = effective_couplings(S, params.E_L, params.E_C, K, params.alpha, params.Etilde_J, T)
    return DerivedCircuitQuantities(
        float(K), float(S), _k_eff(K, S, params.E_L), L_eff, omega_c, omega_L, wq, T, delta, g2, g4, quartic
    )


def tune_qubit_resonance(
    params: CircuitParams, bracket: tuple[float, float] = (1.0, 200.0), cutoff: int = DEFAULT_CUTOFF
) -> CircuitParams:
    """Rescale Etilde_J (keeping Etilde_J/Etilde_C) so that omega_q = 2 omega_c."""
    ratio = params.Etilde_J / params.Etilde_C
    K, S = squid_constants(params.E_J, params.f_s)
    omega_c, _, _ = resonator(params.E_C, K, S, params.E_L)

    def mismatch(ej):
        wq, _, _ = flux_qubit_diagonalize(
            ej, ej / ratio, params.alpha, params.f_q, params.E_L, S, cutoff=cutoff, check_convergence=False
        )
        return wq - 2 * omega_c

    lo, hi = bracket
    if np.sign(mismatch(lo)) == np.sign(mismatch(hi)):
        raise ConvergenceError(f"omega_q = 2 omega_c is not bracketed by Etilde_J in {bracket}")
    ej = brentq(mismatch, lo, hi, xtol=1e-10)
    d = asdict(params)
    d.update(Etilde_J=ej, Etilde_C=ej / ratio)
    return CircuitParams(**d)


SWEEP_COLUMNS = (
    "f_s",
    "omega_c_over_omega_c0",
    "omega_q_over_omega_c",
    "g2_over_omega_c",
    "g4_over_g2",
    "Omega_over_omega_c",
    "omega_L_over_omega_c",
    "quartic_flag",
)


def flux_sweep(
    params: CircuitParams, f_s_grid: Iterable[float], cutoff: int = DEFAULT_CUTOFF
) -> list[dict]:
    """Rows over a grid of SQUID biases in degeneracy-at-1 units.

    ``quartic_flag`` marks rows where Omega/omega_c exceeds 0.05 and the
    quartic correction is no longer small.
    """
    wc0, _, _ = resonator(params.E_C, *squid_constants(params.E_J, 0.0), params.E_L)
    rows = []
    for f in f_s_grid:
        d = asdict(params)
        d["f_s"] = flux_to_radians(f)
        q = derive(CircuitParams(**d), cutoff=cutoff)
        rows.append(
            {
                "f_s": float(f),
                "omega_c_over_omega_c0": q.omega_c / wc0,
                "omega_q_over_omega_c": q.omega_q / q.omega_c,
                "g2_over_omega_c": q.g2 / q.omega_c,
                "g4_over_g2": q.g4 / q.g2 if q.g2 else 0.0,
                "Omega_over_omega_c": q.Omega_quartic / q.omega_c,
                "omega_L_over_omega_c": q.omega_L / q.omega_c,
                "quartic_flag": int(q.Omega_quartic / q.omega_c > QUARTIC_FLAG),
            }
        )
    return rows
