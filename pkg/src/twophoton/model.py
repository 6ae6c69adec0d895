"""Two-photon quantum Rabi Hamiltonian and its parity-resolved spectrum."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import bisect

from . import hilbert
from .errors import InvalidArgumentError, NotFoundError, RefusedRegimeError
from .hilbert import LabeledOperator, SpaceDescriptor

DEFAULT_N_MAX = 120
DEFAULT_LEVELS_PER_PARITY = 12
# Eigenstructure past this coupling (in units of omega_c) is not representable
# in a truncated Fock basis.
COLLAPSE_GUARD = 0.245


@dataclass(frozen=True)
class EffectiveModelParams:
    omega_c: float = 1.0
    omega_q: float = 2.0
    g2: float = 0.0
    g4: float = 0.0
    Omega_quartic: float = 0.0

    def __post_init__(self):
        if not self.omega_c > 0 or not self.omega_q > 0:
            raise InvalidArgumentError("omega_c and omega_q must be positive")
        if not self.g2 >= 0:
            raise InvalidArgumentError("g2 must be non-negative")
        if not (np.isfinite(self.g4) and np.isfinite(self.Omega_quartic)):
            raise InvalidArgumentError("g4 and Omega_quartic must be finite")

    def in_cavity_units(self) -> "EffectiveModelParams":
        """Same model with every frequency divided by omega_c."""
        w = self.omega_c
        return EffectiveModelParams(1.0, self.omega_q / w, self.g2 / w, self.g4 / w, self.Omega_quartic / w)

    def with_g2(self, g2: float) -> "EffectiveModelParams":
        return replace(self, g2=g2)


@dataclass(frozen=True)
class DriveConfig:
    amplitude: float
    omega_d: float
    channel: str = "qubit"

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise InvalidArgumentError("drive amplitude must be non-negative")
        if not self.omega_d > 0:
            raise InvalidArgumentError("drive frequency must be positive")
        if self.channel not in ("cavity", "qubit"):
            raise InvalidArgumentError(f"unknown drive channel {self.channel!r}")


def parity_sign(p) -> int:
    """Normalise a parity label ('+', '-', +1, -1) to +1 / -1."""
    if p in ("+", 1, +1.0):
        return 1
    if p in ("-", -1, -1.0):
        return -1
    raise InvalidArgumentError(f"invalid parity label {p!r}")


def parity_label(sign: int) -> str:
    return "+" if sign > 0 else "-"


@dataclass(frozen=True, eq=False)
class DressedLevel:
    energy: float
    parity: int
    index: int
    vector: np.ndarray

    @property
    def label(self) -> str:
        return f"{parity_label(self.parity)}{self.index}"


@dataclass(frozen=True, eq=False)
class DressedSpectrum:
    space: SpaceDescriptor
    levels: tuple
    params: EffectiveModelParams | None = None

    def sector(self, parity) -> list[DressedLevel]:
        s = parity_sign(parity)
        return [lv for lv in self.levels if lv.parity == s]

    def energies(self, parity) -> np.ndarray:
        return np.array([lv.energy for lv in self.sector(parity)])

    def level(self, parity, index: int) -> DressedLevel:
        sec = self.sector(parity)
        if not 0 <= index < len(sec):
            raise InvalidArgumentError(
                f"level ({parity_label(parity_sign(parity))},{index}) out of range [0, {len(sec)})"
            )
        return sec[index]

    def energy(self, parity, index: int) -> float:
        return self.level(parity, index).energy

    def retained(self, n_per_parity: int = DEFAULT_LEVELS_PER_PARITY) -> list[DressedLevel]:
        """Lowest levels of each parity; even sector first, then odd."""
        out = []
        for p in (1, -1):
            sec = self.sector(p)
            if n_per_parity > len(sec):
                raise InvalidArgumentError(f"only {len(sec)} levels available per parity")
            out.extend(sec[:n_per_parity])
        return out


def build_hamiltonian(params: EffectiveModelParams, space: SpaceDescriptor) -> LabeledOperator:
    """wc a^+a + (wq/2) sz + g2 sx (a+a^+)^2 + g4 sx (a+a^+)^4 - Omega (a+a^+)^4."""
    x = hilbert.quadrature(space).matrix
    x2 = x @ x
    x4 = x2 @ x2
    sx = hilbert.pauli(space, "x").matrix
    h = (
        params.omega_c * hilbert.number(space).matrix
        + 0.5 * params.omega_q * hilbert.pauli(space, "z").matrix
        + params.g2 * sx @ x2
    )
    if params.g4:
        h = h + params.g4 * sx @ x4
    if params.Omega_quartic:
        h = h - params.Omega_quartic * x4
    # exact symmetrisation; the pieces are Hermitian but products round
    h = 0.5 * (h + h.conj().T)
    return LabeledOperator(space, h)


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    ph = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(ph) / ph)[None, :]


def dressed_spectrum(
    H: LabeledOperator, params: EffectiveModelParams | None = None, tol: float = 1e-10
) -> DressedSpectrum:
    """Diagonalise H separately in the even and odd photon-parity sectors.

    Working block by block makes the parity labels exact even for degenerate
    levels. Every eigenvector has its largest component real and positive.
    """
    m = H.matrix
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.conj().T)) > tol * scale:
        raise InvalidArgumentError("Hamiltonian is not Hermitian")
    par = np.diag(hilbert.photon_parity(H.space).matrix).real
    if np.max(np.abs(m[np.ix_(par > 0, par < 0)]), initial=0.0) > tol * scale:
        raise InvalidArgumentError("Hamiltonian does not commute with photon parity")

    levels = []
    for sign in (1, -1):
        idx = np.flatnonzero(par == sign)
        e, v = np.linalg.eigh(m[np.ix_(idx, idx)])
        v = _fix_phase(v)
        for j in range(len(e)):
            vec = np.zeros(H.space.dim, dtype=complex)
            vec[idx] = v[:, j]
            vec.setflags(write=False)
            levels.append(DressedLevel(float(e[j]), sign, j, vec))
    return DressedSpectrum(H.space, tuple(levels), params)


def solve(params: EffectiveModelParams, n_max: int = DEFAULT_N_MAX) -> DressedSpectrum:
    """Convenience: build and diagonalise in one call."""
    space = hilbert.make_space(n_max)
    return dressed_spectrum(build_hamiltonian(params, space), params)


def check_regime(params: EffectiveModelParams) -> None:
    if params.g2 >= COLLAPSE_GUARD * params.omega_c:
        raise RefusedRegimeError(
            f"g2/omega_c = {params.g2 / params.omega_c:.4g} is at or beyond {COLLAPSE_GUARD}; "
            "the truncated spectrum is not convergent near the collapse point"
        )


def drive_frequency(spectrum: DressedSpectrum, from_level: Sequence, to_level: Sequence) -> float:
    """E_to - E_from for level selectors given as (parity, index)."""
    return spectrum.energy(*to_level) - spectrum.energy(*from_level)


def _crossing_gap(params: EffectiveModelParams, space: SpaceDescriptor, g2: float) -> float:
    dressed = dressed_spectrum(build_hamiltonian(params.with_g2(g2), space))
    return dressed.energy("+", 2) - dressed.energy("-", 1)


def find_level_crossing(
    params_template: EffectiveModelParams,
    g2_range: tuple[float, float],
    space: SpaceDescriptor | None = None,
    tol: float = 1e-4,
) -> float:
    """Coupling where E_2^+ meets E_1^-, bracketed by ``g2_range`` (absolute units)."""
    space = space or hilbert.make_space(DEFAULT_N_MAX)
    lo, hi = map(float, g2_range)
    for g in (lo, hi):
        check_regime(params_template.with_g2(g))
    f_lo = _crossing_gap(params_template, space, lo)
    f_hi = _crossing_gap(params_template, space, hi)
    if np.sign(f_lo) == np.sign(f_hi):
        raise NotFoundError(
            f"E_2^+ - E_1^- does not change sign on [{lo}, {hi}] ({f_lo:.4g}, {f_hi:.4g})"
        )
    xtol = 0.5 * tol * params_template.omega_c
    return bisect(lambda g: _crossing_gap(params_template, space, g), lo, hi, xtol=xtol)


def collapse_diagnostic(
    params_template: EffectiveModelParams,
    g2_grid: Iterable[float],
    space: SpaceDescriptor | None = None,
    n_gaps: int = 5,
) -> list[tuple[float, float]]:
    """Mean of the ``n_gaps`` lowest consecutive even-sector gaps for every g2."""
    space = space or hilbert.make_space(DEFAULT_N_MAX)
    grid = [float(g) for g in g2_grid]
    for g in grid:
        check_regime(params_template.with_g2(g))
    rows = []
    for g in grid:
        e = dressed_spectrum(build_hamiltonian(params_template.with_g2(g), space)).energies("+")
        rows.append((g, float(np.mean(np.diff(e[: n_gaps + 1])))))
    return rows


def convergence_shift(
    params: EffectiveModelParams, n_max: int, n_max_ref: int | None = None, n_levels: int = 10
) -> float:
    """Largest shift of the ``n_levels`` lowest energies per parity when n_max grows."""
    n_max_ref = n_max_ref or 2 * n_max
    a = solve(params, n_max)
    b = solve(params, n_max_ref)
    return max(
        float(np.max(np.abs(a.energies(p)[:n_levels] - b.energies(p)[:n_levels]))) for p in "+-"
    )
