"""End-to-end assembly of a driven, damped two-photon Rabi system at one coupling."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import floquet, model
from .lindblad import (
    DissipationRates,
    DressedBasis,
    LindbladModel,
    LiouvillianComponents,
    OutputFieldOperator,
    build_dissipator,
    liouvillian,
    output_field,
    transition_rates,
)
from .model import DriveConfig, EffectiveModelParams

DEFAULT_K_MAX = 5
DEFAULT_GAMMA = 1e-3
DEFAULT_KAPPA_REL = 1e-3
DEFAULT_DRIVE_REL = 1.0
DEFAULT_OMEGA_GRID = (0.0, 2.2, 2000)
STRONG_DRIVE_RATIO = 10.0


@dataclass(frozen=True)
class DrivenSetup:
    """Numerical and physical choices for a driven run, frequencies in units of omega_c.

    ``kappa_rel`` is kappa/omega_q and ``drive_rel`` is F/gamma.
    """

    g2: float
    omega_q: float = 2.0
    g4: float = 0.0
    Omega_quartic: float = 0.0
    gamma: float = DEFAULT_GAMMA
    kappa_rel: float = DEFAULT_KAPPA_REL
    drive_rel: float = DEFAULT_DRIVE_REL
    channel: str = "qubit"
    drive_from: tuple = ("+", 0)
    drive_to: tuple = ("+", 2)
    n_max: int = model.DEFAULT_N_MAX
    n_per_parity: int = model.DEFAULT_LEVELS_PER_PARITY
    k_max: int = DEFAULT_K_MAX

    @property
    def params(self) -> EffectiveModelParams:
        return EffectiveModelParams(1.0, self.omega_q, self.g2, self.g4, self.Omega_quartic)

    @property
    def kappa(self) -> float:
        return self.kappa_rel * self.omega_q

    @property
    def amplitude(self) -> float:
        return self.drive_rel * self.gamma

    @property
    def base_dim(self) -> int:
        return (2 * self.n_per_parity) ** 2

    def strong_drive(self) -> bool:
        return self.drive_rel > STRONG_DRIVE_RATIO


@dataclass(frozen=True, eq=False)
class DrivenSystem:
    setup: DrivenSetup
    spectrum: model.DressedSpectrum = field(repr=False)
    basis: DressedBasis = field(repr=False)
    lindblad: LindbladModel = field(repr=False)
    drive: DriveConfig
    components: LiouvillianComponents = field(repr=False)
    field_op: OutputFieldOperator = field(repr=False)

    def floquet_matrix(self) -> floquet.FloquetLiouvillian:
        return floquet.build_floquet_liouvillian(self.components, self.setup.k_max)

    def metadata(self) -> dict:
        s = self.setup
        return {
            "g2": s.g2,
            "omega_q": s.omega_q,
            "g4": s.g4,
            "Omega_quartic": s.Omega_quartic,
            "omega_d": self.drive.omega_d,
            "F": self.drive.amplitude,
            "gamma": s.gamma,
            "kappa": s.kappa,
            "channel": s.channel,
            "rate_labels": {"Gamma": "gamma, (a - a^+) element", "K": "kappa, (sigma_- - sigma_+) element"},
            "n_max": s.n_max,
            "M": s.n_per_parity,
            "k_max": s.k_max,
        }


def assemble(setup: DrivenSetup) -> DrivenSystem:
    params = setup.params
    model.check_regime(params)
    dressed = model.solve(params, setup.n_max)
    basis = DressedBasis(dressed, setup.n_per_parity)
    lm = build_dissipator(transition_rates(basis, DissipationRates(setup.gamma, setup.kappa)))
    wd = model.drive_frequency(dressed, setup.drive_from, setup.drive_to)
    drive = DriveConfig(setup.amplitude, wd, setup.channel)
    comps = liouvillian(lm, drive)
    return DrivenSystem(setup, dressed, basis, lm, drive, comps, output_field(basis))


def steady_state(system: DrivenSystem) -> floquet.PeriodicSteadyState:
    return floquet.steady_state_direct(system.floquet_matrix())


def correlators(system: DrivenSystem) -> tuple[float, float]:
    return floquet.equal_time_correlators(steady_state(system), system.field_op)


def emission_decomposition(system: DrivenSystem, steady: floquet.PeriodicSteadyState | None = None):
    """Eigen-decomposition restricted to the sectors the emission correlation visits."""
    fl = system.floquet_matrix()
    steady = steady or floquet.steady_state_direct(fl)
    src = (steady.components @ system.field_op.x_minus).reshape(-1)
    decomp = floquet.biorthogonal_eigensystem(fl, floquet.sectors_supporting(fl, src))
    return decomp, steady


def fluorescence(system: DrivenSystem, omega_grid: np.ndarray | None = None) -> floquet.SpectrumResult:
    if omega_grid is None:
        omega_grid = np.linspace(*DEFAULT_OMEGA_GRID)
    decomp, steady = emission_decomposition(system)
    meta = system.metadata()
    meta["pairing_residual"] = decomp.pairing_residual
    return floquet.fluorescence_spectrum(decomp, steady, system.field_op, omega_grid, meta)
