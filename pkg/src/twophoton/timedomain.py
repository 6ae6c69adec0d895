"""Direct time integration of the driven master equation.

Used as an independent check of the Floquet eigen-expansion: nothing here
touches the Floquet matrix or its eigenvectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, StiffnessError
from .floquet import invariant_sectors
from .lindblad import LiouvillianComponents, OutputFieldOperator

RTOL = 1e-12
ATOL = 1e-14


def _check(sol):
    if sol.status < 0:
        if "step size" in sol.message.lower():
            raise StiffnessError(sol.message)
        raise ConvergenceError(sol.message)
    return sol


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    states: np.ndarray = field(repr=False)


def time_domain_propagate(
    comps: LiouvillianComponents,
    rho0: np.ndarray,
    t_span: tuple[float, float],
    t_eval: np.ndarray | None = None,
    rtol: float = RTOL,
    atol: float = ATOL,
    method: str = "DOP853",
) -> Trajectory:
    """Adaptive integration of d rho/dt = L(t) rho."""
    d = comps.d
    sol = _check(
        solve_ivp(
            lambda t, y: comps.apply(t, y),
            t_span,
            np.asarray(rho0, dtype=complex).reshape(-1),
            method=method,
            t_eval=t_eval,
            rtol=rtol,
            atol=atol,
        )
    )
    return Trajectory(sol.t, sol.y.T.reshape(-1, d, d))


def _sector_propagator(comps: LiouvillianComponents, idx: np.ndarray, t0: float, t1: float) -> np.ndarray:
    a0 = comps.L0[idx][:, idx].toarray()
    ap = comps.Lp[idx][:, idx].toarray()
    am = comps.Lm[idx][:, idx].toarray()
    n = len(idx)
    w = comps.omega_d

    def rhs(t, y):
        a = a0 + np.exp(-1j * w * t) * ap + np.exp(1j * w * t) * am
        return (a @ y.reshape(n, n)).reshape(-1)

    sol = _check(
        solve_ivp(rhs, (t0, t1), np.eye(n, dtype=complex).reshape(-1), method="DOP853", rtol=RTOL, atol=ATOL)
    )
    return sol.y[:, -1].reshape(n, n)


@dataclass(frozen=True, eq=False)
class PeriodPropagators:
    """U(t_j + h, t_j) for t_j = j h, h = T / n_sub, per invariant sector."""

    comps: LiouvillianComponents
    n_sub: int
    sectors: tuple
    steps: tuple = field(repr=False)

    @property
    def period(self) -> float:
        return 2 * np.pi / self.comps.omega_d

    @property
    def h(self) -> float:
        return self.period / self.n_sub

    def sector_of(self, i: int) -> int:
        for s, idx in enumerate(self.sectors):
            if np.any(idx == i):
                return s
        raise IndexError(i)

    def one_period(self, s: int, start: int = 0) -> np.ndarray:
        V = self.steps[s]
        u = np.eye(len(self.sectors[s]), dtype=complex)
        for r in range(self.n_sub):
            u = V[(start + r) % self.n_sub] @ u
        return u


def period_propagators(comps: LiouvillianComponents, n_sub: int = 16) -> PeriodPropagators:
    secs = invariant_sectors(abs(comps.L0) + abs(comps.Lp) + abs(comps.Lm))
    h = 2 * np.pi / comps.omega_d / n_sub
    steps = tuple(tuple(_sector_propagator(comps, idx, j * h, (j + 1) * h) for j in range(n_sub)) for idx in secs)
    return PeriodPropagators(comps, n_sub, tuple(secs), steps)


def long_time_states(props: PeriodPropagators, rho0: np.ndarray, log2_periods: int = 19) -> np.ndarray:
    """rho(t_j) at the n_sub sample times after 2**log2_periods periods."""
    d = props.comps.d
    x = np.asarray(rho0, dtype=complex).reshape(-1)
    full = np.zeros(d * d, dtype=complex)
    for s, idx in enumerate(props.sectors):
        if not np.any(x[idx]):
            continue
        p = props.one_period(s)
        for _ in range(log2_periods):
            p = p @ p
        full[idx] = p @ x[idx]
    out = []
    cur = full
    for j in range(props.n_sub):
        out.append(cur.reshape(d, d).copy())
        nxt = np.zeros_like(cur)
        for s, idx in enumerate(props.sectors):
            nxt[idx] = props.steps[s][j] @ cur[idx]
        cur = nxt
    return np.array(out)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def time_domain_gplus(
    props: PeriodPropagators, states: np.ndarray, field_op: OutputFieldOperator, n_periods: int
) -> tuple[np.ndarray, np.ndarray]:
    """Quantum-regression <X-(t) X+(t + tau)> averaged over the sampled t.

    Returns the tau grid (multiples of h) and the correlation on it.
    """
    N = props.n_sub
    xp = field_op.x_plus
    xm = field_op.x_minus
    probe = xp.T.reshape(-1)  # Tr[X+ B] = sum_ab X+[b, a] B[a, b]
    g = np.zeros(n_periods * N, dtype=complex)
    for s, idx in enumerate(props.sectors):
        V = props.steps[s]
        pv = probe[idx]
        if not np.any(pv):
            continue
        for j in range(N):
            b = (states[j] @ xm).reshape(-1)[idx]
            if not np.any(b):
                continue
            parts = [np.eye(len(idx), dtype=complex)]
            for r in range(1, N):
                parts.append(V[(j + r - 1) % N] @ parts[-1])
            W = V[(j + N - 1) % N] @ parts[-1]
            C = np.array([pv @ p for p in parts])
            Y = np.empty((n_periods, len(idx)), dtype=complex)
            y = b
            for q in range(n_periods):
                Y[q] = y
                y = W @ y
            g += (Y @ C.T).reshape(-1)
    g /= N
    tau = np.arange(n_periods * N) * props.h
    return tau, g


def spectrum_from_correlation(tau: np.ndarray, g: np.ndarray, omega_grid: np.ndarray) -> np.ndarray:
    """S(w) = 2 Re int_0^inf exp(i w tau) g(tau) dtau by the trapezoid rule."""
    h = tau[1] - tau[0]
    wts = np.full(tau.shape, h)
    wts[0] = wts[-1] = h / 2
    wg = wts * g
    return np.array([2 * np.real(np.exp(1j * w * tau) @ wg) for w in np.asarray(omega_grid)])
