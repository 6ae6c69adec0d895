import numpy as np
import pytest
from scipy.special import gammaln

from twophoton import floquet as fq
from twophoton import hilbert as hb
from twophoton import pipeline
from twophoton.errors import InvalidArgumentError, UndefinedCorrelatorError
from twophoton.timedomain import time_domain_propagate


@pytest.fixture(scope="module")
def wide(wide_system):
    return wide_system, fq.biorthogonal_eigensystem(wide_system.floquet_matrix())


@pytest.fixture(scope="module")
def small_decomp(small_system):
    fl = small_system.floquet_matrix()
    return fl, fq.biorthogonal_eigensystem(fl)


def test_dimensions(system_01):
    fl = system_01.floquet_matrix()
    assert system_01.components.base_dim == 576
    assert fl.matrix.shape == (6336, 6336)
    assert fl.space.n_harmonics == 11


@pytest.mark.parametrize("k", [0, -1, 1.5])
def test_invalid_kmax(k):
    with pytest.raises(InvalidArgumentError):
        fq.FloquetSpace(4, k, 1.0)


def test_block_structure(small_system):
    c = small_system.components
    fl = fq.build_floquet_liouvillian(c, 2)
    D, w = c.base_dim, c.omega_d
    m = fl.matrix.toarray()
    blk = lambda i, j: m[i * D:(i + 1) * D, j * D:(j + 1) * D]
    for i, n in enumerate(range(-2, 3)):
        np.testing.assert_allclose(blk(i, i), c.L0.toarray() + 1j * n * w * np.eye(D))
        if i > 0:
            np.testing.assert_allclose(blk(i, i - 1), c.Lp.toarray())
            np.testing.assert_allclose(blk(i - 1, i), c.Lm.toarray())
    assert not np.any(blk(0, 2)) and not np.any(blk(4, 1))


def test_undriven_spectrum_is_replicated():
    s = pipeline.assemble(pipeline.DrivenSetup(0.1, drive_rel=0.0, n_per_parity=3, n_max=60, k_max=2))
    fl = s.floquet_matrix()
    assert s.components.Lp.nnz == 0
    base = np.linalg.eigvals(s.components.L0.toarray())
    ref = np.sort_complex(np.concatenate([base + 1j * n * s.drive.omega_d for n in range(-2, 3)]))
    got = np.sort_complex(fq.biorthogonal_eigensystem(fl).eigenvalues)
    np.testing.assert_allclose(got, ref, atol=1e-10)


def test_biorthonormal_and_complete(small_decomp):
    _, dec = small_decomp
    for s in dec.sectors:
        n = len(s.eigenvalues)
        assert np.abs(s.left.conj().T @ s.right - np.eye(n)).max() < 1e-8
        assert np.abs(s.right @ s.left.conj().T - np.eye(n)).max() < 1e-8
    assert dec.pairing_residual < 1e-6


def test_stability_and_replicas(wide):
    _, dec = wide
    assert np.all(dec.frequencies.imag <= 1e-9)
    # replicas are exact away from the truncation edge
    assert fq.replica_defect(dec, margin=3) < 1e-9


def test_steady_state_properties(small_decomp):
    fl, dec = small_decomp
    eig = fq.steady_state(dec)
    direct = fq.steady_state_direct(fl)
    np.testing.assert_allclose(eig.components, direct.components, atol=1e-9)
    for t in direct.sample_times():
        r = direct.at(t)
        assert np.trace(r) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(r, r.conj().T, atol=1e-12)
        assert np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min() > -1e-8


def test_undriven_steady_state_is_ground():
    s = pipeline.assemble(pipeline.DrivenSetup(0.15, drive_rel=0.0, n_per_parity=4, n_max=60, k_max=2))
    r = pipeline.steady_state(s)
    g = np.zeros((8, 8))
    g[0, 0] = 1
    np.testing.assert_allclose(r.component(0), g, atol=1e-12)
    assert np.abs(r.component(1)).max() < 1e-12


@pytest.mark.parametrize("t0", [0.0, 0.7])
def test_propagator_matches_time_domain(wide, t0):
    system, dec = wide
    d = system.basis.dim
    rng = np.random.default_rng(2)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    tau = 40.0
    ref = time_domain_propagate(system.components, rho, (t0, t0 + tau)).states[-1]
    np.testing.assert_allclose(dec.propagate(rho, t0, tau), ref, atol=1e-8)


def test_gplus_at_zero_is_mean_intensity(small_system, small_decomp):
    fl, dec = small_decomp
    st = fq.steady_state_direct(fl)
    f = small_system.field_op
    g0 = fq.correlation_gplus(dec, st, f, [0.0])[0]
    assert g0 == pytest.approx(st.period_average(f.x_minus @ f.x_plus), rel=1e-8)
    with pytest.raises(InvalidArgumentError):
        fq.correlation_gplus(dec, st, f, [-1.0])


def test_coherent_state_moments():
    space = hb.make_space(80)
    a = hb.annihilation(space).matrix
    alpha = 1.3
    n = np.arange(81)
    amp = np.exp(-(alpha**2) / 2 + n * np.log(alpha) - 0.5 * gammaln(n + 1))
    psi = np.kron(amp, [1.0, 0.0])
    mom = fq.normalized_moments(lambda op: psi.conj() @ op @ psi, a, orders=(2, 3))
    assert mom[2] == pytest.approx(1.0, abs=1e-10)
    assert mom[3] == pytest.approx(1.0, abs=1e-10)


def test_dark_output_is_undefined():
    with pytest.raises(UndefinedCorrelatorError):
        fq.normalized_moments(lambda op: 0.0, np.zeros((2, 2)))


def test_kmax_convergence(system_01):
    s7 = pipeline.assemble(pipeline.DrivenSetup(0.1, k_max=system_01.setup.k_max + 2))
    a = np.array(pipeline.correlators(system_01))
    b = np.array(pipeline.correlators(s7))
    np.testing.assert_allclose(a, b, rtol=1e-6)


def test_spectral_peaks_sit_on_undriven_transitions(wide):
    system, dec = wide
    st = fq.steady_state_direct(system.floquet_matrix())
    rw = fq.regression_weights(dec, st, system.field_op)
    grid = np.linspace(0.0, 2.2, 220001)
    res = fq.SpectrumResult(grid, fq.spectrum_from_weights(rw, grid))
    peaks = fq.find_spectral_peaks(res, 1e-3)
    gaps = system.basis.gaps()
    gaps = np.abs(gaps[gaps != 0])
    assert len(peaks) >= 2
    for p in peaks:
        width = abs(rw.eigenvalues[np.argmin(np.abs(-rw.eigenvalues.imag - p))].real)
        assert np.min(np.abs(gaps - p)) < 3 * width


def test_sixteen_samples_give_exact_period_average(system_01):
    st = pipeline.steady_state(system_01)
    xp = system_01.field_op.x_plus
    op = np.linalg.matrix_power(xp.conj().T, 3) @ np.linalg.matrix_power(xp, 3)
    assert st.period_average(op, 16) == pytest.approx(st.period_average(op, 32), rel=1e-12)
