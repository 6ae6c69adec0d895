import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twophoton import hilbert as hb
from twophoton import model
from twophoton.errors import InvalidArgumentError, NotFoundError, RefusedRegimeError
from twophoton.model import EffectiveModelParams


def spectrum(g2, n_max=40, **kw):
    return model.solve(EffectiveModelParams(g2=g2, **kw), n_max)


def test_params_validation():
    with pytest.raises(InvalidArgumentError):
        EffectiveModelParams(omega_c=0.0)
    with pytest.raises(InvalidArgumentError):
        EffectiveModelParams(g2=-0.1)
    with pytest.raises(InvalidArgumentError):
        EffectiveModelParams(g4=np.inf)


def test_decoupled_limit_eigenvalues():
    space = hb.make_space(15)
    H = model.build_hamiltonian(EffectiveModelParams(g2=0.0), space)
    e = np.sort(np.linalg.eigvalsh(H.matrix))
    ref = np.sort([n + s for n in range(16) for s in (-1.0, 1.0)])
    np.testing.assert_allclose(e, ref, atol=1e-12)
    assert e[0] == pytest.approx(-1.0)


@given(
    st.floats(0, 0.3), st.floats(0.5, 3.0), st.floats(-0.01, 0.01), st.floats(-0.01, 0.01)
)
@settings(max_examples=25, deadline=None)
def test_hermitian_and_parity_symmetric(g2, wq, g4, quartic):
    space = hb.make_space(20)
    H = model.build_hamiltonian(EffectiveModelParams(1.0, wq, g2, g4, quartic), space)
    assert np.max(np.abs(H.matrix - H.matrix.conj().T)) == 0
    comm = hb.photon_parity(space).commutator(H).matrix
    assert np.max(np.abs(comm)) <= 1e-12 * np.max(np.abs(H.matrix))


def test_bare_dressed_states():
    dressed = spectrum(0.0)
    g0 = dressed.level("+", 0)
    assert g0.energy == pytest.approx(-1.0)
    np.testing.assert_allclose(g0.vector, dressed.space.ket(0, hb.QUBIT_G), atol=1e-14)
    o0 = dressed.level("-", 0)
    assert o0.energy == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(o0.vector, dressed.space.ket(1, hb.QUBIT_G), atol=1e-14)


def test_level_invariants_at_strong_coupling():
    dressed = spectrum(0.2)
    par = hb.photon_parity(dressed.space)
    H = model.build_hamiltonian(EffectiveModelParams(g2=0.2), dressed.space)
    raw = np.linalg.eigvalsh(H.matrix)
    for p in "+-":
        e = dressed.energies(p)
        assert np.all(np.diff(e) >= 0)
    for lv in dressed.levels:
        assert np.linalg.norm(lv.vector) == pytest.approx(1.0, abs=1e-12)
        assert abs(par.expect(lv.vector)) > 0.999
        k = np.argmax(np.abs(lv.vector))
        assert lv.vector[k].real > 0 and lv.vector[k].imag == 0
    np.testing.assert_allclose(np.sort([lv.energy for lv in dressed.levels]), raw, atol=1e-10)


def test_degenerate_levels_keep_parity():
    # at g2 = 0 the levels |n,e> and |n+2,g> are degenerate but have equal parity;
    # |n,g> and |n-1,e> are degenerate with opposite parity
    dressed = spectrum(0.0, n_max=10)
    par = hb.photon_parity(dressed.space)
    for lv in dressed.levels:
        assert par.expect(lv.vector).real == pytest.approx(lv.parity)


def test_rejects_invalid_hamiltonians():
    space = hb.make_space(4)
    bad = hb.LabeledOperator(space, np.triu(np.ones((space.dim, space.dim))))
    with pytest.raises(InvalidArgumentError):
        model.dressed_spectrum(bad)
    mixing = hb.quadrature(space)  # odd in a, a^+: flips parity
    with pytest.raises(InvalidArgumentError):
        model.dressed_spectrum(mixing)


def test_sign_of_coupling_irrelevant():
    a = spectrum(0.15)
    b = model.dressed_spectrum(
        model.build_hamiltonian(EffectiveModelParams(g2=0.0), a.space)
        - 0.15 * hb.pauli(a.space, "x") @ hb.quadrature(a.space) @ hb.quadrature(a.space)
    )
    for p in "+-":
        np.testing.assert_allclose(a.energies(p), b.energies(p), atol=1e-10)


def test_rwa_selection_rule_breaks_with_coupling():
    def elems(g2):
        dressed = spectrum(g2)
        a = hb.annihilation(dressed.space)
        sm = hb.pauli(dressed.space, "minus")
        v2, v1 = dressed.level("+", 2).vector, dressed.level("+", 1).vector
        return abs(np.vdot(v2, a @ v1)), abs(np.vdot(v2, sm @ v1))

    a_w, s_w = elems(0.005)
    assert a_w < 1e-2 and s_w < 1e-2
    a_s, s_s = elems(0.1)
    assert max(a_s, s_s) > 5e-2
    # a flips parity, so between two even states it vanishes identically
    assert a_s == 0.0


def test_excitation_number_conserved_near_rwa():
    # the two-photon exchange conserves a^+a + sigma_z (sigma_z eigenvalues +-1)
    dressed = spectrum(0.005)
    N = hb.number(dressed.space) + hb.pauli(dressed.space, "z")
    lowest = sorted(dressed.levels, key=lambda lv: lv.energy)[:6]
    for lv in lowest:
        var = (N @ N).expect(lv.vector).real - N.expect(lv.vector).real ** 2
        assert var < 1e-3


def test_convergence_at_default_cutoff():
    params = EffectiveModelParams(g2=0.23)
    assert model.convergence_shift(params, model.DEFAULT_N_MAX) < 1e-6
    assert model.convergence_shift(params, model.DEFAULT_N_MAX, model.DEFAULT_N_MAX + 10) < 1e-6


def test_drive_frequency():
    dressed = spectrum(0.0)
    assert model.drive_frequency(dressed, ("+", 0), ("+", 2)) == pytest.approx(2.0)
    assert model.drive_frequency(dressed, ("+", 0), ("+", 0)) == 0.0
    with pytest.raises(InvalidArgumentError):
        model.drive_frequency(dressed, ("+", 0), ("+", 500))
    dressed = spectrum(0.1)
    assert model.drive_frequency(dressed, ("+", 0), ("+", 2)) == pytest.approx(
        dressed.energy("+", 2) - dressed.energy("+", 0)
    )


def test_level_crossing_and_bracket_independence():
    tpl = EffectiveModelParams(g2=0.0)
    space = hb.make_space(40)
    g = model.find_level_crossing(tpl, (0.1, 0.24), space)
    assert g == pytest.approx(0.17, abs=0.01)
    g_narrow = model.find_level_crossing(tpl, (0.16, 0.18), space)
    assert abs(g - g_narrow) < 1e-4
    dressed = spectrum(g)
    assert abs(dressed.energy("+", 2) - dressed.energy("-", 1)) < 1e-3
    with pytest.raises(NotFoundError):
        model.find_level_crossing(tpl, (0.01, 0.05), space)


def test_collapse_diagnostic():
    tpl = EffectiveModelParams(g2=0.0)
    rows = dict(model.collapse_diagnostic(tpl, [0.0, 0.1, 0.2, 0.23]))
    # bare even ladder -1, 1, 1, 3, 3, 5: (5 - (-1)) / 5
    assert rows[0.0] == pytest.approx(1.2)
    assert rows[0.23] < rows[0.2] < rows[0.1]
    with pytest.raises(RefusedRegimeError):
        model.collapse_diagnostic(tpl, [0.1, 0.26])
