"""Closed-form mode tables, Bessel envelopes and Airy-regime limits
checked against dense diagonalization and quadrature."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chainoptics.lattice import CouplingScheme, PotentialProfile, build_chain
from chainoptics.spectral import diagonalize, rt_coefficients
from chainoptics.analytic import (
    phi_beta,
    phi_beta_prime,
    char_poly_odd,
    mode_set_odd,
    mode_set_even,
    mode_sum,
    reconstruct_rt,
    u1_bessel,
    cm_table,
    u2_jacobi_anger,
    transfer_time_asymptotic,
    beta_5050_asymptotic,
    asymptotics_odd,
    asymptotics_even,
)
from chainoptics.specfun import XI


def _odd_chain(N, beta):
    return build_chain(2 * N + 1, CouplingScheme.uniform(),
                       (PotentialProfile.center_impurity(beta),))


def _even_chain(N, eta):
    return build_chain(2 * N, CouplingScheme.uniform(),
                      (PotentialProfile.coupling_impurity(eta),))


def _oob_term(modes, t):
    if not modes.out_of_band_present:
        return np.zeros_like(np.asarray(t, dtype=float), dtype=complex)
    return modes.out_of_band_weight * np.exp(
        -1j * modes.out_of_band_energy * np.asarray(t, dtype=float))


# ---- impurity phase ----

def test_phi_beta_values_and_derivative():
    qs = np.array([0.2, 0.9, 1.7, 2.8])
    beta = 0.73
    assert np.allclose(phi_beta(qs, beta), np.arctan(np.sin(qs) / beta),
                       atol=1e-14)
    h = 1e-6
    numeric = (phi_beta(qs + h, beta) - phi_beta(qs - h, beta)) / (2 * h)
    assert np.max(np.abs(numeric - phi_beta_prime(qs, beta))) < 1e-8


# ---- odd-chain mode table ----

@pytest.mark.parametrize("N", [2, 5, 13])
@pytest.mark.parametrize("beta", [0.2, 0.9534, 3.0])
def test_odd_modes_match_dense_spectrum(N, beta):
    modes = mode_set_odd(N, beta)
    decomp = diagonalize(_odd_chain(N, beta))
    dense = np.sort(decomp.energies)
    analytic = modes.all_energies()
    assert analytic.size == 2 * N + 1
    assert np.max(np.abs(dense - analytic)) < 1e-12


def test_odd_out_of_band_threshold():
    shallow = mode_set_odd(2, 0.2)            # beta (N+1) = 0.6 < 1
    assert not shallow.out_of_band_present
    assert shallow.type2_momenta.size == 3    # extra in-band solution
    deep = mode_set_odd(2, 0.5)               # beta (N+1) = 1.5 > 1
    assert deep.out_of_band_present
    assert deep.type2_momenta.size == 2
    assert deep.out_of_band_energy < -1.0
    assert deep.out_of_band_weight > 0.0
    assert shallow.all_energies().size == deep.all_energies().size == 5


@pytest.mark.parametrize("N,beta", [(2, 0.2), (5, 0.9534), (13, 3.0)])
def test_family_weight_sums(N, beta):
    modes = mode_set_odd(N, beta)
    assert abs(np.sum(modes.weights1) - 0.5) < 1e-13
    assert abs(np.sum(modes.weights2) + modes.out_of_band_weight - 0.5) < 1e-13


def test_even_modes_match_dense_spectrum():
    for N, eta in [(3, 0.3), (10, 0.43228), (25, 1.0)]:
        modes = mode_set_even(N, eta)
        decomp = diagonalize(_even_chain(N, eta))
        dense = np.sort(decomp.energies)
        analytic = modes.all_energies()
        assert analytic.size == 2 * N
        assert np.max(np.abs(dense - analytic)) < 1e-12
        w = np.concatenate([modes.weights1, modes.weights2])
        assert np.all(w > 0.0)
        assert abs(np.sum(modes.weights1) - 0.5) < 1e-13
        assert abs(np.sum(modes.weights2) - 0.5) < 1e-13


def test_mode_set_validation():
    with pytest.raises(ValueError):
        mode_set_odd(0, 1.0)
    with pytest.raises(ValueError):
        mode_set_odd(3, 0.0)
    with pytest.raises(ValueError):
        mode_set_even(0, 0.5)
    with pytest.raises(ValueError):
        mode_set_even(3, 1.2)
    with pytest.raises(ValueError):
        mode_set_even(3, 0.0)
    with pytest.raises(ValueError):
        mode_sum(mode_set_odd(2, 1.0), "III", 1.0)


@settings(max_examples=60, deadline=None, derandomize=True)
@given(N=st.integers(min_value=1, max_value=40),
       beta=st.floats(min_value=0.05, max_value=10.0))
def test_odd_mode_structure_properties(N, beta):
    modes = mode_set_odd(N, beta)
    assert modes.out_of_band_present == (beta * (N + 1) > 1.0)
    for q in (modes.type1_momenta, modes.type2_momenta):
        assert np.all(q > 0.0) and np.all(q < np.pi)
        assert np.all(np.diff(q) > 0.0)
    assert np.all(modes.weights1 > 0.0) and np.all(modes.weights2 > 0.0)
    assert abs(np.sum(modes.weights1) - 0.5) < 1e-10
    assert abs(np.sum(modes.weights2) + modes.out_of_band_weight - 0.5) < 1e-10
    energies = modes.all_energies()
    assert energies.size == 2 * N + 1
    assert np.all(np.diff(energies) > 0.0)


# ---- characteristic polynomial ----

def test_char_poly_alternates_between_eigenvalues():
    L, beta = 11, 0.9
    decomp = diagonalize(_odd_chain((L - 1) // 2, beta))
    lam = np.sort(decomp.energies)
    mids = 0.5 * (lam[:-1] + lam[1:])
    vals = np.array([char_poly_odd(x, beta, L) for x in mids])
    assert np.all(vals != 0.0)
    assert np.all(np.sign(vals[:-1]) == -np.sign(vals[1:]))
    at_roots = np.array([char_poly_odd(x, beta, L) for x in lam])
    assert np.max(np.abs(at_roots)) < 1e-8 * np.max(np.abs(vals))


def test_char_poly_stays_finite_far_outside_band():
    for lam in (-5.0, 5.0):
        v = char_poly_odd(lam, 0.95, 401)
        assert np.isfinite(v)
    with pytest.raises(ValueError):
        char_poly_odd(0.0, 1.0, 10)
    with pytest.raises(ValueError):
        char_poly_odd(0.0, 1.0, 1)


# ---- reconstruction against the spectral module ----

def test_reconstruction_matches_spectral_coefficients():
    N, beta = 13, 0.9534
    modes = mode_set_odd(N, beta)
    decomp = diagonalize(_odd_chain(N, beta))
    t_grid = np.linspace(0.0, 2.0 * transfer_time_asymptotic(N), 113)
    r_ref, t_ref = rt_coefficients(decomp, t_grid)
    r_an, t_an = reconstruct_rt(modes, t_grid, include_out_of_band=True)
    assert np.max(np.abs(r_an - r_ref)) < 1e-12
    assert np.max(np.abs(t_an - t_ref)) < 1e-12
    r_in, t_in = reconstruct_rt(modes, t_grid)
    err = max(np.max(np.abs(r_in - r_ref)), np.max(np.abs(t_in - t_ref)))
    assert err <= modes.out_of_band_weight + 1e-12
    assert err > 0.1 * modes.out_of_band_weight


# ---- Bessel image series ----

@pytest.mark.parametrize("N", [5, 25])
def test_u1_bessel_exact_equals_mode_sum(N):
    modes = mode_set_odd(N, 1.0)  # family I does not depend on beta
    t_grid = np.linspace(0.1, 2.2 * transfer_time_asymptotic(N), 60)
    exact = np.array([u1_bessel(N, t) for t in t_grid])
    reference = mode_sum(modes, "I", t_grid)
    assert np.max(np.abs(exact - reference)) < 1e-11
    assert np.max(np.abs(exact.imag)) < 1e-15


def test_u1_bessel_time_zero_and_validation():
    assert u1_bessel(4, 0.0) == 0.5 + 0.0j
    assert u1_bessel(4, 0.0, images="leading") == 0.0 + 0.0j
    with pytest.raises(ValueError):
        u1_bessel(4, 1.0, images="all")
    with pytest.raises(ValueError):
        u1_bessel(0, 1.0)
    with pytest.raises(ValueError):
        u1_bessel(4, -0.1)


def test_u1_leading_image_dominates_transfer_window():
    N = 25
    t_star = transfer_time_asymptotic(N)
    exact = u1_bessel(N, t_star)
    leading = u1_bessel(N, t_star, images="leading")
    assert abs(leading - exact) / abs(exact) < 0.05
    # far from the window the single-image form is useless
    early_exact = u1_bessel(N, 3.0)
    early_leading = u1_bessel(N, 3.0, images="leading")
    assert abs(early_leading) < 1e-12 < abs(early_exact)


# ---- Jacobi-Anger coefficients ----

@pytest.mark.parametrize("beta", [0.5, 0.94, 2.0, 10.0])
def test_cm_closed_matches_quadrature(beta):
    table = cm_table(beta, 3)
    assert np.max(np.abs(table.closed - table.quadrature)) < 1e-10


def test_cm_parity_and_quadrature_fallback():
    table = cm_table(0.9, 6)
    assert table.coefficient(-1) == -table.coefficient(1)
    assert table.coefficient(-2) == table.coefficient(2)
    assert table.coefficient(-3) == -table.coefficient(3)
    assert np.all(np.isnan(table.closed[4:]))
    assert np.allclose(table.coefficients[4:], table.quadrature[4:])
    assert np.allclose(table.coefficients[:4], table.closed[:4])


def test_cm_strong_impurity_limits():
    table = cm_table(1e8, 3)
    c = table.coefficients
    assert abs(c[0] - 0.5) < 1e-7
    assert abs(c[1]) < 1e-7
    assert abs(c[2] + 0.25) < 1e-7
    assert abs(c[3]) < 1e-7


def test_cm_table_validation():
    with pytest.raises(ValueError):
        cm_table(-1.0, 3)
    with pytest.raises(ValueError):
        cm_table(1.0, -1)


def test_u2_truncation_improves_with_order():
    N, beta = 5, 0.908
    modes = mode_set_odd(N, beta)
    t_star = transfer_time_asymptotic(N)
    t_grid = np.linspace(t_star - 3.0, t_star + 3.0, 41)
    exact = mode_sum(modes, "II", t_grid) + _oob_term(modes, t_grid)
    scale = np.max(np.abs(exact))
    err3 = np.max(np.abs(u2_jacobi_anger(N, beta, t_grid, M=3) - exact)) / scale
    err8 = np.max(np.abs(u2_jacobi_anger(N, beta, t_grid, M=8) - exact)) / scale
    assert err8 < err3


def test_u2_scalar_array_and_validation():
    val = u2_jacobi_anger(5, 0.9, 12.0)
    arr = u2_jacobi_anger(5, 0.9, np.array([12.0]))
    assert isinstance(val, complex)
    assert arr.shape == (1,)
    assert val == arr[0]
    with pytest.raises(ValueError):
        u2_jacobi_anger(5, 0.9, 0.0)
    with pytest.raises(ValueError):
        u2_jacobi_anger(5, 0.9, 12.0, M=-1)
    with pytest.raises(ValueError):
        u2_jacobi_anger(5, 0.9, 12.0, M=3, table=cm_table(0.9, 2))


# ---- transfer-window asymptotics ----

def test_transfer_time_formula():
    assert transfer_time_asymptotic(25, xi=0.0) == 52.0
    assert abs(transfer_time_asymptotic(25) - (52.0 + XI * 26.0 ** (1.0 / 3.0))) < 1e-12
    # consistency with the numerically calibrated arrival time for L = 51
    assert abs(transfer_time_asymptotic(25) / 54.609925958600925 - 1.0) < 0.012


def test_balance_point_asymptote():
    # deviation from the exactly calibrated L = 51 balance point shrinks
    # with L; at 51 it is about 1.2e-2
    assert abs(beta_5050_asymptotic(51) - 0.9534016086949281) < 0.02
    assert abs(beta_5050_asymptotic(401) - (1.0 - 0.809 * 401.0 ** (-2.0 / 3.0))) < 1e-15
    assert beta_5050_asymptotic(10 ** 9) < 1.0


def test_odd_asymptotics_fields():
    N = 60
    beta = beta_5050_asymptotic(2 * N + 1)
    asym = asymptotics_odd(N, beta)
    assert abs(asym.t_star - transfer_time_asymptotic(N)) < 1e-12
    # damping prefactor: real, sign (-1)^(N+1), Airy magnitude
    assert asym.damping.imag == 0.0
    assert np.sign(asym.damping.real) == (-1.0) ** (N + 1)
    assert abs(asym.u2_limit) == pytest.approx(abs(asym.damping) / 2.0, rel=1e-12)
    # first-order amplitude ratio sits near the quadrature point
    assert abs(asym.r_over_t + 1j) < 0.2
    # the realized ratio is the conjugate; both have near-unit modulus
    assert abs(abs(asym.r_over_t) - 1.0) < 0.1
    modes = mode_set_odd(N, beta)
    u2_num = mode_sum(modes, "II", asym.t_star) + complex(_oob_term(modes, asym.t_star))
    assert abs(abs(u2_num) - abs(asym.u2_limit)) / abs(asym.u2_limit) < 0.2
    with pytest.raises(ValueError):
        asymptotics_odd(0, 1.0)


def test_even_asymptotics_quadrature_point():
    eta = np.sqrt(2.0) - 1.0
    asym = asymptotics_even(100, eta)
    assert abs(asym.u1_limit) == pytest.approx(abs(asym.u2_limit), rel=1e-12)
    ratio = asym.u1_limit / asym.u2_limit
    assert abs(abs(ratio) - 1.0) < 1e-12
    assert abs(np.angle(ratio) - np.pi / 2.0) < 1e-12
    with pytest.raises(ValueError):
        asymptotics_even(0, eta)
