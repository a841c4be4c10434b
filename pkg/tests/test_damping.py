import numpy as np
import pytest

from maserkit import damping, fock
from maserkit.liouvillian import (
    OscillatorParams,
    damping_eigenvalue,
    left_action,
    liouvillian,
)

import oracles

NBARS = (0.0, 0.5, 2.0)
BANDS = (-3, -1, 0, 1, 2, 3)
DEGREES = (0, 1, 2, 3, 5, 8)


@pytest.mark.parametrize("nbar", NBARS)
@pytest.mark.parametrize("k", BANDS)
def test_right_modes_match_exact_rationals(nbar, k):
    dim = 24
    for n in DEGREES:
        want = oracles.right_mode_matrix(n, k, nbar, dim)
        got = damping.right_eigenvector(n, k, nbar, dim)
        scale = np.max(np.abs(want))
        assert np.max(np.abs(got - want)) < 1e-10 * scale


@pytest.mark.parametrize("nbar", NBARS)
@pytest.mark.parametrize("k", BANDS)
def test_left_modes_match_exact_rationals(nbar, k):
    dim = 24
    for n in DEGREES:
        want = oracles.left_mode_matrix(n, k, nbar, dim)
        got = damping.left_eigenvector(n, k, nbar, dim)
        scale = np.max(np.abs(want))
        assert np.max(np.abs(got - want)) < 1e-10 * scale


def test_band_placement_conventions():
    # Right modes live on the k-th lower diagonal for k >= 0, left modes on
    # the transposed side; the two families are real, so the index sign only
    # transposes them.
    nbar, dim = 0.5, 12
    r = damping.right_eigenvector(2, 2, nbar, dim)
    assert np.max(np.abs(np.triu(r, 1))) == 0.0
    lt = damping.left_eigenvector(2, 2, nbar, dim)
    assert np.max(np.abs(np.tril(lt, -1))) == 0.0
    assert np.allclose(
        damping.right_eigenvector(3, -2, nbar, dim),
        damping.right_eigenvector(3, 2, nbar, dim).T,
    )
    assert np.allclose(
        damping.left_eigenvector(3, -2, nbar, dim),
        damping.left_eigenvector(3, 2, nbar, dim).T,
    )


def test_index_validation():
    with pytest.raises(ValueError):
        damping.right_eigenvector(-1, 0, 0.5, 8)
    with pytest.raises(ValueError):
        damping.left_eigenvector(0, 9, 0.5, 8)
    with pytest.raises(ValueError):
        damping.DampingBasis(-0.5, 8)


def test_right_modes_are_interior_eigenvectors():
    # Truncation pollutes a corner of size ~ growth of the Laguerre tails, so
    # the eigen relation is asserted on the interior block.
    p = OscillatorParams(omega=0.7, decay_rate=1.0, nbar=2.0)
    dim = 64
    L = liouvillian(p, dim)
    for n, k in [(0, 0), (1, 1), (2, -1), (3, 2), (5, -3), (8, 0)]:
        mode = damping.right_eigenvector(n, k, p.nbar, dim)
        lam = damping_eigenvalue(n, k, p)
        res = fock.apply_super(L, mode) - lam * mode
        cut = dim - 4 * (n + abs(k))
        rel = np.max(np.abs(res[:cut, :cut])) / np.max(np.abs(mode[:cut, :cut]))
        assert rel < 1e-10


def test_left_modes_are_interior_adjoint_eigenvectors():
    p = OscillatorParams(omega=0.7, decay_rate=1.0, nbar=2.0)
    dim = 64
    for n, k in [(0, 0), (2, 1), (3, -2), (5, 3)]:
        mode = damping.left_eigenvector(n, k, p.nbar, dim)
        lam = damping_eigenvalue(n, k, p)
        res = left_action(mode, p) - lam * mode
        cut = dim - 4 * (n + abs(k))
        rel = np.max(np.abs(res[:cut, :cut])) / np.max(np.abs(mode[:cut, :cut]))
        assert rel < 1e-10


def test_duality_gram_is_identity_pattern():
    n_max, k_max = 4, 2
    gram = damping.duality_gram(n_max, k_max, 0.5, 72)
    eye = np.zeros_like(gram)
    for m in range(n_max + 1):
        for kk in range(2 * k_max + 1):
            eye[m, kk, m, kk] = 1.0
    assert np.max(np.abs(gram - eye)) < 1e-9


def test_basis_element_carries_eigenvalue():
    p = OscillatorParams(omega=0.3, decay_rate=1.0, nbar=1.0)
    el = damping.basis_element(2, -1, p, 16)
    assert el.n == 2 and el.k == -1
    assert el.eigenvalue == damping_eigenvalue(2, -1, p)
    assert np.allclose(el.right, damping.right_eigenvector(2, -1, 1.0, 16))
    assert np.allclose(el.left, damping.left_eigenvector(2, -1, 1.0, 16))


def test_basis_cache_reuses_instances():
    assert damping.basis(0.5, 20) is damping.basis(0.5, 20)


def test_expand_reconstruct_roundtrip():
    rng = np.random.default_rng(21)
    dim, support = 36, 6
    nbar = 0.5
    X = oracles.random_density_matrix(rng, dim, support=support)
    coeffs = damping.expand(X, nbar, 48, support + 2)
    back = damping.reconstruct(coeffs, nbar, dim)
    assert np.max(np.abs(back - X)) < 1e-8
    # The vacuum-band zero-degree coefficient is the trace.
    assert coeffs[0, support + 2] == pytest.approx(1.0, abs=1e-12)


def test_evolve_spectral_matches_exponential_propagation():
    rng = np.random.default_rng(22)
    dim, support = 32, 6
    nbar, omega = 1.0, 0.9
    p = OscillatorParams(omega=omega, decay_rate=1.0, nbar=nbar)
    L = liouvillian(p, dim)
    X = oracles.random_density_matrix(rng, dim, support=support)
    for t in (0.3, 1.0, 3.0):
        spectral = damping.evolve_spectral(
            X, nbar, omega, 1.0, t, n_max=48, k_max=support + 2
        )
        direct = fock.propagate(L, X, t)
        assert np.max(np.abs(spectral - direct)) < 1e-8


def test_evolve_spectral_adaptive_caps():
    rng = np.random.default_rng(23)
    dim = 28
    X = oracles.random_density_matrix(rng, dim, support=5)
    nbar, omega, t = 0.4, 0.6, 0.8
    auto = damping.evolve_spectral(X, nbar, omega, 1.0, t)
    L = liouvillian(OscillatorParams(omega=omega, decay_rate=1.0, nbar=nbar), dim)
    assert np.max(np.abs(auto - fock.propagate(L, X, t))) < 1e-8


def test_gaussian_state_thermal_and_coherent_limits():
    dim = 40
    th = damping.gaussian_state(2.0, 0.0, 0.0, 2.0, dim)
    assert np.max(np.abs(th - fock.thermal_state(1.0, dim))) < 1e-9
    z = 0.6
    coh = damping.gaussian_state(1.0, z, z, 0.5, dim)
    D = fock.displacement(dim, z)
    proj = np.outer(D[:, 0], D[:, 0].conj())
    assert np.max(np.abs(coh - proj)) < 1e-8


def test_gaussian_state_moments_and_flow():
    dim = 40
    nbar, omega = 0.5, 0.9
    kappa0 = 1.6
    alpha0 = 0.6 + 0.3j
    rho = damping.gaussian_state(kappa0, alpha0, np.conj(alpha0), nbar, dim)
    a_op = fock.annihilation(dim)
    n_op = fock.number(dim)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)
    assert abs(np.trace(a_op @ rho) - alpha0) < 1e-9
    mean_n = np.trace(n_op @ rho).real
    assert mean_n == pytest.approx(kappa0 - 1.0 + abs(alpha0) ** 2, abs=1e-9)
    # Width relaxes toward the reservoir, center spirals in.
    t = 0.7
    rho_t = damping.evolve_spectral(rho, nbar, omega, 1.0, t)
    alpha_t = alpha0 * np.exp(-(1j * omega + 0.5) * t)
    kappa_t = nbar + 1.0 - (nbar + 1.0 - kappa0) * np.exp(-t)
    assert abs(np.trace(a_op @ rho_t) - alpha_t) < 1e-9
    n_t = np.trace(n_op @ rho_t).real
    assert n_t == pytest.approx(kappa_t - 1.0 + abs(alpha_t) ** 2, abs=1e-9)


def test_gaussian_coefficient_matches_expand():
    dim = 40
    nbar, kappa = 0.5, 1.3
    alpha = 0.5 - 0.4j
    rho = damping.gaussian_state(kappa, alpha, np.conj(alpha), nbar, dim)
    coeffs = damping.expand(rho, nbar, 6, 2)
    for n in range(7):
        for k in range(-2, 3):
            direct = damping.gaussian_coefficient(
                kappa, alpha, np.conj(alpha), nbar, n, k
            )
            assert abs(coeffs[n, k + 2] - direct) < 1e-9


def test_gaussian_coefficient_degenerate_width_is_continuous():
    nbar, alpha = 0.8, 0.4 + 0.2j
    beta = nbar + 1.0
    at = damping.gaussian_coefficient(beta, alpha, np.conj(alpha), nbar, 3, 1)
    near = damping.gaussian_coefficient(
        beta * (1.0 + 3e-10), alpha, np.conj(alpha), nbar, 3, 1
    )
    assert abs(at - near) < 1e-7 * max(abs(at), 1e-12)


def test_gaussian_state_contraction_guard():
    with pytest.raises(ValueError, match="contraction"):
        damping.gaussian_state(4.5, 0.0, 0.0, 1.0, 16)
