import numpy as np
import pytest

from maserkit import fock, micromaser
from maserkit.errors import ImpossibleOutcomeError
from maserkit.liouvillian import OscillatorParams, liouvillian
from maserkit.micromaser import (
    DetectionConfig,
    click_superoperator,
    conditional_liouvillian,
    cyclic_steady_state,
    jc_kick,
    kick_matrix,
    one_photon_kick,
    parity_kick,
    period_average,
    periodic_kick_evolve,
    propagate_normalized,
    reduce_state,
    scully_lamb,
    time_averaged_rhs,
    trivial_kick,
)

import oracles


def _trace_row(dim):
    return fock.vec(np.eye(dim))


@pytest.mark.parametrize("phi", [0.2, 0.9, 2.4])
def test_jc_kick_is_trace_preserving(phi):
    dim = 20
    pair = jc_kick(phi, dim)
    row = _trace_row(dim) @ (pair.down + pair.up)
    assert np.max(np.abs(row - _trace_row(dim))) < 1e-12
    assert pair.dim == dim
    # Net effect annihilates the trace.
    assert np.max(np.abs(_trace_row(dim) @ pair.net_effect())) < 1e-12


def test_jc_kick_branch_weights():
    phi, dim = 0.37, 24
    pair = jc_kick(phi, dim)
    vac = np.zeros((dim, dim), dtype=complex)
    vac[0, 0] = 1.0
    # An empty resonator still takes the photon with the vacuum Rabi weight.
    emitted = fock.apply_super(pair.down, vac)
    assert np.trace(emitted).real == pytest.approx(np.sin(phi) ** 2, abs=1e-12)
    assert emitted[1, 1].real == pytest.approx(np.sin(phi) ** 2, abs=1e-12)
    passed = fock.apply_super(pair.up, vac)
    assert np.trace(passed).real == pytest.approx(np.cos(phi) ** 2, abs=1e-12)


def test_jc_kick_preserves_positivity():
    rng = np.random.default_rng(2)
    pair = jc_kick(1.1, 16)
    rho = oracles.random_density_matrix(rng, 16, support=10)
    for op in (pair.down, pair.up):
        out = fock.apply_super(op, rho)
        w = np.linalg.eigvalsh((out + out.conj().T) / 2.0)
        assert w.min() > -1e-12


def test_trapping_outcome_is_rejected():
    dim = 16
    pair = jc_kick(np.pi, dim)
    vac = np.zeros((dim, dim), dtype=complex)
    vac[0, 0] = 1.0
    with pytest.raises(ImpossibleOutcomeError):
        reduce_state(vac, "down", pair)


def test_parity_kick_thermal_branch_probabilities():
    nbar, dim = 2.0, 96
    pair = parity_kick(dim)
    rho = fock.thermal_state(nbar, dim)
    p_even = np.trace(fock.apply_super(pair.down, rho)).real
    p_odd = np.trace(fock.apply_super(pair.up, rho)).real
    assert p_even == pytest.approx((nbar + 1.0) / (2.0 * nbar + 1.0), abs=1e-12)
    assert p_odd == pytest.approx(nbar / (2.0 * nbar + 1.0), abs=1e-12)
    # Projective measurement: branches are idempotent, and their sum fixes
    # every diagonal state (coherences between the sectors are erased).
    assert np.max(np.abs((pair.down @ pair.down - pair.down).toarray())) == 0.0
    summed = fock.apply_super(pair.down + pair.up, rho)
    assert np.max(np.abs(summed - rho)) < 1e-14


def test_trivial_kick_branching():
    pair = trivial_kick(0.3, 8)
    rng = np.random.default_rng(1)
    rho = oracles.random_density_matrix(rng, 8)
    assert np.allclose(fock.apply_super(pair.down, rho), 0.3 * rho)
    assert np.allclose(fock.apply_super(pair.up, rho), 0.7 * rho)
    with pytest.raises(ValueError):
        trivial_kick(1.2, 8)


def test_one_photon_kick_adds_a_photon():
    dim, p = 64, 0.7
    K = one_photon_kick(p, dim)
    rho = fock.thermal_state(1.0, dim)
    kicked = rho + fock.apply_super(K, rho)
    assert np.trace(kicked).real == pytest.approx(1.0, abs=1e-12)
    n_op = fock.number(dim)
    gain = np.trace(n_op @ kicked).real - np.trace(n_op @ rho).real
    assert gain == pytest.approx(p, abs=1e-10)
    with pytest.raises(ValueError):
        one_photon_kick(-0.1, dim)


def test_click_superoperator_mixes_efficiencies():
    pair = parity_kick(10)
    cfg = DetectionConfig(eta_down=0.2, eta_up=0.5, rate=3.0)
    C = click_superoperator(pair, cfg)
    diff = C - (0.2 * pair.down + 0.5 * pair.up)
    assert np.max(np.abs(diff.toarray())) == 0.0


def test_detection_config_validation():
    with pytest.raises(ValueError):
        DetectionConfig(eta_down=1.2, eta_up=0.5, rate=1.0)
    with pytest.raises(ValueError):
        DetectionConfig(eta_down=0.5, eta_up=-0.1, rate=1.0)
    with pytest.raises(ValueError):
        DetectionConfig(eta_down=0.5, eta_up=0.5, rate=0.0)


def test_scully_lamb_generator():
    p = OscillatorParams(omega=0.0, decay_rate=1.0, nbar=0.4)
    pair = jc_kick(0.5, 12)
    L0 = scully_lamb(p, pair, 2.5, 12)
    assert np.max(np.abs(_trace_row(12) @ L0)) < 1e-12
    with pytest.raises(ValueError):
        scully_lamb(p, pair, 0.0, 12)


def test_maser_steady_state_detailed_balance_product():
    # Zero-temperature pumped resonator: the steady populations follow the
    # gain/loss ratio product level by level.
    phi, rate, dim = 0.4, 5.0, 60
    p = OscillatorParams(omega=0.0, decay_rate=1.0, nbar=0.0)
    L0 = scully_lamb(p, jc_kick(phi, dim), rate, dim)
    rho = fock.steady_state(L0)
    want = oracles.maser_photon_distribution(phi, rate, dim)
    assert np.max(np.abs(np.diag(rho).real - want)) < 1e-10
    off = rho - np.diag(np.diag(rho))
    assert np.max(np.abs(off)) < 1e-10


def test_propagate_normalized_weight():
    # With a state-independent kick the no-click weight is a pure exponential
    # and the state does not move off the steady state.
    q, dim = 0.3, 24
    p = OscillatorParams(omega=0.0, decay_rate=1.0, nbar=0.8)
    pair = trivial_kick(q, dim)
    cfg = DetectionConfig(eta_down=0.4, eta_up=0.1, rate=2.0)
    L0 = scully_lamb(p, pair, cfg.rate, dim)  # net effect vanishes
    rho_ss = fock.steady_state(L0)
    L_cond = conditional_liouvillian(L0, cfg, pair)
    t = 1.7
    state, weight = propagate_normalized(L_cond, rho_ss, t)
    eta_eff = cfg.eta_down * q + cfg.eta_up * (1.0 - q)
    assert weight == pytest.approx(np.exp(-cfg.rate * eta_eff * t), rel=1e-10)
    assert np.max(np.abs(state - rho_ss)) < 1e-10


def test_reduce_state_branches():
    dim = 48
    pair = parity_kick(dim)
    rho = fock.thermal_state(1.0, dim)
    even = reduce_state(rho, "down", pair)
    assert np.trace(even).real == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(np.diag(even).real[1::2])) == 0.0
    with pytest.raises(ValueError):
        reduce_state(rho, "sideways", pair)


def test_periodic_kick_evolve_validation_and_convergence():
    dim = 32
    p = OscillatorParams(omega=0.0, decay_rate=1.0, nbar=0.0)
    L = liouvillian(p, dim)
    K = one_photon_kick(0.7, dim)
    vac = np.zeros((dim, dim), dtype=complex)
    vac[0, 0] = 1.0
    with pytest.raises(ValueError):
        periodic_kick_evolve(L, K, 0.0, vac, 5)
    with pytest.raises(ValueError):
        periodic_kick_evolve(L, K, 0.4, vac, 0)
    times, states = periodic_kick_evolve(L, K, 0.4, vac, 60, substeps=2)
    assert times[0] == 0.0 and times[-1] == pytest.approx(24.0)
    assert len(times) == len(states) == 2 * 60 + 1
    css = cyclic_steady_state(L, K, 0.4)
    assert np.max(np.abs(states[-1] - css)) < 1e-9


def test_cyclic_steady_state_is_period_map_fixed_point():
    dim = 32
    p = OscillatorParams(omega=0.0, decay_rate=1.0, nbar=0.0)
    L = liouvillian(p, dim)
    K = one_photon_kick(0.7, dim)
    period = 0.4
    css = cyclic_steady_state(L, K, period)
    assert np.trace(css).real == pytest.approx(1.0, abs=1e-12)
    kicked = css + fock.apply_super(K, css)
    back = fock.propagate(L, kicked, period)
    assert np.max(np.abs(back - css)) < 1e-9


def test_period_average_matches_quadrature():
    dim = 24
    p = OscillatorParams(omega=0.0, decay_rate=1.0, nbar=0.3)
    L = liouvillian(p, dim)
    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[4, 4] = 1.0
    period = 0.9
    avg = period_average(L, period, rho0)
    n_op = fock.number(dim)

    def mean_number(t):
        return np.trace(n_op @ fock.propagate(L, rho0, t)).real

    want = oracles.adaptive_simpson(mean_number, 0.0, period, tol=1e-11) / period
    assert np.trace(n_op @ avg).real == pytest.approx(want, abs=1e-9)


def test_time_averaged_rhs_methods_agree():
    dim = 12
    p = OscillatorParams(omega=0.2, decay_rate=1.0, nbar=0.2)
    L = liouvillian(p, dim)
    K = one_photon_kick(0.5, dim)
    res = time_averaged_rhs(L, K, 0.7, method="resolvent")
    eig = time_averaged_rhs(L, K, 0.7, method="eig")
    assert np.max(np.abs(res - eig)) < 1e-8
    with pytest.raises(ValueError):
        time_averaged_rhs(L, K, 0.7, method="nope")


def test_time_averaged_generator_reproduces_cycle_averages():
    dim = 24
    p = OscillatorParams(omega=0.0, decay_rate=1.0, nbar=0.0)
    L = liouvillian(p, dim)
    K = one_photon_kick(0.7, dim)
    period = 0.4
    css = cyclic_steady_state(L, K, period)
    post = css + fock.apply_super(K, css)
    avg = period_average(L, period, post)
    rhs = time_averaged_rhs(L, K, period)
    steady = fock.steady_state(rhs)
    assert np.max(np.abs(steady - avg)) < 1e-8


def test_fast_kicking_approaches_coarse_grained_generator():
    # Rapid weak kicking (T -> 0 at fixed pump rate) converges to the
    # Poissonian generator with rate 1/T, linearly in T.
    dim = 20
    p = OscillatorParams(omega=0.0, decay_rate=1.0, nbar=0.0)
    L = liouvillian(p, dim)
    n_op = fock.number(dim)
    gaps = []
    for period in (0.02, 0.01):
        K = one_photon_kick(0.7 * period, dim)
        css = cyclic_steady_state(L, K, period)
        rho_cg = fock.steady_state((L + (1.0 / period) * K).tocsr())
        gaps.append(abs(np.trace(n_op @ (css - rho_cg)).real))
    assert gaps[0] < 2e-2
    assert gaps[1] < 0.65 * gaps[0]


def test_kick_matrix_structure_at_zero_temperature():
    p_exc, dim = 0.7, 24
    K = one_photon_kick(p_exc, dim)
    km = kick_matrix(K, 0.0, 5, 2)
    # Photon addition couples only neighbouring degrees within a band.
    b00 = km.block(0, 0)
    want = p_exc * np.diag(np.ones(5), -1)
    assert np.max(np.abs(b00 - want)) < 1e-10
    for k in range(-2, 3):
        for k2 in range(-2, 3):
            if k != k2:
                assert np.max(np.abs(km.block(k, k2))) < 1e-12
