"""Ensemble detection statistics for the monitored maser.

Two-click correlation functions, waiting-time densities, and full counting
distributions, all driven by the coarse-grained generator and the branch
superoperators of one probe atom.  Counting probabilities come from a single
block-bidiagonal generator exponential; factorial moments reuse the same
sparse machinery through a deflated evaluation of the entire function
E(y) = 2(e^y - 1 - y)/y^2, so no superoperator ever gets diagonalized on the
hot path.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fock
from .errors import TruncationError
from .micromaser import click_superoperator

_PAIRS = ("down-down", "down-up", "up-down", "up-up")


@dataclass(frozen=True)
class CorrelationCurve:
    """Normalized two-click correlation G(t) for one ordered branch pair."""

    times: np.ndarray
    values: np.ndarray
    pair: str


@dataclass(frozen=True)
class Curve:
    """A labelled real-valued curve on a time grid."""

    times: np.ndarray
    values: np.ndarray
    label: str


@dataclass(frozen=True)
class CountingDistribution:
    """Detected-click number distribution at a fixed observation time."""

    t: float
    probs: np.ndarray
    truncation_mass: float


def _branch_op(kick, name):
    if name == "down":
        return kick.down
    if name == "up":
        return kick.up
    raise ValueError(f"branch must be 'down' or 'up', got {name!r}")


def _branch_eta(cfg, name):
    return cfg.eta_down if name == "down" else cfg.eta_up


def apriori_click_probs(kick, rho_ss, cfg):
    """Per-atom detected-click probabilities (down, up) in the given state."""
    p_down = np.trace(fock.apply_super(kick.down, rho_ss)).real
    p_up = np.trace(fock.apply_super(kick.up, rho_ss)).real
    return cfg.eta_down * p_down, cfg.eta_up * p_up


def correlation(pair, L0, kick, rho_ss, t_grid):
    """Conditioned click correlation G(t) for an ordered branch pair.

    The first branch of ``pair`` conditions at t=0, the second is watched at
    delay t.  Detector efficiencies drop out of the normalized quantity.
    """
    if pair not in _PAIRS:
        raise ValueError(f"pair must be one of {_PAIRS}, got {pair!r}")
    first, second = pair.split("-")
    x_op = _branch_op(kick, first)
    y_op = _branch_op(kick, second)
    p_x = np.trace(fock.apply_super(x_op, rho_ss)).real
    p_y = np.trace(fock.apply_super(y_op, rho_ss)).real
    if p_x <= 1e-14 or p_y <= 1e-14:
        raise ValueError(
            f"branch pair {pair!r} has vanishing steady probability "
            f"({p_x:.3e}, {p_y:.3e}); correlation undefined"
        )
    t_grid = np.asarray(t_grid, dtype=float)
    seed = fock.apply_super(x_op, rho_ss)
    states = fock.propagate_series(L0, seed, t_grid)
    values = np.array(
        [np.trace(fock.apply_super(y_op, s)).real for s in states]
    ) / (p_x * p_y)
    return CorrelationCurve(times=t_grid, values=values, pair=pair)


def waiting_time_density(L0, kick, cfg, from_branch, to_branch, t_grid):
    """Density of the delay until the next detected ``to_branch`` click.

    Conditions on a detected ``from_branch`` click out of the steady state;
    in between, only the watched detector interrupts the evolution, so the
    other detector's clicks are marginalized over.
    """
    eta = _branch_eta(cfg, to_branch)
    if eta <= 0.0:
        raise ValueError(f"watched detector {to_branch!r} has zero efficiency")
    x_op = _branch_op(kick, to_branch)
    y_op = _branch_op(kick, from_branch)
    rho_ss = fock.steady_state(L0)
    p_y = np.trace(fock.apply_super(y_op, rho_ss)).real
    if p_y <= 1e-14:
        raise ValueError(
            f"conditioning branch {from_branch!r} has vanishing probability {p_y:.3e}"
        )
    rho0 = fock.apply_super(y_op, rho_ss) / p_y
    watched = (L0 - cfg.rate * eta * x_op).tocsr()
    t_grid = np.asarray(t_grid, dtype=float)
    states = fock.propagate_series(watched, rho0, t_grid)
    values = cfg.rate * eta * np.array(
        [np.trace(fock.apply_super(x_op, s)).real for s in states]
    )
    return Curve(times=t_grid, values=values, label=f"{to_branch} after {from_branch}")


def _counting_pieces(L0, kick, cfg):
    detected = cfg.rate * click_superoperator(kick, cfg)
    survival = (L0 - detected).tocsr()
    return detected, survival


def counting_distribution(L0, kick, cfg, t, n_max):
    """Probabilities of 0..n_max detected clicks in [0, t].

    Stacks n_max + 1 copies of the no-detection generator with the detected
    influx on the subdiagonal and exponentiates the block-bidiagonal system
    once; w_n is the trace of the n-th block.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be at least 1, got {n_max}")
    detected, survival = _counting_pieces(L0, kick, cfg)
    dim = int(round(np.sqrt(L0.shape[0])))
    rho_ss = fock.steady_state(L0)
    blocks = n_max + 1
    shift = sp.diags(np.ones(n_max), -1)
    stacked = (sp.kron(sp.identity(blocks), survival) + sp.kron(shift, detected)).tocsr()
    v0 = np.zeros(blocks * dim * dim, dtype=complex)
    v0[: dim * dim] = fock.vec(rho_ss)
    out = spla.expm_multiply(stacked * t, v0)
    diag_idx = np.arange(dim) * (dim + 1)
    probs = np.array(
        [out[n * dim * dim + diag_idx].sum().real for n in range(blocks)]
    )
    mass = 1.0 - probs.sum()
    if mass > 1e-6:
        raise TruncationError(
            f"count truncation mass {mass:.3e} at n_max={n_max}; raise n_max"
        )
    return CountingDistribution(t=float(t), probs=probs, truncation_mass=mass)


def counting_generating_function(L0, kick, cfg, t, x):
    """Moment generating function sum_n x^n w_n(t), evaluated directly."""
    detected, survival = _counting_pieces(L0, kick, cfg)
    dim = int(round(np.sqrt(L0.shape[0])))
    rho_ss = fock.steady_state(L0)
    tilted = (survival + x * detected).tocsr()
    out = spla.expm_multiply(tilted * t, fock.vec(rho_ss))
    return fock.unvec(out, dim).trace().real


def _e_scalar(z):
    """E(z) = 2(e^z - 1 - z)/z^2 with the removable singularity filled in."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    safe = np.where(small, 1.0, z)
    direct = 2.0 * (np.exp(safe) - 1.0 - safe) / safe**2
    taylor = 1.0 + z / 3.0 + z * z / 12.0
    return np.where(small, taylor, direct)


def _apply_e_function(L0, rho_ss, solve, v, t):
    """Deflated evaluation of E(L0 t) v using sparse solves only.

    The stationary component passes through with E(0) = 1; on the trace-free
    remainder E(L0 t) = (2/t^2) L0^(-2) (e^(L0 t) - 1 - t L0).
    """
    dim = v.shape[0]
    weight = np.trace(v)
    w = v - weight * rho_ss
    scale = t * spla.norm(L0, np.inf)
    lw = fock.apply_super(L0, w)
    if scale < 1e-4:
        ew = w + (t / 3.0) * lw + (t * t / 12.0) * fock.apply_super(L0, lw)
    else:
        u = fock.propagate(L0, w, t) - w - t * lw
        x1 = fock.unvec(solve(fock.vec(u)), dim)
        x2 = fock.unvec(solve(fock.vec(x1)), dim)
        ew = (2.0 / t**2) * x2
    return weight * rho_ss + ew


def second_factorial_moment(L0, kick, cfg, t, method="deflated"):
    """Mean of n(n-1) over the down-detector count distribution at time t."""
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    dim = int(round(np.sqrt(L0.shape[0])))
    rho_ss = fock.steady_state(L0)
    v = fock.apply_super(kick.down, rho_ss)
    if method == "deflated":
        solve = fock.trace_zero_solver(L0)
        ev = _apply_e_function(L0, rho_ss, solve, v, t)
    elif method == "eig":
        vals, vecs = np.linalg.eig(np.asarray(L0.todense()))
        evals = _e_scalar(vals * t)
        emat = (vecs * evals) @ np.linalg.inv(vecs)
        ev = fock.unvec(emat @ fock.vec(v), dim)
    else:
        raise ValueError(f"unknown method {method!r}")
    factor = (cfg.eta_down * cfg.rate * t) ** 2
    return factor * np.trace(fock.apply_super(kick.down, ev)).real


def fano_mandel(L0, kick, cfg, t_grid):
    """Normalized count variance Q(t) of the down detector on a time grid.

    Q = [second factorial moment / mean] - mean; zero for Poissonian counts.
    Shares one propagation sweep and one LU factorization across the grid.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0.0):
        raise ValueError("fano grid times must be positive")
    dim = int(round(np.sqrt(L0.shape[0])))
    rho_ss = fock.steady_state(L0)
    p_down = np.trace(fock.apply_super(kick.down, rho_ss)).real
    if p_down <= 0.0:
        raise ValueError("down branch has zero steady probability; Q undefined")
    v = fock.apply_super(kick.down, rho_ss)
    w = v - np.trace(v) * rho_ss
    lw = fock.apply_super(L0, w)
    l2w = fock.apply_super(L0, lw)
    solve = fock.trace_zero_solver(L0)
    norm_l = spla.norm(L0, np.inf)
    states = fock.propagate_series(L0, w, t_grid)
    rate = cfg.eta_down * cfg.rate
    values = np.empty_like(t_grid)
    for i, t in enumerate(t_grid):
        if t * norm_l < 1e-4:
            ew = w + (t / 3.0) * lw + (t * t / 12.0) * l2w
        else:
            u = states[i] - w - t * lw
            x1 = fock.unvec(solve(fock.vec(u)), dim)
            ew = (2.0 / t**2) * fock.unvec(solve(fock.vec(x1)), dim)
        ev = np.trace(v) * rho_ss + ew
        second_over = np.trace(fock.apply_super(kick.down, ev)).real
        # Q = (rt)^2 tr{down E down rss} / (rt p_down) - rt p_down
        values[i] = rate * t * (second_over / p_down - p_down)
    return Curve(times=t_grid, values=values, label="fano-mandel")


def perturbation_slice(F, dF, quad_points):
    """First-order variation of a matrix exponential.

    Gauss-Legendre evaluation of int_0^1 e^(tau F) dF e^((1-tau) F) dtau,
    the derivative of e^(F + s dF) at s = 0.
    """
    if quad_points < 8:
        raise ValueError(f"need at least 8 quadrature points, got {quad_points}")
    F = np.asarray(F if not sp.issparse(F) else F.todense(), dtype=complex)
    dF = np.asarray(dF if not sp.issparse(dF) else dF.todense(), dtype=complex)
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    taus = (nodes + 1.0) / 2.0
    out = np.zeros_like(F)
    for tau, wgt in zip(taus, weights / 2.0):
        out += wgt * scipy.linalg.expm(tau * F) @ dF @ scipy.linalg.expm((1.0 - tau) * F)
    return out
