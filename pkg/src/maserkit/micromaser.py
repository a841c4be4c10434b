"""One-atom maser building blocks.

Kick superoperators describe the net effect of a single atom crossing the
cavity.  Together with the damped-oscillator generator they yield the
coarse-grained (Scully-Lamb) equation for Poissonian arrivals, conditional
generators for inefficient detection, strictly periodic kicking with its
cyclically steady state, and the time-averaged generator whose steady state
reproduces the period-averaged moments.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import damping, fock, liouvillian
from .errors import FixedPointError, ImpossibleOutcomeError, NormalizationUnderflowError


@dataclass(frozen=True)
class KickPair:
    """Branch superoperators for the two exit states of a probe atom.

    ``down`` is the branch where the atom leaves in the lower state (for the
    resonant coupling this deposits a photon), ``up`` the complementary
    branch.  Both are completely positive; their sum is trace preserving.
    """

    down: sp.csr_matrix
    up: sp.csr_matrix

    @property
    def dim(self):
        return int(round(np.sqrt(self.down.shape[0])))

    def net_effect(self):
        """Single-atom kick: down + up - identity."""
        return (self.down + self.up - fock.identity_super(self.dim)).tocsr()


@dataclass(frozen=True)
class DetectionConfig:
    """Detector efficiencies and the atomic arrival rate."""

    eta_down: float
    eta_up: float
    rate: float

    def __post_init__(self):
        if not 0.0 <= self.eta_down <= 1.0:
            raise ValueError(f"eta_down must lie in [0, 1], got {self.eta_down}")
        if not 0.0 <= self.eta_up <= 1.0:
            raise ValueError(f"eta_up must lie in [0, 1], got {self.eta_up}")
        if not self.rate > 0.0:
            raise ValueError(f"rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class KickMatrix:
    """Kick superoperator expressed in the damping bases.

    ``entries[n, k + k_max, n2, k2 + k_max]`` holds the left/right pairing of
    the kick between basis labels (n2, k2) -> (n, k).
    """

    entries: np.ndarray
    n_max: int
    k_max: int

    def block(self, k, k2):
        return self.entries[:, k + self.k_max, :, k2 + self.k_max]


def _diag_sandwich(vals_left, vals_right, dim):
    left = np.diag(vals_left.astype(complex))
    right = np.diag(vals_right.astype(complex))
    return fock.sandwich(left, right)


def jc_kick(phi, dim):
    """Resonant Jaynes-Cummings kick for an atom entering excited.

    The emission branch transfers one photon to the field, weighted by the
    Rabi factor sin(phi sqrt(a a+))/sqrt(a a+); the pass branch is the cosine
    sandwich.  Both are evaluated by functional calculus on the truncated
    a a+ product, which keeps down + up exactly trace preserving (the top
    Fock level has a a+ eigenvalue 0 there, so its cosine weight is 1 and the
    emission amplitude out of it is dropped along with the truncated level).
    """
    if dim < 2:
        raise ValueError(f"dim must be at least 2, got {dim}")
    x = np.arange(1.0, dim + 1.0)
    x[-1] = 0.0  # truncated a a+ loses the top ladder rung
    root = np.sqrt(x)
    rabi = np.where(root > 0.0, np.sin(phi * root) / np.where(root > 0.0, root, 1.0), phi)
    emit = fock.creation(dim) @ np.diag(rabi.astype(complex))
    down = fock.sandwich(emit, emit.conj().T)
    cos_vals = np.cos(phi * root)
    up = _diag_sandwich(cos_vals, cos_vals, dim)
    return KickPair(down=down.tocsr(), up=up.tocsr())


def parity_kick(dim):
    """Projective parity measurement: down = even outcome, up = odd."""
    if dim < 2:
        raise ValueError(f"dim must be at least 2, got {dim}")
    signs = (-1.0) ** np.arange(dim)
    even = (1.0 + signs) / 2.0
    odd = (1.0 - signs) / 2.0
    return KickPair(
        down=_diag_sandwich(even, even, dim).tocsr(),
        up=_diag_sandwich(odd, odd, dim).tocsr(),
    )


def trivial_kick(q, dim):
    """State-independent branching: down fires with probability q."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    eye = fock.identity_super(dim)
    return KickPair(down=(q * eye).tocsr(), up=((1.0 - q) * eye).tocsr())


def one_photon_kick(prob, dim):
    """Kick superoperator that adds one photon with probability ``prob``.

    Returns K with kick map 1 + K, where K = prob (S . S+ - 1) and S is the
    unit-amplitude raising isometry a+ (a a+)^(-1/2).
    """
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"prob must lie in [0, 1], got {prob}")
    x = np.arange(1.0, dim + 1.0)
    x[-1] = 0.0
    inv_root = np.where(x > 0.0, 1.0 / np.sqrt(np.where(x > 0.0, x, 1.0)), 0.0)
    shift = fock.creation(dim) @ np.diag(inv_root.astype(complex))
    return (prob * (fock.sandwich(shift, shift.conj().T) - fock.identity_super(dim))).tocsr()


def click_superoperator(kick, cfg):
    """Detected-click superoperator: eta_down down + eta_up up (per atom)."""
    return (cfg.eta_down * kick.down + cfg.eta_up * kick.up).tocsr()


def scully_lamb(params, kick, rate, dim):
    """Coarse-grained generator for Poissonian atom arrivals at ``rate``."""
    if not rate > 0.0:
        raise ValueError(f"rate must be positive, got {rate}")
    L = liouvillian.liouvillian(params, dim)
    return (L + rate * kick.net_effect()).tocsr()


def conditional_liouvillian(L0, cfg, kick):
    """No-detection generator: L0 minus the detected-click outflux."""
    return (L0 - cfg.rate * click_superoperator(kick, cfg)).tocsr()


def propagate_normalized(L_cond, rho0, t):
    """Evolve under a conditional generator and renormalize.

    Returns (state, no_click_prob) where no_click_prob is the decayed trace,
    the probability that no detector fired during [0, t].
    """
    raw = fock.propagate(L_cond, rho0, t)
    weight = float(np.trace(raw).real)
    if weight < 1e-300:
        raise NormalizationUnderflowError(
            f"no-click probability underflowed ({weight:.3e}) at t={t}"
        )
    return raw / weight, weight


def reduce_state(rho, branch, kick):
    """Apply the state reduction for a detected atom in the given branch."""
    if branch == "down":
        op = kick.down
    elif branch == "up":
        op = kick.up
    else:
        raise ValueError(f"branch must be 'down' or 'up', got {branch!r}")
    out = fock.apply_super(op, rho)
    weight = np.trace(out).real
    if weight <= 1e-14:
        raise ImpossibleOutcomeError(
            f"branch {branch!r} has probability {weight:.3e}; reduction undefined"
        )
    return out / weight


def periodic_kick_evolve(L, kick_super, period, rho0, periods, substeps=1):
    """Strictly periodic kicking: kick at t = 0, T, 2T, ..., decay in between.

    Samples each period at ``substeps`` points (the first sample of a period
    is the post-kick state).  Returns (times, states) with a final pre-kick
    sample at t = periods * T.
    """
    if not period > 0.0:
        raise ValueError(f"period must be positive, got {period}")
    if periods < 1 or substeps < 1:
        raise ValueError("periods and substeps must be at least 1")
    dt = period / substeps
    rho = np.array(rho0, dtype=complex)
    times, states = [], []
    for m in range(periods):
        rho = rho + fock.apply_super(kick_super, rho)
        times.append(m * period)
        states.append(rho)
        for j in range(1, substeps + 1):
            rho = fock.propagate(L, rho, dt)
            if j < substeps:
                times.append(m * period + j * dt)
                states.append(rho)
    times.append(periods * period)
    states.append(rho)
    return np.array(times), states


def cyclic_steady_state(L, kick_super, period, tol=1e-12, max_iter=100):
    """Unit-trace fixed point of the single-period map e^(L T)(1 + K).

    Shifted inverse iteration on the dense period map; the spectral gap of
    the damped oscillator makes this converge in a handful of steps.
    """
    dim = int(round(np.sqrt(L.shape[0])))
    prop = scipy.linalg.expm(np.asarray(L.todense()) * period)
    period_map = prop @ (np.eye(dim * dim) + np.asarray(kick_super.todense()))
    shifted = period_map - (1.0 + 1e-9) * np.eye(dim * dim)
    lu, piv = scipy.linalg.lu_factor(shifted)
    x = fock.vec(np.eye(dim, dtype=complex) / dim)
    for _ in range(max_iter):
        y = scipy.linalg.lu_solve((lu, piv), x)
        rho = fock.unvec(y, dim)
        y /= np.trace(rho)
        if np.max(np.abs(y - x)) < tol:
            x = y
            break
        x = y
    else:
        raise FixedPointError("inverse iteration did not converge; fixed point degenerate?")
    residual = np.max(np.abs(period_map @ x - x))
    if residual > 1e-9:
        raise FixedPointError(f"period-map fixed point residual {residual:.3e}")
    rho = fock.unvec(x, dim)
    rho = (rho + rho.conj().T) / 2.0
    return rho / np.trace(rho).real


def period_average(L, period, rho, steady=None):
    """Average of e^(L t) rho over one period, t in [0, T].

    Split off the stationary component and integrate the decaying remainder
    exactly: (1/T) int_0^T e^(Lt) w dt = (1/T) L^(-1) (e^(LT) - 1) w for
    trace-free w, where the inverse is taken on the trace-free sector.
    """
    if steady is None:
        steady = fock.steady_state(L)
    dim = rho.shape[0]
    weight = np.trace(rho)
    w = rho - weight * steady
    u = fock.propagate(L, w, period) - w
    solve = fock.trace_zero_solver(L)
    return weight * steady + fock.unvec(solve(fock.vec(u)), dim) / period


def _g_scalar(z):
    """z / (1 - e^(-z)) with the removable singularity filled in."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-6
    safe = np.where(small, 1.0, z)
    direct = safe / (1.0 - np.exp(-safe))
    taylor = 1.0 + z / 2.0 + z * z / 12.0
    return np.where(small, taylor, direct)


def time_averaged_rhs(L, kick_super, period, method="resolvent"):
    """Generator of the time-averaged evolution: L + K g(L), g(z) = z/(1-e^(-zT)).

    The resolvent route never diagonalizes the superoperator: with the
    steady projector P0 = |steady><tr|, g(L) = L + L (e^(LT) - 1 + P0)^(-1)
    (1 - P0) + P0/T, and the bracket is well conditioned because e^(LT) is a
    contraction.  The eig route follows the spectral definition directly and
    is kept for cross-checks at small dimension.
    """
    dim = int(round(np.sqrt(L.shape[0])))
    n2 = dim * dim
    Ld = np.asarray(L.todense())
    if method == "resolvent":
        steady = fock.steady_state(L)
        proj = np.outer(fock.vec(steady), fock.vec(np.eye(dim, dtype=complex)).conj())
        prop = scipy.linalg.expm(Ld * period)
        bracket = prop - np.eye(n2) + proj
        w = scipy.linalg.solve(bracket, np.eye(n2) - proj)
        g_of_l = Ld + Ld @ w + proj / period
    elif method == "eig":
        try:
            vals, vecs = np.linalg.eig(Ld)
            gvals = _g_scalar(vals * period) / period
            g_of_l = (vecs * gvals) @ np.linalg.inv(vecs)
        except np.linalg.LinAlgError:
            # Schur-based fallback when the eigensolve fails outright
            g_of_l = scipy.linalg.funm(Ld * period, _g_scalar) / period
    else:
        raise ValueError(f"unknown method {method!r}")
    return Ld + np.asarray(kick_super.todense()) @ g_of_l


def kick_matrix(kick_super, nbar, n_max, k_max):
    """Damping-basis matrix elements of a kick superoperator."""
    dim = int(round(np.sqrt(kick_super.shape[0])))
    width = 2 * k_max + 1
    entries = np.zeros((n_max + 1, width, n_max + 1, width), dtype=complex)
    lefts = {
        (n, k): damping.left_eigenvector(n, k, nbar, dim)
        for n in range(n_max + 1)
        for k in range(-k_max, k_max + 1)
    }
    for n2 in range(n_max + 1):
        for k2 in range(-k_max, k_max + 1):
            image = fock.apply_super(
                kick_super, damping.right_eigenvector(n2, k2, nbar, dim)
            )
            for (n, k), left in lefts.items():
                entries[n, k + k_max, n2, k2 + k_max] = np.sum(left.T * image)
    return KickMatrix(entries=entries, n_max=n_max, k_max=k_max)
