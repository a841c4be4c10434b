"""Truncated Fock-space operators and superoperator plumbing.

Operators are plain complex ndarrays of shape (dim, dim).  Superoperators act
on column-stacked operators: vec(X) stacks the columns of X, so the map
X -> L @ X @ R materializes as kron(R.T, L).  Superoperator matrices are kept
sparse (CSR) because the generators built from ladder operators only couple
neighbouring Fock levels; dense copies are made where a dense algorithm
(Pade exponential, eigendecomposition, LU) needs one.
"""

import math

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.linalg import expm_multiply, splu

from .errors import TruncationError

__all__ = [
    "annihilation", "creation", "number", "parity", "thermal_state",
    "expectation", "vec", "unvec", "sandwich", "identity_super",
    "apply_super", "exp_super", "propagate", "propagate_series",
    "displacement", "wigner_point", "check_density_matrix", "steady_state",
    "trace_zero_solver",
]


def _check_dim(dim):
    if not isinstance(dim, (int, np.integer)) or dim < 2:
        raise ValueError(f"Fock-space dimension must be an integer >= 2, got {dim!r}")


def annihilation(dim):
    """Ladder-down operator: entries sqrt(n) on the first superdiagonal."""
    _check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim)).astype(complex), 1)


def creation(dim):
    _check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim)).astype(complex), -1)


def number(dim):
    _check_dim(dim)
    return np.diag(np.arange(dim).astype(complex))


def parity(dim):
    """(-1)^(photon number) as a diagonal operator."""
    _check_dim(dim)
    signs = np.where(np.arange(dim) % 2 == 0, 1.0, -1.0)
    return np.diag(signs.astype(complex))


def thermal_state(nbar, dim):
    """Thermal (geometric) state with mean occupation ``nbar``, renormalized
    on the truncated space.

    Raises TruncationError when the neglected tail mass (nbar/(nbar+1))^dim
    is not below 1e-12; the message carries the dimension that would do.
    """
    _check_dim(dim)
    if nbar < 0:
        raise ValueError("thermal occupation must be >= 0")
    if nbar == 0:
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    q = nbar / (nbar + 1.0)
    tail = q ** dim
    if tail >= 1e-12:
        needed = math.ceil(math.log(1e-12) / math.log(q))
        raise TruncationError(
            f"thermal tail mass {tail:.3e} at dim={dim} exceeds 1e-12; "
            f"need dim >= {needed}"
        )
    p = q ** np.arange(dim)
    p /= p.sum()
    return np.diag(p.astype(complex))


def expectation(op, rho):
    """Tr{op @ rho} with a shape guard."""
    if op.shape != rho.shape:
        raise ValueError(f"shape mismatch: {op.shape} vs {rho.shape}")
    return complex(np.einsum("ij,ji->", op, rho))


def vec(X):
    """Column-stacking of an operator into a vector."""
    return np.asarray(X, dtype=complex).flatten(order="F")


def unvec(v, dim=None):
    v = np.asarray(v)
    if dim is None:
        dim = math.isqrt(v.size)
    return v.reshape((dim, dim), order="F")


def sandwich(left, right):
    """Superoperator of the map X -> left @ X @ right (CSR)."""
    ls = scipy.sparse.csr_matrix(left)
    rs = scipy.sparse.csr_matrix(right)
    return scipy.sparse.kron(rs.T, ls, format="csr")


def identity_super(dim):
    return scipy.sparse.identity(dim * dim, dtype=complex, format="csr")


def apply_super(S, X):
    return unvec(S @ vec(X), X.shape[0])


def exp_super(S, t=1.0, method="pade"):
    """Dense matrix exponential of a superoperator times ``t``.

    method="pade" uses scaling-and-squaring with a Pade approximant;
    method="eig" goes through the eigendecomposition.  The two must agree on
    diagonalizable generators and are cross-checked in the test suite.
    """
    M = S.toarray() if scipy.sparse.issparse(S) else np.asarray(S, dtype=complex)
    if method == "pade":
        return scipy.linalg.expm(M * t)
    if method == "eig":
        w, V = np.linalg.eig(M * t)
        return (V * np.exp(w)) @ np.linalg.inv(V)
    raise ValueError(f"unknown method {method!r}")


def propagate(S, X, t):
    """exp(S t) applied to an operator, without materializing the dense
    exponential (action-of-exponential algorithm on the sparse generator)."""
    if t == 0:
        return np.array(X, dtype=complex)
    v = expm_multiply(S * t, vec(X))
    return unvec(v, X.shape[0])


def propagate_series(S, X, times):
    """States exp(S t) X on an increasing grid of times (t >= 0).

    Propagates gap by gap so each grid point costs one exponential action.
    """
    times = np.asarray(times, dtype=float)
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise ValueError("times must be non-negative and non-decreasing")
    dim = X.shape[0]
    out = []
    cur = vec(X)
    t_prev = 0.0
    for t in times:
        dt = t - t_prev
        if dt > 0:
            cur = expm_multiply(S * dt, cur)
        out.append(unvec(cur.copy(), dim))
        t_prev = t
    return out


def displacement(dim, z, z_conj=None):
    """exp(z a_up - z* a_down); an independent second argument continues the
    displacement off the physical section."""
    zc = np.conj(z) if z_conj is None else z_conj
    return scipy.linalg.expm(z * creation(dim) - zc * annihilation(dim))


def wigner_point(op, z, z_conj=None):
    """Phase-space function of ``op`` at point z: the trace against the
    displaced parity operator 2 D(z) (-1)^n D(z)^+.

    The truncated space only supports points with |z|^2 + 3|z| < dim/4;
    outside that disk a TruncationError is raised.
    """
    dim = op.shape[0]
    r = abs(z)
    if r * r + 3.0 * r >= dim / 4.0:
        raise TruncationError(
            f"phase-space point |z|={r:.3f} too far out for dim={dim}"
        )
    zc = np.conj(z) if z_conj is None else z_conj
    d = displacement(dim, z, zc)
    d_back = scipy.linalg.expm(zc * annihilation(dim) - z * creation(dim))
    return complex(np.trace(op @ d @ (2.0 * parity(dim)) @ d_back))


def check_density_matrix(rho, trace_tol=1e-10, herm_tol=1e-10, eig_floor=-1e-8):
    """Validate trace, hermiticity and positivity; raise ValueError listing
    every violation at once."""
    problems = []
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        problems.append(f"trace {tr:.12g} differs from 1 by more than {trace_tol}")
    herm_defect = np.max(np.abs(rho - rho.conj().T))
    if herm_defect > herm_tol:
        problems.append(f"hermiticity defect {herm_defect:.3e} above {herm_tol}")
    else:
        w = np.linalg.eigvalsh((rho + rho.conj().T) / 2.0)
        if w.min() < eig_floor:
            problems.append(f"minimum eigenvalue {w.min():.3e} below {eig_floor}")
    if problems:
        raise ValueError("; ".join(problems))


def steady_state(L, tol=1e-11, max_iter=60):
    """Trace-one kernel element of a trace-preserving generator.

    Inverse iteration with a small negative shift; the kernel of the
    generators built here is one-dimensional, so a couple of iterations
    resolve it to machine precision.
    """
    N = L.shape[0]
    dim = math.isqrt(N)
    Ls = scipy.sparse.csc_matrix(L)
    scale = max(abs(Ls).max(), 1.0)
    shift = scipy.sparse.identity(N, dtype=complex, format="csc") * (1e-9 * scale)
    lu = splu(Ls - shift)
    x = vec(np.eye(dim) / dim)
    resid = np.inf
    for _ in range(max_iter):
        x = lu.solve(x)
        x /= np.linalg.norm(x)
        resid = np.linalg.norm(Ls @ x) / scale
        if resid < tol:
            break
    if resid >= tol:
        raise RuntimeError(f"kernel iteration stalled at residual {resid:.3e}")
    rho = unvec(x, dim)
    rho = (rho + rho.conj().T) / 2.0
    rho /= np.trace(rho).real
    return rho


def trace_zero_solver(L):
    """LU solver for the trace-zero sector of a singular generator.

    Adds the sparse rank-one bordering e_00 vec(I)^T, which is nonsingular
    whenever the kernel is spanned by a single unit-trace state with
    nonvanishing ground-level population; on trace-zero right-hand sides the
    bordered solution coincides with the deflated inverse and stays
    trace-zero.  Returns a closure v -> L^{-1} v.
    """
    N = L.shape[0]
    dim = math.isqrt(N)
    border = scipy.sparse.lil_matrix((N, N), dtype=complex)
    diag_idx = np.arange(dim) * (dim + 1)
    border[0, diag_idx] = 1.0
    lu = splu(scipy.sparse.csc_matrix(L) + border.tocsc())
    return lu.solve
