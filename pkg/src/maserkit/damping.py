"""Dual eigenbasis of the damped-oscillator generator.

The right eigenvectors are banded matrices built from normally ordered
Laguerre-times-exponential functions of the number operator, the left ones
from normally ordered Laguerre polynomials; the pair is bi-orthonormal under
the trace pairing.  A matrix in band k (offset k from the main diagonal)
relaxes with eigenvalue -i k omega - (n + |k|/2) A.

Both families are generated by a three-term recurrence in the degree n acting
on whole diagonal tables.  The recurrence follows from the Laguerre one plus
the normally ordered evaluation rules

    <m| :g(n): |m>  = sum_j g_j m!/(m-j)!        (g(x) = sum_j g_j x^j)
    <m| :x g(x): |m> = m <m-1| :g(x): |m-1>,

so no factorials or alternating sums appear explicitly and the tables stay
well-scaled up to large dimensions and degrees.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fock import vec
from .liouvillian import damping_eigenvalue
from .special import laguerre

__all__ = [
    "right_eigenvector", "left_eigenvector", "DampingBasis", "basis",
    "DampingBasisElement", "basis_element", "duality_gram", "expand",
    "reconstruct", "evolve_spectral", "gaussian_coefficient", "gaussian_state",
]


def _right_diag_table(nbar, alpha, n_max, m_count):
    """Diagonal values f[n, m] = <m| :L_n^(alpha)(x/(nbar+1)) e^(-x/(nbar+1)): |m>."""
    beta = nbar + 1.0
    m = np.arange(m_count, dtype=float)
    f = np.empty((n_max + 1, m_count))
    with np.errstate(divide="ignore"):
        f[0] = (nbar / beta) ** m  # 0^0 = 1 covers the vacuum column at nbar = 0
    if n_max >= 1:
        f[1] = (alpha + 1.0) * f[0]
        f[1, 1:] -= (m[1:] / beta) * f[0, :-1]
    for n in range(1, n_max):
        nxt = (2.0 * n + alpha + 1.0) * f[n] - (n + alpha) * f[n - 1]
        nxt[1:] -= (m[1:] / beta) * f[n, :-1]
        f[n + 1] = nxt / (n + 1.0)
    return f


def _left_diag_table(nbar, alpha, n_max, m_count):
    """Diagonal values F[n, m] of (-nbar/(nbar+1))^n :L_n^(alpha)(x/nbar):.

    The geometric prefactor is folded into the recurrence, which keeps every
    coefficient finite at nbar = 0 where the family degenerates to binomials
    of the number operator.
    """
    beta = nbar + 1.0
    s = nbar / beta
    m = np.arange(m_count, dtype=float)
    F = np.empty((n_max + 1, m_count))
    F[0] = 1.0
    if n_max >= 1:
        F[1] = -s * (alpha + 1.0) + m / beta
    for n in range(1, n_max):
        nxt = -s * (2.0 * n + alpha + 1.0) * F[n] - s * s * (n + alpha) * F[n - 1]
        nxt[1:] += (m[1:] / beta) * F[n, :-1]
        F[n + 1] = nxt / (n + 1.0)
    return F


def _ladder_norms(dim, alpha):
    """sqrt((m+alpha)! / m!) for m = 0 .. dim-1-alpha."""
    m = np.arange(dim - alpha, dtype=float)
    fac = np.ones(dim - alpha)
    for j in range(1, alpha + 1):
        fac *= m + j
    return np.sqrt(fac)


def _band_matrix(diag_vals, dim, offset):
    """Banded matrix with ``diag_vals`` on the diagonal at ``offset``
    (positive offset = below the main diagonal)."""
    out = np.zeros((dim, dim), dtype=complex)
    w = len(diag_vals)
    if offset >= 0:
        out[offset + np.arange(w), np.arange(w)] = diag_vals
    else:
        out[np.arange(w), -offset + np.arange(w)] = diag_vals
    return out


class DampingBasis:
    """Cached table of the dual eigenvector families for one (nbar, dim).

    Bands and degrees are grown on demand; matrices are assembled lazily.
    """

    def __init__(self, nbar, dim):
        if nbar < 0:
            raise ValueError("nbar must be >= 0")
        self.nbar = float(nbar)
        self.dim = int(dim)
        self._right = {}   # alpha -> table f[n, m]
        self._left = {}
        self._norms = {}

    def _tables(self, alpha, n_max):
        have = self._right.get(alpha)
        if have is None or have.shape[0] <= n_max:
            grow = max(n_max, 2 * (have.shape[0] - 1) if have is not None else 0)
            self._right[alpha] = _right_diag_table(self.nbar, alpha, grow, self.dim)
            self._left[alpha] = _left_diag_table(self.nbar, alpha, grow, self.dim)
            self._norms.setdefault(alpha, _ladder_norms(self.dim, alpha))
        return self._right[alpha], self._left[alpha], self._norms[alpha]

    def right_diag(self, n, k):
        """Diagonal of the right eigenvector along its band."""
        alpha = abs(k)
        f, _, norms = self._tables(alpha, n)
        pref = (-1.0) ** n / (self.nbar + 1.0) ** (alpha + 1)
        w = self.dim - alpha
        return pref * f[n, :w] * norms

    def left_diag(self, n, k):
        alpha = abs(k)
        _, F, norms = self._tables(alpha, n)
        pref = 1.0
        for j in range(1, alpha + 1):  # n!/(n+alpha)!
            pref /= n + j
        w = self.dim - alpha
        return pref * F[n, :w] * norms

    def right(self, n, k):
        return _band_matrix(self.right_diag(n, k), self.dim, k)

    def left(self, n, k):
        # The left family carries its band on the opposite side.
        return _band_matrix(self.left_diag(n, k), self.dim, -k)


@lru_cache(maxsize=16)
def basis(nbar, dim):
    return DampingBasis(nbar, dim)


def right_eigenvector(n, k, nbar, dim):
    """Right eigenvector: band-|k| matrix, eigenvalue -ik omega - (n+|k|/2) A."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if abs(k) >= dim:
        raise ValueError("band |k| must be < dim")
    return basis(float(nbar), int(dim)).right(n, k)


def left_eigenvector(n, k, nbar, dim):
    """Dual partner of right_eigenvector under Tr{left(m,k) right(n,k')}."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if abs(k) >= dim:
        raise ValueError("band |k| must be < dim")
    return basis(float(nbar), int(dim)).left(n, k)


@dataclass(frozen=True)
class DampingBasisElement:
    n: int
    k: int
    eigenvalue: complex
    right: np.ndarray
    left: np.ndarray


def basis_element(n, k, params, dim):
    b = basis(float(params.nbar), int(dim))
    return DampingBasisElement(
        n=n, k=k,
        eigenvalue=damping_eigenvalue(n, k, params),
        right=b.right(n, k),
        left=b.left(n, k),
    )


def duality_gram(n_max, k_max, nbar, dim):
    """Pairings Tr{left(m, k) right(n, kp)} as an array
    indexed [m, k + k_max, n, kp + k_max]; identity pattern expected."""
    b = basis(float(nbar), int(dim))
    nk = 2 * k_max + 1
    out = np.zeros((n_max + 1, nk, n_max + 1, nk), dtype=complex)
    for m in range(n_max + 1):
        for k in range(-k_max, k_max + 1):
            lt = b.left(m, k)
            for n in range(n_max + 1):
                for kp in range(-k_max, k_max + 1):
                    rt = b.right(n, kp)
                    out[m, k + k_max, n, kp + k_max] = np.sum(lt.T * rt)
    return out


def expand(X, nbar, n_max, k_max):
    """Mode coefficients Tr{left(n, k) X} for n <= n_max, |k| <= k_max,
    indexed [n, k + k_max]."""
    X = np.asarray(X, dtype=complex)
    dim = X.shape[0]
    b = basis(float(nbar), dim)
    out = np.zeros((n_max + 1, 2 * k_max + 1), dtype=complex)
    for k in range(-k_max, k_max + 1):
        # Tr{left X} only touches the band of X at offset k.
        alpha = abs(k)
        w = dim - alpha
        xband = np.diagonal(X, offset=-k)  # row - col = k
        for n in range(n_max + 1):
            out[n, k + k_max] = np.dot(b.left_diag(n, k), xband[:w])
    return out


def reconstruct(coeffs, nbar, dim):
    """Sum of coefficient times right eigenvector; inverse of expand on the
    modes it covers."""
    coeffs = np.asarray(coeffs, dtype=complex)
    n_count, k_count = coeffs.shape
    k_max = (k_count - 1) // 2
    b = basis(float(nbar), int(dim))
    out = np.zeros((dim, dim), dtype=complex)
    for k in range(-k_max, k_max + 1):
        alpha = abs(k)
        w = dim - alpha
        band = np.zeros(w, dtype=complex)
        for n in range(n_count):
            c = coeffs[n, k + k_max]
            if c != 0:
                band += c * b.right_diag(n, k)
        if k >= 0:
            out[k + np.arange(w), np.arange(w)] += band
        else:
            out[np.arange(w), alpha + np.arange(w)] += band
    return out


def _adaptive_caps(X, nbar, tol=1e-10, n_step=8, n_limit=None):
    """Grow (n_max, k_max) until newly appended shells contribute less than
    ``tol`` in max-norm."""
    dim = X.shape[0]
    n_limit = n_limit or dim - 1
    b = basis(float(nbar), dim)
    # Bands present in X above tol decide k_max.
    k_max = 0
    for k in range(dim - 1, 0, -1):
        if np.max(np.abs(np.diagonal(X, offset=-k))) > tol * 1e-3 or \
           np.max(np.abs(np.diagonal(X, offset=k))) > tol * 1e-3:
            k_max = k
            break
    n_max = min(n_step, n_limit)
    while n_max < n_limit:
        shell = 0.0
        for k in range(-k_max, k_max + 1):
            alpha = abs(k)
            w = dim - alpha
            xband = np.diagonal(X, offset=-k)[:w]
            for n in range(max(0, n_max - 1), n_max + 1):
                c = np.dot(b.left_diag(n, k), xband)
                shell = max(shell, np.max(np.abs(c * b.right_diag(n, k))))
        if shell < tol:
            break
        n_max = min(n_max + n_step, n_limit)
    return n_max, k_max


def evolve_spectral(X, nbar, omega, decay_rate, t, n_max=None, k_max=None):
    """Propagate X for time t by damping-mode decomposition:
    sum of coeff * exp(eigenvalue t) * right eigenvector.

    When the truncation caps are omitted they are grown adaptively until the
    appended shells stop contributing (1e-10 in max-norm).
    """
    from .liouvillian import OscillatorParams  # cycle guard
    params = OscillatorParams(omega=omega, decay_rate=decay_rate, nbar=nbar)
    if n_max is None or k_max is None:
        auto_n, auto_k = _adaptive_caps(X, nbar)
        n_max = auto_n if n_max is None else n_max
        k_max = auto_k if k_max is None else k_max
    coeffs = expand(X, nbar, n_max, k_max)
    phases = np.array(
        [[np.exp(damping_eigenvalue(n, k, params) * t)
          for k in range(-k_max, k_max + 1)]
         for n in range(n_max + 1)], dtype=complex)
    return reconstruct(coeffs * phases, nbar, X.shape[0])


def gaussian_coefficient(kappa, alpha, alpha_conj, nbar, n, k):
    """Mode coefficient of the normally ordered Gaussian with width kappa
    and (independent) center components alpha, alpha_conj.

    At kappa = nbar + 1 the Laguerre argument diverges while its prefactor
    vanishes; the finite limit is taken analytically there (the series whose
    resummation gives Bessel functions).
    """
    aK = abs(k)
    p = (aK + k) // 2
    q = (aK - k) // 2
    fac = 1.0
    for j in range(1, aK + 1):  # n!/(n+|k|)!
        fac /= n + j
    beta = nbar + 1.0
    prod = alpha ** p * alpha_conj ** q
    eps = beta - kappa
    if abs(eps) <= 1e-9 * beta:
        return fac * prod * (alpha * alpha_conj / beta) ** n / math.factorial(n)
    lag = laguerre(n, aK, alpha * alpha_conj / eps)
    return fac * (kappa / beta - 1.0) ** n * prod * lag


def gaussian_state(kappa, alpha, alpha_conj, nbar, dim, tail_tol=1e-10):
    """Density matrix of the Gaussian ansatz by mode summation.

    Requires |kappa/(nbar+1) - 1| < 1 (contraction region) so the degree sum
    converges; bands and degrees are added until their max-norm contribution
    falls below ``tail_tol``.
    """
    beta = nbar + 1.0
    if abs(kappa / beta - 1.0) >= 1.0:
        raise ValueError("kappa outside the contraction region")
    b = basis(float(nbar), int(dim))
    out = np.zeros((dim, dim), dtype=complex)

    def add_band(k):
        alpha_abs = abs(k)
        w = dim - alpha_abs
        band = np.zeros(w, dtype=complex)
        best = 0.0
        n = 0
        while n < dim - 1:
            c = gaussian_coefficient(kappa, alpha, alpha_conj, nbar, n, k)
            term = c * b.right_diag(n, k)
            band += term
            tmax = np.max(np.abs(term)) if term.size else 0.0
            best = max(best, tmax)
            if n >= 4 and tmax < tail_tol * max(best, 1e-30):
                break
            n += 1
        if k >= 0:
            out[k + np.arange(w), np.arange(w)] += band
        else:
            out[np.arange(w), alpha_abs + np.arange(w)] += band
        return best

    add_band(0)
    if alpha != 0 or alpha_conj != 0:
        for sgn in (1, -1):
            k = sgn
            while abs(k) < dim - 1:
                peak = add_band(k)
                if peak < tail_tol:
                    break
                k += sgn
    return out
