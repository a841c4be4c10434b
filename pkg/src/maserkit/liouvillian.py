"""Generator of the damped harmonic oscillator and related constructions.

The master equation implemented here, for decay rate ``A`` and thermal
occupation ``nbar`` of the reservoir,

    d rho/dt =  i omega [rho, n]
              - (A/2)(nbar+1) (n rho - 2 a rho a+ + rho n)
              - (A/2) nbar    (a a+ rho - 2 a+ rho a + rho a a+),

with n = a+ a.  All operator products are taken on the truncated space,
which keeps the generator exactly trace-preserving there.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from . import fock
from .fock import annihilation, creation, identity_super, number, sandwich

__all__ = [
    "OscillatorParams", "LindbladSpec", "liouvillian", "left_action",
    "damping_eigenvalue", "build_lindblad", "non_lindblad_demo",
    "detailed_balance_residual",
]


@dataclass(frozen=True)
class OscillatorParams:
    """Oscillator frequency, energy decay rate, reservoir occupation."""
    omega: float = 0.0
    decay_rate: float = 1.0
    nbar: float = 0.0

    def __post_init__(self):
        if self.decay_rate <= 0:
            raise ValueError("decay_rate must be positive")
        if self.nbar < 0:
            raise ValueError("nbar must be >= 0")


def liouvillian(params, dim):
    """Sparse superoperator of the damped-oscillator master equation."""
    a = annihilation(dim)
    ad = creation(dim)
    n = number(dim)
    aad = a @ ad
    ident = np.eye(dim)
    A, nb, w = params.decay_rate, params.nbar, params.omega

    L = 1j * w * (sandwich(ident, n) - sandwich(n, ident))
    down = sandwich(n, ident) - 2.0 * sandwich(a, ad) + sandwich(ident, n)
    up = sandwich(aad, ident) - 2.0 * sandwich(ad, a) + sandwich(ident, aad)
    L = L - 0.5 * A * (nb + 1.0) * down - 0.5 * A * nb * up
    return scipy.sparse.csr_matrix(L)


def left_action(X, params):
    """Image of an observable under the adjoint generator, i.e. the operator
    Y with Tr{Y rho} = d/dt Tr{X rho_t}."""
    dim = X.shape[0]
    a = annihilation(dim)
    ad = creation(dim)
    n = number(dim)
    aad = a @ ad
    A, nb, w = params.decay_rate, params.nbar, params.omega
    out = 1j * w * (n @ X - X @ n)
    out -= 0.5 * A * (nb + 1.0) * (X @ n - 2.0 * ad @ X @ a + n @ X)
    out -= 0.5 * A * nb * (X @ aad - 2.0 * a @ X @ ad + aad @ X)
    return out


def damping_eigenvalue(n, k, params):
    """Relaxation-mode eigenvalue: -i k omega - (n + |k|/2) A."""
    return -1j * k * params.omega - (n + abs(k) / 2.0) * params.decay_rate


@dataclass(frozen=True)
class LindbladSpec:
    """Hamiltonian plus a list of coupling operators V_j for the generator

        d rho/dt = i [rho, H] + sum_j ( [V_j+, rho V_j] + [V_j+ rho, V_j] ),

    whose dissipator expands to 2 V+ rho V - {V V+, rho}."""
    hamiltonian: np.ndarray
    couplings: tuple = field(default_factory=tuple)


def build_lindblad(spec):
    """Superoperator for a LindbladSpec; the Hamiltonian must be Hermitian
    to 1e-10."""
    H = np.asarray(spec.hamiltonian, dtype=complex)
    defect = np.max(np.abs(H - H.conj().T))
    if defect > 1e-10:
        raise ValueError(f"hamiltonian is not Hermitian (defect {defect:.3e})")
    dim = H.shape[0]
    ident = np.eye(dim)
    L = 1j * (sandwich(ident, H) - sandwich(H, ident))
    for V in spec.couplings:
        V = np.asarray(V, dtype=complex)
        VVd = V @ V.conj().T
        L = L + 2.0 * sandwich(V.conj().T, V) \
            - sandwich(ident, VVd) - sandwich(VVd, ident)
    return scipy.sparse.csr_matrix(L)


def non_lindblad_demo(V, psi0, dt):
    """Conditional probability after time ``dt`` under the sign-flipped
    (non-Lindblad) equation  d rho/dt = V V+ rho - 2 V+ rho V + rho V V+.

    With psi1 = V+ psi0 and psi2 = V V+ psi0 required orthogonal to each
    other and to psi0 (and psi1 normalized), the exact value
    <psi1| rho_dt |psi1> / <psi1|psi1> is negative, -2 dt + O(dt^2):
    a legal-looking equation that immediately leaves the state space.
    """
    V = np.asarray(V, dtype=complex)
    psi0 = np.asarray(psi0, dtype=complex)
    psi0 = psi0 / np.linalg.norm(psi0)
    psi1 = V.conj().T @ psi0
    psi2 = V @ psi1
    if abs(np.vdot(psi1, psi0)) > 1e-12 or abs(np.vdot(psi1, psi2)) > 1e-12:
        raise ValueError("need <psi1|psi0> = 0 and <psi1|psi2> = 0")
    n1 = np.vdot(psi1, psi1).real
    if n1 < 1e-12:
        raise ValueError("V+ psi0 vanishes; pick a different coupling or state")
    dim = V.shape[0]
    ident = np.eye(dim)
    VVd = V @ V.conj().T
    gen = sandwich(VVd, ident) + sandwich(ident, VVd) - 2.0 * sandwich(V.conj().T, V)
    rho0 = np.outer(psi0, psi0.conj())
    rho_dt = fock.propagate(gen, rho0, dt)
    return float((psi1.conj() @ rho_dt @ psi1).real / n1)


def detailed_balance_residual(rho, params):
    """Largest violation of the stationary detailed-balance relation

        (n+1) [ (nbar+1) f(n+1) - nbar f(n) ] = n [ (nbar+1) f(n) - nbar f(n-1) ]

    over Fock levels n = 0 .. dim-2, for a diagonal state with populations
    f(n).  Zero (to rounding) exactly on the thermal state.
    """
    off = np.max(np.abs(rho - np.diag(np.diagonal(rho))))
    if off > 1e-12:
        raise ValueError(f"state is not diagonal (off-diagonal mass {off:.3e})")
    f = np.diagonal(rho).real
    nb = params.nbar
    n = np.arange(f.size - 1)
    lhs = (n + 1.0) * ((nb + 1.0) * f[1:] - nb * f[:-1])
    fm1 = np.concatenate(([0.0], f[:-2]))
    rhs = n * ((nb + 1.0) * f[:-1] - nb * fm1)
    return float(np.max(np.abs(lhs - rhs)))
