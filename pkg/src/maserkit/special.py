"""Scalar special functions used throughout the library.

Generalized Laguerre polynomials and the Bessel functions J and I, written
with recurrences that are stable in the parameter ranges the rest of the
code visits (degrees up to ~60, arguments up to ~50, orders up to ~40).
Kept free of external dependencies so they can double as oracles.
"""

import math

__all__ = ["laguerre", "bessel_j", "bessel_i"]


def laguerre(n, k, x):
    """Generalized Laguerre polynomial of degree ``n`` and integer order ``k``.

    Uses the upward three-term recurrence

        (n+1) L_{n+1} = (2n + k + 1 - x) L_n - (n + k) L_{n-1},

    which is stable for x >= 0 and loses no significant accuracy for the
    moderate negative arguments that occur here.  ``x`` may be complex.
    """
    if n < 0:
        raise ValueError("degree n must be >= 0")
    if k < 0:
        raise ValueError("order k must be >= 0")
    prev = 1.0
    if n == 0:
        return prev
    cur = k + 1.0 - x
    for m in range(1, n):
        prev, cur = cur, ((2.0 * m + k + 1.0 - x) * cur - (m + k) * prev) / (m + 1.0)
    return cur


def bessel_j(k, x):
    """Bessel function of the first kind, integer order.

    Evaluated by Miller's downward recurrence, normalized with
    J_0(x) + 2 * sum_m J_{2m}(x) = 1.  Index and argument reflections use
    J_{-k} = (-1)^k J_k and J_k(-x) = (-1)^k J_k(x).
    """
    k = int(k)
    sign = 1.0
    if k < 0:
        k = -k
        if k % 2:
            sign = -sign
    if x < 0:
        x = -x
        if k % 2:
            sign = -sign
    if x == 0.0:
        return sign if k == 0 else 0.0

    # Start the recurrence far enough above both the order and the argument
    # that the unwanted solution has decayed below double precision.
    start = max(k, int(x)) + 52
    start += start % 2
    f = [0.0] * (start + 2)
    f[start] = 1e-30
    for m in range(start, 0, -1):
        f[m - 1] = (2.0 * m / x) * f[m] - f[m + 1]
        if abs(f[m - 1]) > 1e250:
            for i in range(m - 1, start + 2):
                f[i] *= 1e-250
    norm = f[0] + 2.0 * math.fsum(f[2:start:2])
    return sign * f[k] / norm


def bessel_i(k, x):
    """Modified Bessel function of the first kind, integer order.

    Ascending series; every term is positive for x > 0 so there is no
    cancellation.  I_{-k} = I_k and I_k(-x) = (-1)^k I_k(x).
    """
    k = abs(int(k))
    sign = 1.0
    if x < 0:
        x = -x
        if k % 2:
            sign = -sign
    half = 0.5 * x
    term = 1.0
    for j in range(1, k + 1):
        term *= half / j
    total = term
    m = 1
    while term > 0.0:
        term *= half * half / (m * (m + k))
        total += term
        if term <= 1e-18 * total or m > 1000:
            break
        m += 1
    return sign * total
