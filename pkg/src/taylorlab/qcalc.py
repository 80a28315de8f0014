"""Scalar q-calculus primitives and Euler's function.

All routines work in double precision.  Functions that require ``q > 0``
(brackets, factorials, binomials) raise ``ValueError`` otherwise; overflow to
infinity is reported as ``OverflowError`` rather than returned silently.
"""

from __future__ import annotations

import math
from typing import Callable, List


def _finite(value: float, what: str) -> float:
    if math.isinf(value) or math.isnan(value):
        raise OverflowError(f"{what} overflows double precision")
    return value


def _check_base(q: float) -> None:
    if not q > 0:
        raise ValueError(f"q must be positive, got {q!r}")


def q_bracket(n: int, q: float) -> float:
    """Return the q-bracket ``[n]_q = (q**n - 1) / (q - 1)``.

    At ``q == 1`` the limit ``n`` is returned.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    _check_base(q)
    if q == 1.0:
        return float(n)
    if n == 0:
        return 0.0
    try:
        if abs(q - 1.0) < 0.25:
            # expm1 keeps the quotient accurate as q approaches 1
            lq = math.log(q)
            return _finite(math.expm1(n * lq) / math.expm1(lq), f"[{n}]_q")
        # the direct form is exact for integer q while q**n is representable
        return _finite((q ** n - 1.0) / (q - 1.0), f"[{n}]_q")
    except OverflowError:
        raise OverflowError(f"[{n}]_q overflows for q={q}") from None


def q_factorial(n: int, q: float) -> float:
    """Return ``[n]_q! = [1]_q [2]_q ... [n]_q`` (empty product is 1)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    out = 1.0
    for k in range(1, n + 1):
        out *= q_bracket(k, q)
    return _finite(out, f"[{n}]_q!")


def q_binomial(n: int, k: int, q: float) -> float:
    """Gaussian binomial coefficient as a running product of bracket ratios.

    Uses the shorter of ``k`` and ``n - k`` factors, so the result is
    symmetric under ``k -> n - k`` and avoids forming large factorials.
    """
    if n < 0 or k < 0:
        raise ValueError("n and k must be nonnegative")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    _check_base(q)
    k = min(k, n - k)
    out = 1.0
    for i in range(1, k + 1):
        out *= q_bracket(n + 1 - i, q) / q_bracket(i, q)
    return _finite(out, "q-binomial")


def q_pochhammer(a: float, q: float, n: int) -> float:
    """Finite q-Pochhammer symbol ``(a; q)_n = prod_{k<n} (1 - a q**k)``."""
    if n < 0:
        raise ValueError("n must be a nonnegative integer")
    out = 1.0
    qk = 1.0
    for _ in range(n):
        out *= 1.0 - a * qk
        qk *= q
    return _finite(out, "q-Pochhammer symbol")


def q_pochhammer_expand(a: float, q: float, n: int) -> List[float]:
    """Monomial coefficients of ``x -> (x; q)_n``.

    ``c[k] = binom(n, k)_q * q**(k(k-1)/2) * (-1)**k``.  The argument ``a`` is
    accepted for signature symmetry with :func:`q_pochhammer`; the
    coefficients do not depend on it.
    """
    del a
    if n < 0:
        raise ValueError("n must be a nonnegative integer")
    coeffs = []
    for k in range(n + 1):
        c = q_binomial(n, k, q) * q ** (k * (k - 1) / 2)
        coeffs.append(-c if k % 2 else c)
    return coeffs


def euler_phi_error_bound(q: float, n: int) -> float:
    """Truncation bound ``2 q**((n+1)(3n+2)/2)`` of the pentagonal series."""
    if not 0 < q < 1:
        raise ValueError("the pentagonal bound needs 0 < q < 1")
    if n < 0:
        raise ValueError("n must be nonnegative")
    return 2.0 * q ** ((n + 1) * (3 * n + 2) / 2)


def pentagonal_partial_sum(q: float, n: int) -> float:
    """``1 + sum_{m=1}^{n} (-1)**m (q**(m(3m-1)/2) + q**(m(3m+1)/2))``."""
    total = 1.0
    for m in range(1, n + 1):
        term = q ** (m * (3 * m - 1) // 2) + q ** (m * (3 * m + 1) // 2)
        total += -term if m % 2 else term
    return total


def euler_phi(q: float, tol: float = 1e-15) -> float:
    """Euler's function ``phi(q) = prod_{k>=1} (1 - q**k)`` for ``0 <= q < 1``.

    Evaluated by the pentagonal number series, stopping at the first ``n``
    whose error bound ``2 q**((n+1)(3n+2)/2)`` is at most ``tol``.
    """
    if not 0 <= q < 1:
        raise ValueError(f"euler_phi needs 0 <= q < 1, got {q!r}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if q == 0:
        return 1.0
    n = 0
    while euler_phi_error_bound(q, n) > tol:
        n += 1
    return pentagonal_partial_sum(q, n)


def q_derivative(f: Callable[[float], float], q: float, x: float) -> float:
    """Jackson q-derivative ``(f(qx) - f(x)) / (qx - x)``."""
    if q == 1:
        raise ValueError("q-derivative is undefined at q == 1")
    if x == 0:
        raise ValueError("q-derivative is undefined at x == 0")
    return (f(q * x) - f(x)) / (q * x - x)
