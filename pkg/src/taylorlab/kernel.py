"""Moment kernels built from dilates of a compactly supported bump.

Every kernel here is an even function of the form

    phi(x) = sum_k c_k * phi0(x / q**k)

where ``phi0`` equals 1 on ``[-eps, eps]``, a polynomial bridge ``eta`` on
``eps < |x| <= q*eps`` and 0 beyond.  Because dilate ``k`` is 1 on every shell
``(eps q**L, eps q**(L+1)]`` with ``L < k`` and 0 for ``L > k``, the kernel on
shell ``L`` reduces to ``c_L * eta(|x| / q**L) + T_L`` with the tail
``T_L = sum_{k > L} c_k``.  That shell form is what gets stored and evaluated,
so evaluation is exact up to rounding and all integrals of the kernel against
monomials have closed forms.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, asdict
from math import comb
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .qcalc import euler_phi
from .quad import integrate

FORMAT_TAG = "taylorlab-kernel"
FORMAT_VERSION = 1

MAX_SMOOTHNESS = 10


def lcm_upto(n: int) -> int:
    """``v_n = lcm(1, ..., n)``."""
    if n < 1:
        raise ValueError("order must be a positive integer")
    return math.lcm(*range(1, n + 1))


def bridge_coefficients(q: float, eps: float, smoothness: int = 1,
                        degree: Optional[int] = None) -> np.ndarray:
    """Monomial coefficients (in ``t``) of the Hermite bridge on ``[eps, q eps]``.

    The bridge is 1 at ``eps`` and 0 at ``q eps`` with the first
    ``smoothness`` derivatives vanishing at both ends, i.e. the
    minimal-degree (``2 * smoothness + 1``) smoothstep.  For ``q=2``,
    ``eps=1/4``, ``smoothness=1`` this is ``128t^3 - 144t^2 + 48t - 4``.
    """
    if not q > 1:
        raise ValueError("q must exceed 1")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if smoothness < 0 or smoothness > MAX_SMOOTHNESS:
        raise ValueError(
            f"smoothness must lie in [0, {MAX_SMOOTHNESS}], got {smoothness}")
    k = smoothness
    if degree is not None and degree < 2 * k + 1:
        raise ValueError(
            f"no bridge of degree {degree} is C^{k}; need degree >= {2 * k + 1}")
    # smoothstep S_k(u) = u^{k+1} sum_i C(k+i, i) (1-u)^i
    s = np.zeros(1)
    one_minus_u = np.array([1.0, -1.0])
    for i in range(k + 1):
        s = P.polyadd(s, comb(k + i, i) * P.polypow(one_minus_u, i))
    s = P.polymul(s, P.polypow([0.0, 1.0], k + 1))
    eta_u = P.polysub([1.0], s)
    # u = (t - eps) / ((q - 1) eps)
    width = (q - 1.0) * eps
    u_of_t = np.array([-eps / width, 1.0 / width])
    out = np.zeros(1)
    for power, c in enumerate(eta_u):
        out = P.polyadd(out, c * P.polypow(u_of_t, power))
    out = P.polytrim(out, tol=0) if np.any(out) else out
    # snap to integers when the data are exactly representable (the reference cubic)
    rounded = np.round(out)
    if np.all(np.abs(out - rounded) <= 1e-9 * np.maximum(1.0, np.abs(out))):
        out = rounded
    return out


def plateau_product(q: float, m: int) -> float:
    """``prod_{k=1}^{m} (1 - q**-k)``."""
    out = 1.0
    for k in range(1, m + 1):
        out *= 1.0 - q ** (-k)
    return out


def phi_n_coefficients(q, n: int):
    """Dilate coefficients ``(q**-n; q)_k / (q; q)_k`` of ``phi_n``.

    Generic over the number type of ``q`` (float or ``mpmath.mpf``).
    """
    coeffs = []
    num = q ** 0
    den = q ** 0
    qk = q ** 0
    qinv_n = 1 / q ** n
    for k in range(n + 1):
        coeffs.append(num / den)
        num = num * (1 - qinv_n * qk)
        qk = qk * q
        den = den * (1 - qk)
    return coeffs


def psi_coefficients(q, tol):
    """Dilate coefficients ``1 / (q; q)_k`` of the limit kernel, truncated.

    Stops once the remaining terms sum to less than ``tol`` in magnitude.
    """
    coeffs = [q ** 0]
    den = q ** 0
    qk = q ** 0
    while True:
        qk = qk * q
        den = den * (1 - qk)
        c = 1 / den
        if abs(c) * 2 < tol:   # |terms| decay faster than geometric ratio 1/2
            break
        coeffs.append(c)
    return coeffs


def _tails(coeffs: np.ndarray) -> np.ndarray:
    """``T_L = sum_{k > L} c_k``, accumulated from the small end."""
    rev = np.cumsum(coeffs[::-1])[::-1]
    return np.append(rev[1:], 0.0)


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of a moment kernel family and its Taylorlet assembly."""

    q: float = 2.0
    eps: float = 0.25
    smoothness: int = 1
    steps: int = 10
    order: int = 2
    t0: float = 0.125
    moments: Optional[int] = None
    eta: tuple = field(default=None)

    def __post_init__(self):
        if not self.q > 1:
            raise ValueError(f"q must exceed 1, got {self.q}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        vn = lcm_upto(self.order)
        if self.moments is None:
            object.__setattr__(self, "moments", self.steps // vn)
        if self.moments < 0 or self.moments * vn > self.steps:
            raise ValueError(
                f"{self.moments} moments of order {self.order} need "
                f"steps >= {self.moments * vn}, got {self.steps}")
        if self.eta is None:
            eta = bridge_coefficients(self.q, self.eps, self.smoothness)
            object.__setattr__(self, "eta", tuple(float(c) for c in eta))
        else:
            object.__setattr__(self, "eta", tuple(float(c) for c in self.eta))
            self._check_eta()

    def _check_eta(self):
        eta = np.asarray(self.eta)
        lo, hi = self.eps, self.q * self.eps
        scale = max(1.0, float(np.sum(np.abs(eta) * hi ** np.arange(eta.size))))
        if abs(P.polyval(lo, eta) - 1) > 1e-9 * scale or \
                abs(P.polyval(hi, eta)) > 1e-9 * scale:
            raise ValueError("eta must satisfy eta(eps) = 1 and eta(q eps) = 0")
        d = eta
        for _ in range(self.smoothness):
            d = P.polyder(d)
            if abs(P.polyval(lo, d)) > 1e-9 * scale or \
                    abs(P.polyval(hi, d)) > 1e-9 * scale:
                raise ValueError(
                    f"eta derivatives must vanish at both ends up to order "
                    f"{self.smoothness}")

    @property
    def vn(self) -> int:
        return lcm_upto(self.order)

    @property
    def shift_limit(self) -> float:
        """Largest admissible ``|t0|``: the plateau half-width ``eps**v_n``."""
        return self.eps ** self.vn


class MomentKernel:
    """Even kernel in shell form; see the module docstring.

    ``level`` is the recursion depth ``m`` of ``phi_m``; ``None`` marks the
    (truncated) limit kernel ``psi``.
    """

    def __init__(self, q: float, eps: float, eta: Sequence[float],
                 coeffs: Sequence[float], plateau_value: float,
                 level: Optional[int], tails: Optional[Sequence[float]] = None):
        self.q = float(q)
        self.eps = float(eps)
        self.eta = np.asarray(eta, dtype=float)
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.tails = (_tails(self.coeffs) if tails is None
                      else np.asarray(tails, dtype=float))
        self.plateau_value = float(plateau_value)
        self.level = level
        nshell = self.coeffs.size
        self.scales = self.q ** np.arange(nshell, dtype=float)
        self.bounds = self.eps * self.q ** np.arange(nshell + 1, dtype=float)
        for arr in (self.coeffs, self.tails, self.eta, self.scales):
            arr.setflags(write=False)

    @property
    def support_radius(self) -> float:
        return float(self.bounds[-1])

    @property
    def shells(self) -> int:
        return self.coeffs.size

    def __repr__(self):
        lvl = "psi" if self.level is None else f"phi_{self.level}"
        return (f"MomentKernel({lvl}, q={self.q:g}, eps={self.eps:g}, "
                f"plateau={self.plateau_value:.12g})")

    def __call__(self, x):
        ax = np.abs(np.asarray(x, dtype=float))
        idx = np.searchsorted(self.bounds, ax, side="left")
        out = np.zeros_like(ax)
        plateau = idx == 0
        out[plateau] = self.plateau_value
        inside = (idx > 0) & (idx <= self.shells)
        if np.any(inside):
            L = idx[inside] - 1
            z = ax[inside] / self.scales[L]
            out[inside] = self.coeffs[L] * P.polyval(z, self.eta) + self.tails[L]
        return out if out.ndim else float(out)

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "q": self.q, "eps": self.eps, "eta": self.eta.tolist(),
            "level": self.level, "coeffs": self.coeffs.tolist(),
            "tails": self.tails.tolist(), "plateau_value": self.plateau_value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MomentKernel":
        return cls(d["q"], d["eps"], d["eta"], d["coeffs"], d["plateau_value"],
                   d["level"], d["tails"])

    # -- extended precision ------------------------------------------

    def mp_evaluator(self, dps: int = 40):
        """Return ``(mp, f)`` where ``f`` evaluates the kernel in ``mpmath``.

        Coefficients are recomputed from ``q`` in extended precision rather
        than converted from their rounded double values, which matters when
        high-order moments cancel over many orders of magnitude.
        """
        import mpmath

        ctx = mpmath.mp.clone()
        ctx.dps = dps
        q = ctx.mpf(self.q)
        if self.level is None:
            coeffs = psi_coefficients(q, ctx.mpf(2.0) ** (-int(dps * 3.3)))
            coeffs = coeffs[:self.shells]
            plateau = ctx.fsum(coeffs)
        else:
            coeffs = phi_n_coefficients(q, self.level)
            plateau = ctx.fprod(1 - q ** (-k) for k in range(1, self.level + 1))
        coeffs = coeffs[:self.shells]
        tails = [ctx.fsum(coeffs[L + 1:]) for L in range(len(coeffs))]
        eps = ctx.mpf(self.eps)
        eta = [ctx.mpf(c) for c in self.eta]
        bounds = [eps * q ** k for k in range(len(coeffs) + 1)]

        def f(x):
            ax = abs(x)
            if ax <= eps:
                return plateau
            for L in range(len(coeffs)):
                if ax <= bounds[L + 1]:
                    z = ax / q ** L
                    return coeffs[L] * ctx.polyval(eta[::-1], z) + tails[L]
            return ctx.zero

        return ctx, f


def build_bump(q: float = 2.0, eps: float = 0.25, smoothness: int = 1,
               degree: Optional[int] = None) -> MomentKernel:
    """Level-0 kernel ``phi0``: 1 on ``[-eps, eps]``, bridge, then 0."""
    eta = bridge_coefficients(q, eps, smoothness, degree)
    return MomentKernel(q, eps, eta, [1.0], 1.0, level=0)


def recurse(kernel: MomentKernel, target_level: int) -> MomentKernel:
    """Apply ``phi_{m+1} = phi_m - q**-(m+1) phi_m(. / q)`` up to ``target_level``."""
    if kernel.level is None:
        raise ValueError("cannot recurse from the limit kernel")
    if target_level < kernel.level:
        raise ValueError("target_level must not be below the current level")
    c = list(kernel.coeffs)
    plateau = kernel.plateau_value
    q = kernel.q
    for m in range(kernel.level, target_level):
        factor = q ** (-(m + 1))
        c = [c[0]] + [c[k] - factor * c[k - 1] for k in range(1, len(c))] \
            + [-factor * c[-1]]
        plateau *= 1.0 - factor
    return MomentKernel(q, kernel.eps, kernel.eta, c, plateau, target_level)


def _spec_eta(spec_or_bump):
    if isinstance(spec_or_bump, KernelSpec):
        s = spec_or_bump
        return s.q, s.eps, np.asarray(s.eta)
    k = spec_or_bump
    return k.q, k.eps, k.eta


def explicit_phi_n(spec, n: int) -> MomentKernel:
    """``phi_n`` from the closed q-Pochhammer expansion of the recursion.

    ``spec`` is a :class:`KernelSpec` or a level-0 :class:`MomentKernel`.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    q, eps, eta = _spec_eta(spec)
    return MomentKernel(q, eps, eta, phi_n_coefficients(q, n),
                        plateau_product(q, n), level=n)


def explicit_psi(spec, tol: float = 1e-12) -> MomentKernel:
    """The limit kernel ``psi`` with infinitely many vanishing moments.

    The plateau value is Euler's function at ``1/q``; on shell ``L`` the
    value is ``eta(|x|/q**L) / (q;q)_L`` plus the tail of ``1/(q;q)_k``,
    truncated once the remaining terms fall below ``tol``.
    """
    q, eps, eta = _spec_eta(spec)
    coeffs = psi_coefficients(q, tol)
    return MomentKernel(q, eps, eta, coeffs, euler_phi(1.0 / q, tol),
                        level=None)


def moment_count_bound(kernel: MomentKernel) -> float:
    """Lower bound ``((q-1)/q)**(q/(q-1))`` on the plateau of ``psi``."""
    q = kernel.q
    return ((q - 1) / q) ** (q / (q - 1))


def half_line_moment(kernel: MomentKernel, ell: int, side: int = 1,
                     abs_tol: float = 1e-14, rel_tol: float = 1e-11):
    """Quadrature of ``int_{R+-} kernel(x) x**ell dx``.

    Returns ``(value, absolute)`` where ``absolute`` is the integral of
    ``|kernel(x) x**ell|`` over the same half-line, the natural scale for
    judging whether the moment vanishes.
    """
    pts = kernel.bounds
    R = kernel.support_radius
    f = lambda x: kernel(x) * x ** ell
    fa = lambda x: np.abs(kernel(x)) * x ** ell
    absval = integrate(fa, 0.0, R, abs_tol, rel_tol, points=pts).value
    # a vanishing moment has no relative accuracy of its own; judge it
    # against the size of the integrand instead
    val = integrate(f, 0.0, R, max(abs_tol, rel_tol * absval), rel_tol,
                    points=pts).value
    if side < 0 and ell % 2:
        val = -val
    return val, absval


class RootKernel:
    """``g(t) = kernel(|t - t0| ** (1 / v_n))``.

    With ``t0 = 0`` this is the plain root composition; a nonzero ``t0``
    gives the restrictive shifted kernel.
    """

    def __init__(self, kernel: MomentKernel, order: int, t0: float = 0.0,
                 moments: Optional[int] = None):
        self.kernel = kernel
        self.order = order
        self.vn = lcm_upto(order)
        self.t0 = float(t0)
        if moments is None:
            moments = (kernel.level // self.vn if kernel.level is not None
                       else None)
        self.moments = moments

    @property
    def plateau_value(self) -> float:
        return self.kernel.plateau_value

    @property
    def reach(self) -> float:
        """Half-width of the support about ``t0``."""
        return self.kernel.support_radius ** self.vn

    @property
    def breakpoints(self) -> np.ndarray:
        b = self.kernel.bounds ** self.vn
        return np.concatenate([self.t0 - b[::-1], self.t0 + b])

    def __call__(self, t):
        d = np.abs(np.asarray(t, dtype=float) - self.t0)
        return self.kernel(d ** (1.0 / self.vn))

    def gtable(self, j: int = 0) -> "GTable":
        return GTable.from_kernel(self.kernel, self.vn, self.t0, j,
                                  moments=self.moments)


def compose_root(kernel: MomentKernel, order: int) -> RootKernel:
    """``g = kernel o |.|^(1/v_n)``; M*v_n half-line moments give M of order n."""
    if kernel.level is not None and kernel.level % lcm_upto(order):
        warnings.warn(
            f"kernel level {kernel.level} is not a multiple of "
            f"v_{order} = {lcm_upto(order)}; some moments of order "
            f"{order} will not vanish", stacklevel=2)
    return RootKernel(kernel, order)


def restrictive_g(spec: KernelSpec, strict: bool = True) -> RootKernel:
    """Shifted root kernel ``phi_{M v_n}(|t - t0|^(1/v_n))``.

    ``strict`` enforces ``0 < |t0| < eps**v_n``, the range in which the shift
    stays inside the plateau and the half-line moments equal
    ``c t0**(m+1) / (m+1)``.  With ``strict=False`` larger shifts are
    accepted with a warning: the vanishing moments survive but the half-line
    moments no longer follow that formula.
    """
    lim = spec.shift_limit
    if spec.t0 == 0:
        raise ValueError("t0 must be nonzero for a restrictive kernel")
    if abs(spec.t0) >= lim:
        msg = (f"|t0| = {abs(spec.t0):g} is not below eps**v_n = {lim:g}; "
               f"the shift leaves the kernel plateau")
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, stacklevel=2)
    level = spec.moments * spec.vn
    kern = explicit_phi_n(spec, level)
    return RootKernel(kern, spec.order, spec.t0, spec.moments)


def tabulate_G(g: RootKernel, j: int = 0, tol: float = 1e-9) -> "GTable":
    """Partial-moment tables ``G^(k)(w) = int_w^inf x**k g(x) dx``, k <= j.

    The tables are exact piecewise closed forms, so ``tol`` only bounds
    rounding and is checked, not used for refinement.
    """
    del tol
    return g.gtable(j)


class GTable:
    """Cumulative partial moments of a root kernel.

    For ``k < M`` (full-line moments of ``g`` vanish) and ``r = |w-t0|^(1/v)``,
    ``s = sign(w - t0)``:

        G^(k)(w) = s * v * sum_l C(k, l) t0**(k-l) s**l J_{(l+1)v-1}(r)

    with ``J_p(r) = int_r^inf phi(y) y**p dy`` evaluated shell by shell.
    ``G^(0)`` is odd about ``t0`` and vanishes there.
    """

    def __init__(self, vn: int, t0: float, j: int, q: float, eps: float,
                 eta, coeffs, tails, plateau_value: float,
                 shell_cumulative: dict):
        self.vn = vn
        self.t0 = float(t0)
        self.j = j
        self.q = q
        self.eps = eps
        self.eta = np.asarray(eta, dtype=float)
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.tails = np.asarray(tails, dtype=float)
        self.plateau_value = plateau_value
        n = self.coeffs.size
        self.scales = q ** np.arange(n, dtype=float)
        self.bounds = eps * q ** np.arange(n + 1, dtype=float)
        # cumulative[p][L + 1] = sum of full-shell integrals over shells > L
        self.cumulative = {int(p): np.asarray(v, dtype=float)
                           for p, v in shell_cumulative.items()}
        self._antideriv = {p: P.polyint(np.concatenate([np.zeros(p), self.eta]))
                           for p in self.cumulative}

    @property
    def powers(self):
        return [(l + 1) * self.vn - 1 for l in range(self.j + 1)]

    @property
    def breakpoints(self) -> np.ndarray:
        b = self.bounds ** self.vn
        return np.concatenate([self.t0 - b[::-1], self.t0 + b])

    @property
    def reach(self) -> float:
        return float(self.bounds[-1] ** self.vn)

    @classmethod
    def from_kernel(cls, kernel: MomentKernel, vn: int, t0: float, j: int,
                    moments: Optional[int] = None) -> "GTable":
        if moments is not None and j >= moments:
            raise ValueError(
                f"exponent j={j} needs at least j+1 vanishing moments of "
                f"order n, kernel has {moments}")
        powers = [(l + 1) * vn - 1 for l in range(j + 1)]
        q, eps, eta = kernel.q, kernel.eps, kernel.eta
        c, T = kernel.coeffs, kernel.tails
        b = kernel.bounds
        L = np.arange(c.size)
        cumulative = {}
        for p in powers:
            F = P.polyint(np.concatenate([np.zeros(p), eta]))
            Ep = P.polyval(q * eps, F) - P.polyval(eps, F)
            full = (c * q ** (L * (p + 1.0)) * Ep
                    + T * (b[1:] ** (p + 1) - b[:-1] ** (p + 1)) / (p + 1))
            # outer sums accumulated from the (small) outside inwards
            outer = np.append(np.cumsum(full[::-1])[::-1], 0.0)
            cumulative[p] = outer
        return cls(vn, t0, j, q, eps, eta, c, T, kernel.plateau_value,
                   cumulative)

    def J(self, r, p: int) -> np.ndarray:
        """``int_r^inf phi(y) y**p dy`` for ``r >= 0``."""
        r = np.asarray(r, dtype=float)
        F = self._antideriv[p]
        cum = self.cumulative[p]
        idx = np.searchsorted(self.bounds, r, side="left")
        out = np.zeros_like(r)
        pl = idx == 0
        if np.any(pl):
            rp = r[pl]
            out[pl] = (self.plateau_value
                       * (self.eps ** (p + 1) - rp ** (p + 1)) / (p + 1)
                       + cum[0])
        ins = (idx > 0) & (idx <= self.coeffs.size)
        if np.any(ins):
            L = idx[ins] - 1
            rr = r[ins]
            z = rr / self.scales[L]
            top = P.polyval(self.q * self.eps, F)
            part = (self.coeffs[L] * self.scales[L] ** (p + 1)
                    * (top - P.polyval(z, F))
                    + self.tails[L] * (self.bounds[L + 1] ** (p + 1)
                                       - rr ** (p + 1)) / (p + 1))
            out[ins] = part + cum[L + 1]
        return out

    def G(self, w, k: int = 0) -> np.ndarray:
        """``int_w^inf x**k g(x) dx``."""
        if k > self.j:
            raise ValueError(f"table built for k <= {self.j}")
        w = np.asarray(w, dtype=float)
        d = w - self.t0
        s = np.where(d >= 0, 1.0, -1.0)
        r = np.abs(d) ** (1.0 / self.vn)
        acc = np.zeros_like(d)
        for l in range(k + 1):
            p = (l + 1) * self.vn - 1
            acc = acc + comb(k, l) * self.t0 ** (k - l) * s ** l * self.J(r, p)
        return s * self.vn * acc

    def combined(self, w, j: Optional[int] = None) -> np.ndarray:
        """``int_w^inf (x - w)**j g(x) dx`` via binomial expansion."""
        j = self.j if j is None else j
        w = np.asarray(w, dtype=float)
        if j == 0:
            return self.G(w, 0)
        out = np.zeros_like(w)
        for k in range(j + 1):
            out = out + comb(j, k) * (-w) ** (j - k) * self.G(w, k)
        return out

    __call__ = combined

    def to_dict(self) -> dict:
        return {
            "vn": self.vn, "t0": self.t0, "j": self.j,
            "breakpoints": self.breakpoints.tolist(),
            "shell_cumulative": {str(p): v.tolist()
                                 for p, v in self.cumulative.items()},
        }


@dataclass
class TaylorletKernel:
    """A restrictive root kernel bundled with its spec and G tables.

    A kernel without vanishing moments (``moments == 0``) carries no table.
    """

    spec: KernelSpec
    g: RootKernel
    table: Optional[GTable]

    @classmethod
    def build(cls, spec: KernelSpec, j: int = 0, strict: bool = True):
        g = restrictive_g(spec, strict=strict)
        return cls(spec, g, None if spec.moments == 0 else g.gtable(j))

    def to_json(self) -> str:
        spec = asdict(self.spec)
        spec["eta"] = list(spec["eta"])
        return json.dumps({
            "format": FORMAT_TAG, "version": FORMAT_VERSION,
            "spec": spec,
            "kernel": self.g.kernel.to_dict(),
            "gtable": None if self.table is None else self.table.to_dict(),
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "TaylorletKernel":
        d = json.loads(text)
        if d.get("format") != FORMAT_TAG:
            raise ValueError("not a taylorlab kernel file")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported kernel file version {d.get('version')}")
        s = d["spec"]
        spec = KernelSpec(q=s["q"], eps=s["eps"], smoothness=s["smoothness"],
                          steps=s["steps"], order=s["order"], t0=s["t0"],
                          moments=s["moments"], eta=tuple(s["eta"]))
        kern = MomentKernel.from_dict(d["kernel"])
        gt = d["gtable"]
        g = RootKernel(kern, spec.order, spec.t0, spec.moments)
        if gt is None:
            return cls(spec, g, None)
        table = GTable(gt["vn"], gt["t0"], gt["j"], kern.q, kern.eps, kern.eta,
                       kern.coeffs, kern.tails, kern.plateau_value,
                       gt["shell_cumulative"])
        return cls(spec, g, table)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "TaylorletKernel":
        with open(path) as fh:
            return cls.from_json(fh.read())


def reference_taylorlet(j: int = 0) -> TaylorletKernel:
    """The experimental Taylorlet factor ``phi_10(sqrt|t - 1/8|)`` at q=2.

    Its shift ``1/8`` exceeds ``eps**2 = 1/16``, so it is built in relaxed
    mode (see :func:`restrictive_g`).
    """
    spec = KernelSpec(q=2.0, eps=0.25, smoothness=1, steps=10, order=2,
                      t0=0.125, moments=5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return TaylorletKernel.build(spec, j=j, strict=False)


def shifted_half_moment(g: RootKernel, m: int, dps: int = 40) -> float:
    """Quadrature of ``int_0^inf g(t) t**m dt`` in extended precision.

    The integrand spans many orders of magnitude beyond the support core and
    the result arises from near-total cancellation (for the default kernel
    and ``m = 4`` the condition number is ~1e13), so double precision cannot
    resolve it.  The kernel is re-evaluated in ``mpmath`` with
    Gauss-Legendre on every smooth piece between breakpoints.
    """
    ctx, phi = g.kernel.mp_evaluator(dps)
    v = g.vn
    t0 = ctx.mpf(g.t0)
    root = lambda d: ctx.root(d, v) if d > 0 else ctx.zero
    f = lambda t: phi(root(abs(t - t0))) * t ** m
    bounds = [ctx.mpf(g.kernel.eps) * ctx.mpf(g.kernel.q) ** k
              for k in range(g.kernel.shells + 1)]
    pts = {ctx.zero, t0}
    for b in bounds:
        for p in (t0 - b ** v, t0 + b ** v):
            if p > 0:
                pts.add(p)
    pts = sorted(pts)
    total = ctx.zero
    for lo, hi in zip(pts[:-1], pts[1:]):
        total += ctx.quad(f, [lo, hi], method="gauss-legendre")
    return float(total)
