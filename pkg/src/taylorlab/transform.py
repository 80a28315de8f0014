"""Taylorlet transform of boundary-curve signals via the 1-D reduction.

For ``f(x) = (x1 - c(x2))**j * 1[x1 >= c(x2)]`` the inner ``x1`` integral of
the tensor Taylorlet collapses onto the partial-moment table of the kernel,

    T f(a, s, t) = a**(j+1) * int G_j((c(u) - S(u)) / a) h((u - t) / a**alpha) du

with ``S(u) = sum_k s_k / k! (u - t)**k`` and ``G_j(w) = int_w^inf (x-w)**j g``.
Only this single integral in ``u`` is evaluated numerically.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .kernel import TaylorletKernel, reference_taylorlet
from .quad import QuadratureError, integrate, integrate_decaying

THREADS_ENV = "TAYLORLAB_THREADS"


def shear_poly(s: Sequence[float], t: float, x2):
    """``sum_k s_k / k! * (x2 - t)**k`` (Horner form)."""
    x2 = np.asarray(x2, dtype=float)
    d = x2 - t
    out = np.zeros_like(d)
    for k in range(len(s) - 1, -1, -1):
        out = out * d + s[k] / math.factorial(k)
    return out if out.ndim else float(out)


def gaussian(x):
    return np.exp(-np.asarray(x) ** 2)


# Boundary curves live at module level so signals stay picklable.

def _ball_lower(u):
    return -np.sqrt(np.clip(1.0 - np.asarray(u) ** 2, 0.0, None))


def _ball_upper(u):
    return np.sqrt(np.clip(1.0 - np.asarray(u) ** 2, 0.0, None))


class ExprBoundary:
    """Boundary given as a numpy expression in ``x`` (e.g. ``"0.5*x**2"``)."""

    _names = {k: getattr(np, k) for k in (
        "sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh",
        "arctan", "abs", "pi", "e")}

    def __init__(self, expr: str):
        self.expr = expr
        self._code = compile(expr, "<boundary>", "eval")
        for name in self._code.co_names:
            if name not in self._names and name != "x":
                raise ValueError(f"unknown name {name!r} in boundary expression")
        self(np.zeros(1))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = eval(self._code, {"__builtins__": {}}, dict(self._names, x=x))
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()

    def __getstate__(self):
        return {"expr": self.expr}

    def __setstate__(self, state):
        self.__init__(state["expr"])

    def __repr__(self):
        return f"ExprBoundary({self.expr!r})"


@dataclass
class SignalModel:
    """Signal singular along one curve (half-space) or two curves (band).

    A band is ``1[lower <= x1 < upper]`` for ``x2`` inside ``domain`` and
    zero elsewhere.  ``taylor`` optionally holds the true Taylor
    coefficients ``(c(0), c'(0), c''(0), ...)`` at ``x2 = 0``.
    """

    kind: str
    boundary: Callable
    upper: Optional[Callable] = None
    side: int = 1
    j: int = 0
    domain: Optional[tuple] = None
    name: str = "custom"
    taylor: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("half-space", "band", "custom"):
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.kind == "band" and self.upper is None:
            raise ValueError("a band signal needs an upper boundary")
        if self.side not in (1, -1):
            raise ValueError("side must be +1 or -1")
        if self.j < 0:
            raise ValueError("exponent j must be nonnegative")


def builtin_signal(name: str) -> SignalModel:
    """The three test signals: ``sin``, ``exp`` and the unit ``ball``."""
    if name == "sin":
        return SignalModel("half-space", np.sin, name="sin",
                           taylor=(0.0, 1.0, 0.0, -1.0))
    if name == "exp":
        return SignalModel("half-space", np.exp, name="exp",
                           taylor=(1.0, 1.0, 1.0, 1.0))
    if name == "ball":
        return SignalModel("band", _ball_lower, upper=_ball_upper,
                           domain=(-1.0, 1.0), name="ball")
    raise ValueError(f"unknown signal {name!r}; expected sin, exp or ball")


def expression_signal(expr: str, side: int = 1, j: int = 0) -> SignalModel:
    return SignalModel("half-space", ExprBoundary(expr), side=side, j=j,
                       name=f"expr:{expr}")


@dataclass
class TaylorletSpec:
    """Tensor Taylorlet ``g (x) h`` with tabulated partial moments of ``g``."""

    kernel: TaylorletKernel
    h: Callable = gaussian
    h_width: float = 9.0

    @classmethod
    def default(cls, j: int = 0) -> "TaylorletSpec":
        return cls(reference_taylorlet(j))

    @property
    def order(self) -> int:
        return self.kernel.spec.order

    @property
    def moments(self) -> int:
        return self.kernel.spec.moments

    def restrictiveness(self) -> dict:
        """Numerical restrictiveness data: ``g(0)``, ``int h``, ``int_0^inf g``."""
        g = self.kernel.g
        hint = integrate(self.h, -self.h_width, self.h_width).value
        return {"g0": float(g(0.0)), "h_integral": hint,
                "half_moment0": float(self.kernel.table.G(np.array([0.0]))[0])}


@dataclass(frozen=True)
class ShearPoint:
    a: float
    alpha: float
    s: tuple
    t: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("scale a must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        object.__setattr__(self, "s", tuple(float(v) for v in self.s))


def _boundary_term(tau: TaylorletSpec, curve, j: int, p: ShearPoint,
                   abs_tol: float, rel_tol: float, domain=None) -> float:
    table = tau.kernel.table
    a, alpha, s, t = p.a, p.alpha, p.s, p.t
    width = a ** alpha
    h = tau.h

    if domain is None:
        def f(u):
            w = (curve(u) - shear_poly(s, t, u)) / a
            return table.combined(w, j) * h((u - t) / width)
    else:
        lo, hi = domain

        def f(u):
            out = np.zeros_like(u)
            m = (u > lo) & (u < hi)
            if np.any(m):
                um = u[m]
                w = (curve(um) - shear_poly(s, t, um)) / a
                out[m] = table.combined(w, j) * h((um - t) / width)
            return out

    points = None if domain is None else list(domain)
    res = integrate_decaying(f, t, width, abs_tol * width, rel_tol,
                             width=tau.h_width, points=points)
    return a ** (j + 1) * res.value


def transform_point(tau: TaylorletSpec, signal: SignalModel, p: ShearPoint,
                    abs_tol: float = 1e-10, rel_tol: float = 1e-8,
                    scaled: bool = False) -> float:
    """Taylorlet transform ``T f(a, s, t)`` of a boundary-curve signal.

    ``abs_tol`` refers to the integral in the window variable
    ``(u - t) / a**alpha``.  ``scaled=True`` multiplies by ``a**-(1+alpha)``
    (L1-normalised atoms), under which a fully matched shear gives
    ``T ~ a**j``; the unscaled transform decays like ``a**(j+1+alpha)``.
    """
    if signal.kind == "custom":
        raise ValueError("custom signals need 2-D quadrature and are not supported")
    if len(p.s) != tau.order + 1:
        raise ValueError(f"expected {tau.order + 1} shear parameters, got {len(p.s)}")
    j = signal.j
    table = tau.kernel.table
    if table is None or table.j < j:
        raise ValueError(f"kernel has no partial-moment table of order {j}")
    if signal.kind == "half-space":
        val = signal.side * _boundary_term(tau, signal.boundary, j, p,
                                           abs_tol, rel_tol, signal.domain)
    else:
        lower = _boundary_term(tau, signal.boundary, j, p, abs_tol, rel_tol,
                               signal.domain)
        upper = _boundary_term(tau, signal.upper, j, p, abs_tol, rel_tol,
                               signal.domain)
        val = lower - upper
    if scaled:
        val *= p.a ** -(1.0 + p.alpha)
    return val


@dataclass
class TransformField:
    """``|T f|`` over (scale x swept shear); rows ordered by descending ``a``."""

    a_axis: np.ndarray
    s_axis: np.ndarray
    swept_index: int
    fixed_s: tuple
    values: np.ndarray
    alpha: float = 1.0
    t: float = 0.0
    normalized: bool = False
    signed: Optional[np.ndarray] = None

    def __post_init__(self):
        self.a_axis = np.asarray(self.a_axis, dtype=float)
        self.s_axis = np.asarray(self.s_axis, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.a_axis.size, self.s_axis.size):
            raise ValueError(
                f"values shape {self.values.shape} does not match axes "
                f"({self.a_axis.size}, {self.s_axis.size})")
        self.fixed_s = tuple(float(v) for v in self.fixed_s)

    @property
    def shape(self):
        return self.values.shape

    @property
    def cell(self) -> float:
        return float(abs(self.s_axis[1] - self.s_axis[0])) if self.s_axis.size > 1 else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# taylorlab transform field\n")
        buf.write(f"# swept_index={self.swept_index}\n")
        buf.write(f"# fixed_s={','.join(repr(v) for v in self.fixed_s)}\n")
        buf.write(f"# alpha={self.alpha!r}\n")
        buf.write(f"# t={self.t!r}\n")
        buf.write(f"# normalized={int(self.normalized)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a"] + [repr(float(s)) for s in self.s_axis])
        for a, row in zip(self.a_axis, self.values):
            w.writerow([repr(float(a))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TransformField":
        meta = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, sep, val = line[1:].strip().partition("=")
                if sep:
                    meta[key.strip()] = val.strip()
            elif line.strip():
                body.append(line)
        rows = list(csv.reader(body))
        if not rows or rows[0][0] != "a":
            raise ValueError("malformed field CSV: missing header row")
        try:
            s_axis = [float(v) for v in rows[0][1:]]
            data = [[float(v) for v in r] for r in rows[1:]]
        except ValueError as exc:
            raise ValueError(f"malformed field CSV: {exc}") from None
        if any(len(r) != len(s_axis) + 1 for r in data):
            raise ValueError("malformed field CSV: ragged rows")
        data = np.asarray(data, dtype=float).reshape(len(data), len(s_axis) + 1)
        fixed = meta.get("fixed_s", "")
        return cls(data[:, 0], s_axis, int(meta.get("swept_index", 0)),
                   tuple(float(v) for v in fixed.split(",") if v),
                   data[:, 1:], alpha=float(meta.get("alpha", "1.0")),
                   t=float(meta.get("t", "0.0")),
                   normalized=meta.get("normalized", "0") == "1")


def scale_axis(e1: float, e2: float, count: int) -> np.ndarray:
    """Scales ``a = 2**-e`` for ``e`` evenly spaced in ``[e1, e2]``, descending."""
    if count < 1:
        raise ValueError("scale count must be positive")
    e = np.linspace(e1, e2, count) if count > 1 else np.array([float(e1)])
    return np.sort(2.0 ** -e)[::-1]


def _row(args):
    tau, signal, a, alpha, s_axis, base, idx, t, abs_tol, rel_tol = args
    out = np.empty(len(s_axis))
    for i, sv in enumerate(s_axis):
        s = list(base)
        s[idx] = sv
        try:
            out[i] = transform_point(tau, signal, ShearPoint(a, alpha, s, t),
                                     abs_tol, rel_tol)
        except QuadratureError as exc:
            raise QuadratureError(f"at a={a:g}, s{idx}={sv:g}: {exc}",
                                  exc.result) from None
    return out


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return 1


def transform_grid(tau: TaylorletSpec, signal: SignalModel, alpha: float,
                   a_axis: Sequence[float], s_axis: Sequence[float],
                   swept_index: int, fixed_s: Sequence[float], t: float = 0.0,
                   abs_tol: float = 1e-10, rel_tol: float = 1e-8,
                   workers: Optional[int] = None) -> TransformField:
    """Evaluate ``|T f|`` on every (scale, swept shear) pair.

    ``fixed_s`` has ``order + 1`` entries; the swept entry is overwritten.
    Rows are independent and are farmed out to ``workers`` processes
    (default from ``TAYLORLAB_THREADS``, else 1).
    """
    a_axis = np.sort(np.asarray(a_axis, dtype=float))[::-1]
    s_axis = np.asarray(s_axis, dtype=float)
    if np.any(a_axis <= 0):
        raise ValueError("scales must be positive")
    base = list(fixed_s)
    if len(base) != tau.order + 1:
        raise ValueError(f"fixed_s needs {tau.order + 1} entries")
    if not 0 <= swept_index <= tau.order:
        raise ValueError("swept_index out of range")
    workers = default_workers() if workers is None else workers
    jobs = [(tau, signal, a, alpha, s_axis, base, swept_index, t,
             abs_tol, rel_tol) for a in a_axis]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_row, jobs))
    else:
        rows = [_row(j) for j in jobs]
    signed = np.vstack(rows) if rows else np.zeros((0, s_axis.size))
    return TransformField(a_axis, s_axis, swept_index, tuple(base),
                          np.abs(signed), alpha=alpha, t=t, signed=signed)
