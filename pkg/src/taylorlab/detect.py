"""Scale-space analysis of transform fields.

Rows of a :class:`~taylorlab.transform.TransformField` are normalised to a
unit maximum, their local maxima are linked across consecutive scales into
paths, and the terminal position of the best path is read off as one Taylor
coefficient.  Repeating this stage by stage, with earlier coefficients fixed,
recovers ``c(t), c'(t), ..., c^{(n)}(t)`` of the singularity curve.
"""

from __future__ import annotations

import io
import csv
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .transform import ShearPoint, TransformField, transform_grid, transform_point

QUALITY_LAMBDA = 0.1
DEFAULT_MATCH_CELLS = 3
DEFAULT_K_FINEST = 6
PAIR_CANDIDATES = 8
REFINE_POINTS = 49
REFINE_SCALES = 8
REFINE_WINDOW = 2.5
MAG_FLOOR = 1e-300


class DetectionError(RuntimeError):
    """A detection stage produced no usable maxima path."""

    def __init__(self, message, stage, field=None, report=None):
        super().__init__(message)
        self.stage = stage
        self.field = field
        self.report = report


def normalize_per_scale(fld: TransformField) -> TransformField:
    """Divide every row by its maximum; all-zero rows are left alone."""
    vals = np.array(fld.values, dtype=float)
    peak = vals.max(axis=1, keepdims=True)
    peak[peak == 0] = 1.0
    return replace(fld, values=vals / peak, normalized=True)


def find_maxima(row: Sequence[float], s_axis: Sequence[float]):
    """Interior strict local maxima of ``row``, refined by a 3-point parabola.

    A flat run of equal values that rises above both neighbours counts as
    one maximum located at its centre.  Returns ``(s*, magnitude)`` pairs,
    largest magnitude first.
    """
    y = np.asarray(row, dtype=float)
    x = np.asarray(s_axis, dtype=float)
    if y.size != x.size:
        raise ValueError("row and axis lengths differ")
    if y.size < 3:
        raise ValueError("need at least 3 samples to find interior maxima")
    out = []
    i = 1
    n = y.size
    while i < n - 1:
        if y[i] > y[i - 1]:
            k = i
            while k + 1 < n and y[k + 1] == y[i]:
                k += 1
            if k + 1 < n and y[k + 1] < y[i]:
                if k == i:
                    out.append(_parabolic(x[i - 1:i + 2], y[i - 1:i + 2]))
                else:
                    out.append((0.5 * (x[i] + x[k]), float(y[i])))
            i = k + 1
        else:
            i += 1
    out.sort(key=lambda m: -m[1])
    return out


def _parabolic(x, y):
    x0, x1, x2 = x
    y0, y1, y2 = y
    d0, d2 = x0 - x1, x2 - x1
    # vertex of the interpolating parabola, relative to x1
    num = d0 * d0 * (y1 - y2) - d2 * d2 * (y1 - y0)
    den = d0 * (y1 - y2) - d2 * (y1 - y0)
    if den == 0:
        return float(x1), float(y1)
    dx = 0.5 * num / den
    dx = min(max(dx, d0), d2)
    # evaluate the parabola at the vertex
    a = ((y0 - y1) / d0 - (y2 - y1) / d2) / (d0 - d2)
    b = (y0 - y1) / d0 - a * d0
    return float(x1 + dx), float(y1 + b * dx + a * dx * dx)


@dataclass
class MaximaPath:
    entries: list
    terminal_estimate: float = 0.0
    quality: float = 0.0

    @property
    def length(self) -> int:
        return len(self.entries)

    @property
    def mean_magnitude(self) -> float:
        return float(np.mean([e[2] for e in self.entries])) if self.entries else 0.0

    def finalize(self, cell: float, lam: float = QUALITY_LAMBDA):
        s = np.array([e[1] for e in self.entries])
        variation = float(np.sum(np.abs(np.diff(s)))) if s.size > 1 else 0.0
        self.terminal_estimate = float(s[-1])
        self.quality = len(s) - lam * (variation / cell if cell > 0 else 0.0)
        return self


def track_paths(fld: TransformField, match_radius: Optional[float] = None,
                min_length: int = 3, lam: float = QUALITY_LAMBDA) -> List[MaximaPath]:
    """Greedy nearest-neighbour linkage of row maxima from coarse to fine.

    ``match_radius`` is in shear units (default three grid cells).  A path
    ends at the first scale where no maximum lies within the radius; paths
    spanning fewer than ``min_length`` scales are dropped.  Returned paths
    are sorted best first (quality, then mean magnitude).
    """
    cell = fld.cell
    if match_radius is None:
        match_radius = DEFAULT_MATCH_CELLS * cell
    order = np.argsort(-fld.a_axis)
    active: List[MaximaPath] = []
    done: List[MaximaPath] = []
    if fld.s_axis.size < 3:
        return []
    for r in order:
        a = float(fld.a_axis[r])
        maxima = find_maxima(fld.values[r], fld.s_axis)
        pairs = []
        for pi, path in enumerate(active):
            last = path.entries[-1][1]
            for mi, (sv, _) in enumerate(maxima):
                d = abs(sv - last)
                if d <= match_radius:
                    pairs.append((d, pi, mi))
        pairs.sort()
        used_p, used_m = set(), set()
        nxt = []
        for d, pi, mi in pairs:
            if pi in used_p or mi in used_m:
                continue
            used_p.add(pi)
            used_m.add(mi)
            path = active[pi]
            path.entries.append((a, maxima[mi][0], maxima[mi][1]))
            nxt.append(path)
        done.extend(p for i, p in enumerate(active) if i not in used_p)
        for mi, (sv, mag) in enumerate(maxima):
            if mi not in used_m:
                nxt.append(MaximaPath([(a, sv, mag)]))
        active = nxt
    done.extend(active)
    paths = [p.finalize(cell, lam) for p in done if p.length >= min_length]
    paths.sort(key=lambda p: (-p.quality, -p.mean_magnitude))
    return paths


@dataclass
class DecayEstimate:
    slope: float
    intercept: float
    residual: float
    count: int = 0


def estimate_decay(a_values: Sequence[float], magnitudes: Sequence[float],
                   k_finest: int = DEFAULT_K_FINEST) -> DecayEstimate:
    """Least-squares slope of ``log2 |T|`` against ``log2 a`` at fine scales.

    Uses the ``k_finest`` smallest scales.  Zeros are floored at 1e-300.
    """
    a = np.asarray(a_values, dtype=float)
    m = np.abs(np.asarray(magnitudes, dtype=float))
    ok = np.isfinite(m) & np.isfinite(a) & (a > 0)
    a, m = a[ok], m[ok]
    if k_finest < 4:
        raise ValueError("slope estimation needs k_finest >= 4")
    if a.size < 4:
        raise ValueError(f"need at least 4 usable scales, got {a.size}")
    idx = np.argsort(a)[:k_finest]
    x = np.log2(a[idx])
    y = np.log2(np.maximum(m[idx], MAG_FLOOR))
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (slope * x + icpt)
    return DecayEstimate(float(slope), float(icpt),
                         float(np.sqrt(np.mean(res ** 2))), int(x.size))


def path_decay(fld: TransformField, path: MaximaPath,
               k_finest: int = DEFAULT_K_FINEST) -> DecayEstimate:
    """Decay of the raw field sampled along a path (nearest grid column)."""
    a_list, mags = [], []
    for a, sv, _ in path.entries:
        r = int(np.argmin(np.abs(fld.a_axis - a)))
        c = int(np.argmin(np.abs(fld.s_axis - sv)))
        a_list.append(a)
        mags.append(fld.values[r, c])
    return estimate_decay(a_list, mags, k_finest)


def alpha_regime_ok(stage: int, alpha: float) -> bool:
    if stage == 0:
        return alpha > 1
    return 1.0 / (stage + 1) < alpha < 1.0 / stage


def _common(p: MaximaPath, q: MaximaPath):
    qa = {e[0]: e[1] for e in q.entries}
    return [(a, sv, qa[a]) for a, sv, _ in p.entries if a in qa]


def find_ridge_pair(paths: Sequence[MaximaPath], min_common: int = 3,
                    candidates: int = PAIR_CANDIDATES):
    """Two paths that flank a common centre and close in on it.

    Near a matched shear the modulus has a twin peak on either side of the
    true value, so the strongest single ridge converges slowly while the
    midpoint of the twin ridges is accurate at every scale.  Among the best
    ``candidates`` paths, pairs sharing at least ``min_common`` scales whose
    separation shrinks toward fine scales are scored by overlap times summed
    mean magnitude.  Returns ``(p, q)`` or ``None``.
    """
    top = list(paths[:candidates])
    best, best_score = None, 0.0
    for i in range(len(top)):
        for k in range(i + 1, len(top)):
            com = _common(top[i], top[k])
            if len(com) < min_common:
                continue
            a = np.array([c[0] for c in com])
            sep = np.abs(np.array([c[1] - c[2] for c in com]))
            if np.any(sep <= 0):
                continue
            # log-separation must decrease with the scale
            slope = np.polyfit(np.log2(a), np.log2(sep), 1)[0]
            if slope <= 0.1 or sep[-1] >= sep[0]:
                continue
            score = len(com) * (top[i].mean_magnitude + top[k].mean_magnitude)
            if score > best_score:
                best, best_score = (top[i], top[k]), score
    return best


def _finest_pair_state(pair):
    com = _common(*pair)
    a, s1, s2 = com[-1]
    return a, 0.5 * (s1 + s2), 0.5 * abs(s1 - s2)


def refine_pair(tau, signal, stage: int, alpha: float, fixed, t: float,
                a_axis, centre: float, half: float, a_ref: float,
                points: int = REFINE_POINTS, scales: int = REFINE_SCALES,
                window: float = REFINE_WINDOW, abs_tol=1e-10, rel_tol=1e-8):
    """Follow a twin ridge below the grid resolution.

    The half-separation is predicted to shrink like ``a**(1 - stage*alpha)``.
    At a few scales finer than ``a_ref`` the modulus is sampled on a local
    window of ``window`` predicted half-separations around the current
    centre; the strongest maximum on each side gives the new centre.
    Returns ``(centre, half, a)`` at the finest scale reached.
    """
    expo = 1.0 - stage * alpha
    fine = np.sort(np.asarray(a_axis, dtype=float)[np.asarray(a_axis) <= a_ref])[::-1]
    if fine.size == 0:
        return centre, half, a_ref
    idx = np.unique(np.round(np.linspace(0, fine.size - 1, min(scales, fine.size))).astype(int))
    s = list(fixed)
    for a in fine[idx]:
        h = max(half * (a / a_ref) ** expo, 1e-14)
        grid = np.linspace(centre - window * h, centre + window * h, points)
        vals = np.empty(points)
        for i, sv in enumerate(grid):
            s[stage] = sv
            vals[i] = abs(transform_point(tau, signal, ShearPoint(a, alpha, tuple(s), t),
                                          abs_tol, rel_tol))
        m = find_maxima(vals, grid)
        left = [x for x in m if x[0] < centre]
        right = [x for x in m if x[0] > centre]
        if not left or not right:
            continue
        lo, hi = left[0][0], right[0][0]
        centre, half, a_ref = 0.5 * (lo + hi), 0.5 * (hi - lo), float(a)
    return centre, half, a_ref


@dataclass
class StageResult:
    stage: int
    alpha: float
    estimate: float
    decay: Optional[DecayEstimate]
    field: TransformField
    paths: List[MaximaPath]
    pair: Optional[tuple] = None
    method: str = "terminal"


@dataclass
class CoefficientReport:
    order: int
    t: float
    alpha_schedule: tuple
    stages: List[StageResult] = field(default_factory=list)
    failed_stage: Optional[int] = None

    @property
    def estimates(self) -> List[float]:
        return [st.estimate for st in self.stages]

    @property
    def slopes(self) -> List[Optional[DecayEstimate]]:
        return [st.decay for st in self.stages]

    def to_text(self) -> str:
        lines = [f"order={self.order}", f"t={self.t!r}",
                 "alpha_schedule=" + ",".join(repr(a) for a in self.alpha_schedule)]
        for st in self.stages:
            k = st.stage
            lines.append(f"s{k}={st.estimate!r}")
            lines.append(f"s{k}.alpha={st.alpha!r}")
            if st.decay is not None:
                lines.append(f"s{k}.slope={st.decay.slope!r}")
                lines.append(f"s{k}.residual={st.decay.residual!r}")
            lines.append(f"s{k}.paths={len(st.paths)}")
        if self.failed_stage is not None:
            lines.append(f"failed_stage={self.failed_stage}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "alpha", "estimate", "slope", "residual"])
        for st in self.stages:
            slope = "" if st.decay is None else repr(st.decay.slope)
            res = "" if st.decay is None else repr(st.decay.residual)
            w.writerow([st.stage, repr(st.alpha), repr(st.estimate), slope, res])
        return buf.getvalue()


def detect_coefficients(tau, signal, t: float, order: int,
                        alpha_schedule: Sequence[float], a_axis,
                        s_ranges: Sequence[Sequence[float]],
                        match_cells: float = DEFAULT_MATCH_CELLS,
                        k_finest: int = DEFAULT_K_FINEST,
                        abs_tol: float = 1e-10, rel_tol: float = 1e-8,
                        workers: Optional[int] = None,
                        refine: bool = True) -> CoefficientReport:
    """Sequential search for ``c(t), c'(t), ..., c^{(order)}(t)``.

    Stage ``k`` sweeps ``s_k`` over ``s_ranges[k]`` (an array of values) with
    ``s_0..s_{k-1}`` fixed at earlier estimates and higher shears zero.

    With ``refine`` (the default) the estimate is the centre of the twin
    ridge pair, followed off-grid down to the finest scale; this keeps each
    stage accurate well below ``min(a)``, which later stages need because
    an error ``d`` in ``s_k`` enters them amplified by ``a**(k*alpha - 1)``.
    Without a pair, or with ``refine=False``, the finest position of the
    best path is used.
    """
    if len(alpha_schedule) != order + 1:
        raise ValueError(f"alpha schedule needs {order + 1} entries")
    if len(s_ranges) != order + 1:
        raise ValueError(f"need {order + 1} sweep ranges")
    if order != tau.order:
        raise ValueError(f"Taylorlet has order {tau.order}, asked for {order}")
    report = CoefficientReport(order, t, tuple(alpha_schedule))
    fixed = [0.0] * (tau.order + 1)
    for k in range(order + 1):
        alpha = alpha_schedule[k]
        if not alpha_regime_ok(k, alpha):
            warnings.warn(f"alpha={alpha} lies outside the regime of stage {k}",
                          stacklevel=2)
        s_axis = np.asarray(s_ranges[k], dtype=float)
        fld = transform_grid(tau, signal, alpha, a_axis, s_axis, k, fixed, t,
                             abs_tol, rel_tol, workers)
        norm = normalize_per_scale(fld)
        paths = track_paths(norm, match_cells * norm.cell)
        if not paths:
            report.failed_stage = k
            raise DetectionError(f"stage {k}: no maxima path survived", k,
                                 fld, report)
        best = paths[0]
        try:
            decay = path_decay(fld, best, k_finest)
        except ValueError:
            decay = None
        estimate, method, pair = best.terminal_estimate, "terminal", None
        if refine:
            pair = find_ridge_pair(paths)
            if pair is not None:
                a_ref, centre, half = _finest_pair_state(pair)
                estimate, _, a_fin = refine_pair(tau, signal, k, alpha, fixed, t,
                                                 fld.a_axis, centre, half, a_ref,
                                                 abs_tol=abs_tol, rel_tol=rel_tol)
                if k == 0 and signal.j == 0:
                    # G_0 is odd about the kernel shift, so the twin peaks are
                    # symmetric about w = t0, i.e. about s_0 = c - a * t0
                    estimate += a_fin * tau.kernel.g.t0
                method = "pair"
        report.stages.append(StageResult(k, alpha, estimate, decay, fld, paths,
                                         pair, method))
        fixed[k] = estimate
    return report
