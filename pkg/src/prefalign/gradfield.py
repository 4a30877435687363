"""Closed-form plane gradients, grid sweeps, and finite-difference verification.

The optimization plane is the unit square of ``(x1, x2)`` points, where x1 is
the probability of generating the human-preferred response and x2 that of the
dispreferred one.  This module evaluates the closed-form partial derivatives
of the two plane losses (pairwise-comparison and alignment), sweeps grids into
:class:`GradField` structures for CSV/SVG export, classifies the qualitative
case regions of the plane, and checks every closed form against a central
finite-difference oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

from .losses import Family, LossParams, asft_align_plane, bt_loss_plane

__all__ = [
    "CaseLabel",
    "GridSpec",
    "GradPoint",
    "GradField",
    "DEFAULT_T_LO",
    "DEFAULT_T_HI",
    "bt_partials",
    "asft_partials",
    "update_rate_ratio",
    "classify_case",
    "plane_loss",
    "plane_partials",
    "sweep",
    "fd_check",
    "grid_fd_errors",
    "write_field_csv",
    "read_field_csv",
    "write_field_svg",
]

#: Default thresholds cutting the plane into its qualitative case regions.
DEFAULT_T_LO = 0.25
DEFAULT_T_HI = 0.75

#: Plane families a sweep can evaluate.
PLANE_FAMILIES = (Family.BT, Family.ASFT)

CSV_HEADER = "x1,x2,loss,d1,d2,case"


class CaseLabel(Enum):
    """Qualitative region of the (x1, x2) plane.

    Case1: x1 small, x2 large (model favors the dispreferred response).
    Case2: both large (model produces both).  Case3: x2 small.  Everything
    else is Interior.
    """

    CASE1 = "Case1"
    CASE2 = "Case2"
    CASE3 = "Case3"
    INTERIOR = "Interior"


def _check_interior_point(x1: float, x2: float) -> None:
    for name, value in (("x1", x1), ("x2", x2)):
        if not (math.isfinite(value) and 0.0 < value < 1.0):
            raise ValueError(f"{name} must lie strictly inside (0, 1), got {value!r}")


def bt_partials(x1: float, x2: float, beta: float) -> Tuple[float, float]:
    """Closed-form partials of the plane pairwise-comparison loss.

    d1 = -beta * x2**beta / (x1 * (x1**beta + x2**beta))
    d2 =  beta * x2**(beta-1) / (x1**beta + x2**beta)
    """
    _check_interior_point(x1, x2)
    if not (math.isfinite(beta) and beta > 0.0):
        raise ValueError(f"beta must be > 0, got {beta!r}")
    s = x1**beta + x2**beta
    d1 = -beta * x2**beta / (x1 * s)
    d2 = beta * x2 ** (beta - 1.0) / s
    return d1, d2


def asft_partials(x1: float, x2: float) -> Tuple[float, float]:
    """Closed-form partials of the plane alignment loss: (-1/x1, 1/(1-x2))."""
    _check_interior_point(x1, x2)
    return -1.0 / x1, 1.0 / (1.0 - x2)


def update_rate_ratio(x1: float, x2: float) -> float:
    """|d1| / |d2| for the alignment loss: (1 - x2) / x1.

    Measures how evenly the loss splits its effort between reinforcing the
    preferred response and suppressing the dispreferred one; tends to 1 along
    the optimization path (x1 up, x2 down).
    """
    _check_interior_point(x1, x2)
    return (1.0 - x2) / x1


def classify_case(
    x1: float,
    x2: float,
    t_lo: float = DEFAULT_T_LO,
    t_hi: float = DEFAULT_T_HI,
) -> CaseLabel:
    """Label the qualitative region of an interior plane point.

    Thresholds are configurable cuts (t_lo < t_hi); the labels partition the
    plane, with ties at the thresholds resolved in Case1, Case2, Case3 order.
    """
    if not (0.0 < t_lo < t_hi < 1.0):
        raise ValueError(f"need 0 < t_lo < t_hi < 1, got t_lo={t_lo!r}, t_hi={t_hi!r}")
    if x1 <= t_lo and x2 >= t_hi:
        return CaseLabel.CASE1
    if x1 >= t_hi and x2 >= t_hi:
        return CaseLabel.CASE2
    if x2 <= t_lo:
        return CaseLabel.CASE3
    return CaseLabel.INTERIOR


def plane_loss(family: Family, params: LossParams) -> Callable[[float, float], float]:
    """Loss evaluator L(x1, x2) for a plane family."""
    if family is Family.BT:
        beta = params.beta
        return lambda x1, x2: bt_loss_plane(x1, x2, beta)
    if family is Family.ASFT:
        return asft_align_plane
    raise ValueError(f"plane sweeps support families {PLANE_FAMILIES}, got {family!r}")


def plane_partials(family: Family, params: LossParams) -> Callable[[float, float], Tuple[float, float]]:
    """Closed-form partial evaluator (d1, d2)(x1, x2) for a plane family."""
    if family is Family.BT:
        beta = params.beta
        return lambda x1, x2: bt_partials(x1, x2, beta)
    if family is Family.ASFT:
        return asft_partials
    raise ValueError(f"plane sweeps support families {PLANE_FAMILIES}, got {family!r}")


@dataclass(frozen=True)
class GridSpec:
    """Regular n-by-n evaluation grid over [lo, hi]^2, strictly inside (0, 1)."""

    n: int
    lo: float
    hi: float
    family: Family = Family.ASFT
    params: LossParams = LossParams()

    def __post_init__(self) -> None:
        if not (isinstance(self.n, int) and self.n >= 2):
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if not (0.0 < self.lo < self.hi < 1.0):
            raise ValueError(f"need 0 < lo < hi < 1, got lo={self.lo!r}, hi={self.hi!r}")
        if self.family not in PLANE_FAMILIES:
            raise ValueError(f"plane sweeps support families {PLANE_FAMILIES}, got {self.family!r}")

    def axis(self) -> List[float]:
        step = (self.hi - self.lo) / (self.n - 1)
        return [self.lo + k * step for k in range(self.n)]


@dataclass(frozen=True)
class GradPoint:
    """One plane point with loss value, closed-form partials, and case label."""

    x1: float
    x2: float
    loss: float
    d1: float
    d2: float
    case: CaseLabel


@dataclass(frozen=True)
class GradField:
    """Row-major grid of :class:`GradPoint` (x1 varies slowest)."""

    spec: GridSpec
    points: Tuple[GradPoint, ...]
    t_lo: float = DEFAULT_T_LO
    t_hi: float = DEFAULT_T_HI


def sweep(spec: GridSpec, t_lo: float = DEFAULT_T_LO, t_hi: float = DEFAULT_T_HI) -> GradField:
    """Evaluate loss, partials, and case label on every grid point.

    Returns n*n points in row-major order (x1 slowest), deterministically for
    a given spec.
    """
    loss = plane_loss(spec.family, spec.params)
    partials = plane_partials(spec.family, spec.params)
    axis = spec.axis()
    points = []
    for x1 in axis:
        for x2 in axis:
            d1, d2 = partials(x1, x2)
            points.append(GradPoint(x1, x2, loss(x1, x2), d1, d2, classify_case(x1, x2, t_lo, t_hi)))
    return GradField(spec, tuple(points), t_lo, t_hi)


def fd_check(
    family: Family,
    params: LossParams,
    x1: float,
    x2: float,
    h: float = 1e-6,
) -> Tuple[float, float]:
    """Absolute error of the closed-form partials against central differences.

    Requires ``x1 +- h`` and ``x2 +- h`` to stay inside (0, 1); a step that
    crosses the boundary is rejected.
    """
    _check_interior_point(x1, x2)
    if not (h > 0.0 and math.isfinite(h)):
        raise ValueError(f"h must be a positive finite step, got {h!r}")
    if x1 - h <= 0.0 or x1 + h >= 1.0 or x2 - h <= 0.0 or x2 + h >= 1.0:
        raise ValueError(f"finite-difference step h={h!r} crosses the (0, 1) boundary at ({x1!r}, {x2!r})")
    loss = plane_loss(family, params)
    d1, d2 = plane_partials(family, params)(x1, x2)
    fd1 = (loss(x1 + h, x2) - loss(x1 - h, x2)) / (2.0 * h)
    fd2 = (loss(x1, x2 + h) - loss(x1, x2 - h)) / (2.0 * h)
    return abs(d1 - fd1), abs(d2 - fd2)


def grid_fd_errors(
    family: Family,
    params: LossParams,
    n: int = 20,
    lo: float = 0.05,
    hi: float = 0.95,
    h: float = 1e-6,
) -> Tuple[float, float]:
    """Max finite-difference errors (err1, err2) over an n-by-n grid.

    Near the boundary the step shrinks so both evaluations stay interior.
    """
    spec = GridSpec(n=n, lo=lo, hi=hi, family=family, params=params)
    axis = spec.axis()
    max1 = 0.0
    max2 = 0.0
    for x1 in axis:
        for x2 in axis:
            margin = min(x1, 1.0 - x1, x2, 1.0 - x2)
            h_eff = min(h, 0.5 * margin)
            err1, err2 = fd_check(family, params, x1, x2, h_eff)
            max1 = max(max1, err1)
            max2 = max(max2, err2)
    return max1, max2


def _fmt(value: float) -> str:
    return format(value, ".9g")


def write_field_csv(field: GradField, path, metadata: Optional[Dict[str, object]] = None) -> None:
    """Write a field as CSV: '#'-prefixed metadata lines, header, one row per point."""
    lines = []
    for key, value in (metadata or {}).items():
        lines.append(f"# {key} = {value}")
    lines.append(CSV_HEADER)
    for p in field.points:
        lines.append(
            f"{_fmt(p.x1)},{_fmt(p.x2)},{_fmt(p.loss)},{_fmt(p.d1)},{_fmt(p.d2)},{p.case.value}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field_csv(path) -> Tuple[List[GradPoint], Dict[str, str]]:
    """Read a field CSV back into points plus its metadata dictionary."""
    points: List[GradPoint] = []
    metadata: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header_seen = False
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if " = " in body:
                    key, value = body.split(" = ", 1)
                    metadata[key] = value
                continue
            if not header_seen:
                if line != CSV_HEADER:
                    raise ValueError(f"unexpected field CSV header: {line!r}")
                header_seen = True
                continue
            x1, x2, loss, d1, d2, case = line.split(",")
            points.append(
                GradPoint(float(x1), float(x2), float(loss), float(d1), float(d2), CaseLabel(case))
            )
    if not header_seen:
        raise ValueError(f"no header line found in {path}")
    return points, metadata


_CASE_COLORS = {
    CaseLabel.CASE1: "#d62728",
    CaseLabel.CASE2: "#9467bd",
    CaseLabel.CASE3: "#1f77b4",
    CaseLabel.INTERIOR: "#7f7f7f",
}


def write_field_svg(field: GradField, path, size: int = 560, margin: int = 40) -> None:
    """Render the descent vector field as a standalone SVG.

    Arrows point along the negative gradient; their length encodes relative
    gradient strength (square-root scaled) and their color the case label.
    """
    spec = field.spec
    span = spec.hi - spec.lo
    inner = size - 2 * margin
    cell = inner / max(spec.n - 1, 1)
    max_mag = max(math.hypot(p.d1, p.d2) for p in field.points)

    def sx(x1: float) -> float:
        return margin + (x1 - spec.lo) / span * inner

    def sy(x2: float) -> float:
        return size - margin - (x2 - spec.lo) / span * inner

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        "<defs>",
    ]
    for case, color in _CASE_COLORS.items():
        lines.append(
            f'<marker id="tip-{case.value}" markerWidth="6" markerHeight="6" refX="5" refY="3" '
            f'orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="{color}"/></marker>'
        )
    lines.append("</defs>")
    lines.append(
        f'<rect x="{margin}" y="{margin}" width="{inner:.2f}" height="{inner:.2f}" '
        'fill="none" stroke="#cccccc"/>'
    )
    for p in field.points:
        mag = math.hypot(p.d1, p.d2)
        if mag == 0.0 or max_mag == 0.0:
            continue
        ux, uy = -p.d1 / mag, -p.d2 / mag
        length = 0.9 * cell * math.sqrt(mag / max_mag)
        cx, cy = sx(p.x1), sy(p.x2)
        x_a = cx - 0.5 * length * ux
        y_a = cy + 0.5 * length * uy
        x_b = cx + 0.5 * length * ux
        y_b = cy - 0.5 * length * uy
        color = _CASE_COLORS[p.case]
        lines.append(
            f'<line x1="{x_a:.2f}" y1="{y_a:.2f}" x2="{x_b:.2f}" y2="{y_b:.2f}" '
            f'stroke="{color}" stroke-width="1.2" marker-end="url(#tip-{p.case.value})"/>'
        )
    label = f"{spec.family.value} descent field, n={spec.n}, [{spec.lo:g}, {spec.hi:g}]"
    lines.append(
        f'<text x="{margin}" y="{margin - 12}" font-family="monospace" font-size="12">{label}</text>'
    )
    lines.append(
        f'<text x="{size - margin}" y="{size - 10}" text-anchor="end" font-family="monospace" '
        f'font-size="12">x1</text>'
    )
    lines.append(
        f'<text x="12" y="{margin}" font-family="monospace" font-size="12">x2</text>'
    )
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
