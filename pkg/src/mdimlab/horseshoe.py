"""Horseshoe detection for interval maps and planar baker models.

One-dimensional side: decompose a piecewise-affine map over a window into
maximal weakly-monotone laps, then keep a largest family of laps that all
cross a target core interval with margin and whose domains are pairwise far
apart in the interval (Hausdorff) distance.

Two-dimensional side: baker-style models on the square [-delta, delta]^2.
N horizontal slabs of height w are stretched affinely onto N full-height
vertical strips of width w (alternating orientation), and p identical
stages are chained cyclically.  Running the recursion for ell rounds yields
N**(p*ell) orbit segments that are pairwise (p*ell, epsilon)-separated in
the sup metric; the geometry is exact rational arithmetic throughout, so
every certificate is re-checkable by direct evaluation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import (
    ContractError,
    DomainError,
    ResourceError,
    SerializationError,
    VerificationError,
)
from .pwa import PwaMap
from .rational import format_interval, format_rational, parse_interval, parse_rational
from .reporting import CheckResult, VerificationSummary

Interval = tuple[Fraction, Fraction]

REP_CAP_2D = 4096               # default cap on certified representatives


# === 1-D lap detection =======================================================

@dataclass(frozen=True)
class Lap:
    """A maximal weakly-monotone piece of a map over a window.

    `img_lo`/`img_hi` are the exact extremes of the map over the domain
    (attained at the endpoints, by monotonicity).
    """

    lo: Fraction
    hi: Fraction
    increasing: bool
    img_lo: Fraction
    img_hi: Fraction

    @property
    def domain(self) -> Interval:
        return (self.lo, self.hi)


@dataclass(frozen=True)
class Horseshoe1DReport:
    """Outcome of a 1-D horseshoe scan: the window, the crossing target,
    and the selected family of crossing laps."""

    interval: Interval
    core: Interval
    count: int                          # laps selected (the detected type N)
    laps: tuple[Lap, ...]               # the selected laps, left to right
    min_separation: Fraction | None     # smallest pairwise domain distance
    margin: Fraction | None             # realized crossing margin


def interval_distance(a: Interval, b: Interval) -> Fraction:
    """Hausdorff distance between two closed intervals:
    max(|lo difference|, |hi difference|)."""
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def monotone_laps(m: PwaMap, window: Interval) -> tuple[Lap, ...]:
    """Maximal weakly-monotone laps of `m` restricted to `window`.

    Plateaus extend the run in progress; a new lap starts at the shared
    node whenever the slope sign flips.
    """
    lo, hi = window
    if not (0 <= lo < hi <= 1):
        raise DomainError(f"window {format_interval(lo, hi)} is not a subinterval of [0, 1]")
    xs = [lo] + [x for x in m.xs if lo < x < hi] + [hi]
    ys = [m(x) for x in xs]

    def close(a: int, b: int, direction: int) -> Lap:
        va, vb = ys[a], ys[b]
        return Lap(xs[a], xs[b], direction >= 0, min(va, vb), max(va, vb))

    laps: list[Lap] = []
    start, direction = 0, 0
    for i in range(len(xs) - 1):
        step = ys[i + 1] - ys[i]
        sign = (step > 0) - (step < 0)
        if sign == 0 or sign == direction:
            continue
        if direction == 0:
            direction = sign
            continue
        laps.append(close(start, i, direction))
        start, direction = i, sign
    laps.append(close(start, len(xs) - 1, direction))
    return tuple(laps)


def detect_1d(
    m: PwaMap,
    interval: Interval,
    core: Interval,
    epsilon: Fraction,
    eta: Fraction = Fraction(0),
) -> Horseshoe1DReport:
    """Largest family of monotone laps of `m` over `interval` whose images
    all cover the eta-expanded `core` and whose domains are pairwise more
    than `epsilon` apart (interval Hausdorff distance).

    Laps are ordered left to right with both endpoints increasing, so the
    pairwise distance is smallest on consecutive laps and the left-to-right
    greedy sweep is maximal.
    """
    (i_lo, i_hi), (c_lo, c_hi) = interval, core
    if c_lo >= c_hi:
        raise DomainError(f"degenerate core {format_interval(c_lo, c_hi)}")
    if not (0 <= i_lo <= c_lo and c_hi <= i_hi <= 1):
        raise DomainError(
            f"need core {format_interval(c_lo, c_hi)} inside window "
            f"{format_interval(i_lo, i_hi)} inside [0, 1]"
        )
    if eta < 0:
        raise DomainError(f"margin eta must be nonnegative, got {format_rational(eta)}")
    if epsilon < 0:
        raise DomainError(f"separation epsilon must be nonnegative, got {format_rational(epsilon)}")

    target_lo, target_hi = c_lo - eta, c_hi + eta
    selected: list[Lap] = []
    for lap in monotone_laps(m, interval):
        if lap.img_lo > target_lo or lap.img_hi < target_hi:
            continue
        if selected and interval_distance(selected[-1].domain, lap.domain) <= epsilon:
            continue
        selected.append(lap)

    min_sep = min(
        (interval_distance(a.domain, b.domain) for a, b in zip(selected, selected[1:])),
        default=None,
    )
    margin = min((min(c_lo - lap.img_lo, lap.img_hi - c_hi) for lap in selected), default=None)
    return Horseshoe1DReport(interval, core, len(selected), tuple(selected), min_sep, margin)


# === 2-D baker model =========================================================

@dataclass(frozen=True)
class Horseshoe2DModel:
    """Baker-style model on the square [-delta, delta]^2.

    Horizontal slab j is [-delta, delta] x [offsets[j], offsets[j] + width];
    branch j stretches it affinely onto the full-height vertical strip
    [offsets[j], offsets[j] + width] x [-delta, delta], flipping vertically
    when orientations[j] == -1.  All p stages share this geometry and are
    chained cyclically.
    """

    N: int
    p: int
    delta: Fraction
    epsilon: Fraction
    width: Fraction
    offsets: tuple[Fraction, ...]
    orientations: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.N < 1 or self.p < 1:
            raise DomainError(f"need N >= 1 and p >= 1, got N={self.N}, p={self.p}")
        if self.delta <= 0 or self.epsilon <= 0:
            raise DomainError("delta and epsilon must be positive")
        if len(self.offsets) != self.N or len(self.orientations) != self.N:
            raise DomainError(f"expected {self.N} offsets and orientations")
        if any(o not in (-1, 1) for o in self.orientations):
            raise DomainError("orientation flags must be +1 or -1")

    @property
    def alpha(self) -> float:
        """Exponent with N = floor((1/epsilon)^(alpha * 2)) on the square."""
        la = abs(math.log(self.epsilon))
        if la == 0:
            return 0.0 if self.N == 1 else math.inf
        return math.log(self.N) / (2 * la)

    def slab(self, j: int) -> tuple[Interval, Interval]:
        """Horizontal slab j as (x-range, y-range)."""
        off = self.offsets[j]
        return ((-self.delta, self.delta), (off, off + self.width))

    def strip(self, j: int) -> tuple[Interval, Interval]:
        """Vertical strip j (the image of slab j) as (x-range, y-range)."""
        off = self.offsets[j]
        return ((off, off + self.width), (-self.delta, self.delta))

    def slab_index(self, y: Fraction) -> int:
        for j, off in enumerate(self.offsets):
            if off <= y <= off + self.width:
                return j
        raise DomainError(f"y = {format_rational(y)} lies in no horizontal slab")

    def apply_branch(self, j: int, point: tuple[Fraction, Fraction]) -> tuple[Fraction, Fraction]:
        """Affine branch j: squeeze x onto the strip, stretch y across it."""
        x, y = point
        off = self.offsets[j]
        x2 = off + (x + self.delta) * self.width / (2 * self.delta)
        span = (y - off) * 2 * self.delta / self.width
        y2 = -self.delta + span if self.orientations[j] == 1 else self.delta - span
        return (x2, y2)

    def apply(self, point: tuple[Fraction, Fraction]) -> tuple[Fraction, Fraction]:
        """One step of the stage map (defined on the union of the slabs)."""
        return self.apply_branch(self.slab_index(point[1]), point)


def plane_distance(a: tuple[Fraction, Fraction], b: tuple[Fraction, Fraction]) -> Fraction:
    """Sup metric on the plane (keeps every certificate rational)."""
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def orbit_2d(model: Horseshoe2DModel, point: tuple[Fraction, Fraction], n: int) -> list[tuple[Fraction, Fraction]]:
    """Positions at times 0..n-1 under the stage map."""
    if n < 1:
        raise DomainError(f"orbit length must be >= 1, got {n}")
    pts = [point]
    for _ in range(n - 1):
        pts.append(model.apply(pts[-1]))
    return pts


def build_model_2d(
    N: int,
    delta: Fraction,
    epsilon: Fraction,
    p: int,
    width: Fraction | None = None,
) -> Horseshoe2DModel:
    """Pack N horizontal slabs of height `width` into the square with equal
    gaps > epsilon and alternate branch orientations.

    Feasibility requires N*(width + epsilon) <= 2*delta with width > 0;
    the default width (2*delta - N*epsilon) / (2*N) spends half the slack
    on slabs.  A single slab (N = 1) has no gaps and fills the square.
    """
    if N < 1 or p < 1:
        raise DomainError(f"need N >= 1 and p >= 1, got N={N}, p={p}")
    if delta <= 0 or epsilon <= 0:
        raise DomainError("delta and epsilon must be positive")

    side = 2 * delta
    if N == 1:
        w = side if width is None else width
        if not 0 < w <= side:
            raise ContractError(
                f"single-slab width must satisfy 0 < w <= 2*delta = {format_rational(side)}, "
                f"got {format_rational(w)}"
            )
        offsets = (-delta,)
    else:
        if width is None:
            w = (side - N * epsilon) / (2 * N)
            if w <= 0:
                raise ContractError(
                    f"packing infeasible: N*epsilon = {format_rational(N * epsilon)} >= "
                    f"2*delta = {format_rational(side)} leaves no positive strip width"
                )
        else:
            w = width
            if w <= 0:
                raise ContractError(f"strip width must be positive, got {format_rational(w)}")
        if N * (w + epsilon) > side:
            raise ContractError(
                f"packing infeasible: N*(width + epsilon) = "
                f"{format_rational(N * (w + epsilon))} > 2*delta = {format_rational(side)}"
            )
        gap = (side - N * w) / (N - 1)              # > epsilon by the packing bound
        offsets = tuple(-delta + j * (w + gap) for j in range(N))
    orientations = tuple(1 if j % 2 == 0 else -1 for j in range(N))
    return Horseshoe2DModel(N, p, delta, epsilon, w, offsets, orientations)


# === 2-D verification ========================================================

def verify_conditions(model: Horseshoe2DModel) -> VerificationSummary:
    """Independently re-check the model geometry: slab packing and gaps,
    full vertical span of every strip (via the branch maps), and the
    stage-to-stage crossing of every (slab, strip) pair."""
    d, w, eps, n, checks = model.delta, model.width, model.epsilon, model.N, []

    def check(name: str, ok: bool, detail: str = "") -> None:
        checks.append(CheckResult(name, ok, detail))

    check("width-positive", 0 < w <= 2 * d,
          f"width {format_rational(w)}, square side {format_rational(2 * d)}")
    if n == 1:
        check("packing", True, "single strip, no gaps required")
    else:
        used = n * (w + eps)
        check("packing", used <= 2 * d,
              f"N*(width + epsilon) = {format_rational(used)} vs 2*delta = {format_rational(2 * d)}")

    bad = next((j for j in range(n)
                if not (-d <= model.offsets[j] and model.offsets[j] + w <= d)), None)
    check("slabs-inside-square", bad is None,
          "" if bad is None else f"slab {bad} leaves the square")

    gap_fail = ""
    for j in range(n - 1):
        gap = model.offsets[j + 1] - (model.offsets[j] + w)
        if gap <= eps:
            gap_fail = (f"slabs {j} and {j + 1}: gap {format_rational(gap)} <= "
                        f"epsilon {format_rational(eps)}")
            break
    check("slab-gaps", not gap_fail, gap_fail)

    span_fail = ""
    if w <= 0:
        span_fail = "not evaluated: the branch maps need a positive width"
    else:
        for j in range(n):
            (s_lo, s_hi), _ = model.strip(j)
            _, (y_lo, y_hi) = model.slab(j)
            corners = [model.apply_branch(j, (x, y)) for x in (-d, d) for y in (y_lo, y_hi)]
            xs = {c[0] for c in corners}
            ys = {c[1] for c in corners}
            if min(xs) != s_lo or max(xs) != s_hi or ys != {-d, d}:
                span_fail = f"strip {j} does not span the square top to bottom"
                break
    check("strips-span-square", not span_fail, span_fail)

    cross_fail = ""
    for stage, j1, j2 in itertools.product(range(model.p), range(n), range(n)):
        (hx, hy) = model.slab(j1)                   # slab of stage `stage`
        (vx, vy) = model.strip(j2)                  # strip entering stage (stage+1) % p
        if not (hx[0] <= vx[0] and vx[1] <= hx[1] and vy[0] <= hy[0] and hy[1] <= vy[1]):
            cross_fail = (f"stage {stage}: slab {j1} does not cross strip {j2} "
                          f"of stage {(stage + 1) % model.p}")
            break
    check("coherence", not cross_fail, cross_fail)
    return VerificationSummary(tuple(checks))


# === separated families ======================================================

@dataclass(frozen=True)
class Certificate2D:
    """A family of representative points, one per depth-`steps` itinerary,
    verified pairwise (steps, epsilon)-separated by direct orbit evaluation."""

    model: Horseshoe2DModel
    ell: int
    steps: int                                   # p * ell
    count: int                                   # N ** steps
    itineraries: tuple[tuple[int, ...], ...]
    points: tuple[tuple[Fraction, Fraction], ...]
    per_point_min: tuple[Fraction | None, ...]   # min distance to any other point
    min_pairwise: Fraction | None


def _itinerary_box(model: Horseshoe2DModel, itinerary: tuple[int, ...]) -> Interval:
    """Pull the slab constraints back through the y-dynamics: the points
    visiting slab itinerary[t] at every time t form a full-width strip
    [-delta, delta] x (returned y-interval)."""
    y_lo, y_hi = -model.delta, model.delta
    for depth, j in enumerate(reversed(itinerary)):
        off, w, d = model.offsets[j], model.width, model.delta
        if model.orientations[j] == 1:
            a = off + (y_lo + d) * w / (2 * d)
            b = off + (y_hi + d) * w / (2 * d)
        else:
            a = off + (d - y_hi) * w / (2 * d)
            b = off + (d - y_lo) * w / (2 * d)
        y_lo, y_hi = a, b
        if y_lo >= y_hi:
            raise VerificationError(
                f"empty itinerary box at depth {depth} for itinerary "
                f"{'-'.join(str(s) for s in itinerary)}: coherence violated"
            )
    return (y_lo, y_hi)


def separated_bound_2d(model: Horseshoe2DModel, ell: int, rep_cap: int = REP_CAP_2D) -> Certificate2D:
    """Materialize all N**(p*ell) itinerary boxes, pick the midpoint
    representative of each, and certify every pair (p*ell, epsilon)-separated
    by direct evaluation of the stage map."""
    if ell < 1:
        raise DomainError(f"ell must be >= 1, got {ell}")
    steps = model.p * ell
    total = model.N ** steps
    if total > rep_cap:
        raise ResourceError(
            f"N**(p*ell) = {total} representatives exceed the cap {rep_cap}"
        )

    itineraries = tuple(itertools.product(range(model.N), repeat=steps))
    points: list[tuple[Fraction, Fraction]] = []
    orbits: list[list[tuple[Fraction, Fraction]]] = []
    for itin in itineraries:
        y_lo, y_hi = _itinerary_box(model, itin)
        rep = (Fraction(0), (y_lo + y_hi) / 2)
        pts = orbit_2d(model, rep, steps)
        for t, pos in enumerate(pts):
            if model.slab_index(pos[1]) != itin[t]:
                raise VerificationError(
                    f"representative of {'-'.join(str(s) for s in itin)} "
                    f"left its slab at step {t}"
                )
        points.append(rep)
        orbits.append(pts)

    per_min: list[Fraction | None] = [None] * total
    for i in range(total):
        for k in range(i + 1, total):
            dist = max(plane_distance(a, b) for a, b in zip(orbits[i], orbits[k]))
            if dist <= model.epsilon:
                raise VerificationError(
                    f"representatives {i} and {k} are only {format_rational(dist)} "
                    f"apart in d_{steps} (epsilon = {format_rational(model.epsilon)})"
                )
            if per_min[i] is None or dist < per_min[i]:
                per_min[i] = dist
            if per_min[k] is None or dist < per_min[k]:
                per_min[k] = dist

    min_pairwise = min((m for m in per_min if m is not None), default=None)
    return Certificate2D(model, ell, steps, total, itineraries, tuple(points),
                         tuple(per_min), min_pairwise)


def ratio_lower_bound(model: Horseshoe2DModel, ell_max: int, rep_cap: int = REP_CAP_2D) -> float:
    """Certified growth rate over |log epsilon|: builds the deepest
    certificate that fits under `rep_cap` and returns
    log(count) / steps / |log epsilon|  (= log N / |log epsilon|)."""
    if ell_max < 1:
        raise DomainError(f"ell_max must be >= 1, got {ell_max}")
    ell = max([l for l in range(1, ell_max + 1) if model.N ** (model.p * l) <= rep_cap],
              default=1)
    cert = separated_bound_2d(model, ell, rep_cap)
    if cert.count == 1:
        return 0.0
    la = abs(math.log(model.epsilon))
    rate = math.log(cert.count) / cert.steps
    return math.inf if la == 0 else rate / la


# === serialization ===========================================================

MODEL2D_HEADER = "horseshoe-2d v1"


def dump_model_2d(model: Horseshoe2DModel) -> str:
    """Text form: scalar lines, then one `branch j slab lo:hi strip lo:hi
    orient +/-` line per branch (stages share the geometry)."""
    lines = [
        MODEL2D_HEADER,
        f"N {model.N}",
        f"p {model.p}",
        f"delta {format_rational(model.delta)}",
        f"epsilon {format_rational(model.epsilon)}",
        f"width {format_rational(model.width)}",
    ]
    for j in range(model.N):
        _, (y_lo, y_hi) = model.slab(j)
        (x_lo, x_hi), _ = model.strip(j)
        sign = "+" if model.orientations[j] == 1 else "-"
        lines.append(
            f"branch {j} slab {format_interval(y_lo, y_hi)} "
            f"strip {format_interval(x_lo, x_hi)} orient {sign}"
        )
    return "\n".join(lines) + "\n"


def load_model_2d(text: str) -> Horseshoe2DModel:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != MODEL2D_HEADER:
        raise SerializationError(f"expected header {MODEL2D_HEADER!r}")
    scalars: dict[str, str] = {}
    branches: list[tuple[int, Interval, Interval, int]] = []
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "branch":
            if len(parts) != 8 or parts[2] != "slab" or parts[4] != "strip" or parts[6] != "orient":
                raise SerializationError(f"bad branch line: {ln!r}")
            branches.append((
                int(parts[1]),
                parse_interval(parts[3]),
                parse_interval(parts[5]),
                1 if parts[7] == "+" else -1,
            ))
        elif len(parts) == 2:
            scalars[parts[0]] = parts[1]
        else:
            raise SerializationError(f"bad line: {ln!r}")
    try:
        n = int(scalars["N"])
        p = int(scalars["p"])
        delta = parse_rational(scalars["delta"])
        epsilon = parse_rational(scalars["epsilon"])
        width = parse_rational(scalars["width"])
    except KeyError as missing:
        raise SerializationError(f"missing scalar {missing.args[0]!r}") from None
    if len(branches) != n or [b[0] for b in branches] != list(range(n)):
        raise SerializationError(f"expected branches 0..{n - 1} in order")
    offsets = []
    orientations = []
    for j, (y_lo, y_hi), (x_lo, x_hi), orient in branches:
        if y_lo != x_lo or y_hi - y_lo != width or x_hi - x_lo != width:
            raise SerializationError(f"branch {j}: slab/strip extents disagree with width")
        offsets.append(y_lo)
        orientations.append(orient)
    return Horseshoe2DModel(n, p, delta, epsilon, width, tuple(offsets), tuple(orientations))


CERTIFICATE_CSV_HEADER = "itinerary,x,y,min_pairwise_dn"


def certificate_to_csv(cert: Certificate2D) -> str:
    """One row per representative: dash-separated itinerary, exact
    coordinates, and its least distance to any other representative."""
    rows = [CERTIFICATE_CSV_HEADER]
    for itin, (x, y), dist in zip(cert.itineraries, cert.points, cert.per_point_min):
        rows.append(
            f"{'-'.join(str(s) for s in itin)},{format_rational(x)},{format_rational(y)},"
            f"{format_rational(dist) if dist is not None else ''}"
        )
    return "\n".join(rows) + "\n"
