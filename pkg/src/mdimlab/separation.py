"""Separated-set counting and entropy-at-scale estimation.

The dynamical metric is d_n(x,y) = max_{0<=i<n} |f^i(x) - f^i(y)|; a set is
(n,eps)-separated when every pair has d_n strictly greater than eps.  True
maximal separated cardinality over the continuum has no known efficient
algorithm under d_n, so counts are produced three ways and labeled by method:

* ``greedy-grid``      — greedy maximal separated subset of a uniform grid
                         (a certified lower bound relative to that grid);
* ``exhaustive-grid``  — exact maximum over an explicit point set (subset
                         scan, capped at 14 points);
* ``cylinder-exact``   — branch-itinerary counts B^n for maps declared
                         full-branch Markov on a marked core interval, with
                         representative midpoints certified separated when
                         the branch family declares a separation scale.

Rates h(f,eps) are least-squares slopes of log(count) against n over a
window, with the max single-step increment reported alongside as a second
growth proxy; ratios h/|log eps| feed the mean-dimension profiles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .errors import (
    ContractError,
    DomainError,
    GridPrecisionError,
    ResourceError,
    SerializationError,
)
from .pwa import PwaMap, eval_map
from .rational import format_interval, format_rational, parse_interval, parse_rational

METHOD_GREEDY = "greedy-grid"
METHOD_EXHAUSTIVE = "exhaustive-grid"
METHOD_CYLINDER = "cylinder-exact"
METHODS = (METHOD_GREEDY, METHOD_EXHAUSTIVE, METHOD_CYLINDER)

EXHAUSTIVE_POINT_CAP = 14       # 2^14 subset scan
REPRESENTATIVE_CAP = 20000      # cylinder representative enumeration cap


# === records =================================================================

@dataclass(frozen=True)
class CountRecord:
    """One separated-set count: s(f, n, epsilon) bound/value by one method."""

    n: int
    epsilon: Fraction
    count: int
    method: str
    grid_resolution: Fraction | None = None

    def __post_init__(self) -> None:
        if self.count < 1:
            raise DomainError(f"counts are always >= 1, got {self.count}")
        if self.epsilon <= 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class ScaleRate:
    """Entropy estimate at one scale: counts over an n-window plus the rate."""

    epsilon: Fraction
    records: tuple[CountRecord, ...]
    h_hat: float                 # least-squares slope of log count vs n
    max_step: float              # max one-step log-count increment
    ratio: float                 # h_hat / |log epsilon|, clamped to [0,1]
    window: tuple[int, int]
    method: str


@dataclass(frozen=True)
class SeparationReport:
    """Per-scale rates plus tail-half upper/lower mean-dimension estimates."""

    entries: tuple[ScaleRate, ...]
    upper: float
    lower: float


# === dynamical metric ========================================================

def orbit(m: PwaMap, x: Fraction, n: int) -> list[Fraction]:
    """[x, f(x), ..., f^{n-1}(x)] by pointwise evaluation (no map iteration)."""
    if n < 1:
        raise DomainError(f"orbit needs n >= 1, got {n}")
    out = [Fraction(x)]
    for _ in range(n - 1):
        out.append(eval_map(m, out[-1]))
    return out


def dn_distance(m: PwaMap, x: Fraction, y: Fraction, n: int) -> Fraction:
    """d_n(x,y) = max over the first n iterates of the pointwise distance."""
    if n < 1:
        raise DomainError(f"dn_distance needs n >= 1, got {n}")
    ox, oy = orbit(m, x, n), orbit(m, y, n)
    return max(abs(a - b) for a, b in zip(ox, oy))


# === greedy / exhaustive counting ===========================================

def greedy_separated_points(
    m: PwaMap, n: int, epsilon: Fraction, points: list[Fraction]
) -> list[Fraction]:
    """Greedy left-to-right maximal (n,eps)-separated subset of sorted points.

    Uses d_n >= |x - y| to skip orbit comparisons against selected points more
    than eps away in the x-coordinate.
    """
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    selected: list[Fraction] = []
    selected_orbits: list[list[Fraction]] = []
    for x in sorted(points):
        ox = None
        ok = True
        for s, os_ in zip(reversed(selected), reversed(selected_orbits)):
            if x - s > epsilon:
                break               # this and all earlier points are far in x
            if ox is None:
                ox = orbit(m, x, n)
            if max(abs(a - b) for a, b in zip(ox, os_)) <= epsilon:
                ok = False
                break
        if ok:
            selected.append(x)
            selected_orbits.append(ox if ox is not None else orbit(m, x, n))
    return selected


def count_separated_greedy(
    m: PwaMap, n: int, epsilon: Fraction, grid: Fraction
) -> CountRecord:
    """Greedy separated count over the uniform grid {0, g, 2g, ...} ∩ [0,1].

    The grid must resolve the scale (g <= eps/4), otherwise the grid count
    says nothing about eps-separation and we refuse.
    """
    if n < 1:
        raise DomainError(f"count_separated_greedy needs n >= 1, got {n}")
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if grid <= 0 or grid > epsilon / 4:
        raise GridPrecisionError(
            f"grid resolution {grid} is coarser than epsilon/4 = {epsilon / 4}"
        )
    points = [grid * j for j in range(int(1 / grid) + 1)]
    selected = greedy_separated_points(m, n, epsilon, points)
    return CountRecord(n, epsilon, len(selected), METHOD_GREEDY, grid)


def max_separated_subset(
    m: PwaMap, n: int, epsilon: Fraction, points: list[Fraction]
) -> int:
    """Exact maximum (n,eps)-separated subset size of an explicit point set."""
    pts = sorted(points)
    k = len(pts)
    orbits = [orbit(m, x, n) for x in pts]
    # adjacency bitmasks: bit j of adj[i] set iff d_n(p_i, p_j) > eps
    adj = [0] * k
    for i in range(k):
        for j in range(i + 1, k):
            if max(abs(a - b) for a, b in zip(orbits[i], orbits[j])) > epsilon:
                adj[i] |= 1 << j
                adj[j] |= 1 << i
    best = 1 if k else 0
    for mask in range(1, 1 << k):
        size = mask.bit_count()
        if size <= best:
            continue
        mm, ok = mask, True
        while mm:
            i = (mm & -mm).bit_length() - 1
            mm &= mm - 1
            if mask & ~adj[i] & ~(1 << i):
                ok = False
                break
        if ok:
            best = size
    return best


def count_separated_exhaustive(
    m: PwaMap, n: int, epsilon: Fraction, points: list[Fraction]
) -> CountRecord:
    """True maximal separated cardinality within the given points (<= 14)."""
    if n < 1:
        raise DomainError(f"count_separated_exhaustive needs n >= 1, got {n}")
    if not points:
        raise DomainError("point set must be nonempty")
    if len(points) > EXHAUSTIVE_POINT_CAP:
        raise ResourceError(
            f"exhaustive scan capped at {EXHAUSTIVE_POINT_CAP} points,"
            f" got {len(points)}"
        )
    return CountRecord(n, epsilon, max_separated_subset(m, n, epsilon, points), METHOD_EXHAUSTIVE)


# === full-branch Markov views ===============================================

@dataclass(frozen=True)
class MarkovBranch:
    lo: Fraction
    hi: Fraction
    increasing: bool


@dataclass(frozen=True)
class MarkovView:
    """A family of affine full branches onto a common core interval.

    Each branch maps [lo, hi] affinely ONTO [core_lo, core_hi] (increasing or
    decreasing).  When ``separation_scale`` is set, the branch domains must
    have pairwise gaps strictly above it — that is what certifies cylinder
    representatives as separated.  ``map`` optionally ties the view to the
    PwaMap realizing it, in which case branch shape is re-checked against the
    actual nodes and orbits run through the real map.
    """

    core_lo: Fraction
    core_hi: Fraction
    branches: tuple[MarkovBranch, ...]
    separation_scale: Fraction | None = None
    map: PwaMap | None = None
    label: str = ""

    def __post_init__(self) -> None:
        if self.core_lo >= self.core_hi:
            raise ContractError(f"degenerate core [{self.core_lo}, {self.core_hi}]")
        if not self.branches:
            raise ContractError("a Markov view needs at least one branch")
        prev_hi = None
        for br in self.branches:
            if br.lo >= br.hi:
                raise ContractError(f"degenerate branch domain [{br.lo}, {br.hi}]")
            if prev_hi is not None:
                gap = br.lo - prev_hi
                if gap < 0:
                    raise ContractError("branch domains overlap")
                if self.separation_scale is not None and gap <= self.separation_scale:
                    raise ContractError(
                        f"branch domain gap {gap} not above the declared"
                        f" separation scale {self.separation_scale}"
                    )
            prev_hi = br.hi
        if self.map is not None:
            for br in self.branches:
                self._check_branch_against_map(br)

    def _check_branch_against_map(self, br: MarkovBranch) -> None:
        lo_v, hi_v = eval_map(self.map, br.lo), eval_map(self.map, br.hi)
        want = (self.core_lo, self.core_hi) if br.increasing else (self.core_hi, self.core_lo)
        if (lo_v, hi_v) != want:
            raise ContractError(
                f"branch [{br.lo}, {br.hi}] does not map onto the core:"
                f" endpoint values ({lo_v}, {hi_v}), expected {want}"
            )
        for x in self.map.xs:
            if br.lo < x < br.hi:
                raise ContractError(
                    f"branch [{br.lo}, {br.hi}] is not affine: map node at {x}"
                )

    @property
    def branch_count(self) -> int:
        return len(self.branches)

    def branch_image(self, idx: int, x: Fraction) -> Fraction:
        """Value of branch idx at x in its domain (affine onto the core)."""
        br = self.branches[idx]
        t = (x - br.lo) / (br.hi - br.lo)
        if br.increasing:
            return self.core_lo + t * (self.core_hi - self.core_lo)
        return self.core_hi - t * (self.core_hi - self.core_lo)

    def branch_pullback(self, idx: int, lo: Fraction, hi: Fraction) -> tuple[Fraction, Fraction]:
        """Preimage inside branch idx of a subinterval [lo, hi] of the core."""
        br = self.branches[idx]
        s = (br.hi - br.lo) / (self.core_hi - self.core_lo)
        if br.increasing:
            return (br.lo + (lo - self.core_lo) * s, br.lo + (hi - self.core_lo) * s)
        return (br.lo + (self.core_hi - hi) * s, br.lo + (self.core_hi - lo) * s)


def cylinder_interval(view: MarkovView, itinerary: tuple[int, ...]) -> tuple[Fraction, Fraction]:
    """The interval of points following the given branch itinerary."""
    lo, hi = view.core_lo, view.core_hi
    for idx in reversed(itinerary):
        lo, hi = view.branch_pullback(idx, lo, hi)
    return lo, hi


def cylinder_representatives(
    view: MarkovView, n: int, cap: int = REPRESENTATIVE_CAP
) -> list[tuple[tuple[int, ...], Fraction]]:
    """(itinerary, cylinder midpoint) for every depth-n itinerary."""
    total = view.branch_count**n
    if total > cap:
        raise ResourceError(
            f"{total} depth-{n} cylinders exceed the representative cap {cap}"
        )
    reps = []
    for itinerary in product(range(view.branch_count), repeat=n):
        lo, hi = cylinder_interval(view, itinerary)
        reps.append((itinerary, (lo + hi) / 2))
    return reps


def count_cylinders(view: MarkovView, n: int, epsilon: Fraction | None = None) -> CountRecord:
    """Exact depth-n cylinder count B^n for a full-branch Markov view.

    The record's scale is the view's declared separation scale unless an
    explicit epsilon is passed (e.g. rating a non-separated family like the
    tent's two touching branches at an external scale).
    """
    if n < 0:
        raise DomainError(f"count_cylinders needs n >= 0, got {n}")
    eps = epsilon if epsilon is not None else view.separation_scale
    if eps is None:
        raise DomainError("no scale: view declares none and no epsilon was passed")
    return CountRecord(n, eps, view.branch_count**n, METHOD_CYLINDER)


def view_orbit(view: MarkovView, itinerary: tuple[int, ...], x: Fraction) -> list[Fraction]:
    """Orbit of x along its itinerary: the real map if attached, else branches."""
    if view.map is not None:
        return orbit(view.map, x, len(itinerary))
    out = [x]
    for idx in itinerary[:-1]:
        out.append(view.branch_image(idx, out[-1]))
    return out


def verify_cylinder_separation(
    view: MarkovView, n: int, cap: int = REPRESENTATIVE_CAP
) -> Fraction:
    """Min pairwise d_n over depth-n representatives; must beat the scale.

    Raises ContractError if the view declares no separation scale, and
    VerificationError never — a failed certificate is a ContractError too,
    since it falsifies the view's declared contract.
    """
    if view.separation_scale is None:
        raise ContractError("view declares no separation scale to certify against")
    if n < 1:
        raise DomainError(f"verify_cylinder_separation needs n >= 1, got {n}")
    reps = cylinder_representatives(view, n, cap)
    orbits = [view_orbit(view, it, x) for it, x in reps]
    best: Fraction | None = None
    for i in range(len(orbits)):
        for j in range(i + 1, len(orbits)):
            d = max(abs(a - b) for a, b in zip(orbits[i], orbits[j]))
            if best is None or d < best:
                best = d
    if best is None:          # single branch: nothing to separate
        return view.core_hi - view.core_lo
    if best <= view.separation_scale:
        raise ContractError(
            f"representatives only {best} apart in d_{n},"
            f" below the declared scale {view.separation_scale}"
        )
    return best


# === rates and profiles ======================================================

def _least_squares_slope(ns: list[int], logs: list[float]) -> float:
    k = len(ns)
    nbar = sum(ns) / k
    ybar = sum(logs) / k
    num = sum((n - nbar) * (y - ybar) for n, y in zip(ns, logs))
    den = sum((n - nbar) ** 2 for n in ns)
    return num / den


def count_at(
    source: PwaMap | MarkovView,
    n: int,
    epsilon: Fraction,
    method: str,
    grid: Fraction | None = None,
) -> CountRecord:
    """One (n, epsilon) count by the named method — the unit of work that
    profiles and sweeps fan out over."""
    if method == METHOD_CYLINDER:
        if not isinstance(source, MarkovView):
            raise DomainError("cylinder method needs a MarkovView source")
        return count_cylinders(source, n, epsilon)
    if method == METHOD_GREEDY:
        if not isinstance(source, PwaMap):
            raise DomainError("greedy method needs a PwaMap source")
        return count_separated_greedy(source, n, epsilon, grid or epsilon / 4)
    if method == METHOD_EXHAUSTIVE:
        if not isinstance(source, PwaMap):
            raise DomainError("exhaustive method needs a PwaMap source")
        g = grid or Fraction(1, EXHAUSTIVE_POINT_CAP - 1)
        points = [g * j for j in range(int(1 / g) + 1)]
        return count_separated_exhaustive(source, n, epsilon, points)
    raise DomainError(f"unknown method {method!r}")


def rate_from_records(
    epsilon: Fraction,
    records: list[CountRecord],
    n_window: tuple[int, int],
    method: str,
) -> ScaleRate:
    """Fit an entropy-at-scale estimate to precomputed counts.

    h_hat is the least-squares slope of log(count) against n; max_step is
    the largest single-step increment (a finite-window stand-in for the
    limsup).  ratio = h_hat/|log eps| is clamped to [0,1], the box-dimension
    range for interval maps.
    """
    ns = [r.n for r in records]
    logs = [math.log(r.count) for r in records]
    h_hat = _least_squares_slope(ns, logs)
    max_step = max(b - a for a, b in zip(logs, logs[1:]))
    log_eps = abs(math.log(epsilon))
    ratio = min(max(h_hat / log_eps, 0.0), 1.0)
    return ScaleRate(epsilon, tuple(records), h_hat, max_step, ratio, n_window, method)


def check_rate_window(n_window: tuple[int, int], epsilon: Fraction) -> None:
    n_min, n_max = n_window
    if not (n_max > n_min >= 1):
        raise DomainError(f"need n_max > n_min >= 1, got window {n_window}")
    if not 0 < epsilon < 1:
        raise DomainError(f"rate estimation needs 0 < epsilon < 1, got {epsilon}")


def rate_at_scale(
    source: PwaMap | MarkovView,
    epsilon: Fraction,
    n_window: tuple[int, int],
    method: str,
    grid: Fraction | None = None,
) -> ScaleRate:
    """Entropy-at-scale estimate from counts over n in [n_min, n_max]."""
    check_rate_window(n_window, epsilon)
    n_min, n_max = n_window
    records = [count_at(source, n, epsilon, method, grid) for n in range(n_min, n_max + 1)]
    return rate_from_records(epsilon, records, n_window, method)


def check_scales(scales: list[Fraction]) -> None:
    if not scales:
        raise DomainError("scales list is empty")
    for s in scales:
        if not 0 < s < 1:
            raise DomainError(f"scales must lie in (0,1), got {s}")
    for a, b in zip(scales, scales[1:]):
        if not b < a:
            raise DomainError(f"scales must strictly decrease: {a} then {b}")


def report_from_entries(entries: tuple[ScaleRate, ...]) -> SeparationReport:
    """The tail half of the scale list (the smallest scales) gives the
    upper (max ratio) and lower (min ratio) estimates."""
    tail = entries[len(entries) // 2 :]
    upper = max(e.ratio for e in tail)
    lower = min(e.ratio for e in tail)
    return SeparationReport(entries, upper, lower)


def mdim_profile(
    sources: PwaMap | MarkovView | list[PwaMap | MarkovView],
    scales: list[Fraction],
    n_window: tuple[int, int],
    method: str,
    grid: Fraction | None = None,
) -> SeparationReport:
    """Ratio profile over strictly decreasing scales.

    ``sources`` may be a single source shared across scales or one source
    per scale (e.g. per-level Markov views at their own scales).
    """
    check_scales(scales)
    if isinstance(sources, list):
        if len(sources) != len(scales):
            raise DomainError(
                f"{len(sources)} sources for {len(scales)} scales"
            )
        per_scale = sources
    else:
        per_scale = [sources] * len(scales)
    entries = tuple(
        rate_at_scale(src, eps, n_window, method, grid)
        for src, eps in zip(per_scale, scales)
    )
    return report_from_entries(entries)


# === export ==================================================================

CSV_HEADER = "epsilon,n,count,method,grid,h_hat,ratio"


def _sig12(x: float) -> str:
    return f"{x:.12g}"


def report_to_csv(report: SeparationReport) -> str:
    """CSV rows sorted by (epsilon, n, method): exact fractions for the
    scale columns, 12-significant-digit decimals for the fitted columns."""
    rows = []
    for entry in report.entries:
        for rec in entry.records:
            rows.append((
                rec.epsilon, rec.n, rec.method,
                f"{format_rational(rec.epsilon)},{rec.n},{rec.count},{rec.method},"
                f"{format_rational(rec.grid_resolution) if rec.grid_resolution is not None else ''},"
                f"{_sig12(entry.h_hat)},{_sig12(entry.ratio)}"
            ))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return "\n".join([CSV_HEADER] + [r[3] for r in rows]) + "\n"


def report_to_json(report: SeparationReport) -> dict:
    return {
        "upper": report.upper,
        "lower": report.lower,
        "entries": [
            {
                "epsilon": format_rational(e.epsilon),
                "h_hat": e.h_hat,
                "max_step": e.max_step,
                "ratio": e.ratio,
                "window": list(e.window),
                "method": e.method,
                "records": [
                    {
                        "n": r.n,
                        "count": r.count,
                        "method": r.method,
                        "grid": format_rational(r.grid_resolution)
                        if r.grid_resolution is not None
                        else None,
                    }
                    for r in e.records
                ],
            }
            for e in report.entries
        ],
    }


# === views serialization =====================================================

VIEWS_HEADER = "markov-views v1"


def dump_views(views: tuple[MarkovView, ...] | list[MarkovView]) -> str:
    """Geometry-only text form: core, scale ('-' when undeclared), optional
    label, then one branch line per branch.  Attached maps are not stored;
    loaded views count cylinders through the branch geometry alone."""
    lines = [VIEWS_HEADER]
    for v in views:
        scale = "-" if v.separation_scale is None else format_rational(v.separation_scale)
        head = f"view core {format_interval(v.core_lo, v.core_hi)} scale {scale}"
        if v.label:
            head += f" label {v.label}"
        lines.append(head)
        for b in v.branches:
            way = "up" if b.increasing else "down"
            lines.append(f"branch {way} {format_interval(b.lo, b.hi)}")
    return "\n".join(lines) + "\n"


def load_views(text: str) -> tuple[MarkovView, ...]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != VIEWS_HEADER:
        raise SerializationError(f"expected header {VIEWS_HEADER!r}")
    views: list[MarkovView] = []
    pending: dict | None = None

    def finish() -> None:
        if pending is None:
            return
        if not pending["branches"]:
            raise SerializationError(f"view {pending['label']!r} has no branch lines")
        views.append(MarkovView(
            pending["core"][0], pending["core"][1],
            tuple(pending["branches"]), pending["scale"], None, pending["label"],
        ))

    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "view":
            if len(parts) < 5 or parts[1] != "core" or parts[3] != "scale":
                raise SerializationError(f"bad view line: {ln!r}")
            finish()
            label = ""
            if len(parts) > 5:
                if parts[5] != "label":
                    raise SerializationError(f"bad view line: {ln!r}")
                label = ln.split(" label ", 1)[1]
            pending = {
                "core": parse_interval(parts[2]),
                "scale": None if parts[4] == "-" else parse_rational(parts[4]),
                "branches": [],
                "label": label,
            }
        elif parts[0] == "branch":
            if pending is None or len(parts) != 3 or parts[1] not in ("up", "down"):
                raise SerializationError(f"bad branch line: {ln!r}")
            lo, hi = parse_interval(parts[2])
            pending["branches"].append(MarkovBranch(lo, hi, parts[1] == "up"))
        else:
            raise SerializationError(f"bad line: {ln!r}")
    finish()
    if not views:
        raise SerializationError("no views in file")
    return tuple(views)
