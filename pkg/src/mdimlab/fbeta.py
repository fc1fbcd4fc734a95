"""Piecewise-affine interval maps with a prescribed entropy-to-scale ratio.

The construction is organized in levels.  Level k lives on a core interval
J_k = [a_{2k+1}, a_{2k}]; the cores shrink toward 0 and consecutive cores are
separated by gap intervals G_k = [a_{2k+2}, a_{2k+1}] carrying attracting
dynamics (every gap orbit falls onto the gap's midpoint b_k).  J_k is cut
into ell_k equal subintervals of width eps_k = gamma_k/ell_k, gamma_k being
the core length, and the subintervals carry, in order:

    position 1+4i (0 <= i <= i_k)     increasing full branch onto J_k
    position 2+4i (0 <= i <= i_k-1)   tent excursion up into G_{k-1}
    position 3+4i (0 <= i <= i_k-1)   decreasing full branch onto J_k
    position 4+4i (0 <= i <= i_k-1)   tent excursion down into G_k
    positions past 4i_k+1             one wide excursion up, ending at a_{2k}

with i_k = floor((ell_k/gamma_k)^beta), so the number of full branches grows
like (1/eps_k)^beta and the ratio log(branches)/|log eps_k| hugs beta.  The
increasing branches alone have pairwise domain gaps of 3*eps_k, which is what
certifies separated orbit families at scale eps_k.

beta = 1 cannot satisfy the layout inequality 4*i_k + 1 <= ell_k; the dense
variant (every subinterval an alternating full branch, counts ell_k^n) covers
that endpoint and must be requested explicitly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import ContractError, DomainError, ResourceError, SerializationError
from .pwa import DEFAULT_NODE_BUDGET, PwaMap, eval_map, dump_pwa, load_pwa
from .rational import floor_pow, format_rational, parse_rational, parse_interval, format_interval
from .reporting import CheckResult, VerificationSummary
from .separation import MarkovBranch, MarkovView, verify_cylinder_separation

ONE = Fraction(1)


# === plans ===================================================================

@dataclass(frozen=True)
class FBetaLevel:
    """Per-level constants: core [a_odd, a_even], subdivision, gap attractor."""

    k: int
    a_even: Fraction      # a_{2k}: top of the core J_k
    a_odd: Fraction       # a_{2k+1}: bottom of the core J_k
    ell: int              # number of equal subintervals (odd, increasing in k)
    i_sel: int            # floor((ell/gamma)^beta): branch-selection parameter
    eps: Fraction         # subinterval width gamma/ell; also a_{2k+2}
    b: Fraction           # attracting midpoint of the gap G_k below the core

    @property
    def gamma(self) -> Fraction:
        return self.a_even - self.a_odd


@dataclass(frozen=True)
class FBetaPlan:
    beta: Fraction
    K: int
    seed_a1: Fraction
    variant_full: bool
    levels: tuple[FBetaLevel, ...]

    @property
    def tail_end(self) -> Fraction:
        """a_{2K+2}: right endpoint of the identity tail [0, a_{2K+2}]."""
        return self.levels[-1].eps

    def branch_count(self, k: int) -> int:
        """Size of the certified full-branch family at level k.

        Standard layout: the i_k+1 increasing branches (their 3*eps_k domain
        gaps are what makes the family separated at scale eps_k).  Dense
        variant: all ell_k subintervals.
        """
        lv = self.level(k)
        return lv.ell if self.variant_full else lv.i_sel + 1

    def level(self, k: int) -> FBetaLevel:
        if not 0 <= k <= self.K:
            raise DomainError(f"level {k} outside 0..{self.K}")
        return self.levels[k]


def _surely_infeasible(ell: int, gamma: Fraction, p: int, q: int) -> bool:
    # (ell/gamma)^(p/q) >= (ell+3)/4, cross-multiplied to integers.
    gn, gd = gamma.numerator, gamma.denominator
    return (ell * gd) ** p * 4**q >= gn**p * (ell + 3) ** q


def _feasible(ell: int, gamma: Fraction, beta: Fraction) -> bool:
    return 4 * floor_pow(Fraction(ell) / gamma, beta) + 1 <= ell


def _min_feasible_odd(gamma: Fraction, beta: Fraction, ell_prev: int) -> int:
    """Smallest odd ell > ell_prev with 4*floor((ell/gamma)^beta) + 1 <= ell.

    A linear scan would take ~10^9 steps at beta near 1, so once the scan
    enters the certainly-infeasible region we bisect its right edge instead:
    (ell/gamma)^beta is concave in ell and (ell+3)/4 affine, so the region
    where the first dominates the second is a single interval and bisection
    on the certificate is rigorous.
    """
    p, q = beta.numerator, beta.denominator
    ell = max(ell_prev + 2, 3)
    if ell % 2 == 0:
        ell += 1
    while not _surely_infeasible(ell, gamma, p, q):
        if _feasible(ell, gamma, beta):
            return ell
        ell += 2
    lo = ell
    hi = lo
    while _surely_infeasible(hi, gamma, p, q):
        hi = 2 * hi + 1
    while hi - lo > 2:
        mid = lo + (hi - lo) // 4 * 2
        if mid == lo:
            mid += 2
        if _surely_infeasible(mid, gamma, p, q):
            lo = mid
        else:
            hi = mid
    ell = hi
    while not _feasible(ell, gamma, beta):
        ell += 2
    return ell


def plan_sequences(
    beta: Fraction,
    K: int,
    seed_a1: Fraction = Fraction(1, 2),
    variant_full: bool = False,
) -> FBetaPlan:
    """Deterministic level constants for the target ratio beta.

    Free choices are pinned: a_1 = seed_a1, a_{2k+1} = a_{2k}/2 afterwards
    (midpoint rule), ell_k minimal feasible odd, b_k the gap midpoint, and
    a_{2k+2} = eps_k closing the recursion.
    """
    beta = Fraction(beta)
    seed_a1 = Fraction(seed_a1)
    if not 0 <= beta <= 1:
        raise DomainError(f"beta must lie in [0,1], got {beta}")
    if K < 0:
        raise DomainError(f"K must be >= 0, got {K}")
    if not 0 < seed_a1 < 1:
        raise DomainError(f"seed_a1 must lie strictly inside (0,1), got {seed_a1}")
    if beta == 1 and not variant_full:
        raise ContractError(
            "beta = 1 cannot satisfy 4*i_k + 1 <= ell_k;"
            " request the dense variant (variant_full=True) explicitly"
        )
    if variant_full and beta != 1:
        raise ContractError("the dense variant is the beta = 1 construction only")

    levels: list[FBetaLevel] = []
    a_even, a_odd = ONE, seed_a1
    ell_prev = 1
    for k in range(K + 1):
        gamma = a_even - a_odd
        if variant_full:
            ell = ell_prev + 2
        else:
            ell = _min_feasible_odd(gamma, beta, ell_prev)
        i_sel = floor_pow(Fraction(ell) / gamma, beta)
        eps = gamma / ell
        b = (eps + a_odd) / 2                      # midpoint of G_k = [a_{2k+2}, a_{2k+1}]
        if not variant_full and not 4 * i_sel + 1 <= ell:
            raise ContractError(f"level {k}: branch layout 4*{i_sel}+1 > ell={ell}")
        levels.append(FBetaLevel(k, a_even, a_odd, ell, i_sel, eps, b))
        a_even, a_odd = eps, eps / 2               # next core: a_{2k+2} = eps_k, midpoint rule
        ell_prev = ell
    return FBetaPlan(beta, K, seed_a1, variant_full, tuple(levels))


def predicted_count(plan: FBetaPlan, k: int, n: int) -> int:
    """floor((1/eps_k)^beta)^n — the level-k separated-count prediction.

    The dense variant predicts ell_k^n (every subinterval is a branch).
    """
    if n < 0:
        raise DomainError(f"predicted_count needs n >= 0, got {n}")
    lv = plan.level(k)
    if plan.variant_full:
        return lv.ell**n
    return floor_pow(1 / lv.eps, plan.beta) ** n


# === building the map ========================================================

@dataclass(frozen=True)
class BranchEntry:
    level: int
    j: int                 # 1-based subinterval position within the level
    increasing: bool
    lo: Fraction
    hi: Fraction


@dataclass(frozen=True)
class FBetaModel:
    plan: FBetaPlan
    map: PwaMap
    branch_table: tuple[BranchEntry, ...]
    views: tuple[MarkovView, ...]      # one certified full-branch view per level

    def view(self, k: int) -> MarkovView:
        if not 0 <= k <= self.plan.K:
            raise DomainError(f"level {k} outside 0..{self.plan.K}")
        return self.views[k]


class _NodeSink:
    """Append-only node list asserting exact continuity at shared x-values."""

    def __init__(self) -> None:
        self.nodes: list[tuple[Fraction, Fraction]] = []

    def push(self, x: Fraction, y: Fraction) -> None:
        if self.nodes:
            lx, ly = self.nodes[-1]
            if x == lx:
                if y != ly:
                    raise ContractError(f"assembly discontinuity at x={x}: {ly} vs {y}")
                return
            if x < lx:
                raise ContractError(f"assembly out of order at x={x} after {lx}")
        self.nodes.append((x, y))


def _estimate_nodes(plan: FBetaPlan) -> int:
    return sum(2 * lv.ell + 6 for lv in plan.levels) + 2


def build_fbeta(plan: FBetaPlan, node_budget: int = DEFAULT_NODE_BUDGET) -> FBetaModel:
    """Assemble the map bottom-up: identity tail, then gap + level per k.

    Every piece boundary is asserted continuous during assembly; the final
    node list is canonicalized by the PwaMap constructor (which also merges
    level-0 top excursions into plateaus at height 1, where the gap above
    the top core degenerates to the single point {1}).
    """
    est = _estimate_nodes(plan)
    if est > node_budget:
        raise ResourceError(
            f"building this plan needs about {est} nodes,"
            f" over the budget of {node_budget}"
        )
    sink = _NodeSink()
    sink.push(Fraction(0), Fraction(0))
    tail = plan.tail_end
    sink.push(tail, tail)                              # identity on [0, a_{2K+2}]
    branch_table: list[BranchEntry] = []
    for k in range(plan.K, -1, -1):
        lv = plan.levels[k]
        _push_gap(sink, lv.eps, lv.a_odd, lv.b)        # G_k = [a_{2k+2}, a_{2k+1}]
        top_peak = plan.levels[k - 1].b if k >= 1 else ONE
        _push_level(sink, plan, lv, top_peak, branch_table)
    if sink.nodes[-1] != (ONE, ONE):
        raise ContractError(f"assembly did not end at (1,1): {sink.nodes[-1]}")
    pwa = PwaMap.from_nodes(sink.nodes)
    views = tuple(_level_view(plan, k, pwa) for k in range(plan.K + 1))
    return FBetaModel(plan, pwa, tuple(branch_table), views)


def _push_gap(sink: _NodeSink, g_l: Fraction, g_r: Fraction, b: Fraction) -> None:
    """Gap map on [g_l, g_r]: both endpoints fixed, plateau at the midpoint b.

    Outer pieces have slope 2, the middle half [m_l, m_r] is flat at b; so
    f(x) > x strictly on (g_l, b), f(x) < x strictly on (b, g_r), and every
    interior orbit lands exactly on b in finitely many steps.
    """
    m_l, m_r = (g_l + b) / 2, (b + g_r) / 2
    sink.push(g_l, g_l)
    sink.push(m_l, b)
    sink.push(b, b)
    sink.push(m_r, b)
    sink.push(g_r, g_r)


def _push_level(
    sink: _NodeSink,
    plan: FBetaPlan,
    lv: FBetaLevel,
    top_peak: Fraction,
    branch_table: list[BranchEntry],
) -> None:
    c = lambda j: lv.a_odd + j * lv.eps                # noqa: E731 subdivision points
    sink.push(c(0), lv.a_odd)
    if plan.variant_full:
        for j in range(1, lv.ell + 1):
            up = j % 2 == 1
            sink.push(c(j), lv.a_even if up else lv.a_odd)
            branch_table.append(BranchEntry(lv.k, j, up, c(j - 1), c(j)))
        return
    limit = 4 * lv.i_sel + 1
    for j in range(1, limit + 1):
        r = (j - 1) % 4
        if r == 0:                                     # increasing full branch
            sink.push(c(j), lv.a_even)
            branch_table.append(BranchEntry(lv.k, j, True, c(j - 1), c(j)))
        elif r == 1:                                   # excursion up into G_{k-1}
            sink.push((c(j - 1) + c(j)) / 2, top_peak)
            sink.push(c(j), lv.a_even)
        elif r == 2:                                   # decreasing full branch
            sink.push(c(j), lv.a_odd)
            branch_table.append(BranchEntry(lv.k, j, False, c(j - 1), c(j)))
        else:                                          # excursion down into G_k
            sink.push((c(j - 1) + c(j)) / 2, lv.b)
            sink.push(c(j), lv.a_odd)
    if lv.ell > limit:                                 # wide excursion to the core top
        sink.push((c(limit) + c(lv.ell)) / 2, top_peak)
        sink.push(c(lv.ell), lv.a_even)


def _level_view(plan: FBetaPlan, k: int, pwa: PwaMap) -> MarkovView:
    lv = plan.levels[k]
    if plan.variant_full:
        branches = tuple(
            MarkovBranch(lv.a_odd + (j - 1) * lv.eps, lv.a_odd + j * lv.eps, j % 2 == 1)
            for j in range(1, lv.ell + 1)
        )
        scale = None                                   # touching domains: no certificate
    else:
        branches = tuple(
            MarkovBranch(lv.a_odd + 4 * i * lv.eps, lv.a_odd + (4 * i + 1) * lv.eps, True)
            for i in range(lv.i_sel + 1)
        )
        scale = lv.eps                                 # domain gaps are 3*eps > eps
    return MarkovView(lv.a_odd, lv.a_even, branches, scale, pwa, label=f"level {k}")


# === verification ============================================================

def verify_model(model: FBetaModel, gap_orbit_steps: int = 200) -> VerificationSummary:
    """Re-check every structural promise of a built model, independently.

    Runs all checks and reports each; `first_failure` carries the offending
    data when something breaks.
    """
    plan, m = model.plan, model.map
    checks: list[CheckResult] = []

    def check(name: str, ok: bool, detail: str = "") -> None:
        checks.append(CheckResult(name, ok, detail))

    check("endpoints-fixed", eval_map(m, Fraction(0)) == 0 and eval_map(m, ONE) == ONE,
          f"f(0)={eval_map(m, Fraction(0))}, f(1)={eval_map(m, ONE)}")

    bad = next(
        (
            e for e in model.branch_table
            if (eval_map(m, e.lo), eval_map(m, e.hi))
            != ((plan.levels[e.level].a_odd, plan.levels[e.level].a_even) if e.increasing
                else (plan.levels[e.level].a_even, plan.levels[e.level].a_odd))
        ),
        None,
    )
    check("branches-onto-core", bad is None,
          "all full branches hit both core endpoints" if bad is None
          else f"level {bad.level} j={bad.j} misses the core endpoints")

    if not plan.variant_full:
        ok = True
        detail = "increasing-branch domain gaps all equal 3*eps"
        for k in range(plan.K + 1):
            ups = [e for e in model.branch_table if e.level == k and e.increasing]
            for a, b in zip(ups, ups[1:]):
                if b.lo - a.hi != 3 * plan.levels[k].eps:
                    ok, detail = False, f"level {k}: gap {b.lo - a.hi} after j={a.j}"
        check("branch-gaps", ok, detail)

    ok, detail = True, "gap orbits land on b and stay"
    for lv in plan.levels:
        g_l, g_r = lv.eps, lv.a_odd
        if eval_map(m, lv.b) != lv.b:
            ok, detail = False, f"level {lv.k}: b={lv.b} not fixed"
            break
        x = g_r - (g_r - lv.b) / 4                     # right quarter-point of the gap
        fx = eval_map(m, x)
        if not lv.b < fx < x:
            ok, detail = False, f"level {lv.k}: f({x})={fx} not strictly between b and x"
            break
        prev = abs(x - lv.b)
        for _ in range(gap_orbit_steps):
            x = eval_map(m, x)
            d = abs(x - lv.b)
            if d > prev or (prev > 0 and d == prev and x != lv.b):
                ok, detail = False, f"level {lv.k}: gap distance stalled at {d}"
                break
            if not g_l <= x <= g_r:
                ok, detail = False, f"level {lv.k}: orbit left the gap at {x}"
                break
            prev = d
        if not ok:
            break
    check("gap-dynamics", ok, detail)

    tail = plan.tail_end
    check("tail-invariant",
          eval_map(m, tail / 2) == tail / 2 and eval_map(m, tail) == tail,
          f"identity on [0, {tail}]")

    ok, detail = True, "level values stay within the core and its two gaps"
    for lv in plan.levels:
        lo_bound = lv.eps                              # bottom of the gap below
        hi_bound = plan.levels[lv.k - 1].a_odd if lv.k >= 1 else ONE
        step = max(1, lv.ell // 64)
        for j in range(1, lv.ell + 1, step):
            mid = lv.a_odd + (2 * j - 1) * lv.eps / 2
            v = eval_map(m, mid)
            if not lo_bound <= v <= hi_bound:
                ok, detail = False, f"level {lv.k} j={j}: value {v} escapes"
                break
        if not ok:
            break
    check("level-range", ok, detail)

    ok, detail = True, "branch_count^n >= predicted for n=2"
    for k in range(plan.K + 1):
        if plan.branch_count(k) ** 2 < predicted_count(plan, k, 2):
            ok, detail = False, f"level {k}: {plan.branch_count(k)}^2 < prediction"
    check("cylinder-count", ok, detail)

    ok, detail = True, "ratios within (1+|log gamma|)/|log eps| of beta"
    for lv in plan.levels:
        ratio = math.log(plan.branch_count(lv.k)) / abs(math.log(lv.eps))
        delta = (1 + abs(math.log(lv.gamma))) / abs(math.log(lv.eps))
        if abs(ratio - float(plan.beta)) > delta:
            ok, detail = False, f"level {lv.k}: ratio {ratio:.6f} outside beta ± {delta:.6f}"
    check("ratio-window", ok, detail)

    ok, detail = True, "certified by direct d_n evaluation where family size allows"
    for k in range(plan.K + 1):
        view = model.views[k]
        if view.separation_scale is None:
            continue
        b_count = view.branch_count
        try:
            if b_count <= 12:
                verify_cylinder_separation(view, 2)
            elif b_count <= 600:
                verify_cylinder_separation(view, 1)
        except ContractError as exc:
            ok, detail = False, f"level {k}: {exc}"
    check("separation-certificate", ok, detail)

    return VerificationSummary(tuple(checks))


# === serialization ===========================================================

PLAN_HEADER = "fbeta-plan v1"
MODEL_HEADER = "fbeta-model v1"


def dump_plan(plan: FBetaPlan) -> str:
    lines = [
        PLAN_HEADER,
        f"beta = {format_rational(plan.beta)}",
        f"K = {plan.K}",
        f"seed_a1 = {format_rational(plan.seed_a1)}",
        f"variant = {'full' if plan.variant_full else 'none'}",
    ]
    for lv in plan.levels:
        lines.append(
            f"level {lv.k}: a_even={format_rational(lv.a_even)}"
            f" a_odd={format_rational(lv.a_odd)} ell={lv.ell} i={lv.i_sel}"
            f" eps={format_rational(lv.eps)} b={format_rational(lv.b)}"
        )
    return "\n".join(lines) + "\n"


def load_plan(text: str) -> FBetaPlan:
    """Parse and re-derive: the stored level table must match the scan."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != PLAN_HEADER:
        raise SerializationError(f"expected header {PLAN_HEADER!r}")
    fields: dict[str, str] = {}
    level_lines: list[str] = []
    for ln in lines[1:]:
        if ln.startswith("level "):
            level_lines.append(ln)
        elif "=" in ln:
            key, val = ln.split("=", 1)
            fields[key.strip()] = val.strip()
        else:
            raise SerializationError(f"unparseable plan line: {ln!r}")
    try:
        beta = parse_rational(fields["beta"])
        K = int(fields["K"])
        seed = parse_rational(fields["seed_a1"])
        variant = fields.get("variant", "none") == "full"
    except KeyError as exc:
        raise SerializationError(f"plan file missing field {exc}") from exc
    plan = plan_sequences(beta, K, seed, variant)
    stored = dump_plan(plan).splitlines()
    for ln in level_lines:
        if ln not in stored:
            raise SerializationError(f"stored level line does not match the plan rule: {ln!r}")
    if len(level_lines) != K + 1:
        raise SerializationError(f"expected {K + 1} level lines, found {len(level_lines)}")
    return plan


def dump_model(model: FBetaModel) -> str:
    lines = [MODEL_HEADER, "[plan]", dump_plan(model.plan).rstrip("\n"), "[map]",
             dump_pwa(model.map).rstrip("\n"), "[branches]"]
    for e in model.branch_table:
        lines.append(
            f"level={e.level} j={e.j} dir={'up' if e.increasing else 'down'}"
            f" dom={format_interval(e.lo, e.hi)}"
        )
    return "\n".join(lines) + "\n"


def load_model(text: str) -> FBetaModel:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MODEL_HEADER:
        raise SerializationError(f"expected header {MODEL_HEADER!r}")
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for ln in lines[1:]:
        if ln.strip() in ("[plan]", "[map]", "[branches]"):
            current = ln.strip()[1:-1]
            sections[current] = []
        elif current is not None:
            sections[current].append(ln)
    for needed in ("plan", "map", "branches"):
        if needed not in sections:
            raise SerializationError(f"model file missing [{needed}] section")
    plan = load_plan("\n".join(sections["plan"]))
    pwa = load_pwa("\n".join(sections["map"]))
    entries: list[BranchEntry] = []
    for ln in sections["branches"]:
        ln = ln.strip()
        if not ln:
            continue
        parts = dict(p.split("=", 1) for p in ln.split())
        lo, hi = parse_interval(parts["dom"])
        entries.append(
            BranchEntry(int(parts["level"]), int(parts["j"]), parts["dir"] == "up", lo, hi)
        )
    views = tuple(_level_view(plan, k, pwa) for k in range(plan.K + 1))
    return FBetaModel(plan, pwa, tuple(entries), views)
