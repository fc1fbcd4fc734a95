"""Local surgery on interval maps: flatten a fixed point into a fixed
interval, then blend a rescaled copy of a high-complexity map into the flat.

Pipeline: `flatten_fixed_point` turns a fixed point P of the host into a
fixed interval (the host is untouched outside a collar); `make_bump` builds
the trapezoid profile chi (1 on the inner window, 0 off the outer window);
`implant` forms

    h3(x) = (1 - chi(x)) * host(x) + chi(x) * (A o g~ o A^{-1})(x)

where A is the increasing affine bijection of [0, 1] onto the inner window
and g~ extends the implanted map by the identity.  Off the outer window h3
equals the host exactly; on the inner window h3 is exactly the rescaled
implant, so separated-set counts transport through A with the window length
as scale factor.  Everything stays piecewise affine because on the profile
collars both blended maps agree (they are the identity there).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import ContractError, DomainError, SerializationError, VerificationError
from .fbeta import FBetaModel, FBetaPlan, build_fbeta, dump_plan, load_plan
from .pwa import DEFAULT_NODE_BUDGET, PwaMap, dump_pwa, load_pwa
from .rational import format_interval, format_rational, parse_interval, parse_rational
from .separation import MarkovBranch, MarkovView

Interval = tuple[Fraction, Fraction]


# === building blocks =========================================================

def flatten_fixed_point(host: PwaMap, P: Fraction, rho: Fraction) -> PwaMap:
    """Replace the host on [P - rho, P + rho] by the identity on the inner
    half [P - rho/2, P + rho/2] with affine collars back to the host."""
    if host(P) != P:
        raise ContractError(
            f"P = {format_rational(P)} is not fixed: host(P) = {format_rational(host(P))}"
        )
    if rho <= 0:
        raise DomainError(f"collar radius must be positive, got {format_rational(rho)}")
    if P - rho < 0 or P + rho > 1:
        raise DomainError(
            f"collar {format_interval(P - rho, P + rho)} leaves [0, 1]"
        )
    lo, hi = P - rho, P + rho
    nodes = [(x, y) for x, y in host.nodes() if x < lo]
    nodes += [
        (lo, host(lo)),
        (P - rho / 2, P - rho / 2),
        (P + rho / 2, P + rho / 2),
        (hi, host(hi)),
    ]
    nodes += [(x, y) for x, y in host.nodes() if x > hi]
    return PwaMap.from_nodes(nodes)


def make_bump(inner: Interval, outer: Interval) -> PwaMap:
    """Trapezoid profile: 1 on `inner`, 0 off `outer`, affine collars."""
    (h_lo, h_hi), (t_lo, t_hi) = inner, outer
    if not (t_lo < h_lo < h_hi < t_hi):
        raise DomainError(
            f"inner window {format_interval(h_lo, h_hi)} must sit strictly inside "
            f"outer window {format_interval(t_lo, t_hi)}"
        )
    if t_lo < 0 or t_hi > 1:
        raise DomainError(f"outer window {format_interval(t_lo, t_hi)} leaves [0, 1]")
    nodes: list[tuple[Fraction, Fraction]] = []
    if t_lo > 0:
        nodes.append((Fraction(0), Fraction(0)))
    nodes += [(t_lo, Fraction(0)), (h_lo, Fraction(1)), (h_hi, Fraction(1)), (t_hi, Fraction(0))]
    if t_hi < 1:
        nodes.append((Fraction(1), Fraction(0)))
    return PwaMap.from_nodes(nodes)


def conjugate_into_interval(m: PwaMap, lo: Fraction, hi: Fraction) -> PwaMap:
    """A o m o A^{-1} on [lo, hi] (A the increasing affine bijection from
    [0, 1]), extended by the identity outside.  The extension is continuous
    only when m fixes both endpoints, so that is required."""
    if not (0 <= lo < hi <= 1):
        raise DomainError(f"target {format_interval(lo, hi)} is not a subinterval of [0, 1]")
    if m(Fraction(0)) != 0 or m(Fraction(1)) != 1:
        raise ContractError(
            "conjugated map must fix 0 and 1 so the identity extension is continuous; "
            f"got m(0) = {format_rational(m(Fraction(0)))}, m(1) = {format_rational(m(Fraction(1)))}"
        )
    scale = hi - lo
    nodes: list[tuple[Fraction, Fraction]] = []
    if lo > 0:
        nodes.append((Fraction(0), Fraction(0)))
    nodes += [(lo + x * scale, lo + y * scale) for x, y in m.nodes()]
    if hi < 1:
        nodes.append((Fraction(1), Fraction(1)))
    return PwaMap.from_nodes(nodes)


def blend_with_profile(base: PwaMap, insert: PwaMap, profile: PwaMap) -> PwaMap:
    """(1 - profile) * base + profile * insert, node-exact.

    The blend is piecewise affine only when, on every merged piece, the
    profile is constant or the two maps differ by a constant; anything else
    would square a slope."""
    xs = sorted(set(base.xs) | set(insert.xs) | set(profile.xs))
    values = []
    for x in xs:
        c = profile(x)
        values.append(base(x) + c * (insert(x) - base(x)))
    for i in range(len(xs) - 1):
        x0, x1 = xs[i], xs[i + 1]
        if profile(x0) != profile(x1) and insert(x0) - base(x0) != insert(x1) - base(x1):
            raise ContractError(
                f"blend is not piecewise affine on {format_interval(x0, x1)}: "
                "the profile and the map difference both vary there"
            )
    return PwaMap.from_nodes(list(zip(xs, values)))


# === implant plans ===========================================================

@dataclass(frozen=True)
class SurgeryPlan:
    """One implant: a host that already fixes the flat interval J pointwise,
    the nested windows, and the plan of the map to implant.

    `chi` overrides the default trapezoid profile; `budget` (if given) caps
    the outer window at a third of it, so three such edits stay within the
    caller's distance budget.
    """

    host: PwaMap
    P: Fraction
    J: Interval
    J_hat: Interval
    J_tilde: Interval
    fbeta_plan: FBetaPlan
    chi: PwaMap | None = None
    budget: Fraction | None = None


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ContractError(message)


def _host_fixes_interval(host: PwaMap, lo: Fraction, hi: Fraction) -> bool:
    if host(lo) != lo or host(hi) != hi:
        return False
    return all(y == x for x, y in host.nodes() if lo < x < hi)


def _check_profile(profile: PwaMap, inner: Interval, outer: Interval) -> None:
    (h_lo, h_hi), (t_lo, t_hi) = inner, outer
    ok = (
        all(0 <= y <= 1 for y in profile.ys)
        and profile(t_lo) == 0 == profile(t_hi)
        and profile(h_lo) == 1 == profile(h_hi)
        and all(y == 0 for x, y in profile.nodes() if x <= t_lo or x >= t_hi)
        and all(y == 1 for x, y in profile.nodes() if h_lo <= x <= h_hi)
    )
    _require(ok, "profile must be exactly 1 on the inner window, exactly 0 off the outer "
                 "window, and valued in [0, 1]")


def _check_plan(plan: SurgeryPlan) -> None:
    (j_lo, j_hi), (h_lo, h_hi), (t_lo, t_hi) = plan.J, plan.J_hat, plan.J_tilde
    _require(t_lo < h_lo < h_hi < t_hi,
             f"inner window {format_interval(h_lo, h_hi)} must nest strictly inside "
             f"outer window {format_interval(t_lo, t_hi)}")
    _require(j_lo <= t_lo and t_hi <= j_hi and (j_lo, j_hi) != (t_lo, t_hi),
             f"outer window {format_interval(t_lo, t_hi)} must nest properly inside "
             f"flat interval {format_interval(j_lo, j_hi)}")
    _require(0 <= j_lo < j_hi <= 1, f"flat interval {format_interval(j_lo, j_hi)} leaves [0, 1]")
    _require(j_lo + j_hi == 2 * plan.P,
             f"flat interval {format_interval(j_lo, j_hi)} is not centered at "
             f"P = {format_rational(plan.P)}")
    _require(plan.host(plan.P) == plan.P,
             f"P = {format_rational(plan.P)} is not fixed by the host")
    _require(_host_fixes_interval(plan.host, j_lo, j_hi),
             f"host must fix {format_interval(j_lo, j_hi)} pointwise (flatten it first)")
    if plan.budget is not None:
        _require(t_hi - t_lo < plan.budget / 3,
                 f"outer window length {format_rational(t_hi - t_lo)} must stay below "
                 f"a third of the budget {format_rational(plan.budget)}")


def implant(plan: SurgeryPlan, node_budget: int = DEFAULT_NODE_BUDGET) -> PwaMap:
    """Blend a rescaled copy of the planned map into the host's flat spot.

    Checks the plan, builds the map, blends, and re-verifies the three
    promises: the host is untouched off the outer window, the inner window
    carries an exact rescaled copy, and the inner window is invariant.
    """
    _check_plan(plan)
    profile = plan.chi if plan.chi is not None else make_bump(plan.J_hat, plan.J_tilde)
    _check_profile(profile, plan.J_hat, plan.J_tilde)

    model = build_fbeta(plan.fbeta_plan, node_budget)
    insert = conjugate_into_interval(model.map, *plan.J_hat)
    blended = blend_with_profile(plan.host, insert, profile)

    _verify_implant(blended, plan, insert)
    return blended


def _maps_agree(a: PwaMap, b: PwaMap, keep) -> bool:
    """Exact equality of two piecewise-affine maps over the breakpoints
    selected by `keep` (equality at all shared breakpoints of a region
    pins the maps on it)."""
    return all(a(x) == b(x) for x in sorted(set(a.xs) | set(b.xs)) if keep(x))


def _verify_implant(blended: PwaMap, plan: SurgeryPlan, insert: PwaMap) -> None:
    (h_lo, h_hi), (t_lo, t_hi) = plan.J_hat, plan.J_tilde
    if not _maps_agree(blended, plan.host, lambda x: x <= t_lo or x >= t_hi):
        raise VerificationError(
            f"implant leaked outside the outer window {format_interval(t_lo, t_hi)}"
        )
    if not _maps_agree(blended, insert, lambda x: h_lo <= x <= h_hi):
        raise VerificationError(
            f"inner window {format_interval(h_lo, h_hi)} does not carry the exact "
            "rescaled copy"
        )
    inner_values = [y for x, y in blended.nodes() if h_lo <= x <= h_hi]
    if (blended(h_lo) != h_lo or blended(h_hi) != h_hi
            or min(inner_values) < h_lo or max(inner_values) > h_hi):
        raise VerificationError(
            f"inner window {format_interval(h_lo, h_hi)} is not invariant"
        )


# === transported views =======================================================

def transport_markov_view(
    view: MarkovView,
    lo: Fraction,
    hi: Fraction,
    mapped: PwaMap | None = None,
) -> MarkovView:
    """Affine image of a Markov view inside [lo, hi]: cores, branch domains,
    and the separation scale all rescale by hi - lo."""
    if not (0 <= lo < hi <= 1):
        raise DomainError(f"target {format_interval(lo, hi)} is not a subinterval of [0, 1]")
    scale = hi - lo
    move = lambda x: lo + x * scale
    branches = tuple(
        MarkovBranch(move(b.lo), move(b.hi), b.increasing) for b in view.branches
    )
    sep = None if view.separation_scale is None else view.separation_scale * scale
    label = f"{view.label} in {format_interval(lo, hi)}" if view.label else ""
    return MarkovView(move(view.core_lo), move(view.core_hi), branches, sep, mapped, label)


def transported_views(plan: SurgeryPlan, blended: PwaMap, model: FBetaModel) -> tuple[MarkovView, ...]:
    """The implanted copies of the model's per-level views, re-validated
    against the blended map."""
    lo, hi = plan.J_hat
    return tuple(transport_markov_view(v, lo, hi, blended) for v in model.views)


# === serialization ===========================================================

SURGERY_HEADER = "surgery-plan v1"


def dump_surgery_plan(
    plan: SurgeryPlan,
    host_ref: str,
    plan_ref: str,
    chi_ref: str | None = None,
) -> str:
    """Text form referencing the host map and the build plan by path."""
    if plan.chi is not None and chi_ref is None:
        raise SerializationError("plan carries a custom profile: pass chi_ref")
    lines = [
        SURGERY_HEADER,
        f"host {host_ref}",
        f"plan {plan_ref}",
        f"P {format_rational(plan.P)}",
        f"J {format_interval(*plan.J)}",
        f"J-hat {format_interval(*plan.J_hat)}",
        f"J-tilde {format_interval(*plan.J_tilde)}",
    ]
    if chi_ref is not None:
        lines.append(f"chi {chi_ref}")
    if plan.budget is not None:
        lines.append(f"budget {format_rational(plan.budget)}")
    return "\n".join(lines) + "\n"


def load_surgery_plan(text: str, base_dir: str | Path = ".") -> SurgeryPlan:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != SURGERY_HEADER:
        raise SerializationError(f"expected header {SURGERY_HEADER!r}")
    fields: dict[str, str] = {}
    for ln in lines[1:]:
        parts = ln.split(maxsplit=1)
        if len(parts) != 2 or parts[0] in fields:
            raise SerializationError(f"bad line: {ln!r}")
        fields[parts[0]] = parts[1]
    try:
        base = Path(base_dir)
        host = load_pwa((base / fields["host"]).read_text())
        fplan = load_plan((base / fields["plan"]).read_text())
        point = parse_rational(fields["P"])
        j = parse_interval(fields["J"])
        j_hat = parse_interval(fields["J-hat"])
        j_tilde = parse_interval(fields["J-tilde"])
    except KeyError as missing:
        raise SerializationError(f"missing field {missing.args[0]!r}") from None
    chi = load_pwa((base / fields["chi"]).read_text()) if "chi" in fields else None
    budget = parse_rational(fields["budget"]) if "budget" in fields else None
    return SurgeryPlan(host, point, j, j_hat, j_tilde, fplan, chi, budget)
