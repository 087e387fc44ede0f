"""Concentrated check-side construction.

Given the variable side of a MET-LDPC ensemble (classes with coefficients)
and the design rate, the check side is fully determined once we insist on
*concentrated* check degrees: within each check group every edge type is
spread over at most two consecutive integer degrees.  The construction
makes the rate and socket-count constraints hold exactly, so optimizers can
search over the variable side alone.

Check groups
------------
Edge types are partitioned into groups; each group owns a disjoint set of
check-node classes touching only its own edge types.

  * a ``residual`` group absorbs whatever check count is left over:
        count = L(1,1) - rate - sum(counts of the other groups)
  * a ``one_socket_per_check`` group models the chain construction where
    every check carries exactly one socket of an anchor type, so
        count = variable-side socket total of the anchor type.

Per group and edge type the average check degree is (socket total / count);
writing n = floor(avg), the socket budget forces

    count(degree n+1) = sockets - n * count,   count(degree n) = rest,

a two-degree split (one degree if the average is integral).  Two splits of
the same group combine into at most three check classes: matching the lower
degrees pairwise as far as the smaller low-degree count allows, crossing
over in one mixed class, and matching the higher degrees with what remains.
Both orderings of which type runs out first are covered by the same rule,
and an exact tie collapses the mixed class to zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .ensemble import CheckClass, Ensemble, VariableClass

__all__ = [
    "InfeasibleStructureError",
    "CheckGroup",
    "ConcentratedSplit",
    "group_check_count",
    "average_degrees",
    "concentrate",
    "combine_splits",
    "design_checks",
    "complete_ensemble",
]

TIE_EPS = 1e-9


class InfeasibleStructureError(ValueError):
    """The variable side admits no concentrated check design.

    Optimizers treat this as a rejected candidate, never as a crash.
    """


@dataclass(frozen=True)
class CheckGroup:
    """A set of check classes confined to one or two edge types.

    ``edge_types`` are 1-based.  ``count_rule`` is ``"residual"`` or
    ``"one_socket_per_check"``; the latter needs ``socket_type``, the edge
    type whose variable-side socket total equals the group's check count
    (every check in the group carries exactly one such socket).
    """

    edge_types: tuple[int, ...]
    count_rule: str = "residual"
    socket_type: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "edge_types", tuple(int(t) for t in self.edge_types))
        if not 1 <= len(self.edge_types) <= 2:
            raise ValueError("a check group spans one or two edge types")
        if len(set(self.edge_types)) != len(self.edge_types):
            raise ValueError("repeated edge type in check group")
        if self.count_rule not in ("residual", "one_socket_per_check"):
            raise ValueError(f"unknown count rule {self.count_rule!r}")
        if self.count_rule == "one_socket_per_check":
            if self.socket_type is None:
                raise ValueError("one_socket_per_check group needs socket_type")
            if self.socket_type not in self.edge_types:
                raise ValueError("socket_type must be one of the group's edge types")
        elif self.socket_type is not None:
            raise ValueError("socket_type only applies to one_socket_per_check groups")


@dataclass(frozen=True)
class ConcentratedSplit:
    """Check counts for two consecutive degrees of a single edge type."""

    lo_degree: int
    hi_degree: int
    lo_count: float
    hi_count: float

    @property
    def total(self) -> float:
        return self.lo_count + self.hi_count


def _socket_totals(var_classes: Sequence[VariableClass], m_e: int) -> list[float]:
    totals = [0.0] * m_e
    for vc in var_classes:
        for i, di in enumerate(vc.d):
            totals[i] += vc.coeff * di
    return totals


def group_check_count(
    var_classes: Sequence[VariableClass],
    rate: float,
    groups: Sequence[CheckGroup],
    group: CheckGroup,
) -> float:
    """Check count owned by one group under the full group layout."""
    sockets = _socket_totals(var_classes, len(var_classes[0].d))
    if group.count_rule == "one_socket_per_check":
        return sockets[group.socket_type - 1]
    total = sum(vc.coeff for vc in var_classes) - rate
    for other in groups:
        if other.count_rule == "one_socket_per_check":
            total -= sockets[other.socket_type - 1]
    return total


def average_degrees(
    var_classes: Sequence[VariableClass],
    rate: float,
    groups: Sequence[CheckGroup],
    group: CheckGroup,
) -> tuple[float, ...]:
    """Average check degree per edge type of a group (socket total / count)."""
    count = group_check_count(var_classes, rate, groups, group)
    if count <= 0:
        raise InfeasibleStructureError(
            f"group {group.edge_types} has non-positive check count {count:.6g}"
        )
    sockets = _socket_totals(var_classes, len(var_classes[0].d))
    return tuple(sockets[t - 1] / count for t in group.edge_types)


def concentrate(edge_total: float, check_count: float, tie_eps: float = TIE_EPS) -> ConcentratedSplit:
    """Split an edge budget over two consecutive check degrees.

    With avg = edge_total / check_count the split is degrees
    (floor(avg), floor(avg)+1) with counts fixed by the socket budget; an
    integral average (within ``tie_eps``) yields a single degree.
    """
    if check_count <= 0:
        raise InfeasibleStructureError(f"non-positive check count {check_count:.6g}")
    avg = edge_total / check_count
    if avg < 1.0 - tie_eps:
        raise InfeasibleStructureError(
            f"average check degree {avg:.6g} below one (edges {edge_total:.6g}, checks {check_count:.6g})"
        )
    nearest = round(avg)
    if abs(avg - nearest) <= tie_eps:
        return ConcentratedSplit(int(nearest), int(nearest), check_count, 0.0)
    lo = int(avg)
    hi_count = edge_total - lo * check_count
    lo_count = check_count - hi_count
    return ConcentratedSplit(lo, lo + 1, lo_count, hi_count)


def _class_degrees(m_e: int, assignments: Sequence[tuple[int, int]]) -> tuple[int, ...]:
    d = [0] * m_e
    for edge_type, degree in assignments:
        d[edge_type - 1] = degree
    return tuple(d)


def combine_splits(
    split_i: ConcentratedSplit,
    split_j: ConcentratedSplit,
    group: CheckGroup,
    m_e: int,
    tie_eps: float = TIE_EPS,
) -> list[CheckClass]:
    """Merge the two per-type splits of a group into check classes.

    The low degrees pair up as far as the smaller low count reaches, one
    mixed class bridges the difference, and the high degrees absorb the
    rest; equal low counts collapse the mixed class, and degenerate
    single-degree splits fall out of the same rule with zero-count classes
    dropped.
    """
    if abs(split_i.total - split_j.total) > 1e-9 * max(1.0, split_i.total):
        raise ValueError(
            f"split totals disagree: {split_i.total!r} vs {split_j.total!r}"
        )
    ti, tj = group.edge_types
    if abs(split_i.lo_count - split_j.lo_count) <= tie_eps:
        classes = [
            (((ti, split_i.lo_degree), (tj, split_j.lo_degree)), split_i.lo_count),
            (((ti, split_i.hi_degree), (tj, split_j.hi_degree)), split_i.hi_count),
        ]
    elif split_j.lo_count < split_i.lo_count:
        classes = [
            (((ti, split_i.lo_degree), (tj, split_j.lo_degree)), split_j.lo_count),
            (((ti, split_i.lo_degree), (tj, split_j.hi_degree)), split_i.lo_count - split_j.lo_count),
            (((ti, split_i.hi_degree), (tj, split_j.hi_degree)), split_i.hi_count),
        ]
    else:
        classes = [
            (((ti, split_i.lo_degree), (tj, split_j.lo_degree)), split_i.lo_count),
            (((ti, split_i.hi_degree), (tj, split_j.lo_degree)), split_j.lo_count - split_i.lo_count),
            (((ti, split_i.hi_degree), (tj, split_j.hi_degree)), split_j.hi_count),
        ]
    return [
        CheckClass(_class_degrees(m_e, degs), count)
        for degs, count in classes
        if count > 0.0
    ]


def design_checks(
    var_classes: Sequence[VariableClass],
    rate: float,
    groups: Sequence[CheckGroup],
    m_e: int,
    tie_eps: float = TIE_EPS,
) -> tuple[CheckClass, ...]:
    """Build the full concentrated check side for a variable side.

    Deterministic; the resulting ensemble satisfies the rate and socket
    constraints to floating-point accuracy.  Raises
    :class:`InfeasibleStructureError` when any group's check count is
    non-positive or an average degree falls below one.
    """
    if not var_classes:
        raise InfeasibleStructureError("no variable classes")
    sockets = _socket_totals(var_classes, m_e)

    owned = [0] * m_e
    for g in groups:
        for t in g.edge_types:
            if not 1 <= t <= m_e:
                raise ValueError(f"group edge type {t} out of range 1..{m_e}")
            owned[t - 1] += 1
    for i, s in enumerate(sockets):
        if s > 0 and owned[i] != 1:
            raise ValueError(
                f"edge type {i + 1} with sockets must belong to exactly one group"
            )

    total_checks = sum(vc.coeff for vc in var_classes) - rate
    chain_total = 0.0
    counts: list[float] = []
    residual_positions: list[int] = []
    for pos, g in enumerate(groups):
        if g.count_rule == "one_socket_per_check":
            c = sockets[g.socket_type - 1]
            chain_total += c
            counts.append(c)
        else:
            counts.append(0.0)
            residual_positions.append(pos)
    residual = total_checks - chain_total
    if residual < -tie_eps:
        raise InfeasibleStructureError(
            f"chain check counts exceed the total check budget by {-residual:.6g}"
        )
    for pos in residual_positions:
        counts[pos] = residual
    if not residual_positions and abs(residual) > 1e-9:
        raise InfeasibleStructureError(
            f"check count {residual:.6g} left over with no residual group"
        )

    out: list[CheckClass] = []
    for g, count in zip(groups, counts):
        active = [t for t in g.edge_types if sockets[t - 1] > 0.0]
        if not active:
            if count > tie_eps:
                raise InfeasibleStructureError(
                    f"group {g.edge_types} has checks but no sockets"
                )
            continue
        if count <= 0:
            raise InfeasibleStructureError(
                f"group {g.edge_types} has non-positive check count {count:.6g}"
            )
        splits = [concentrate(sockets[t - 1], count, tie_eps) for t in active]
        if len(active) == 1:
            s = splits[0]
            t = active[0]
            for degree, c in ((s.lo_degree, s.lo_count), (s.hi_degree, s.hi_count)):
                if c > 0.0:
                    out.append(CheckClass(_class_degrees(m_e, [(t, degree)]), c))
        else:
            sub = CheckGroup(tuple(active), g.count_rule, g.socket_type)
            out.extend(combine_splits(splits[0], splits[1], sub, m_e, tie_eps))
    return tuple(out)


def complete_ensemble(
    var_classes: Sequence[VariableClass],
    rate: float,
    groups: Sequence[CheckGroup],
    m_e: int,
) -> Ensemble:
    """Convenience wrapper: variable side in, full ensemble out."""
    chk = design_checks(var_classes, rate, groups, m_e)
    return Ensemble(m_e, tuple(var_classes), chk, rate)
