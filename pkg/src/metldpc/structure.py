"""Search-space templates for ensemble optimization.

A :class:`StructureTemplate` pins everything the optimizers do not search
over: the number of edge types, the check-group layout consumed by the
concentrated check construction, per-class degree domains (fixed integers
or ranges), and the structural limits (class counts, maximum variable-node
degree).  Degree ranges are the gene space of the structure search; slots
whose degrees are all fixed describe a single Tanner graph and only the
coefficients remain to optimize.

The coefficient search space is handled by :class:`CoefficientLayout`:
the transmitted-class coefficients must sum to one, so the last
transmitted class in class order is implied by the others; punctured
classes are free within [0, punct_max]; and a template may tie one class's
coefficient to another's (used by landscape slices).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .check_design import CheckGroup
from .ensemble import PUNCTURED, TRANSMITTED, ChannelAssignment

__all__ = [
    "ClassSlot",
    "StructureTemplate",
    "TemplateFormatError",
    "CoefficientLayout",
    "decode_structure",
    "enumerate_genes",
    "parse_template",
    "serialize_template",
    "load_template",
]

DegreeDomain = tuple[int, int]  # inclusive (lo, hi); lo == hi pins the degree


@dataclass(frozen=True)
class ClassSlot:
    """One variable-class slot: channel assignment plus per-type degree domains."""

    b: ChannelAssignment
    domains: tuple[DegreeDomain, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "domains", tuple((int(lo), int(hi)) for lo, hi in self.domains)
        )
        for lo, hi in self.domains:
            if lo < 0 or hi < lo:
                raise ValueError(f"bad degree domain ({lo}, {hi})")

    @property
    def fixed(self) -> bool:
        return all(lo == hi for lo, hi in self.domains)


@dataclass(frozen=True)
class StructureTemplate:
    m_e: int
    v_max: int
    c_max: int
    d_vmax: int
    check_groups: tuple[CheckGroup, ...]
    class_slots: tuple[ClassSlot, ...]
    coeff_ties: tuple[tuple[int, int], ...] = ()  # (dst_slot, src_slot), 0-based
    punct_max: float = 1.0
    m_e_max: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "check_groups", tuple(self.check_groups))
        object.__setattr__(self, "class_slots", tuple(self.class_slots))
        object.__setattr__(self, "coeff_ties", tuple((int(a), int(b)) for a, b in self.coeff_ties))
        if self.m_e < 1 or self.v_max < 1 or self.c_max < 1 or self.d_vmax < 1:
            raise ValueError("template limits must be positive")
        if self.m_e_max is None:
            object.__setattr__(self, "m_e_max", self.m_e)
        if self.m_e > self.m_e_max:
            raise ValueError(f"m_e={self.m_e} exceeds m_e_max={self.m_e_max}")
        if len(self.class_slots) > self.v_max:
            raise ValueError(f"{len(self.class_slots)} slots exceed v_max={self.v_max}")
        if not 0.0 < self.punct_max <= 1.0 + 1e-12:
            raise ValueError("punct_max must lie in (0, 1]")
        for slot in self.class_slots:
            if len(slot.domains) != self.m_e:
                raise ValueError("slot domain count must equal edge_types")
        n = len(self.class_slots)
        for dst, src in self.coeff_ties:
            if not (0 <= dst < n and 0 <= src < n) or dst == src:
                raise ValueError(f"bad coefficient tie ({dst}, {src})")

    def free_degree_positions(self) -> tuple[tuple[int, int], ...]:
        """(slot, edge-type) pairs whose degree is searched, in scan order."""
        return tuple(
            (s, t)
            for s, slot in enumerate(self.class_slots)
            for t, (lo, hi) in enumerate(slot.domains)
            if lo < hi
        )

    @property
    def fixed(self) -> bool:
        return not self.free_degree_positions()


def decode_structure(
    template: StructureTemplate, gene: Sequence[int] = ()
) -> tuple[tuple[int, ChannelAssignment, tuple[int, ...]], ...] | None:
    """Instantiate the slots' degrees from a gene vector.

    Returns (slot index, channel assignment, degree vector) per surviving
    class; slots whose total degree decodes to zero are dropped.  Returns
    None when the gene leaves its domains, a class exceeds the maximum
    variable-node degree, or no transmitted class survives.
    """
    positions = template.free_degree_positions()
    if len(gene) != len(positions):
        raise ValueError(f"gene length {len(gene)} != {len(positions)} free degrees")
    chosen = {pos: int(v) for pos, v in zip(positions, gene)}
    for (s, t), v in chosen.items():
        lo, hi = template.class_slots[s].domains[t]
        if not lo <= v <= hi:
            return None

    classes = []
    for s, slot in enumerate(template.class_slots):
        d = tuple(
            chosen.get((s, t), slot.domains[t][0]) for t in range(template.m_e)
        )
        total = sum(d)
        if total == 0:
            continue
        if total > template.d_vmax:
            return None
        classes.append((s, slot.b, d))
    if len(classes) > template.v_max:
        return None
    if not any(not b.punctured for _, b, _ in classes):
        return None
    return tuple(classes)


def enumerate_genes(template: StructureTemplate):
    """All gene vectors of the template's degree domains (use on small spaces)."""
    positions = template.free_degree_positions()
    domains = [template.class_slots[s].domains[t] for s, t in positions]

    def rec(prefix: tuple[int, ...], rest):
        if not rest:
            yield prefix
            return
        (lo, hi), *tail = rest
        for v in range(lo, hi + 1):
            yield from rec(prefix + (v,), tail)

    yield from rec((), domains)


@dataclass(frozen=True)
class CoefficientLayout:
    """Free-variable encoding of class coefficients under the sum-to-one rule.

    ``free`` lists the class indices the optimizer controls; ``dependent``
    is the transmitted class implied by the transmitted sum; tied classes
    copy their source's value.  ``rebuild`` maps a free vector to the full
    coefficient tuple, or None when any implied coefficient turns negative.
    """

    punct: tuple[bool, ...]
    free: tuple[int, ...]
    dependent: int
    ties: tuple[tuple[int, int], ...]
    punct_max: float = 1.0

    @classmethod
    def build(
        cls,
        decoded: Sequence[tuple[int, ChannelAssignment, tuple[int, ...]]],
        template: StructureTemplate,
    ) -> "CoefficientLayout":
        slot_to_class = {s: i for i, (s, _, _) in enumerate(decoded)}
        ties = tuple(
            (slot_to_class[d], slot_to_class[s])
            for d, s in template.coeff_ties
            if d in slot_to_class and s in slot_to_class
        )
        tied = {d for d, _ in ties}
        punct = tuple(b.punctured for _, b, _ in decoded)
        transmitted = [i for i in range(len(decoded)) if not punct[i] and i not in tied]
        if not transmitted:
            raise ValueError("need a transmitted class to absorb the sum-to-one rule")
        dependent = transmitted[-1]
        for dst, src in ties:
            if not punct[dst] and src == dependent:
                raise ValueError("transmitted class tied to the dependent class")
        free = tuple(
            i
            for i in range(len(decoded))
            if i != dependent and i not in tied
        )
        return cls(punct, free, dependent, ties, template.punct_max)

    @property
    def n_free(self) -> int:
        return len(self.free)

    def bounds(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        lo = tuple(0.0 for _ in self.free)
        hi = tuple(self.punct_max if self.punct[i] else 1.0 for i in self.free)
        return lo, hi

    def rebuild(self, q: Sequence[float]) -> tuple[float, ...] | None:
        if len(q) != len(self.free):
            raise ValueError(f"expected {len(self.free)} free values, got {len(q)}")
        n = len(self.punct)
        coeffs: list[float | None] = [None] * n
        for pos, ci in enumerate(self.free):
            coeffs[ci] = float(q[pos])
        for dst, src in self.ties:
            if coeffs[src] is not None:
                coeffs[dst] = coeffs[src]
        total = 0.0
        for i in range(n):
            if i == self.dependent or self.punct[i]:
                continue
            if coeffs[i] is None:
                raise ValueError("unresolved transmitted coefficient before the dependent one")
            total += coeffs[i]
        coeffs[self.dependent] = 1.0 - total
        for dst, src in self.ties:
            if coeffs[dst] is None:
                coeffs[dst] = coeffs[src]
        out = tuple(float(c) for c in coeffs)  # type: ignore[arg-type]
        if any(c < 0.0 for c in out):
            return None
        return out


# ---------------------------------------------------------------------------
# Text format
#
#   met-template v1
#   edge_types 4
#   v_max 4
#   c_max 5
#   d_vmax 10
#   group residual edges=1,2
#   group one_socket_per_check edges=3,4 socket=4
#   slot b=channel d=0..10,0..10,0..10,0
#   slot b=punctured d=0..10,0..10,0..10,0
#   slot b=channel d=0,0,0,1
#   tie coeff=2 to=3            # optional, 1-based slot indices
#   punct_max 1.0               # optional
# ---------------------------------------------------------------------------

_MAGIC = "met-template v1"


class TemplateFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


def _parse_domain(text: str, line_no: int) -> DegreeDomain:
    if ".." in text:
        lo_s, _, hi_s = text.partition("..")
        try:
            lo, hi = int(lo_s), int(hi_s)
        except ValueError:
            raise TemplateFormatError(f"bad degree range {text!r}", line_no) from None
    else:
        try:
            lo = hi = int(text)
        except ValueError:
            raise TemplateFormatError(f"bad degree {text!r}", line_no) from None
    if lo < 0 or hi < lo:
        raise TemplateFormatError(f"bad degree domain {text!r}", line_no)
    return lo, hi


def parse_template(text: str) -> StructureTemplate:
    m_e = v_max = c_max = d_vmax = None
    punct_max = 1.0
    groups: list[CheckGroup] = []
    slots: list[ClassSlot] = []
    ties: list[tuple[int, int]] = []
    magic_seen = False

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not magic_seen:
            if line != _MAGIC:
                raise TemplateFormatError(f"expected {_MAGIC!r} header", line_no)
            magic_seen = True
            continue
        keyword, _, body = line.partition(" ")
        body = body.strip()
        try:
            if keyword == "edge_types":
                m_e = int(body)
            elif keyword == "v_max":
                v_max = int(body)
            elif keyword == "c_max":
                c_max = int(body)
            elif keyword == "d_vmax":
                d_vmax = int(body)
            elif keyword == "punct_max":
                punct_max = float(body)
            elif keyword == "group":
                rule, *fields = body.split()
                kv = dict(f.split("=", 1) for f in fields)
                edges = tuple(int(v) for v in kv["edges"].split(","))
                if rule == "residual":
                    groups.append(CheckGroup(edges, "residual"))
                elif rule == "one_socket_per_check":
                    groups.append(
                        CheckGroup(edges, "one_socket_per_check", int(kv["socket"]))
                    )
                else:
                    raise TemplateFormatError(f"unknown group rule {rule!r}", line_no)
            elif keyword == "slot":
                kv = dict(f.split("=", 1) for f in body.split())
                if kv["b"] == "punctured":
                    b = PUNCTURED
                elif kv["b"] == "channel":
                    b = TRANSMITTED
                else:
                    raise TemplateFormatError(f"unknown channel assignment {kv['b']!r}", line_no)
                domains = tuple(_parse_domain(t, line_no) for t in kv["d"].split(","))
                slots.append(ClassSlot(b, domains))
            elif keyword == "tie":
                kv = dict(f.split("=", 1) for f in body.split())
                ties.append((int(kv["coeff"]) - 1, int(kv["to"]) - 1))
            else:
                raise TemplateFormatError(f"unknown keyword {keyword!r}", line_no)
        except TemplateFormatError:
            raise
        except (KeyError, ValueError) as exc:
            raise TemplateFormatError(str(exc), line_no) from None

    if not magic_seen:
        raise TemplateFormatError("empty input")
    for name, value in (("edge_types", m_e), ("v_max", v_max), ("c_max", c_max), ("d_vmax", d_vmax)):
        if value is None:
            raise TemplateFormatError(f"missing {name} line")
    if not slots:
        raise TemplateFormatError("no class slots")
    try:
        return StructureTemplate(
            m_e, v_max, c_max, d_vmax, tuple(groups), tuple(slots),
            tuple(ties), punct_max,
        )
    except ValueError as exc:
        raise TemplateFormatError(str(exc)) from None


def serialize_template(template: StructureTemplate) -> str:
    lines = [
        _MAGIC,
        f"edge_types {template.m_e}",
        f"v_max {template.v_max}",
        f"c_max {template.c_max}",
        f"d_vmax {template.d_vmax}",
    ]
    if template.punct_max != 1.0:
        lines.append(f"punct_max {template.punct_max!r}")
    for g in template.check_groups:
        edges = ",".join(str(t) for t in g.edge_types)
        if g.count_rule == "residual":
            lines.append(f"group residual edges={edges}")
        else:
            lines.append(f"group one_socket_per_check edges={edges} socket={g.socket_type}")
    for slot in template.class_slots:
        b = "punctured" if slot.b.punctured else "channel"
        doms = ",".join(
            str(lo) if lo == hi else f"{lo}..{hi}" for lo, hi in slot.domains
        )
        lines.append(f"slot b={b} d={doms}")
    for dst, src in template.coeff_ties:
        lines.append(f"tie coeff={dst + 1} to={src + 1}")
    return "\n".join(lines) + "\n"


def load_template(path) -> StructureTemplate:
    with open(path, encoding="utf-8") as fh:
        return parse_template(fh.read())
