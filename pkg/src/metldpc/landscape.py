"""Grid scans of the threshold cost surface.

Two scan modes expose the shape of the objective the optimizers climb:

  * ``coefficients``: two free coefficients of a fixed structure vary on
    real-valued axes while the remaining free coefficients stay fixed (and
    optional ties copy one class's value to another); every cell holds the
    decoding threshold of the completed ensemble.
  * ``degrees``: two integer structure genes vary while the other genes
    and the coefficient vector stay fixed; cells hold the threshold of the
    decoded structure under those coefficients.

Cells whose candidate is infeasible (negative implied coefficient,
impossible check design, invalid structure) are marked with NaN rather
than scored.  The grid is written as CSV ``axis1,axis2,threshold`` in
row-major order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .check_design import InfeasibleStructureError
from .density_evolution import DEFAULT_PARAMS, DEParams, threshold
from .optimizer_ar import CandidateEvaluator
from .structure import StructureTemplate, decode_structure

__all__ = [
    "ScanAxis",
    "ScanSpec",
    "ScanGrid",
    "ScanFormatError",
    "scan",
    "parse_scan_spec",
    "strict_local_maxima",
]


@dataclass(frozen=True)
class ScanAxis:
    """One scan axis: the slot (coefficient mode) or gene position (degree
    mode) it drives, plus the values it takes."""

    target: int  # 0-based slot index or gene position
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValueError("scan axis needs at least one value")


@dataclass(frozen=True)
class ScanSpec:
    mode: str  # "coefficients" | "degrees"
    axis1: ScanAxis
    axis2: ScanAxis
    fixed_coeffs: tuple[tuple[int, float], ...] = ()  # (slot, value)
    ties: tuple[tuple[int, int], ...] = ()  # (dst slot, src slot)
    fixed_genes: tuple[tuple[int, int], ...] = ()  # (position, value), degree mode
    coeffs: tuple[float, ...] = ()  # free-coefficient vector, degree mode

    def __post_init__(self) -> None:
        if self.mode not in ("coefficients", "degrees"):
            raise ValueError(f"unknown scan mode {self.mode!r}")


@dataclass(frozen=True)
class ScanGrid:
    axis1_values: tuple[float, ...]
    axis2_values: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]  # values[i][j]; NaN marks infeasible

    def to_csv(self) -> str:
        lines = ["axis1,axis2,threshold"]
        for a1, row in zip(self.axis1_values, self.values):
            for a2, v in zip(self.axis2_values, row):
                cell = "nan" if math.isnan(v) else repr(v)
                lines.append(f"{a1!r},{a2!r},{cell}")
        return "\n".join(lines) + "\n"

    @property
    def max_value(self) -> float:
        best = None
        for row in self.values:
            for v in row:
                if not math.isnan(v) and (best is None or v > best):
                    best = v
        return float("nan") if best is None else best


def strict_local_maxima(grid: ScanGrid) -> list[tuple[int, int]]:
    """Cells strictly above every in-grid, non-NaN 8-neighbor."""
    out = []
    n1, n2 = len(grid.axis1_values), len(grid.axis2_values)
    for i in range(n1):
        for j in range(n2):
            v = grid.values[i][j]
            if math.isnan(v):
                continue
            neighbors = 0
            dominated = False
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    if di == 0 and dj == 0:
                        continue
                    a, b = i + di, j + dj
                    if not (0 <= a < n1 and 0 <= b < n2):
                        continue
                    w = grid.values[a][b]
                    if math.isnan(w):
                        continue
                    neighbors += 1
                    if w >= v:
                        dominated = True
            if neighbors and not dominated:
                out.append((i, j))
    return out


def _scan_coefficients(
    template: StructureTemplate,
    spec: ScanSpec,
    rate: float,
    channel: str,
    de_params: DEParams,
) -> ScanGrid:
    if not template.fixed:
        raise ValueError("coefficient scans need a fully fixed structure template")
    base = StructureTemplate(
        template.m_e, template.v_max, template.c_max, template.d_vmax,
        template.check_groups, template.class_slots,
        tuple(spec.ties) if spec.ties else template.coeff_ties,
        template.punct_max, template.m_e_max,
    )
    decoded = decode_structure(base, ())
    ev = CandidateEvaluator(decoded, base, rate, channel, de_params)
    layout = ev.layout
    slot_to_free = {}
    for pos, class_idx in enumerate(layout.free):
        slot = decoded[class_idx][0]
        slot_to_free[slot] = pos

    def free_pos(slot: int) -> int:
        if slot not in slot_to_free:
            raise ValueError(f"slot {slot + 1} is not a free coefficient")
        return slot_to_free[slot]

    q_base = [0.0] * layout.n_free
    for slot, value in spec.fixed_coeffs:
        q_base[free_pos(slot)] = value
    p1, p2 = free_pos(spec.axis1.target), free_pos(spec.axis2.target)

    rows = []
    for a1 in spec.axis1.values:
        row = []
        for a2 in spec.axis2.values:
            q = list(q_base)
            q[p1], q[p2] = a1, a2
            score, result, _ = ev.score(q)
            row.append(result.threshold if result is not None else float("nan"))
        rows.append(tuple(row))
    return ScanGrid(tuple(spec.axis1.values), tuple(spec.axis2.values), tuple(rows))


def _scan_degrees(
    template: StructureTemplate,
    spec: ScanSpec,
    rate: float,
    channel: str,
    de_params: DEParams,
) -> ScanGrid:
    positions = template.free_degree_positions()
    n = len(positions)
    for pos, _ in spec.fixed_genes:
        if not 0 <= pos < n:
            raise ValueError(f"gene position {pos + 1} out of range")
    fixed = dict(spec.fixed_genes)
    p1, p2 = spec.axis1.target, spec.axis2.target
    for p in (p1, p2):
        if not 0 <= p < n:
            raise ValueError(f"gene position {p + 1} out of range")
    open_positions = {p1, p2} | set(fixed)
    if len(open_positions) != n:
        missing = [p + 1 for p in range(n) if p not in open_positions]
        raise ValueError(f"gene positions {missing} have no value in the scan spec")

    rows = []
    for a1 in spec.axis1.values:
        row = []
        for a2 in spec.axis2.values:
            gene = [0] * n
            for p in range(n):
                if p == p1:
                    gene[p] = int(a1)
                elif p == p2:
                    gene[p] = int(a2)
                else:
                    gene[p] = fixed[p]
            decoded = decode_structure(template, gene)
            if decoded is None:
                row.append(float("nan"))
                continue
            try:
                ev = CandidateEvaluator(decoded, template, rate, channel, de_params)
                if len(spec.coeffs) != ev.layout.n_free:
                    raise ValueError(
                        f"scan gives {len(spec.coeffs)} coefficients, structure has "
                        f"{ev.layout.n_free} free ones"
                    )
                score, result, _ = ev.score(spec.coeffs)
            except InfeasibleStructureError:
                row.append(float("nan"))
                continue
            row.append(result.threshold if result is not None else float("nan"))
        rows.append(tuple(row))
    return ScanGrid(tuple(spec.axis1.values), tuple(spec.axis2.values), tuple(rows))


def scan(
    template: StructureTemplate,
    spec: ScanSpec,
    rate: float,
    channel: str,
    de_params: DEParams = DEFAULT_PARAMS,
) -> ScanGrid:
    """Evaluate the threshold at every grid cell; NaN marks infeasible cells."""
    if spec.mode == "coefficients":
        return _scan_coefficients(template, spec, rate, channel, de_params)
    return _scan_degrees(template, spec, rate, channel, de_params)


# ---------------------------------------------------------------------------
# Scan spec file
#
#   met-scan v1
#   mode coefficients
#   template rate_half_dd.tmpl
#   rate 0.5
#   channel bec
#   axis slot=1 start=0.406258 step=0.008 count=25
#   axis slot=2 start=0.044003 step=0.008 count=25
#   fix slot=4 value=0.271307
#   tie slot=3 to=4            # optional
#
# degree mode uses  axis gene=1 min=1 max=27,  gene n=v  for fixed genes and
#   coeffs 0.1,0.025  for the coefficient vector.
# ---------------------------------------------------------------------------

_MAGIC = "met-scan v1"


class ScanFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


def parse_scan_spec(text: str) -> tuple[ScanSpec, str, float, str]:
    """Parse a scan file; returns (spec, template path, rate, channel)."""
    mode = template_path = channel = None
    rate = None
    axes: list[ScanAxis] = []
    fixed_coeffs: list[tuple[int, float]] = []
    ties: list[tuple[int, int]] = []
    fixed_genes: list[tuple[int, int]] = []
    coeffs: tuple[float, ...] = ()
    magic_seen = False

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not magic_seen:
            if line != _MAGIC:
                raise ScanFormatError(f"expected {_MAGIC!r} header", line_no)
            magic_seen = True
            continue
        keyword, _, body = line.partition(" ")
        body = body.strip()
        try:
            if keyword == "mode":
                mode = body
            elif keyword == "template":
                template_path = body
            elif keyword == "rate":
                rate = float(body)
            elif keyword == "channel":
                channel = body
            elif keyword == "axis":
                kv = dict(f.split("=", 1) for f in body.split())
                if "slot" in kv:
                    target = int(kv["slot"]) - 1
                    start, step, count = float(kv["start"]), float(kv["step"]), int(kv["count"])
                    values = tuple(start + k * step for k in range(count))
                elif "gene" in kv:
                    target = int(kv["gene"]) - 1
                    lo, hi = int(kv["min"]), int(kv["max"])
                    values = tuple(float(v) for v in range(lo, hi + 1))
                else:
                    raise ScanFormatError("axis needs slot= or gene=", line_no)
                axes.append(ScanAxis(target, values))
            elif keyword == "fix":
                kv = dict(f.split("=", 1) for f in body.split())
                fixed_coeffs.append((int(kv["slot"]) - 1, float(kv["value"])))
            elif keyword == "tie":
                kv = dict(f.split("=", 1) for f in body.split())
                ties.append((int(kv["slot"]) - 1, int(kv["to"]) - 1))
            elif keyword == "gene":
                kv = dict(f.split("=", 1) for f in body.split())
                fixed_genes.append((int(kv["n"]) - 1, int(kv["value"])))
            elif keyword == "coeffs":
                coeffs = tuple(float(v) for v in body.split(","))
            else:
                raise ScanFormatError(f"unknown keyword {keyword!r}", line_no)
        except ScanFormatError:
            raise
        except (KeyError, ValueError) as exc:
            raise ScanFormatError(str(exc), line_no) from None

    if not magic_seen:
        raise ScanFormatError("empty input")
    if mode is None or template_path is None or rate is None or channel is None:
        raise ScanFormatError("scan spec needs mode, template, rate and channel lines")
    if len(axes) != 2:
        raise ScanFormatError(f"scan spec needs exactly 2 axis lines, got {len(axes)}")
    spec = ScanSpec(
        mode, axes[0], axes[1],
        tuple(fixed_coeffs), tuple(ties), tuple(fixed_genes), coeffs,
    )
    return spec, template_path, rate, channel
