"""Multi-edge-type LDPC ensemble algebra.

A multi-edge-type (MET) LDPC ensemble is described by a pair of
node-perspective degree distribution polynomials

    L(r, x) = sum over classes (b, d) of  L_{b,d} * r^b * x^d     (variable side)
    R(x)    = sum over classes (d)    of  R_d * x^d               (check side)

where x = (x_1 .. x_{m_e}) carries one indeterminate per edge type,
x^d = prod_i x_i^{d_i}, and r^b selects the channel the class is attached
to (r_0 for punctured bits, r_1 for bits sent over the channel).  The
coefficients are node fractions relative to the transmitted code length.

Three constraints make an ensemble well formed:

  * the transmitted-class coefficients sum to one,
  * L(1,1) - R(1) equals the design rate,
  * per edge type, variable-side and check-side socket counts agree:
    dL/dx_i(1,1) = dR/dx_i(1).

This module holds the ensemble value types, polynomial evaluation and
differentiation, constraint checking, and the line-oriented text format
used to store ensembles on disk.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "ChannelAssignment",
    "PUNCTURED",
    "TRANSMITTED",
    "VariableClass",
    "CheckClass",
    "Ensemble",
    "ConstraintViolation",
    "ValidationReport",
    "EnsembleFormatError",
    "eval_L",
    "eval_R",
    "deriv_L",
    "deriv_R",
    "code_rate",
    "var_socket_count",
    "chk_socket_count",
    "validate",
    "parse_ensemble",
    "serialize_ensemble",
    "load_ensemble",
    "save_ensemble",
]


@dataclass(frozen=True)
class ChannelAssignment:
    """Channel membership of a variable-node class (the b vector).

    ``channel == 0`` marks a punctured class (the bit is never transmitted
    and receives no channel observation); ``channel == k >= 1`` attaches the
    class to the k-th transmission channel.  Binary-input builds use a
    single channel, so in practice the assignment is punctured/transmitted.
    """

    channel: int = 1

    def __post_init__(self) -> None:
        if self.channel < 0:
            raise ValueError("channel index must be non-negative")

    @property
    def punctured(self) -> bool:
        return self.channel == 0

    def b_vector(self, m_r: int = 1) -> tuple[int, ...]:
        if self.channel > m_r:
            raise ValueError(f"channel {self.channel} exceeds m_r={m_r}")
        return tuple(1 if i == self.channel else 0 for i in range(m_r + 1))


PUNCTURED = ChannelAssignment(0)
TRANSMITTED = ChannelAssignment(1)


def _as_degree_tuple(d: Iterable[int]) -> tuple[int, ...]:
    out = tuple(int(v) for v in d)
    if any(v < 0 for v in out):
        raise ValueError(f"edge degrees must be non-negative, got {out}")
    return out


@dataclass(frozen=True)
class VariableClass:
    """One variable-node class: channel assignment b, degree vector d, coefficient."""

    b: ChannelAssignment
    d: tuple[int, ...]
    coeff: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "d", _as_degree_tuple(self.d))
        object.__setattr__(self, "coeff", float(self.coeff))
        if self.coeff < 0:
            raise ValueError(f"variable-class coefficient must be >= 0, got {self.coeff}")
        if self.total_degree < 1:
            raise ValueError("variable class needs at least one edge")

    @property
    def total_degree(self) -> int:
        return sum(self.d)


@dataclass(frozen=True)
class CheckClass:
    """One check-node class: degree vector d and coefficient."""

    d: tuple[int, ...]
    coeff: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "d", _as_degree_tuple(self.d))
        object.__setattr__(self, "coeff", float(self.coeff))
        if self.coeff < 0:
            raise ValueError(f"check-class coefficient must be >= 0, got {self.coeff}")
        if self.total_degree < 1:
            raise ValueError("check class needs at least one edge")

    @property
    def total_degree(self) -> int:
        return sum(self.d)


@dataclass(frozen=True)
class Ensemble:
    """A full MET-LDPC ensemble.

    Immutable after construction; class order is arbitrary but fixed, and
    all operations treat it as significant only for reporting.  Shape errors
    (degree vectors of the wrong length, bad channel indices) are rejected
    here; the numeric design constraints are checked by :func:`validate`.
    """

    m_e: int
    var_classes: tuple[VariableClass, ...]
    chk_classes: tuple[CheckClass, ...]
    design_rate: float
    m_r: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "var_classes", tuple(self.var_classes))
        object.__setattr__(self, "chk_classes", tuple(self.chk_classes))
        if self.m_e < 1:
            raise ValueError("need at least one edge type")
        if self.m_r != 1:
            raise ValueError("only single-channel ensembles (m_r = 1) are supported")
        if not 0.0 < self.design_rate < 1.0:
            raise ValueError(f"design rate must lie in (0, 1), got {self.design_rate}")
        for vc in self.var_classes:
            if len(vc.d) != self.m_e:
                raise ValueError(f"variable class {vc.d} does not match m_e={self.m_e}")
            if vc.b.channel > self.m_r:
                raise ValueError(f"channel {vc.b.channel} exceeds m_r={self.m_r}")
        for cc in self.chk_classes:
            if len(cc.d) != self.m_e:
                raise ValueError(f"check class {cc.d} does not match m_e={self.m_e}")


def _check_edge_type(ens: Ensemble, edge_type: int) -> int:
    if not 1 <= edge_type <= ens.m_e:
        raise ValueError(f"edge type {edge_type} out of range 1..{ens.m_e}")
    return edge_type - 1


def _pow_prod(x: Sequence[float], d: Sequence[int]) -> float:
    # 0^0 counts as 1: zero exponents are skipped entirely.
    p = 1.0
    for xi, di in zip(x, d):
        if di:
            p *= xi**di
    return p


def eval_L(ens: Ensemble, r: Sequence[float], x: Sequence[float]) -> float:
    """Evaluate the variable-side polynomial L(r, x)."""
    if len(r) != ens.m_r + 1:
        raise ValueError(f"r must have length {ens.m_r + 1}, got {len(r)}")
    if len(x) != ens.m_e:
        raise ValueError(f"x must have length {ens.m_e}, got {len(x)}")
    return sum(vc.coeff * r[vc.b.channel] * _pow_prod(x, vc.d) for vc in ens.var_classes)


def eval_R(ens: Ensemble, x: Sequence[float]) -> float:
    """Evaluate the check-side polynomial R(x)."""
    if len(x) != ens.m_e:
        raise ValueError(f"x must have length {ens.m_e}, got {len(x)}")
    return sum(cc.coeff * _pow_prod(x, cc.d) for cc in ens.chk_classes)


def deriv_L(ens: Ensemble, edge_type: int, r: Sequence[float], x: Sequence[float]) -> float:
    """Partial derivative dL/dx_i at (r, x); edge types are 1-based.

    At r = x = all-ones this is the variable-side socket count of the type.
    """
    i = _check_edge_type(ens, edge_type)
    if len(r) != ens.m_r + 1:
        raise ValueError(f"r must have length {ens.m_r + 1}, got {len(r)}")
    if len(x) != ens.m_e:
        raise ValueError(f"x must have length {ens.m_e}, got {len(x)}")
    total = 0.0
    for vc in ens.var_classes:
        di = vc.d[i]
        if not di:
            continue
        term = vc.coeff * r[vc.b.channel] * di
        for j, dj in enumerate(vc.d):
            e = dj - (1 if j == i else 0)
            if e:
                term *= x[j] ** e
        total += term
    return total


def deriv_R(ens: Ensemble, edge_type: int, x: Sequence[float]) -> float:
    """Partial derivative dR/dx_i at x; edge types are 1-based."""
    i = _check_edge_type(ens, edge_type)
    if len(x) != ens.m_e:
        raise ValueError(f"x must have length {ens.m_e}, got {len(x)}")
    total = 0.0
    for cc in ens.chk_classes:
        di = cc.d[i]
        if not di:
            continue
        term = cc.coeff * di
        for j, dj in enumerate(cc.d):
            e = dj - (1 if j == i else 0)
            if e:
                term *= x[j] ** e
        total += term
    return total


def var_socket_count(ens: Ensemble, edge_type: int) -> float:
    """Total variable-side sockets of an edge type (dL/dx_i at all-ones)."""
    i = _check_edge_type(ens, edge_type)
    return sum(vc.coeff * vc.d[i] for vc in ens.var_classes)


def chk_socket_count(ens: Ensemble, edge_type: int) -> float:
    """Total check-side sockets of an edge type (dR/dx_i at all-ones)."""
    i = _check_edge_type(ens, edge_type)
    return sum(cc.coeff * cc.d[i] for cc in ens.chk_classes)


def code_rate(ens: Ensemble) -> float:
    """Code rate L(1,1) - R(1), i.e. total variable minus check fractions."""
    return sum(vc.coeff for vc in ens.var_classes) - sum(cc.coeff for cc in ens.chk_classes)


@dataclass(frozen=True)
class ConstraintViolation:
    constraint: str
    residual: float
    edge_type: int | None = None

    def __str__(self) -> str:
        where = f" (edge type {self.edge_type})" if self.edge_type is not None else ""
        return f"{self.constraint}{where}: residual {self.residual:+.3e}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[ConstraintViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def max_residual(self) -> float:
        return max((abs(v.residual) for v in self.violations), default=0.0)

    def __str__(self) -> str:
        if self.ok:
            return "all constraints satisfied"
        return "\n".join(str(v) for v in self.violations)


def validate(ens: Ensemble, tol_c: float = 1e-4) -> ValidationReport:
    """Check the transmitted-sum, rate, and per-type socket constraints.

    Returns a report listing every violated constraint with its signed
    residual (computed minus target); the report is empty iff the ensemble
    satisfies all three constraints within ``tol_c``.
    """
    if tol_c <= 0:
        raise ValueError("tol_c must be positive")
    violations: list[ConstraintViolation] = []

    transmitted = sum(vc.coeff for vc in ens.var_classes if not vc.b.punctured)
    if abs(transmitted - 1.0) > tol_c:
        violations.append(ConstraintViolation("transmitted-sum", transmitted - 1.0))

    rate_resid = code_rate(ens) - ens.design_rate
    if abs(rate_resid) > tol_c:
        violations.append(ConstraintViolation("rate", rate_resid))

    for i in range(1, ens.m_e + 1):
        resid = var_socket_count(ens, i) - chk_socket_count(ens, i)
        if abs(resid) > tol_c:
            violations.append(ConstraintViolation("socket-count", resid, edge_type=i))

    return ValidationReport(tuple(violations))


# ---------------------------------------------------------------------------
# Text format
#
#   met-ensemble v1
#   edge_types 4
#   rate 0.5
#   var b=channel   d=2,0,0,0 L=0.526258
#   var b=punctured d=0,3,3,0 L=0.271307
#   chk d=3,1,0,0 R=0.029215
#
# '#' starts a comment; var/chk line order defines class order.  Classes with
# zero coefficient are kept in memory but dropped when serializing.
# ---------------------------------------------------------------------------

_MAGIC = "met-ensemble v1"


class EnsembleFormatError(ValueError):
    """Malformed ensemble text; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


def _parse_fields(body: str, line_no: int) -> dict[str, str]:
    fields: dict[str, str] = {}
    for tok in body.split():
        if "=" not in tok:
            raise EnsembleFormatError(f"expected key=value, got {tok!r}", line_no)
        key, _, value = tok.partition("=")
        if key in fields:
            raise EnsembleFormatError(f"duplicate field {key!r}", line_no)
        fields[key] = value
    return fields


def _parse_degrees(text: str, m_e: int, line_no: int) -> tuple[int, ...]:
    try:
        d = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise EnsembleFormatError(f"bad degree list {text!r}", line_no) from None
    if len(d) != m_e:
        raise EnsembleFormatError(
            f"degree list {text!r} has {len(d)} entries, expected {m_e}", line_no
        )
    if any(v < 0 for v in d):
        raise EnsembleFormatError(f"negative degree in {text!r}", line_no)
    return d


def _parse_channel(text: str, line_no: int) -> ChannelAssignment:
    if text == "punctured":
        return PUNCTURED
    if text == "channel":
        return TRANSMITTED
    raise EnsembleFormatError(f"unknown channel assignment {text!r}", line_no)


def parse_ensemble(text: str) -> Ensemble:
    """Parse the line-oriented ensemble format; raises EnsembleFormatError."""
    m_e: int | None = None
    rate: float | None = None
    var_classes: list[VariableClass] = []
    chk_classes: list[CheckClass] = []
    seen_var: set[tuple[int, tuple[int, ...]]] = set()
    seen_chk: set[tuple[int, ...]] = set()
    magic_seen = False

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not magic_seen:
            if line != _MAGIC:
                raise EnsembleFormatError(f"expected {_MAGIC!r} header", line_no)
            magic_seen = True
            continue
        keyword, _, body = line.partition(" ")
        body = body.strip()
        if keyword == "edge_types":
            try:
                m_e = int(body)
            except ValueError:
                raise EnsembleFormatError(f"bad edge_types {body!r}", line_no) from None
            if m_e < 1:
                raise EnsembleFormatError("edge_types must be >= 1", line_no)
        elif keyword == "rate":
            try:
                rate = float(body)
            except ValueError:
                raise EnsembleFormatError(f"bad rate {body!r}", line_no) from None
        elif keyword == "var":
            if m_e is None:
                raise EnsembleFormatError("edge_types must precede var lines", line_no)
            fields = _parse_fields(body, line_no)
            missing = {"b", "d", "L"} - fields.keys()
            if missing:
                raise EnsembleFormatError(f"var line missing {sorted(missing)}", line_no)
            b = _parse_channel(fields["b"], line_no)
            d = _parse_degrees(fields["d"], m_e, line_no)
            key = (b.channel, d)
            if key in seen_var:
                raise EnsembleFormatError(f"duplicate variable class b={fields['b']} d={fields['d']}", line_no)
            seen_var.add(key)
            try:
                var_classes.append(VariableClass(b, d, float(fields["L"])))
            except ValueError as exc:
                raise EnsembleFormatError(str(exc), line_no) from None
        elif keyword == "chk":
            if m_e is None:
                raise EnsembleFormatError("edge_types must precede chk lines", line_no)
            fields = _parse_fields(body, line_no)
            missing = {"d", "R"} - fields.keys()
            if missing:
                raise EnsembleFormatError(f"chk line missing {sorted(missing)}", line_no)
            d = _parse_degrees(fields["d"], m_e, line_no)
            if d in seen_chk:
                raise EnsembleFormatError(f"duplicate check class d={fields['d']}", line_no)
            seen_chk.add(d)
            try:
                chk_classes.append(CheckClass(d, float(fields["R"])))
            except ValueError as exc:
                raise EnsembleFormatError(str(exc), line_no) from None
        else:
            raise EnsembleFormatError(f"unknown keyword {keyword!r}", line_no)

    if not magic_seen:
        raise EnsembleFormatError("empty input")
    if m_e is None:
        raise EnsembleFormatError("missing edge_types line")
    if rate is None:
        raise EnsembleFormatError("missing rate line")
    if not var_classes:
        raise EnsembleFormatError("no variable classes")
    try:
        return Ensemble(m_e, tuple(var_classes), tuple(chk_classes), rate)
    except ValueError as exc:
        raise EnsembleFormatError(str(exc)) from None


def serialize_ensemble(ens: Ensemble) -> str:
    """Render an ensemble in the text format (exact float round-trip).

    Coefficients are written with ``repr``, which emits the shortest string
    that parses back to the identical double, so parse(serialize(e)) == e.
    Zero-coefficient classes are dropped.
    """
    lines = [_MAGIC, f"edge_types {ens.m_e}", f"rate {ens.design_rate!r}"]
    for vc in ens.var_classes:
        if vc.coeff == 0.0:
            continue
        b = "punctured" if vc.b.punctured else "channel"
        d = ",".join(str(v) for v in vc.d)
        lines.append(f"var b={b} d={d} L={vc.coeff!r}")
    for cc in ens.chk_classes:
        if cc.coeff == 0.0:
            continue
        d = ",".join(str(v) for v in cc.d)
        lines.append(f"chk d={d} R={cc.coeff!r}")
    return "\n".join(lines) + "\n"


def load_ensemble(path) -> Ensemble:
    with open(path, encoding="utf-8") as fh:
        return parse_ensemble(fh.read())


def save_ensemble(ens: Ensemble, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_ensemble(ens))
