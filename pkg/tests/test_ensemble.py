import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metldpc.ensemble import (
    PUNCTURED,
    TRANSMITTED,
    CheckClass,
    Ensemble,
    EnsembleFormatError,
    VariableClass,
    chk_socket_count,
    code_rate,
    deriv_L,
    deriv_R,
    eval_L,
    eval_R,
    parse_ensemble,
    serialize_ensemble,
    validate,
    var_socket_count,
)

from conftest import load_bundled


def test_eval_L_at_ones_sums_coefficients(dvb):
    assert eval_L(dvb, (1.0, 1.0), (1.0, 1.0)) == pytest.approx(1.0, abs=1e-12)


def test_eval_L_partial_point(dvb):
    # 0.3 * 0.5^3 + 0.2 * 0.5^8 + 0.5
    assert eval_L(dvb, (0.0, 1.0), (0.5, 1.0)) == pytest.approx(0.53828125, abs=1e-12)


def test_eval_R_at_ones(dvb):
    assert eval_R(dvb, (1.0, 1.0)) == pytest.approx(0.5, abs=1e-12)


def test_eval_R_partial_point(dvb):
    assert eval_R(dvb, (0.5, 1.0)) == pytest.approx(0.5 * 0.5**5, abs=1e-12)


def test_eval_R_no_checks_is_zero():
    ens = Ensemble(1, (VariableClass(TRANSMITTED, (2,), 1.0),), (), 0.5)
    assert eval_R(ens, (0.7,)) == 0.0


def test_zero_power_at_zero_argument(dvb):
    # classes with no type-1 edges must survive x_1 = 0
    val = eval_L(dvb, (0.0, 1.0), (0.0, 1.0))
    assert val == pytest.approx(0.5, abs=1e-12)


def test_derivatives_at_ones_are_socket_counts(dvb):
    assert deriv_L(dvb, 1, (1.0, 1.0), (1.0, 1.0)) == pytest.approx(2.5, abs=1e-12)
    assert deriv_L(dvb, 2, (1.0, 1.0), (1.0, 1.0)) == pytest.approx(1.0, abs=1e-12)
    assert deriv_R(dvb, 1, (1.0, 1.0)) == pytest.approx(2.5, abs=1e-12)
    assert deriv_R(dvb, 2, (1.0, 1.0)) == pytest.approx(1.0, abs=1e-12)


def test_derivative_of_absent_edge_type_is_zero():
    ens = Ensemble(
        2,
        (VariableClass(TRANSMITTED, (3, 0), 1.0),),
        (CheckClass((6, 0), 0.5),),
        0.5,
    )
    assert deriv_L(ens, 2, (1.0, 1.0), (0.3, 0.9)) == 0.0
    assert deriv_R(ens, 2, (0.3, 0.9)) == 0.0


def test_edge_type_bounds_checked(dvb):
    with pytest.raises(ValueError):
        deriv_L(dvb, 0, (1.0, 1.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        deriv_R(dvb, 3, (1.0, 1.0))


def test_dimension_mismatch_rejected(dvb):
    with pytest.raises(ValueError):
        eval_L(dvb, (1.0,), (1.0, 1.0))
    with pytest.raises(ValueError):
        eval_L(dvb, (1.0, 1.0), (1.0,))
    with pytest.raises(ValueError):
        eval_R(dvb, (1.0, 1.0, 1.0))


def test_code_rate_examples(dvb, rate_half_bec_dd):
    assert code_rate(dvb) == pytest.approx(0.5, abs=1e-12)
    assert code_rate(rate_half_bec_dd) == pytest.approx(0.5, abs=1e-4)


def test_code_rate_without_checks():
    ens = Ensemble(1, (VariableClass(TRANSMITTED, (2,), 1.0),), (), 0.5)
    assert code_rate(ens) == pytest.approx(1.0, abs=1e-12)


def test_validate_published_ensembles(rate_half_bec_dd, dvb):
    assert validate(rate_half_bec_dd, 1e-4).ok
    assert validate(dvb, 1e-9).ok


def test_validate_reports_violations(dvb):
    broken = Ensemble(
        dvb.m_e, dvb.var_classes, (CheckClass((5, 2), 0.6),), dvb.design_rate
    )
    report = validate(broken, 1e-9)
    names = {v.constraint for v in report.violations}
    assert "rate" in names and "socket-count" in names
    socket = [v for v in report.violations if v.constraint == "socket-count"]
    assert {v.edge_type for v in socket} == {1, 2}


def test_validate_requires_positive_tolerance(dvb):
    with pytest.raises(ValueError):
        validate(dvb, 0.0)


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def test_parse_bundled_example(dvb):
    assert len(dvb.var_classes) == 3
    assert len(dvb.chk_classes) == 1
    assert dvb.m_e == 2


def test_round_trip_identity():
    ens = load_bundled("rate_tenth_awgn_joint.ens")
    again = parse_ensemble(serialize_ensemble(ens))
    assert again == ens


def test_round_trip_full_precision():
    ens = Ensemble(
        2,
        (
            VariableClass(TRANSMITTED, (2, 1), 1.0 / 3.0),
            VariableClass(PUNCTURED, (0, 3), 0.1234567891234567),
        ),
        (CheckClass((1, 1), 0.5),),
        0.4999999999999999,
    )
    assert parse_ensemble(serialize_ensemble(ens)) == ens


def test_zero_coefficient_classes_dropped_on_serialize():
    ens = Ensemble(
        1,
        (
            VariableClass(TRANSMITTED, (2,), 1.0),
            VariableClass(TRANSMITTED, (3,), 0.0),
        ),
        (CheckClass((4,), 0.5),),
        0.5,
    )
    text = serialize_ensemble(ens)
    assert "d=3" not in text
    assert len(parse_ensemble(text).var_classes) == 1


def test_parse_empty_input_fails():
    with pytest.raises(EnsembleFormatError):
        parse_ensemble("")


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("met-ensemble v1\nrate 0.5\nvar b=channel d=2 L=0.5\n", "edge_types"),
        ("met-ensemble v1\nedge_types 2\nrate 0.5\nvar b=channel d=2 L=1.0\n", "expected 2"),
        (
            "met-ensemble v1\nedge_types 1\nrate 0.5\n"
            "var b=channel d=2 L=0.5\nvar b=channel d=2 L=0.5\n",
            "duplicate variable class",
        ),
        (
            "met-ensemble v1\nedge_types 1\nrate 0.5\nvar b=channel d=2 L=0.5\n"
            "chk d=3 R=0.1\nchk d=3 R=0.2\n",
            "duplicate check class",
        ),
        ("met-ensemble v1\nedge_types 1\nrate 0.5\nvar b=mystery d=2 L=0.5\n", "channel assignment"),
        ("bogus header\n", "header"),
    ],
)
def test_parse_errors_carry_line_numbers(text, fragment):
    with pytest.raises(EnsembleFormatError) as err:
        parse_ensemble(text)
    assert fragment in str(err.value)
    assert err.value.line is not None


def test_parse_error_without_rate():
    with pytest.raises(EnsembleFormatError, match="missing rate"):
        parse_ensemble("met-ensemble v1\nedge_types 1\nvar b=channel d=2 L=1\n")


# ---------------------------------------------------------------------------
# algebraic invariants
# ---------------------------------------------------------------------------

@st.composite
def small_ensembles(draw):
    m_e = draw(st.integers(1, 3))
    n_var = draw(st.integers(1, 4))
    n_chk = draw(st.integers(1, 3))

    def degree_vector():
        d = draw(
            st.lists(st.integers(0, 4), min_size=m_e, max_size=m_e).filter(
                lambda v: sum(v) >= 1
            )
        )
        return tuple(d)

    var = tuple(
        VariableClass(
            PUNCTURED if draw(st.booleans()) else TRANSMITTED,
            degree_vector(),
            draw(st.floats(0.01, 1.0)),
        )
        for _ in range(n_var)
    )
    chk = tuple(CheckClass(degree_vector(), draw(st.floats(0.01, 1.0))) for _ in range(n_chk))
    return Ensemble(m_e, var, chk, 0.5)


@settings(max_examples=60, deadline=None)
@given(small_ensembles(), st.data())
def test_deriv_matches_central_difference(ens, data):
    h = 1e-5
    x = [data.draw(st.floats(0.1, 0.9)) for _ in range(ens.m_e)]
    r = (1.0, data.draw(st.floats(0.1, 1.0)))
    for i in range(1, ens.m_e + 1):
        xp = list(x)
        xm = list(x)
        xp[i - 1] += h
        xm[i - 1] -= h
        fd = (eval_L(ens, r, xp) - eval_L(ens, r, xm)) / (2 * h)
        assert abs(deriv_L(ens, i, r, x) - fd) <= 1e-6
        fd_r = (eval_R(ens, xp) - eval_R(ens, xm)) / (2 * h)
        assert abs(deriv_R(ens, i, x) - fd_r) <= 1e-6


@settings(max_examples=40, deadline=None)
@given(small_ensembles(), st.randoms(use_true_random=False))
def test_code_rate_invariant_under_class_order(ens, rnd):
    var = list(ens.var_classes)
    chk = list(ens.chk_classes)
    rnd.shuffle(var)
    rnd.shuffle(chk)
    shuffled = Ensemble(ens.m_e, tuple(var), tuple(chk), ens.design_rate)
    assert code_rate(shuffled) == pytest.approx(code_rate(ens), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(small_ensembles(), st.data())
def test_eval_monotone_in_each_coordinate(ens, data):
    x = [data.draw(st.floats(0.0, 1.0)) for _ in range(ens.m_e)]
    i = data.draw(st.integers(0, ens.m_e - 1))
    bump = data.draw(st.floats(0.0, 1.0))
    x_hi = list(x)
    x_hi[i] = min(1.0, x[i] + bump)
    r = (1.0, 1.0)
    assert eval_L(ens, r, x_hi) >= eval_L(ens, r, x) - 1e-12
    assert eval_R(ens, x_hi) >= eval_R(ens, x) - 1e-12


def test_socket_counts_match_derivatives(rate_half_bec_dd):
    ens = rate_half_bec_dd
    ones = (1.0,) * ens.m_e
    for i in range(1, ens.m_e + 1):
        assert var_socket_count(ens, i) == pytest.approx(
            deriv_L(ens, i, (1.0, 1.0), ones), abs=1e-12
        )
        assert chk_socket_count(ens, i) == pytest.approx(deriv_R(ens, i, ones), abs=1e-12)


def test_construction_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Ensemble(2, (VariableClass(TRANSMITTED, (2,), 1.0),), (), 0.5)
    with pytest.raises(ValueError):
        Ensemble(1, (VariableClass(TRANSMITTED, (2,), 1.0),), (), 1.5)
    with pytest.raises(ValueError):
        VariableClass(TRANSMITTED, (0,), 0.5)
    with pytest.raises(ValueError):
        VariableClass(TRANSMITTED, (2,), -0.1)
