import math

import pytest

from metldpc.density_evolution import bec_threshold
from metldpc.landscape import (
    ScanAxis,
    ScanFormatError,
    ScanGrid,
    ScanSpec,
    parse_scan_spec,
    scan,
    strict_local_maxima,
)
from metldpc.structure import parse_template

from conftest import bundled_text, load_bundled


@pytest.fixture(scope="module")
def dd_template():
    return parse_template(bundled_text("templates", "rate_half_dd.tmpl"))


@pytest.fixture(scope="module")
def degree_template():
    return parse_template(bundled_text("templates", "rate_tenth_degree_scan.tmpl"))


def test_single_cell_equals_direct_threshold(dd_template):
    spec = ScanSpec(
        "coefficients",
        ScanAxis(0, (0.526258,)),
        ScanAxis(1, (0.124003,)),
        fixed_coeffs=((3, 0.271307),),
    )
    grid = scan(dd_template, spec, 0.5, "bec")
    direct = bec_threshold(load_bundled("rate_half_bec_dd.ens")).threshold
    assert grid.values[0][0] == pytest.approx(direct, abs=1e-12)


def test_infeasible_cells_are_nan_not_scored(dd_template):
    spec = ScanSpec(
        "coefficients",
        ScanAxis(0, (0.5, 0.9)),
        ScanAxis(1, (0.2, 0.8)),
        fixed_coeffs=((3, 0.3),),
    )
    grid = scan(dd_template, spec, 0.5, "bec")
    assert not math.isnan(grid.values[0][0])
    assert math.isnan(grid.values[1][1])  # transmitted sum above one
    csv = grid.to_csv()
    assert "nan" in csv


def test_tie_rule_applied(dd_template):
    spec = ScanSpec(
        "coefficients",
        ScanAxis(0, (0.5,)),
        ScanAxis(1, (0.2,)),
        ties=((3, 2),),  # punctured class copies the chain class
    )
    grid = scan(dd_template, spec, 0.5, "bec")
    from metldpc.check_design import complete_ensemble
    from metldpc.ensemble import PUNCTURED, TRANSMITTED, VariableClass

    lam = (
        VariableClass(TRANSMITTED, (2, 0, 0, 0), 0.5),
        VariableClass(TRANSMITTED, (3, 0, 0, 0), 0.2),
        VariableClass(TRANSMITTED, (0, 0, 0, 1), 0.3),
        VariableClass(PUNCTURED, (0, 3, 3, 0), 0.3),
    )
    ens = complete_ensemble(lam, 0.5, dd_template.check_groups, dd_template.m_e)
    assert grid.values[0][0] == pytest.approx(bec_threshold(ens).threshold, abs=1e-12)


def test_degree_mode_matches_reference_cell(degree_template):
    spec = ScanSpec(
        "degrees",
        ScanAxis(0, (20.0,)),
        ScanAxis(1, (25.0,)),
        coeffs=(0.100, 0.025),
    )
    grid = scan(degree_template, spec, 0.1, "bec")
    direct = bec_threshold(load_bundled("rate_tenth_reference.ens")).threshold
    assert grid.values[0][0] == pytest.approx(direct, abs=1e-12)


def test_degree_mode_infeasible_cell_nan(degree_template):
    # so few type-3 edges that the chain checks' average degree drops below one
    spec = ScanSpec(
        "degrees",
        ScanAxis(0, (1.0,)),
        ScanAxis(1, (1.0,)),
        coeffs=(0.100, 0.025),
    )
    grid = scan(degree_template, spec, 0.1, "bec")
    assert math.isnan(grid.values[0][0])


def test_grid_csv_layout(dd_template):
    spec = ScanSpec(
        "coefficients",
        ScanAxis(0, (0.4, 0.5)),
        ScanAxis(1, (0.1, 0.2)),
        fixed_coeffs=((3, 0.3),),
    )
    grid = scan(dd_template, spec, 0.5, "bec")
    lines = grid.to_csv().strip().splitlines()
    assert lines[0] == "axis1,axis2,threshold"
    assert len(lines) == 1 + 4
    cell = lines[1].split(",")
    assert float(cell[0]) == 0.4 and float(cell[1]) == 0.1


def test_rescanning_a_cell_reproduces_it(dd_template):
    spec = ScanSpec(
        "coefficients",
        ScanAxis(0, (0.45, 0.5)),
        ScanAxis(1, (0.15,)),
        fixed_coeffs=((3, 0.3),),
    )
    grid = scan(dd_template, spec, 0.5, "bec")
    single = ScanSpec(
        "coefficients",
        ScanAxis(0, (0.5,)),
        ScanAxis(1, (0.15,)),
        fixed_coeffs=((3, 0.3),),
    )
    again = scan(dd_template, single, 0.5, "bec")
    assert again.values[0][0] == grid.values[1][0]


def test_strict_local_maxima_on_synthetic_grid():
    grid = ScanGrid(
        (0.0, 1.0, 2.0),
        (0.0, 1.0, 2.0),
        (
            (0.9, 0.1, 0.8),
            (0.1, 0.2, 0.1),
            (0.7, 0.1, float("nan")),
        ),
    )
    maxima = strict_local_maxima(grid)
    assert (0, 0) in maxima and (0, 2) in maxima and (2, 0) in maxima
    assert (1, 1) not in maxima
    assert len(maxima) == 3


def test_scan_spec_parsing_round_trip():
    spec, template, rate, channel = parse_scan_spec(
        bundled_text("scans", "rate_half_coeff_scan.scan")
    )
    assert spec.mode == "coefficients"
    assert template.endswith("rate_half_dd.tmpl")
    assert rate == 0.5 and channel == "bec"
    assert len(spec.axis1.values) == 25
    assert spec.axis1.values[15] == pytest.approx(0.526258)
    assert spec.fixed_coeffs == ((3, 0.271307),)


def test_scan_spec_errors():
    with pytest.raises(ScanFormatError):
        parse_scan_spec("")
    with pytest.raises(ScanFormatError):
        parse_scan_spec("met-scan v1\nmode coefficients\n")
    bad_axis = (
        "met-scan v1\nmode degrees\ntemplate t\nrate 0.1\nchannel bec\n"
        "axis gene=1 min=1 max=5\n"
    )
    with pytest.raises(ScanFormatError, match="2 axis"):
        parse_scan_spec(bad_axis)


def test_degree_scan_requires_full_gene_assignment(degree_template):
    spec = ScanSpec(
        "degrees",
        ScanAxis(0, (5.0,)),
        ScanAxis(0, (6.0,)),  # duplicate target leaves gene 2 unassigned
        coeffs=(0.1, 0.025),
    )
    with pytest.raises(ValueError, match="no value"):
        scan(degree_template, spec, 0.1, "bec")
