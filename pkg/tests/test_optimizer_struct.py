import pytest

from metldpc.check_design import CheckGroup
from metldpc.ensemble import PUNCTURED, TRANSMITTED
from metldpc.optimizer_ar import ARConfig
from metldpc.optimizer_struct import (
    DifEConfig,
    decode_gene,
    derive_seed,
    dife_optimize,
    dife_trace_csv,
    exhaustive_best,
    struct_objective,
)
from metldpc.structure import ClassSlot, StructureTemplate, enumerate_genes

TOY = StructureTemplate(
    m_e=1, v_max=2, c_max=2, d_vmax=3,
    check_groups=(CheckGroup((1,), "residual"),),
    class_slots=(
        ClassSlot(TRANSMITTED, ((2, 3),)),
        ClassSlot(TRANSMITTED, ((2, 3),)),
    ),
)

RATE_TENTH_SCAN = StructureTemplate(
    m_e=4, v_max=3, c_max=5, d_vmax=30,
    check_groups=(
        CheckGroup((1, 2), "residual"),
        CheckGroup((3, 4), "one_socket_per_check", 4),
    ),
    class_slots=(
        ClassSlot(TRANSMITTED, ((3, 3), (0, 0), (0, 27), (0, 0))),
        ClassSlot(TRANSMITTED, ((3, 3), (0, 0), (0, 27), (0, 0))),
        ClassSlot(TRANSMITTED, ((0, 0), (0, 0), (0, 0), (1, 1))),
    ),
)

RATE_HALF_JOINT = StructureTemplate(
    m_e=4, v_max=4, c_max=5, d_vmax=10,
    check_groups=(
        CheckGroup((1, 2), "residual"),
        CheckGroup((3, 4), "one_socket_per_check", 4),
    ),
    class_slots=(
        ClassSlot(TRANSMITTED, ((0, 10), (0, 10), (0, 10), (0, 0))),
        ClassSlot(TRANSMITTED, ((0, 10), (0, 10), (0, 10), (0, 0))),
        ClassSlot(PUNCTURED, ((0, 10), (0, 10), (0, 10), (0, 0))),
        ClassSlot(TRANSMITTED, ((0, 0), (0, 0), (0, 0), (1, 1))),
    ),
)


def test_decode_gene_two_parameter_structure():
    decoded = decode_gene((2, 3), RATE_TENTH_SCAN)
    degrees = [d for _, _, d in decoded]
    assert degrees == [(3, 0, 2, 0), (3, 0, 3, 0), (0, 0, 0, 1)]


def test_decode_gene_published_joint_structure():
    gene = (2, 0, 0, 5, 0, 0, 0, 3, 3)
    decoded = decode_gene(gene, RATE_HALF_JOINT)
    got = [(d, b.punctured) for _, b, d in decoded]
    assert got == [
        ((2, 0, 0, 0), False),
        ((5, 0, 0, 0), False),
        ((0, 3, 3, 0), True),
        ((0, 0, 0, 1), False),
    ]


def test_decode_gene_drops_empty_classes():
    gene = (2, 0, 0, 0, 0, 0, 0, 3, 3)
    decoded = decode_gene(gene, RATE_HALF_JOINT)
    assert len(decoded) == 3  # second transmitted slot decoded to degree zero
    assert decoded[1][1].punctured


def test_decode_gene_rejects_over_degree():
    gene = (5, 5, 5, 0, 0, 0, 0, 3, 3)  # class degree 15 > d_vmax 10
    assert decode_gene(gene, RATE_HALF_JOINT) is None


def test_decode_gene_rejects_out_of_domain():
    assert decode_gene((2, 99), RATE_TENTH_SCAN) is None
    with pytest.raises(ValueError):
        decode_gene((2,), RATE_TENTH_SCAN)


def test_enumerate_genes_counts():
    assert len(list(enumerate_genes(TOY))) == 4
    assert len(list(enumerate_genes(RATE_TENTH_SCAN))) == 28 * 28


def test_derive_seed_stable_and_sensitive():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
    assert derive_seed(1, 2, 3) != derive_seed(2, 2, 3)
    assert 0 <= derive_seed(123, 5) < 2**63


def test_struct_objective_infeasible_gene():
    score, result = struct_objective(
        (99, 2), TOY, 0.5, "bec", ARConfig(n_pop=6, seed=0)
    )
    assert score == float("-inf")
    assert result is None


def test_struct_objective_deterministic():
    ar = ARConfig(n_pop=8, seed=4)
    a = struct_objective((2, 3), TOY, 0.5, "bec", ar)
    b = struct_objective((2, 3), TOY, 0.5, "bec", ar)
    assert a[0] == b[0]
    assert a[1].best_coeffs == b[1].best_coeffs


def test_struct_objective_equals_direct_inner_run():
    from dataclasses import replace

    from metldpc.optimizer_ar import ar_optimize

    ar = ARConfig(n_pop=8, seed=4)
    gene = (3, 2)
    score, result = struct_objective(gene, TOY, 0.5, "bec", ar)
    decoded = decode_gene(gene, TOY)
    direct = ar_optimize(
        decoded, TOY, 0.5, "bec", replace(ar, seed=derive_seed(ar.seed, *gene))
    )
    assert score == direct.best_threshold.threshold
    assert result.best_coeffs == direct.best_coeffs


def test_struct_objective_restarts_never_hurt():
    ar = ARConfig(n_pop=8, seed=4)
    single, _ = struct_objective((2, 3), TOY, 0.5, "bec", ar, restarts=1)
    double, _ = struct_objective((2, 3), TOY, 0.5, "bec", ar, restarts=2)
    assert double >= single


def test_dife_config_validation():
    with pytest.raises(ValueError):
        DifEConfig(population=3)
    with pytest.raises(ValueError):
        DifEConfig(cr=1.5)


def test_dife_requires_free_degrees():
    fixed = StructureTemplate(
        m_e=1, v_max=1, c_max=2, d_vmax=4,
        check_groups=(CheckGroup((1,), "residual"),),
        class_slots=(ClassSlot(TRANSMITTED, ((3, 3),)),),
    )
    with pytest.raises(ValueError):
        dife_optimize(fixed, 0.5, "bec", DifEConfig(seed=0), ARConfig(seed=0))


def test_toy_space_matches_enumeration():
    ar = ARConfig(n_pop=10, seed=7)
    best_gene, best_score = exhaustive_best(TOY, 0.5, "bec", ar)
    for seed in (0, 1, 2):
        cfg = DifEConfig(population=4, max_generations=12, stall_generations=4, seed=seed)
        res = dife_optimize(TOY, 0.5, "bec", cfg, ar)
        assert res.trace[-1].best_threshold == pytest.approx(best_score, abs=1e-12), seed


def test_dife_trace_monotone_and_deterministic():
    ar = ARConfig(n_pop=8, seed=3)
    cfg = DifEConfig(population=4, max_generations=8, stall_generations=3, seed=1)
    a = dife_optimize(TOY, 0.5, "bec", cfg, ar)
    b = dife_optimize(TOY, 0.5, "bec", cfg, ar)
    assert dife_trace_csv(a.trace) == dife_trace_csv(b.trace)
    bests = [r.best_threshold for r in a.trace]
    assert all(y >= x for x, y in zip(bests, bests[1:]))


def test_dife_result_is_consistent():
    ar = ARConfig(n_pop=8, seed=3)
    cfg = DifEConfig(population=4, max_generations=8, stall_generations=3, seed=2)
    res = dife_optimize(TOY, 0.5, "bec", cfg, ar)
    from metldpc.ensemble import validate
    from metldpc.check_design import complete_ensemble
    from metldpc.ensemble import VariableClass

    var = tuple(
        VariableClass(b, d, c) for (_, b, d), c in zip(res.best_lambda, res.best_coeffs)
    )
    ens = complete_ensemble(var, 0.5, TOY.check_groups, TOY.m_e)
    assert validate(ens, 1e-9).ok
    # reported structures satisfy the template limits
    assert len(res.best_lambda) <= TOY.v_max
    assert max(sum(d) for _, _, d in res.best_lambda) <= TOY.d_vmax
    assert len(ens.chk_classes) <= TOY.c_max


def test_polish_can_only_improve():
    ar = ARConfig(n_pop=6, seed=3, max_generations=4, bisect_tol=1e-4)
    cfg = DifEConfig(population=4, max_generations=6, stall_generations=3, seed=5)
    rough = dife_optimize(TOY, 0.5, "bec", cfg, ar)
    polished = dife_optimize(
        TOY, 0.5, "bec", cfg, ar,
        polish_cfg=ARConfig(n_pop=20, seed=0),
        polish_top_k=2, polish_restarts=2,
    )
    assert polished.best_threshold.threshold >= rough.best_threshold.threshold - 1e-9
