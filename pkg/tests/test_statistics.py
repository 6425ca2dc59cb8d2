import math

import numpy as np
import pytest

from src.core import BuildMode, SplitParams, build
from src.distributions import DirichletSymmetric, UniformSpacings, constants
from src.families import preset
from src.statistics import (
    StatisticsError,
    aggregate,
    concentration_report,
    depth_grid,
    depth_means_by_index,
    ks_normal,
    path_length_identity_check,
    subtree_layer,
    subtree_sums,
    summarize,
)
from tests.oracles import bst_last_ball_depth_mean, bst_path_length_mean

BST = preset("bst")


def bst_stats(n, seeds, mode=BuildMode.COUNTS):
    out = []
    for rep, seed in enumerate(seeds):
        st = summarize(build(BST.params, BST.source, n, seed, mode), BST.constants)
        st.family, st.rep, st.seed = BST.label, rep, seed
        out.append(st)
    return out


def test_single_vertex_tree():
    params = SplitParams(2, 8, 0, 0)
    source = DirichletSymmetric(1.0, 2)
    st = summarize(build(params, source, 5, seed=0), constants(source))
    assert (st.N, st.Psi, st.Upsilon, st.height) == (1, 0, 0, 0)
    assert st.profile == {0: 1}
    assert st.ball_profile == {0: 5}


def test_bst_ball_and_vertex_path_lengths_agree():
    for st in bst_stats(400, range(5)):
        assert st.N == 400
        assert st.Psi == st.Upsilon
        assert sum(st.profile.values()) == st.N
        assert st.N_good + st.N_bad == st.N
        assert 0.0 <= st.bad_fraction <= 1.0


def test_bst_path_length_mean_for_three_balls():
    reps = 10_000
    rng = np.random.default_rng(17)
    psi = np.array([summarize(build(BST.params, BST.source, 3, int(s)), BST.constants).Psi
                    for s in rng.integers(0, 2**63, size=reps)], dtype=float)
    assert set(np.unique(psi)) <= {2.0, 3.0}
    se = psi.std(ddof=1) / math.sqrt(reps)
    assert abs(psi.mean() - bst_path_length_mean(3)) <= 4 * se
    assert bst_path_length_mean(3) == pytest.approx(8 / 3)


@pytest.mark.parametrize("seed", range(4))
def test_path_identity_for_wide_parameters(seed):
    params = SplitParams(4, 3, 1, 0)
    tree = build(params, DirichletSymmetric(1.0, 4), 32, seed, BuildMode.TRACED)
    assert path_length_identity_check(tree)


def test_traced_fields():
    tree = build(BST.params, BST.source, 200, seed=3, mode=BuildMode.TRACED)
    st = summarize(tree, BST.constants, ks=[1, 50, 200, 500])
    assert st.D_n is not None and st.D_n_star is not None
    assert st.D_n_star == pytest.approx(st.Psi / 200)
    assert set(st.depth_at) == {1, 50, 200}
    assert st.mean_insertion_depth <= st.D_n_star


def test_counts_mode_has_no_ball_depths():
    st = bst_stats(50, [1])[0]
    assert st.D_n is None and st.depth_at == {}


def test_summarize_rejects_bad_epsilon():
    tree = build(BST.params, BST.source, 10, seed=0)
    with pytest.raises(StatisticsError):
        summarize(tree, BST.constants, epsilon=0.0)


def test_depth_grid():
    assert depth_grid(1) == [1]
    assert depth_grid(2) == [1, 2]
    assert depth_grid(1000) == [145, 500, 1000]


def test_concentration_at_root_is_exact():
    tree = build(SplitParams(3, 2, 1, 0), UniformSpacings(3), 2000, seed=4, mode=BuildMode.INSTRUMENTED)
    assert concentration_report(tree, 0) == (0.0, 1)
    frac, count = concentration_report(tree, 2)
    assert count > 0 and 0.0 <= frac <= 1.0


def test_concentration_needs_instrumented_mode():
    tree = build(BST.params, BST.source, 100, seed=0, mode=BuildMode.TRACED)
    with pytest.raises(StatisticsError):
        concentration_report(tree, 0)
    inst = build(BST.params, BST.source, 10, seed=0, mode=BuildMode.INSTRUMENTED)
    with pytest.raises(StatisticsError):
        concentration_report(inst, 50)


def test_subtree_sums_vanish_for_shallow_tree():
    source = DirichletSymmetric(1.0, 2)
    tree = build(SplitParams(2, 5000, 0, 0), source, 1000, seed=0)
    assert subtree_sums(tree, 2.0, constants(source)) == (0.0, 0.0)


def test_subtree_layer_on_bst():
    tree = build(BST.params, BST.source, 5000, seed=8)
    layer = subtree_layer(tree, 2.0)
    assert layer.L == math.floor(2.0 * math.log(math.log(5000)) / math.log(2))
    assert np.all(layer.n_i > BST.params.s)
    assert layer.n_i.sum() <= 5000
    assert np.all(layer.rel_depth >= 0)
    layer_sum, upsilon = subtree_sums(tree, 2.0, BST.constants)
    assert layer_sum > 0 and upsilon > 0


def test_subtree_layer_needs_positive_depth():
    tree = build(BST.params, BST.source, 20, seed=0)
    with pytest.raises(StatisticsError):
        subtree_layer(tree, 0.1)
    with pytest.raises(StatisticsError):
        subtree_layer(build(BST.params, BST.source, 2, seed=0), 2.0)


def test_aggregate_bst():
    n = 1000
    reps = bst_stats(n, range(100, 200))
    s = aggregate(reps, BST.constants, seed=7)
    assert s.R == 100 and s.n == n and s.seed == 7
    assert s.alpha_hat == 1.0
    assert s.se_N_over_n == 0.0
    expected_q = bst_path_length_mean(n) / n - 2 * math.log(n)
    assert abs(s.q_hat - expected_q) <= 4 * s.se_Psi_over_n
    assert s.r_hat == pytest.approx(s.q_hat)
    assert s.mean_D_n is None and s.ks_statistic is None


def test_aggregate_last_ball_depth():
    n = 500
    s = aggregate(bst_stats(n, range(200), BuildMode.TRACED), BST.constants)
    assert abs(s.mean_D_n - bst_last_ball_depth_mean(n)) <= 4 * s.se_D_n
    assert s.var_D_n > 0 and s.se_var_D_n > 0
    assert 0.0 <= s.ks_statistic <= 1.0
    assert set(s.var_D_k_over_ln_n) == set(depth_grid(n))


def test_aggregate_rejects_mixed_configurations():
    a = bst_stats(100, [1])
    b = bst_stats(200, [2])
    with pytest.raises(StatisticsError):
        aggregate(a + b, BST.constants)
    with pytest.raises(StatisticsError):
        aggregate(a, BST.constants)


def test_aggregate_subtree_ratio_only_when_complete():
    reps = bst_stats(3000, range(3))
    for st in reps[:2]:
        st.subtree_layer_sum = 10.0
    assert aggregate(reps, BST.constants).subtree_layer_ratio is None
    reps[2].subtree_layer_sum = 10.0
    ratio = aggregate(reps, BST.constants).subtree_layer_ratio
    assert ratio == pytest.approx(10.0 / (0.25 * 3000 / math.log(3000) ** 2))


def test_ks_normal():
    sample = np.random.default_rng(0).standard_normal(5000)
    assert ks_normal(sample) < 0.03
    assert ks_normal([0.0]) == pytest.approx(0.5)
    assert ks_normal(sample + 3) > 0.8


def test_depth_means_by_index():
    reps = bst_stats(300, range(30), BuildMode.TRACED)
    means = depth_means_by_index(reps, [1, 150, 300])
    assert set(means) == {1, 150, 300}
    with pytest.raises(StatisticsError):
        depth_means_by_index(reps, [301])


def test_ks_centred_on_mean_shift():
    n = 500
    reps = bst_stats(n, range(200), BuildMode.TRACED)
    s = aggregate(reps, BST.constants)
    assert s.mean_shift == pytest.approx(s.mean_D_n - 2 * math.log(n))
    assert abs(s.mean_shift - (bst_last_ball_depth_mean(n) - 2 * math.log(n))) <= 4 * s.se_D_n
    for st in reps:
        st.D_n += 5
    moved = aggregate(reps, BST.constants)
    assert moved.mean_shift == pytest.approx(s.mean_shift + 5)
    assert moved.ks_statistic == pytest.approx(s.ks_statistic)


def test_depth_means_nondecreasing_in_k():
    ks = [1, 150, 300]
    means = depth_means_by_index(bst_stats(300, range(60), BuildMode.TRACED), ks)
    for a, b in zip(ks, ks[1:]):
        (ma, sa), (mb, sb) = means[a], means[b]
        assert ma <= mb + 2 * math.hypot(sa, sb)


def test_concentration_matches_independent_resimulation():
    n, d = 2000, 3

    def mean_fraction(seeds):
        fr = [concentration_report(build(BST.params, BST.source, n, s, BuildMode.INSTRUMENTED), d, 0.4)[0]
              for s in seeds]
        return float(np.mean(fr)), float(np.std(fr, ddof=1) / math.sqrt(len(fr)))

    m1, se1 = mean_fraction(range(40))
    m2, se2 = mean_fraction(range(1000, 1040))
    assert abs(m1 - m2) <= 4 * math.hypot(se1, se2) + 1e-12
