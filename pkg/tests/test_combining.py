import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

import cfmimo as cf
from cfmimo.combining import (COND_LIMIT, KIND_LZF, KIND_MR, KIND_PMR,
                              SingularGram, build_combiners, build_lzf,
                              build_mr, build_pmr, build_projection)
from cfmimo.realization import draw_realization, trial_rng


def _one_ap(desk, m=0, trial=0):
    cfg, beta, plan, powers, stats = desk
    real = draw_realization(cfg, beta, stats, plan, powers,
                            trial_rng(cfg.seed, trial))
    return real.gbar[m], stats.theta[m], stats, plan, real, cfg


def test_zero_forcing_nulls_and_own_gain(desk):
    # v_j^H gbar_i = 0 for the other strong pilots and
    # v_i^H ghat_t = sqrt((A - L_S) gamma_t), both per realization
    cfg, beta, plan, powers, stats = desk
    A = cfg.antennas_per_ap
    strong = np.array([0, 2, 3])
    for trial in range(5):
        gbar_m, theta_m, _, _, real, _ = _one_ap(desk, m=1, trial=trial)
        for i in strong:
            v = build_lzf(gbar_m, strong, theta_m, i)
            for j in strong:
                prod = np.vdot(v, gbar_m[:, j])
                if j == i:
                    want = np.sqrt((A - len(strong)) * theta_m[i])
                    assert_allclose(prod, want, rtol=1e-9)
                else:
                    assert abs(prod) < 1e-9 * np.sqrt(theta_m[i] * theta_m[j])
        # through the estimate of a UE on pilot i the gain picks up c
        t = int(np.flatnonzero(plan.pilot_of_ue == strong[0])[0])
        v = build_lzf(gbar_m, strong, theta_m, strong[0])
        got = np.vdot(v, real.ghat[1, t])
        assert_allclose(got, np.sqrt((A - len(strong)) * stats.gamma[1, t]),
                        rtol=1e-9)


def test_zero_forcing_budget_and_membership_errors(desk):
    gbar_m, theta_m, _, _, _, cfg = _one_ap(desk)
    with pytest.raises(ValueError):
        build_lzf(gbar_m, np.arange(cfg.antennas_per_ap), theta_m, 0)
    with pytest.raises(ValueError):
        build_lzf(gbar_m, np.array([0, 1]), theta_m, 3)


def test_projector_is_hermitian_idempotent_annihilator(desk):
    gbar_m, theta_m, _, _, _, _ = _one_ap(desk, m=2)
    strong = np.array([1, 4])
    B = build_projection(gbar_m, strong)
    assert_allclose(B, B.conj().T, atol=1e-12)
    assert_allclose(B @ B, B, atol=1e-10)
    for i in strong:
        assert np.linalg.norm(B @ gbar_m[:, i]) < 1e-8 * np.linalg.norm(gbar_m[:, i])


def test_empty_projection_is_identity(desk):
    gbar_m, _, _, _, _, cfg = _one_ap(desk)
    assert_array_equal(build_projection(gbar_m, np.array([], dtype=int)),
                       np.eye(cfg.antennas_per_ap))


def test_projected_mr_reduces_to_mr_without_strong_pilots(desk):
    gbar_m, theta_m, _, _, _, cfg = _one_ap(desk)
    A = cfg.antennas_per_ap
    eye = np.eye(A, dtype=np.complex128)
    for i in range(3):
        assert_allclose(build_pmr(gbar_m, eye, 0, theta_m, i),
                        build_mr(gbar_m, theta_m, i), rtol=1e-12)


def test_projected_mr_is_orthogonal_to_strong_pilots(desk):
    gbar_m, theta_m, _, _, _, _ = _one_ap(desk, m=3)
    strong = np.array([0, 3])
    B = build_projection(gbar_m, strong)
    v = build_pmr(gbar_m, B, len(strong), theta_m, 2)
    for i in strong:
        assert abs(np.vdot(v, gbar_m[:, i])) < 1e-8


def test_mr_norm_is_deterministic_given_observation(desk):
    gbar_m, theta_m, _, _, _, cfg = _one_ap(desk)
    A = cfg.antennas_per_ap
    v = build_mr(gbar_m, theta_m, 2)
    assert_allclose(np.vdot(v, v).real,
                    np.linalg.norm(gbar_m[:, 2]) ** 2 / (A * theta_m[2]),
                    rtol=1e-12)


def test_build_combiners_kinds_follow_grouping(desk, mixed_grouping):
    cfg, beta, plan, powers, stats = desk
    real = draw_realization(cfg, beta, stats, plan, powers, trial_rng(0, 0))

    cs = build_combiners(real.gbar, stats.theta, mixed_grouping)
    assert cs.vectors.shape == (cfg.num_aps, plan.num_pilots, cfg.antennas_per_ap)
    strong = mixed_grouping.delta == 1.0
    assert np.all(cs.kind[strong] == KIND_LZF)
    assert np.all(cs.kind[~strong] == KIND_MR)  # gpfzf keeps plain MR when weak

    proj = cf.GroupingMatrix.from_delta(mixed_grouping.delta, "gpwpfzf")
    cs2 = build_combiners(real.gbar, stats.theta, proj)
    weak = ~strong
    has_strong = mixed_grouping.strong_count > 0
    assert np.all(cs2.kind[weak & has_strong[:, None]] == KIND_PMR)
    assert np.all(cs2.kind[weak & ~has_strong[:, None]] == KIND_MR)


def test_per_ue_view_picks_serving_pilot(desk, mixed_grouping):
    cfg, beta, plan, powers, stats = desk
    real = draw_realization(cfg, beta, stats, plan, powers, trial_rng(0, 1))
    cs = build_combiners(real.gbar, stats.theta, mixed_grouping)
    vue = cs.per_ue(plan)
    for t in (0, 5, 9):
        assert_array_equal(vue[:, t, :], cs.vectors[:, plan.pilot_of_ue[t], :])


def test_singular_gram_raises():
    # duplicate columns make the strong Gram exactly singular
    rng = np.random.default_rng(0)
    col = (rng.standard_normal(4) + 1j * rng.standard_normal(4)) / np.sqrt(2)
    gbar_m = np.stack([col, col, col * 2], axis=1)
    theta_m = np.ones(3)
    with pytest.raises(SingularGram):
        build_lzf(gbar_m, np.array([0, 1]), theta_m, 0)
    with pytest.raises(SingularGram):
        build_projection(gbar_m, np.array([0, 1]))


def test_cond_limit_is_strict(monkeypatch, desk):
    import cfmimo.combining as cb
    gbar_m, theta_m, _, _, _, _ = _one_ap(desk)
    monkeypatch.setattr(cb, "COND_LIMIT", 0.5)
    with pytest.raises(SingularGram):
        build_lzf(gbar_m, np.array([0, 1]), theta_m, 0)
    assert COND_LIMIT == 1e12
