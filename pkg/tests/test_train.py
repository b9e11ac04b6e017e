import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hgs.data import Dataset, gen_synthetic
from hgs.graph import MechGraph, Node, SuperGraph, augment, build_synthetic_graph, condense
from hgs.mnode import MnodeConfig, MnodeModel, node_component
from hgs.nn import ParamVector, finite_diff_check
from hgs.train import (AdamState, GridPoint, LossConfig, TrainConfig, TrainingError, adam_step, enp, expand_grid,
                       from_reparam, grid_search_cv, group_lambda, group_lasso_loss, group_penalty, kfold_indices,
                       loss, mse, optimal_edge_weight, penalty, reparameterize, train)
from hgs.train.reparam import groups, rest_index


def sg_of(nodes, edges):
    return SuperGraph.from_mech(MechGraph([Node(i, k) for i, k in nodes], edges))


def set_weights(model, weights):
    vals = model.params.values.copy()
    start, _ = model.canonical_weight_slice()
    for e, w in weights.items():
        vals[start + model.canon_index[model.share_map[e]]] = w
    return model.with_params(vals)


def hgs_graph():
    return augment(condense(build_synthetic_graph("refined")))


def teacher_data(seed, size, alignment="stamp"):
    return gen_synthetic(seed, size=size, alignment=alignment)


# --- loss ----------------------------------------------------------------------

def two_obs_model():
    g = sg_of([("s1", "observable"), ("s2", "observable"), ("x", "input")], {("x", "s1"), ("s1", "s2")})
    m = MnodeModel.create(g, MnodeConfig(encoder=False))
    m = m.with_params(np.zeros(len(m.params)))  # zero MLPs: predictions stay at the initial values
    return set_weights(m, {("x", "s1"): 2.0, ("s1", "s2"): 5.0})


def one_step(err):
    obs0 = np.array([[[1.0, -1.0]]])
    return Dataset(obs0, np.zeros((1, 0, 1)), np.zeros((1, 1, 1)), obs0 + np.array(err), ["s1", "s2"], ["x"])


def test_loss_zero_for_perfect_predictions():
    m = two_obs_model()
    assert loss(m, one_step([0.0, 0.0]), LossConfig()) == 0.0


def test_loss_error_plus_l1():
    m = two_obs_model()
    cfg = LossConfig(lambda1=0.1, exempt_edges={("s1", "s2")})
    assert loss(m, one_step([3.0, 4.0]), cfg) == pytest.approx(25.2, abs=1e-12)
    # without the exemption the second weight (5) is penalized as well
    assert loss(m, one_step([3.0, 4.0]), LossConfig(lambda1=0.1)) == pytest.approx(25.7, abs=1e-12)


def test_egl_penalty():
    g = sg_of([("v", "observable"), ("a", "input"), ("b", "input")], {("a", "v"), ("b", "v")})
    m = set_weights(MnodeModel.create(g, MnodeConfig(encoder=False)), {("a", "v"): 0.5, ("b", "v"): -0.3})
    assert penalty(m, LossConfig(lambda1=1.0, regularizer="egl")) == pytest.approx(0.64, abs=1e-12)


def test_egl_groups_by_destination():
    g = sg_of([("v", "observable"), ("u", "observable"), ("a", "input")], {("a", "v"), ("a", "u"), ("v", "u")})
    m = set_weights(MnodeModel.create(g, MnodeConfig(encoder=False)), {("a", "v"): 0.5, ("a", "u"): 0.2, ("v", "u"): 0.1})
    assert penalty(m, LossConfig(lambda1=2.0, regularizer="egl")) == pytest.approx(2 * (0.5 ** 2 + 0.3 ** 2))


def test_elastic_net_and_l2():
    g = sg_of([("v", "observable"), ("a", "input"), ("b", "input")], {("a", "v"), ("b", "v")})
    m = set_weights(MnodeModel.create(g, MnodeConfig(encoder=False)), {("a", "v"): 0.5, ("b", "v"): -0.3})
    cfg = LossConfig(regularizer="elastic-net", en_lambda1=0.1, en_lambda2=2.0)
    assert penalty(m, cfg) == pytest.approx(0.1 * 0.8 + 2.0 * 0.34)
    dec = m.params.values[m.decoder_mask()]
    assert penalty(m, LossConfig(lambda2=0.3, regularizer="none")) == pytest.approx(0.3 * np.sum(dec ** 2))


def test_l2_encoder_switch():
    m = MnodeModel.create(hgs_graph(), MnodeConfig(encoder=True))
    v = m.params.values
    base = penalty(m, LossConfig(lambda2=1.0))
    with_enc = penalty(m, LossConfig(lambda2=1.0, l2_encoder=True))
    assert with_enc == pytest.approx(base + np.sum(v[m.encoder_mask()] ** 2))


def test_shared_weight_penalized_once():
    g = sg_of([("s", "observable"), ("l", "latent"), ("x", "input")], {("x", "l"), ("l", "s"), ("s", "s")})
    m = MnodeModel.create(g, MnodeConfig(encoder=False))
    assert m.share_map[("l", "s")] == ("x", "l")
    m = set_weights(m, {("x", "l"): 3.0, ("s", "s"): -1.0})
    assert penalty(m, LossConfig(lambda1=1.0)) == pytest.approx(4.0)


def test_unknown_exempt_edge_and_bad_config():
    m = two_obs_model()
    with pytest.raises(ValueError):
        penalty(m, LossConfig(lambda1=1.0, exempt_edges={("q", "s1")}))
    with pytest.raises(ValueError):
        LossConfig(regularizer="ridge")
    with pytest.raises(ValueError):
        LossConfig(lambda1=-1.0)


def test_loss_config_roundtrip():
    cfg = LossConfig(lambda1=1e-6, lambda2=1e-7, exempt_edges={("a", "b")})
    assert LossConfig.from_dict(cfg.to_dict()) == cfg


def test_model_without_edge_weights():
    m = MnodeModel.create(hgs_graph(), MnodeConfig(encoder=False, edge_weights=False))
    s, e = m.canonical_weight_slice()
    assert s == e == len(m.params)
    assert set(m.edge_weights().values()) == {1.0}
    assert penalty(m, LossConfig(lambda1=5.0)) == 0.0
    ref = MnodeModel.create(hgs_graph(), MnodeConfig(encoder=False))
    ds = teacher_data(0, 3)
    # unit weights and identical MLP draws: same forecasts
    np.testing.assert_allclose(m.predict(ds), ref.predict(ds), rtol=0, atol=1e-12)


def test_full_loss_gradient_matches_finite_differences():
    cfg = MnodeConfig(hidden_units=4, delta_t=0.05, encoder=False)
    m = MnodeModel.create(hgs_graph(), cfg, seed=3)
    ds = teacher_data(1, 5).aligned(m)
    lc = LossConfig(lambda1=0.3, lambda2=0.2)
    res = finite_diff_check(lambda pv: loss(m, ds, lc, pv), m.params, n_coords=100, seed=0)
    assert np.all((res.rel_errors <= 1e-6) | (res.abs_errors <= 1e-10))


def test_l1_subgradient_zero_at_zero():
    from hgs.nn import grad
    g = sg_of([("v", "observable"), ("a", "input")], {("a", "v")})
    m = set_weights(MnodeModel.create(g, MnodeConfig(encoder=False)), {("a", "v"): 0.0})
    _, gr = grad(lambda pv: penalty(m, LossConfig(lambda1=1.0), pv), m.params)
    assert gr.values[m.canonical_weight_slice()[0]] == 0.0


# --- closed-form edge weights and the group penalty ------------------------------

def test_optimal_edge_weight_examples():
    assert optimal_edge_weight(0.0, 1.0, 1.0) == 0.0
    assert optimal_edge_weight(2.0, 1.0, 1.0) == pytest.approx(2.0, abs=1e-14)
    with pytest.raises(ValueError):
        optimal_edge_weight(1.0, 0.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-8, 1e-1), st.floats(1e-8, 1e-1))
def test_optimal_edge_weight_is_grid_minimizer(gn, l1, l2):
    w = optimal_edge_weight(gn, l1, l2)
    grid = np.linspace(w / 4, 4 * w, 4001)
    f = l1 * grid + l2 * gn ** 2 / grid ** 2
    best = grid[np.argmin(f)]
    assert abs(best - w) <= (grid[1] - grid[0])
    assert l1 * w + l2 * gn ** 2 / w ** 2 <= f.min() * (1 + 1e-12)


def test_group_lambda_value():
    # 3 * 2**(-2/3) * 1e-4 * 1e-7**(1/3)
    assert group_lambda(1e-6, 1e-7) == pytest.approx(8.772053214638603e-07, rel=1e-12)


def random_model(rng, shared=False):
    g = build_synthetic_graph("refined")
    cfg = MnodeConfig(hidden_units=int(rng.integers(2, 6)), hidden_layers=int(rng.integers(0, 3)),
                      delta_t=0.05, encoder=False, weight_sharing=shared)
    m = MnodeModel.create(SuperGraph.from_mech(g), cfg, seed=int(rng.integers(1 << 30)))
    vals = m.params.values.copy()
    s, e = m.canonical_weight_slice()
    vals[s:e] = rng.uniform(0.1, 3.0, e - s) * rng.choice([-1, 1], e - s)
    return m.with_params(vals)


def test_reparameterization_preserves_forecasts():
    rng = np.random.default_rng(0)
    m = random_model(rng)
    r = reparameterize(m)
    ds = teacher_data(2, 3)
    np.testing.assert_allclose(r.predict(ds), m.predict(ds), rtol=1e-12, atol=1e-12)
    assert set(r.edge_weights().values()) == {1.0}


@pytest.mark.parametrize("shared", [False, True])
def test_minimized_penalty_equals_group_penalty(shared):
    rng = np.random.default_rng(7 + shared)
    for _ in range(25):
        l1, l2 = 10 ** rng.uniform(-7, -1), 10 ** rng.uniform(-8, -1)
        r = reparameterize(random_model(rng, shared))
        w_form = from_reparam(r, l1, l2)
        eq3 = penalty(w_form, LossConfig(lambda1=l1, lambda2=l2))
        grp = group_penalty(r, l2, group_lambda(l1, l2))
        assert abs(eq3 - grp) <= 1e-10 * abs(grp)
        # forecasts are the same model
        ds = teacher_data(3, 2)
        np.testing.assert_allclose(w_form.predict(ds), r.predict(ds), rtol=1e-10, atol=1e-12)


def test_group_lasso_loss_matches_full_loss():
    rng = np.random.default_rng(1)
    r = reparameterize(random_model(rng))
    l1, l2 = 1e-3, 1e-2
    ds = teacher_data(4, 3)
    w_form = from_reparam(r, l1, l2)
    a = loss(w_form, ds, LossConfig(lambda1=l1, lambda2=l2))
    b = group_lasso_loss(r, ds, l2, group_lambda(l1, l2))
    assert abs(a - b) <= 1e-10 * abs(b)


def test_zero_groups_leave_only_l2():
    rng = np.random.default_rng(2)
    r = reparameterize(random_model(rng))
    vals = r.params.values.copy()
    for ix in groups(r).values():
        vals[ix] = 0.0
    r = r.with_params(vals)
    expect = 0.5 * np.sum(vals[rest_index(r)] ** 2)
    assert group_penalty(r, 0.5, 3.0) == pytest.approx(expect)


def test_group_lasso_requires_folded_model():
    m = random_model(np.random.default_rng(3))
    with pytest.raises(ValueError):
        group_lasso_loss(m, teacher_data(0, 1), 1e-3, 1e-3)


# --- Adam ------------------------------------------------------------------------

def scalar_adam(theta, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta = theta - lr * (m / (1 - b1 ** t)) / ((v / (1 - b2 ** t)) ** 0.5 + eps)
    return theta


def test_adam_zero_gradient():
    p = np.array([1.0, -2.0])
    p2, s = adam_step(p, np.zeros(2), AdamState.zeros(2), 0.1)
    assert np.array_equal(p2, p) and s.t == 1


def test_adam_first_step_is_signed_lr():
    g = np.array([3.0, -1e-3, 250.0])
    p2, _ = adam_step(np.zeros(3), g, AdamState.zeros(3), 1e-3)
    np.testing.assert_allclose(p2, -1e-3 * np.sign(g), rtol=1e-4)


def test_adam_matches_scalar_oracle():
    rng = np.random.default_rng(0)
    grads = rng.normal(size=(2, 4))
    p = rng.normal(size=4)
    s = AdamState.zeros(4)
    out = p
    for g in grads:
        out, s = adam_step(out, g, s, 0.01)
    for i in range(4):
        assert out[i] == pytest.approx(scalar_adam(p[i], grads[:, i], 0.01), rel=1e-14, abs=1e-15)


def test_adam_shape_mismatch():
    with pytest.raises(ValueError):
        adam_step(np.zeros(2), np.zeros(3), AdamState.zeros(2), 0.1)


# --- training loop ---------------------------------------------------------------

def small_model(seed=0, **kw):
    cfg = MnodeConfig(hidden_units=4, hidden_layers=1, delta_t=0.05, encoder=False, **kw)
    return MnodeModel.create(hgs_graph(), cfg, seed=seed)


def test_one_epoch_is_one_adam_step():
    from hgs.nn import grad
    m = small_model()
    ds = teacher_data(0, 8)
    tr, va = ds.subset(range(4)), ds.subset(range(4, 8))
    lc = LossConfig(lambda1=1e-3, lambda2=1e-3)
    res = train(m, tr, va, TrainConfig(epochs=1, learning_rate=1e-2), lc)
    _, g = grad(lambda pv: loss(m, tr, lc, pv), m.params)
    expect, _ = adam_step(m.params.values, g.values, AdamState.zeros(len(g)), 1e-2)
    np.testing.assert_allclose(res.model.params.values, expect, rtol=0, atol=1e-15)
    assert res.history.best_epoch == 1 and len(res.history.val_mse) == 1


def test_training_is_deterministic_and_selects_best_epoch():
    ds = teacher_data(1, 12)
    tr, va = ds.subset(range(8)), ds.subset(range(8, 12))
    runs = [train(small_model(4), tr, va, TrainConfig(epochs=40, learning_rate=5e-2), LossConfig(1e-4, 1e-4))
            for _ in range(2)]
    assert runs[0].history.to_dict() == runs[1].history.to_dict()
    assert np.array_equal(runs[0].model.params.values, runs[1].model.params.values)
    h = runs[0].history
    assert h.best_val_mse <= min(h.val_mse)
    assert mse(runs[0].model, va) == pytest.approx(h.best_val_mse, rel=1e-12)


def bayes_floor(seed, size):
    """MSE of the best forecaster under stamp alignment: it knows v_h but not the input driving the next step."""
    from hgs.data import synthetic_cases
    cases = synthetic_cases(seed, "true", "refined", size)
    v = np.concatenate([np.zeros((size, 1)), cases[:, :, 0]], axis=1)
    t = np.arange(1, 61)
    mu = 0.01 * np.exp(1 - t / 600)
    pred = v[:, :-1] + 0.05 * (4 * mu - 0.5 * (v[:, :-1] - 1))
    return float(np.mean((pred - v[:, 1:]) ** 2))


@pytest.mark.slow
def test_linear_teacher_reaches_noise_floor():
    m = MnodeModel.create(hgs_graph(), MnodeConfig(hidden_layers=0, delta_t=0.05, encoder=False), seed=0)
    ds = teacher_data(0, 100)
    tr, va = ds.subset(range(25, 100)), ds.subset(range(25))
    res = train(m, tr, va, TrainConfig(epochs=600, learning_rate=1e-2), LossConfig(1e-6, 1e-6))
    floor = bayes_floor(0, 100)
    assert 0.008 < floor < 0.012
    assert mse(res.model, tr) < 1.1 * floor


@pytest.mark.slow
def test_monotone_gating():
    ds = teacher_data(2, 40, alignment="generator")
    tr, va = ds.subset(range(10, 40)), ds.subset(range(10))
    totals = []
    for l1 in (1e-7, 1e-6, 1e-5):
        m = MnodeModel.create(hgs_graph(), MnodeConfig(hidden_layers=0, delta_t=0.05, encoder=False), seed=0)
        res = train(m, tr, va, TrainConfig(epochs=300, learning_rate=1e-2), LossConfig(l1, 1e-6))
        totals.append(sum(abs(w) for w in res.model.edge_weights().values()))
    assert totals[0] >= totals[1] >= totals[2]


def test_nonfinite_training_reports_epoch():
    g = sg_of([("s", "observable"), ("x", "input")], {("s", "s"), ("x", "s")})
    m = MnodeModel.create(g, MnodeConfig(hidden_layers=0, delta_t=1.0, encoder=False))
    vals = m.params.values.copy()
    s, _ = m.params.index_range((node_component("s"), "W0"))
    vals[s] = 50.0  # self-feedback gain 51 per step
    m = m.with_params(vals)
    ds = Dataset(np.ones((2, 1, 1)), np.zeros((2, 0, 1)), np.zeros((2, 300, 1)), np.ones((2, 300, 1)), ["s"], ["x"])
    with pytest.raises(TrainingError) as ei:
        train(m, ds.subset([0]), ds.subset([1]), TrainConfig(epochs=3), LossConfig())
    assert ei.value.epoch == 1


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(batch="mini")
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"epoch": 3})
    assert TrainConfig.from_dict(TrainConfig().to_dict()) == TrainConfig()


def test_enp_rule():
    assert enp(np.array([0.5, 1e-4, -0.01])) == 2
    assert enp(np.zeros(5)) == 0
    pv = ParamVector.from_arrays([(("a", "w"), np.array([1e-3, 2e-3]))])
    assert enp(pv) == 1
    with pytest.raises(ValueError):
        enp(pv, 0.0)


# --- cross-validation -----------------------------------------------------------

def test_kfold_indices():
    folds = kfold_indices(10, 4)
    assert [len(v) for _, v in folds] == [3, 3, 2, 2]
    assert folds[0][1].tolist() == [0, 1, 2]
    for tr, va in folds:
        assert sorted(np.concatenate([tr, va]).tolist()) == list(range(10))
        assert not set(tr) & set(va)
    perm = np.random.default_rng(2024).permutation(9)
    assert kfold_indices(9, 3, perm)[0][1].tolist() == perm[:3].tolist()
    with pytest.raises(ValueError):
        kfold_indices(3, 4)


def test_synthetic_grid_size():
    grid = expand_grid(LossConfig(), [1e-2, 1e-3], lambda1=[1e-6, 1e-7], lambda2=[1e-6, 1e-7, 1e-8])
    assert len(grid) == 12
    assert grid[0] == GridPoint(LossConfig(lambda1=1e-6, lambda2=1e-6), 1e-2)
    assert grid[1].learning_rate == 1e-3


def test_grid_of_one_point_and_empty_grid():
    ds = teacher_data(0, 6)
    pt = GridPoint(LossConfig(1e-4, 1e-4), 1e-2)
    res = grid_search_cv(lambda s: small_model(s), ds, TrainConfig(epochs=3, K=3), [pt])
    assert res.best == pt and res.scores.shape == (1, 3)
    with pytest.raises(ValueError):
        grid_search_cv(lambda s: small_model(s), ds, TrainConfig(epochs=3, K=3), [])


def test_final_model_is_first_fold_retrain():
    ds = teacher_data(3, 9)
    tc = TrainConfig(epochs=5, K=3, learning_rate=1e-2)
    pt = GridPoint(LossConfig(1e-4, 1e-4), 1e-2)
    res = grid_search_cv(lambda s: small_model(s), ds, tc, [pt])
    tr, va = kfold_indices(9, 3)[0]
    again = train(small_model(tc.seed), ds.subset(tr), ds.subset(va), tc, pt.loss)
    assert np.array_equal(res.model.params.values, again.model.params.values)


def test_rigged_grid_selects_unpenalized_point():
    # zero-noise linear data: a huge weight penalty forces the inputs out and must lose
    ds = teacher_data(5, 12, alignment="generator")
    grid = [GridPoint(LossConfig(lambda1=100.0), 5e-2), GridPoint(LossConfig(lambda1=0.0), 5e-2)]
    res = grid_search_cv(lambda s: small_model(s), ds, TrainConfig(epochs=200, K=3), grid)
    assert res.best_index == 1
    assert np.all(res.scores[1] < res.scores[0])


def test_threads_do_not_change_results(monkeypatch):
    ds = teacher_data(6, 8)
    grid = expand_grid(LossConfig(lambda2=1e-4), [1e-2, 1e-3], lambda1=[1e-3, 1e-4])
    tc = TrainConfig(epochs=4, K=2)
    a = grid_search_cv(lambda s: small_model(s), ds, tc, grid, workers=1)
    b = grid_search_cv(lambda s: small_model(s), ds, tc, grid, workers=3)
    assert np.array_equal(a.scores, b.scores) and a.best_index == b.best_index
    assert a.to_dict() == b.to_dict()
