import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hgs.data import (Dataset, EventStream, Standardizer, carb_integral, carb_rate, discretize, gen_synthetic,
                      insulin_integral, insulin_rate, merge_bolus, series_to_dataset, synthetic_cases, uva_cohort,
                      window_mean)
from hgs.data.events import bin_averages, cgm_grid


# --- synthetic generator -----------------------------------------------------------

def reference_script(seed, exp=1, train_size=100, redundant=3):
    """Independent transcription of the published generator (true regime, refined graph)."""
    rng = np.random.default_rng(seed=seed)
    n = 60
    t = np.linspace(1, n, n).reshape(n, 1)
    data = []
    for _ in range(train_size):
        x = [(i + 1) / 100 * np.exp(1 - t / n / 10 / (i + 1)) + rng.normal(0, 0.5, (n, 1)) for i in range(1)]
        for _ in range(redundant):
            x.append(rng.normal(0, 0.5, (n, 1)))
        x = np.concatenate(x, axis=1)
        dt = 5e-2
        v = [0]
        for i in range(n):
            if exp == 1:
                v.append(v[-1] + dt * (4 * x[i, 0] - 0.5 * (v[-1] - 1)))
            else:
                v.append(v[-1] + dt * (4 * x[i, 0] - 0.4 * x[i, 1] + 0.04 * x[i, 2] - 0.004 * x[i, 3]
                                       - 0.5 * (v[-1] - 1)))
        data.append(np.concatenate([np.reshape(v[1:], (n, 1)), x], axis=-1))
    cases = np.array(data)
    noise = rng.standard_normal(size=cases.shape, dtype="float64")
    return np.concatenate([cases, noise[:, :, :1]], axis=-1)


@pytest.mark.parametrize("regime,exp", [("true", 1), ("quasi", 2)])
def test_generator_matches_script_bit_for_bit(regime, exp):
    got = synthetic_cases(7, regime, "refined", size=5)
    assert np.array_equal(got, reference_script(7, exp, 5))


def test_generator_shapes():
    assert synthetic_cases(0, "true", "refined", 4).shape == (4, 60, 2 + 3 + 1)
    assert synthetic_cases(0, "quasi", "comprehensive", 2).shape == (2, 60, 2 + 6 + 1)
    ds = gen_synthetic(0, "quasi", "comprehensive", size=2)
    assert ds.input_names == ["x1", "x2", "x3", "x4", "x5", "x6", "x7", "noise"]
    assert (ds.p, ds.q) == (0, 60)
    with pytest.raises(ValueError):
        synthetic_cases(0, "mild", "refined")
    with pytest.raises(ValueError):
        synthetic_cases(0, "true", "refined", size=0)


def test_zero_noise_solves_recurrence():
    cases = synthetic_cases(3, "true", "refined", size=2, noise_scale=0.0)
    x1 = np.exp(1 - np.arange(1, 61) / 600) / 100
    v = [0.0]
    for k in range(60):
        v.append(v[-1] + 0.05 * (4 * x1[k] - 0.5 * (v[-1] - 1)))
    for c in cases:
        np.testing.assert_allclose(c[:, 1], x1, rtol=1e-15, atol=0)
        np.testing.assert_allclose(c[:, 0], v[1:], rtol=1e-15, atol=1e-15)


def test_quasi_coefficients_follow_powers_of_ten():
    from hgs.data.synthetic import QUASI_COEFS
    for kind, coefs in QUASI_COEFS.items():
        np.testing.assert_allclose(np.abs(coefs), [4 / 10 ** j for j in range(1, len(coefs) + 1)])


def test_alignments():
    cases = synthetic_cases(1, "true", "refined", size=3)
    gen = gen_synthetic(1, size=3, alignment="generator")
    stamp = gen_synthetic(1, size=3)
    np.testing.assert_array_equal(gen.future_inputs, cases[:, :, 1:])
    np.testing.assert_array_equal(stamp.future_inputs[:, 1:], cases[:, :-1, 1:])
    assert np.all(stamp.future_inputs[:, 0] == 0)
    np.testing.assert_array_equal(stamp.future_obs, gen.future_obs)
    with pytest.raises(ValueError):
        gen_synthetic(1, size=1, alignment="lead")


# --- dataset container ----------------------------------------------------------------

def test_dataset_roundtrip_and_subset():
    ds = gen_synthetic(2, size=4)
    back = Dataset.loads(ds.dumps())
    for k in ("past_obs", "past_inputs", "future_inputs", "future_obs"):
        assert np.array_equal(getattr(back, k), getattr(ds, k))
    assert back.meta == ds.meta and back.input_names == ds.input_names
    sub = ds.subset([3, 1])
    assert np.array_equal(sub.future_obs[0], ds.future_obs[3])
    both = Dataset.concat([ds.subset([0]), ds.subset([1, 2])])
    assert np.array_equal(both.future_inputs, ds.future_inputs[:3])


def test_dataset_errors():
    with pytest.raises(ValueError):
        Dataset.loads("")
    with pytest.raises(ValueError):
        Dataset.loads('{"format": "other"}\n')
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 1, 1)), np.zeros((2, 0, 1)), np.zeros((2, 3, 2)), np.zeros((2, 3, 1)), ["a"], ["x"])


def test_standardizer_roundtrip():
    ds = gen_synthetic(0, size=5)
    sc = Standardizer.fit(ds)
    z = sc.transform(ds)
    flat = np.concatenate([z.past_obs.reshape(-1), z.future_obs.reshape(-1)])
    assert abs(flat.mean()) < 1e-12
    np.testing.assert_allclose(sc.inverse_obs(z.future_obs), ds.future_obs, atol=1e-12)
    assert Standardizer.from_dict(sc.to_dict()).to_dict() == sc.to_dict()


# --- bolus merge ---------------------------------------------------------------------

def test_merge_bolus_examples():
    assert merge_bolus([(0.0, 3.0), (1.0, 1.5)]) == [(0.0, 4.5)]
    assert merge_bolus([(0.0, 3.0), (2.0, 1.5)]) == [(0.0, 3.0), (2.0, 1.5)]  # window [0, 2) is half-open
    # the merged dose lengthens the window: 3 U + 1.5 U covers [0, 3), which swallows t = 2.5
    assert merge_bolus([(0.0, 3.0), (1.0, 1.5), (2.5, 1.0)]) == [(0.0, 5.5)]
    assert merge_bolus([]) == []
    with pytest.raises(ValueError):
        merge_bolus([(0.0, -1.0)])
    with pytest.raises(ValueError):
        merge_bolus([(5.0, 1.0), (0.0, 1.0)])


doses = st.lists(st.tuples(st.floats(0, 300), st.floats(0, 10)), max_size=12)


@settings(max_examples=200, deadline=None)
@given(doses)
def test_merge_bolus_conserves_and_separates(events):
    events = sorted(events)
    merged = merge_bolus(events)
    assert sum(b for _, b in merged) == pytest.approx(sum(b for _, b in events), abs=1e-9)
    for (t0, b0), (t1, _) in zip(merged, merged[1:]):
        assert t1 >= t0 + b0 / 1.5


# --- rate functions and bin averages ------------------------------------------------

def test_insulin_rate_examples():
    assert insulin_rate([(0.0, 3.0)], [], 10.0) == pytest.approx(0.05)
    assert insulin_rate([(0.0, 3.0)], [], -1.0) == 0.0
    assert insulin_rate([], [], 5.0) == 0.0
    assert insulin_rate([(0.0, 1.2), (30.0, 0.6)], [], 30.0) == pytest.approx(0.01)
    assert insulin_integral([], [(0.0, 3.0)], 0.0, 5.0) == pytest.approx(3.0)
    assert insulin_rate([], [(0.0, 3.0)], 1.99) == 1.5 and insulin_rate([], [(0.0, 3.0)], 2.0) == 0.0


def test_carb_examples():
    assert carb_integral([(0.0, 45.0)], -10, 10) == pytest.approx(45000.0)  # active exactly one minute
    assert carb_rate([(0.0, 45.0)], 1.0) == 45000.0  # closed window
    assert carb_rate([(0.0, 45.0)], 1.01) == 0.0
    assert carb_rate([(0.0, 90.0), (1.0, 45.0)], 1.5) == 90000.0
    assert carb_rate([], 3.0) == 0.0
    with pytest.raises(ValueError):
        carb_integral([(0.0, 0.0)], 0, 1)


def hand_bins():
    """Fixture with hand-integrated 5-minute averages on stamps 0, 5, 10, 15."""
    basal = [(-10.0, 1.2), (7.0, 0.6)]  # 0.02 U/min, then 0.01 U/min from t = 7
    bolus = [(2.0, 3.0), (3.0, 1.5)]  # merge to 4.5 U over [2, 5)
    carbs = [(11.0, 90.0)]  # 45000 mg/min on [11, 13]
    # bin [0,5]: basal 5*0.02 = 0.1, bolus 4.5 -> 4.6 / 5
    # bin [5,10]: basal 2*0.02 + 3*0.01 = 0.07 -> 0.014
    # bin [10,15]: basal 0.05 -> 0.01; carbs 2 min * 45000 = 90000 mg -> 18000
    return basal, bolus, carbs, [0.92, 0.014, 0.01, 0.01], [0.0, 0.0, 18000.0, 0.0]


def test_bin_averages_match_hand_integration():
    basal, bolus, carbs, ins_expect, carb_expect = hand_bins()
    grid = np.array([0.0, 5.0, 10.0, 15.0])
    ins = bin_averages(lambda a, b: insulin_integral(basal, bolus, a, b), grid)
    car = bin_averages(lambda a, b: carb_integral(carbs, a, b), grid)
    np.testing.assert_allclose(ins, ins_expect, rtol=0, atol=1e-15)
    np.testing.assert_allclose(car, carb_expect, rtol=0, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 200), st.floats(0.1, 8)), max_size=6),
       st.lists(st.tuples(st.floats(0, 200), st.floats(1, 120)), max_size=4),
       st.lists(st.tuples(st.floats(-50, 200), st.floats(0, 3)), min_size=1, max_size=4))
def test_bin_averages_conserve_totals(bolus, carbs, basal):
    bolus, carbs, basal = sorted(bolus), sorted(carbs), sorted(basal)
    grid = 5.0 * np.arange(120) - 50.0  # [-50, 550] covers every window
    ins = bin_averages(lambda a, b: insulin_integral(basal, bolus, a, b), grid)
    car = bin_averages(lambda a, b: carb_integral(carbs, a, b), grid)
    assert np.sum(ins) * 5 == pytest.approx(insulin_integral(basal, bolus, -50.0, 550.0), abs=1e-9)
    assert np.sum(ins) * 5 - sum(a / 60 * 0 for _, a in basal) >= sum(b for _, b in bolus) - 1e-9
    assert np.sum(car) * 5 == pytest.approx(1000.0 * sum(m for _, m in carbs), rel=1e-12, abs=1e-9)


def test_window_mean():
    grid = np.array([0.0, 5.0, 20.0])
    v, flags = window_mean([(0.0, 60.0), (5.0, 80.0), (7.0, 100.0)], grid)
    assert v[0] == pytest.approx(70.0)  # both endpoints inclusive
    assert v[1] == pytest.approx(90.0)
    assert v[2] == 100.0 and flags.tolist() == [False, False, True]
    v, flags = window_mean([(t, 5.0) for t in range(0, 30, 3)], grid)
    assert np.all(v == 5.0)
    v, flags = window_mean([], grid)
    assert np.all(v == 0) and np.all(flags)


# --- discretization ---------------------------------------------------------------

def stream_fixture(gap=False):
    basal, bolus, carbs, *_ = hand_bins()
    cgm = [(5.0 * i, 100.0 + i) for i in range(54)]
    if gap:
        del cgm[20]
    hr = [(float(t), 70.0 + (t % 2)) for t in range(0, 280)]
    return EventStream(basal=basal, bolus=bolus, carbs=carbs, heart_rate=hr, steps=[(0.0, 3.0)], cgm=cgm)


def test_discretize_shapes_and_values():
    basal, bolus, carbs, ins_expect, carb_expect = hand_bins()
    d = discretize(stream_fixture())
    assert d.series.shape == (54, 5)
    np.testing.assert_allclose(d.series[:4, 1], ins_expect, atol=1e-15)
    np.testing.assert_allclose(d.series[:4, 2], carb_expect, atol=1e-9)
    assert d.series[0, 3] == pytest.approx(np.mean([70, 71, 70, 71, 70, 71]))
    assert d.series[0, 4] == 3.0 and not d.vitals_filled[0, 1] and d.vitals_filled[1, 1]
    ds = d.to_dataset()
    assert (ds.p, ds.q) == (41, 12)
    assert ds.past_obs[0, -1, 0] == 141.0 and ds.future_obs[0, 0, 0] == 142.0
    np.testing.assert_array_equal(ds.future_inputs[0, 0], d.series[41, 1:])


def test_discretize_rejects_cgm_gap():
    with pytest.raises(ValueError):
        discretize(stream_fixture(gap=True))
    with pytest.raises(ValueError):
        cgm_grid([(0.0, 100.0)])


def test_all_zero_events_leave_only_glucose():
    cgm = [(5.0 * i, 90.0) for i in range(54)]
    d = discretize(EventStream(cgm=cgm))
    assert np.all(d.series[:, 1:] == 0) and np.all(d.series[:, 0] == 90.0)


def test_csv_ingestion():
    rows = ["stream,time,value"]
    rows += [f"cgm,2024-01-01T10:{5 * i // 60 + 0:02d}:00,100" for i in range(0)]
    base = np.datetime64("2024-01-01T08:00:00")
    for i in range(54):
        rows.append(f"cgm,{(base + np.timedelta64(5 * i, 'm')).astype(str)},{100 + i}")
    rows.append(f"bolus,{(base + np.timedelta64(2, 'm')).astype(str)},3")
    rows.append(f"carbs,{(base + np.timedelta64(11, 'm')).astype(str)},90")
    stream = EventStream.from_csv("\n".join(rows))
    assert stream.cgm[0] == (0.0, 100.0) and stream.bolus == [(2.0, 3.0)]
    d = discretize(stream)
    assert d.series[0, 1] == pytest.approx(3.0 / 5)
    with pytest.raises(ValueError):
        EventStream.from_csv("glucagon,2024-01-01T08:00:00,1")
    with pytest.raises(ValueError):
        EventStream.from_csv("bolus,2024-01-01T08:00:00,1")


def test_series_windowing():
    series = np.arange(54 * 5, dtype=float).reshape(1, 54, 5)
    ds = series_to_dataset(series)
    assert ds.past_obs.shape == (1, 42, 1) and ds.past_inputs.shape == (1, 41, 4)
    assert ds.future_inputs.shape == (1, 12, 4) and ds.future_obs.shape == (1, 12, 1)
    with pytest.raises(ValueError):
        series_to_dataset(np.zeros((1, 54, 3)))


# --- simulated cohort -----------------------------------------------------------------

def test_uva_steady_state_is_stationary():
    from hgs.data.uva_sim import PARAMS, rhs, steady_state
    s, d = steady_state(1.0)
    np.testing.assert_allclose(rhs(s, 1.0 / 60 * 6000 / PARAMS["BW"], 0.0, 0.0, PARAMS, d), 0.0, atol=1e-10)


def test_uva_cohort_is_plausible_and_deterministic():
    a = uva_cohort(seed=1, size=3)
    b = uva_cohort(seed=1, size=3)
    assert np.array_equal(a.future_obs, b.future_obs)
    assert a.input_names == ["insulin", "carbs", "heart_rate", "steps", "glucagon"]
    g = np.concatenate([a.past_obs.ravel(), a.future_obs.ravel()])
    assert 40 < g.min() and g.max() < 400
    assert np.all(np.isfinite(a.past_inputs))
