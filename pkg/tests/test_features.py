import json
import math
from pathlib import Path

import numpy as np
import pytest

from excon import catch22
from excon.data import LabeledDataset, MvtsInstance, znormalize_columns
from excon.errors import ConfigError
from excon.features import (
    BASIC,
    CATCH22,
    SeriesTooShortError,
    extract_channel_features,
    extract_dataset_features,
    extract_instance_features,
    get_bank,
)

REFERENCE = json.loads((Path(__file__).parent / "data" / "catch22_reference.json").read_text())
# the FFT-based autocorrelation drifts from the reference's own FFT by a few ulps
REF_TOL = 1e-9


def ar1(n, phi, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    y = np.zeros(n)
    y[0] = e[0]
    for t in range(1, n):
        y[t] = phi * y[t - 1] + e[t]
    return y


def direct_acf(y):
    """Biased autocorrelation by explicit double loop."""
    n = len(y)
    m = sum(y) / n
    x = [v - m for v in y]
    den = sum(v * v for v in x)
    return [sum(x[t] * x[t + k] for t in range(n - k)) / den for k in range(n)]


def brute_f1ecac(y):
    ac = direct_acf(list(y))
    th = 1 / math.e
    for i in range(len(y) - 2):
        if ac[i + 1] < th:
            return i + (th - ac[i]) / (ac[i + 1] - ac[i])
    return float(len(y))


def test_names_are_the_canonical_order():
    assert CATCH22.feature_names == tuple(next(iter(REFERENCE.values()))["names"])
    assert len(CATCH22.feature_names) == 22


@pytest.mark.parametrize("name", sorted(REFERENCE))
def test_matches_frozen_reference_values(name):
    case = REFERENCE[name]
    got = catch22.catch22_all(np.array(case["series"]))
    for j, (g, ref) in enumerate(zip(got, case["values"])):
        assert abs(g - ref) <= REF_TOL * max(1.0, abs(ref)), (CATCH22.feature_names[j], g, ref)


def test_matches_live_reference_on_random_series():
    pycatch22 = pytest.importorskip("pycatch22")
    rng = np.random.default_rng(77)
    for trial in range(40):
        n = int(rng.integers(12, 260))
        y = ar1(n, rng.uniform(-0.9, 0.95), trial) + rng.uniform(0, 2) * np.sin(np.arange(n) / rng.uniform(1, 9))
        ref = pycatch22.catch22_all(y.tolist())["values"]
        got = catch22.catch22_all(y)
        for j in range(22):
            if math.isnan(ref[j]):
                assert math.isnan(got[j])
            else:
                assert abs(got[j] - ref[j]) <= REF_TOL * max(1.0, abs(ref[j])), (trial, CATCH22.feature_names[j])


def test_f1ecac_matches_direct_acf_scan():
    for seed in range(50):
        y = ar1(64, 0.8, seed)
        expected = brute_f1ecac((y - y.mean()) / y.std(ddof=1))
        got = extract_channel_features(y)[CATCH22.feature_names.index("CO_f1ecac")]
        assert abs(got - expected) < 1e-9


def test_autocorr_matches_direct_sum():
    y = ar1(37, 0.5, 3)
    np.testing.assert_allclose(catch22.autocorr(y), direct_acf(list(y)), atol=1e-12)


def test_constant_series_gives_zeros():
    assert np.array_equal(extract_channel_features(np.full(30, 3.0)), np.zeros(22))


def test_output_length_and_finiteness():
    rng = np.random.default_rng(5)
    for n in (2, 3, 5, 9, 64, 300):
        out = extract_channel_features(rng.normal(size=n))
        assert out.shape == (22,) and np.all(np.isfinite(out))
    # a spike-heavy series exercises the sanitizer
    spiky = np.zeros(50)
    spiky[7] = 1.0
    assert np.all(np.isfinite(extract_channel_features(spiky)))


def test_too_short_series():
    with pytest.raises(SeriesTooShortError):
        extract_channel_features(np.array([1.0]))


def test_layout_is_channel_major():
    rng = np.random.default_rng(6)
    X = znormalize_columns(rng.normal(size=(40, 3)).cumsum(axis=0))
    vec = extract_instance_features(MvtsInstance("a", X, "NF")).values
    assert vec.size == 66
    for n in range(3):
        assert np.array_equal(vec[22 * n : 22 * n + 22], extract_channel_features(X[:, n]))
    perm = [2, 0, 1]
    pv = extract_instance_features(MvtsInstance("a", X[:, perm], "NF")).values
    for new, old in enumerate(perm):
        assert np.array_equal(pv[22 * new : 22 * new + 22], vec[22 * old : 22 * old + 22])


def test_single_channel_equals_channel_features():
    y = ar1(30, 0.3, 9)
    assert np.array_equal(extract_instance_features(MvtsInstance("a", y[:, None], "NF")).values,
                          extract_channel_features(y))


def test_24_channels_give_528():
    X = np.random.default_rng(1).normal(size=(60, 24))
    assert extract_instance_features(MvtsInstance("a", X, "F")).values.size == 528


def test_normalized_affine_copies_give_identical_vectors():
    y = ar1(50, 0.6, 4)
    a = extract_channel_features(znormalize_columns(y[:, None])[:, 0])
    b = extract_channel_features(znormalize_columns((3.0 + 7.5 * y)[:, None])[:, 0])
    np.testing.assert_allclose(a, b, atol=1e-9)


def _dataset(m=12):
    rng = np.random.default_rng(8)
    return LabeledDataset(tuple(MvtsInstance(f"i{i}", rng.normal(size=(32, 2)), "F" if i % 3 else "NF")
                                for i in range(m)))


def test_dataset_extraction_order_and_determinism():
    data = _dataset()
    a = extract_dataset_features(data, threads=1)
    b = extract_dataset_features(data, threads=1)
    assert [f.id for f in a] == data.ids
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))


def test_parallel_equals_sequential():
    data = _dataset(20)
    seq = extract_dataset_features(data, threads=1)
    par = extract_dataset_features(data, threads=4)
    assert [f.id for f in seq] == [f.id for f in par]
    assert all(np.array_equal(x.values, y.values) for x, y in zip(seq, par))


def test_thread_env_var(monkeypatch):
    from excon.features import thread_count

    monkeypatch.setenv("EXCON_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("EXCON_THREADS", "many")
    with pytest.raises(ConfigError):
        thread_count()


def test_bank_lookup_and_basic_bank():
    assert get_bank("c22") is CATCH22
    with pytest.raises(ConfigError):
        get_bank("nope")
    y = np.array([1.0, 3.0, 2.0, 6.0])
    out = dict(zip(BASIC.feature_names, extract_channel_features(y, BASIC)))
    assert out["mean"] == 3.0 and out["min"] == 1.0 and out["max"] == 6.0
    assert out["mean_abs_diff"] == (2 + 1 + 4) / 3
    assert out["first"] == 1.0 and out["last"] == 6.0
