import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from excon.data import (
    FLARE_SCHEME,
    LabeledDataset,
    LabelScheme,
    MvtsInstance,
    filter_label_categories,
    impute_missing,
    znormalize_columns,
    znormalize_instance,
)
from excon.errors import (
    EmptyDatasetError,
    InvalidInputError,
    LabelingError,
    ShapeMismatchError,
    UnimputableError,
)

TOL = 1e-9
NAN = math.nan


def inst(values, label="NF", id="a", category=None):
    return MvtsInstance(id, np.asarray(values, dtype=float), label, category)


def test_znormalize_hand_example():
    out = znormalize_instance(inst([[1.0], [2.0], [3.0]])).values[:, 0]
    s = math.sqrt(2.0 / 3.0)
    np.testing.assert_allclose(out, [-1 / s, 0.0, 1 / s], atol=TOL)
    assert abs(out[0] + 1.224744871391589) < 1e-12


def test_znormalize_constant_channel_is_zero():
    out = znormalize_instance(inst([[5.0], [5.0], [5.0], [5.0]])).values
    assert np.array_equal(out, np.zeros((4, 1)))


def test_znormalize_already_standard():
    out = znormalize_instance(inst([[-1.0], [1.0]])).values[:, 0]
    np.testing.assert_allclose(out, [-1.0, 1.0], atol=TOL)


def test_znormalize_rejects_non_finite_with_location():
    with pytest.raises(InvalidInputError, match=r"'x'.*channel 1.*timestamp 2"):
        znormalize_instance(inst([[1, 1], [2, 2], [3, np.inf]], id="x"))


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (12, 3), elements=finite))
def test_znormalize_moments_and_idempotence(values):
    once = znormalize_columns(values)
    twice = znormalize_columns(once)
    np.testing.assert_allclose(twice, once, atol=TOL)
    for n in range(3):
        if np.any(once[:, n] != 0):
            assert abs(once[:, n].mean()) < TOL
            assert abs(once[:, n].std() - 1.0) < TOL


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, (10, 2), elements=st.floats(-100, 100)),
    st.floats(-50, 50),
    st.floats(0.1, 20),
)
def test_znormalize_affine_invariance(values, a, b):
    if np.any(np.ptp(values, axis=0) < 1e-3):
        return
    np.testing.assert_allclose(znormalize_columns(a + b * values), znormalize_columns(values), atol=1e-8)


def test_impute_complete_instance_unchanged():
    x = inst([[1.0, 2.0], [3.0, 4.0]])
    assert impute_missing(x, 3) == x


def test_impute_correlated_donor():
    # B = 2A exactly, so the gap takes the value implied by A at t=2.
    x = inst([[1, 2], [2, 4], [3, NAN], [4, 8]])
    out = impute_missing(x, k=1).values
    assert abs(out[2, 1] - 6.0) < 1e-12


def test_impute_single_channel_interpolates():
    out = impute_missing(inst([[1.0], [NAN], [3.0]]), 1).values[:, 0]
    assert np.array_equal(out, [1.0, 2.0, 3.0])


def test_impute_boundary_gap_takes_nearest():
    out = impute_missing(inst([[NAN], [NAN], [3.0], [5.0], [NAN]]), 1).values[:, 0]
    assert np.array_equal(out, [3.0, 3.0, 3.0, 5.0, 5.0])


def test_impute_negative_correlation_flips_sign():
    # B = 10 - A; the donor contributes with its sign reversed.
    x = inst([[1, 9], [2, 8], [3, NAN], [4, 6]])
    assert abs(impute_missing(x, 1).values[2, 1] - 7.0) < 1e-12


def test_impute_all_missing_raises():
    with pytest.raises(UnimputableError):
        impute_missing(inst([[NAN, NAN], [NAN, NAN]]), 1)


def test_impute_fully_missing_channel_raises():
    with pytest.raises(UnimputableError, match="channel 1"):
        impute_missing(inst([[1, NAN], [2, NAN], [3, NAN]]), 1)


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, (15, 3), elements=st.floats(-10, 10)),
    arrays(bool, (15, 3), elements=st.booleans()),
    st.integers(1, 3),
)
def test_impute_keeps_observed_entries(values, holes, k):
    holes[0] = False  # every channel keeps at least one observation
    x = values.copy()
    x[holes] = np.nan
    out = impute_missing(inst(x), k).values
    assert np.all(np.isfinite(out))
    assert np.array_equal(out[~holes], values[~holes])


def _cat_dataset():
    cats = ["FQ", "FQ", "B", "FQ", "M", "B"]
    return LabeledDataset(tuple(inst([[float(i)]], FLARE_SCHEME.label_for(c), f"i{i}", c) for i, c in enumerate(cats)))


def test_filter_keeps_matching_categories_in_order():
    out = filter_label_categories(_cat_dataset(), {"FQ", "M", "X"})
    assert out.ids == ["i0", "i1", "i3", "i4"]
    assert out.classes == ("F", "NF")


def test_filter_identity_when_all_kept():
    data = _cat_dataset()
    assert filter_label_categories(data, {"FQ", "B", "M"}).instances == data.instances


def test_filter_empty_result_raises():
    with pytest.raises(EmptyDatasetError):
        filter_label_categories(_cat_dataset(), {"X"})


def test_filter_recomputes_classes():
    assert filter_label_categories(_cat_dataset(), {"B"}).classes == ("NF",)


def test_dataset_invariants():
    with pytest.raises(InvalidInputError):
        LabeledDataset((inst([[1.0]], id="a"), inst([[2.0]], id="a")))
    with pytest.raises(ShapeMismatchError):
        LabeledDataset((inst([[1.0]], id="a"), inst([[1.0], [2.0]], id="b")))
    with pytest.raises(LabelingError):
        LabeledDataset((inst([[1.0]], "F"),), classes=("NF",))


def test_instance_values_are_read_only():
    x = inst([[1.0, 2.0]])
    with pytest.raises(ValueError):
        x.values[0, 0] = 3.0


def test_label_scheme():
    assert [FLARE_SCHEME.label_for(c) for c in ["FQ", "B", "C", "M", "X"]] == ["NF", "NF", "NF", "F", "F"]
    with pytest.raises(LabelingError):
        FLARE_SCHEME.label_for("Q")
    with pytest.raises(LabelingError):
        LabelScheme({"a": "x"}, positive_class="y")
