import json
import math
from fractions import Fraction

import numpy as np
import pytest

from dwgam.basis import (
    INTERCEPT, BasisError, CovariateSpec, Scaling, aliased_columns, basis_columns,
    build_design, place_knots, resolve_knots,
)
from dwgam.data import CONTINUOUS, DUMMY, DataError, Dataset


def _data(n=200, seed=0, n_dummies=1):
    rng = np.random.default_rng(seed)
    cov = {"x": rng.random(n), "z": rng.normal(size=n)}
    for j in range(n_dummies):
        cov[f"d{j}"] = (rng.random(n) < 0.4).astype(float)
    return Dataset(rng.integers(0, 5, n), cov)


def test_place_knots_uniform_grid():
    x = np.linspace(0, 1, 101)
    np.testing.assert_allclose(place_knots(x, 3), [0.25, 0.5, 0.75], atol=1e-12)


def test_place_knots_degenerate():
    with pytest.raises(BasisError):
        place_knots(np.ones(50), 1)
    with pytest.raises(BasisError):
        place_knots(np.array([0.0, 1.0, 2.0]), 2)


def test_place_knots_uniform_sample():
    # order statistics of U(0,1) at n=1000 have sd ~0.015 at these levels
    x = np.random.default_rng(4).random(1000)
    np.testing.assert_allclose(place_knots(x, 2), [1 / 3, 2 / 3], atol=0.05)


def test_place_knots_ties_are_nudged():
    x = np.array([0.0] * 60 + [1.0, 2.0, 3.0, 4.0])
    k = place_knots(x, 3)
    assert np.all(np.diff(k) > 0)
    assert k[0] > x.min() and k[-1] < x.max()


def test_spec_validation():
    with pytest.raises(BasisError):
        CovariateSpec("d", DUMMY, degree=2)
    with pytest.raises(BasisError):
        CovariateSpec("d", DUMMY, degree=1, num_knots=1)
    with pytest.raises(BasisError):
        CovariateSpec("x", degree=0, num_knots=1)
    with pytest.raises(BasisError):
        CovariateSpec("x", degree=2, num_knots=2, knots=(0.5, 0.5))
    with pytest.raises(BasisError):
        CovariateSpec("x", degree=2, num_knots=2, knots=(0.5,))
    with pytest.raises(BasisError):
        CovariateSpec("x", kind="ordinal")


def test_truncated_column_zero_at_knot():
    x = np.array([0.2, 0.5, 0.5000001, 0.9])
    for d in (1, 2, 3):
        block = basis_columns(x, CovariateSpec("x", degree=d, num_knots=1, knots=(0.5,)))
        assert block[1, -1] == 0.0
        assert block[0, -1] == 0.0
        assert block[2, -1] > 0.0


def test_linear_block_is_x():
    x = np.linspace(-1, 2, 7)
    np.testing.assert_array_equal(basis_columns(x, CovariateSpec("x")), x[:, None])


def test_cubic_spline_block_matches_exact_rational_evaluation():
    # exact rational arithmetic of the cubic truncated-power form with
    # three knots, compared column by column
    knots = (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))
    xs = [Fraction(i, 40) for i in range(41)]
    exact = []
    for x in xs:
        row = [x, x ** 2, x ** 3] + [(x - g) ** 3 if x > g else Fraction(0) for g in knots]
        exact.append([float(v) for v in row])
    spec = CovariateSpec("x", degree=3, num_knots=3, knots=tuple(float(g) for g in knots))
    got = basis_columns(np.array([float(x) for x in xs]), spec)
    np.testing.assert_allclose(got, np.array(exact), rtol=1e-14, atol=1e-16)


@pytest.mark.parametrize("degree", [2, 3])
def test_continuity_across_knot(degree):
    # Left of the knot the column is identically 0, so every one-sided
    # derivative from the left is 0.  From the right, the k-th forward
    # difference quotient must also tend to 0 for k < D (C^(D-1) join),
    # while at k = D it tends to D! (the jump that makes it a spline).
    g = 0.37
    spec = CovariateSpec("x", degree=degree, num_knots=1, knots=(g,))
    for h in (1e-2, 1e-3):
        x = g + h * np.arange(degree + 1)
        col = basis_columns(x, spec)[:, -1]
        for order in range(degree + 1):
            quotient = np.diff(col[:order + 1], n=order)[0] / h ** order
            if order < degree:
                assert abs(quotient) < 10 * h ** (degree - order), (order, quotient)
            else:
                assert quotient == pytest.approx(math.factorial(degree), rel=1e-6)
    left = basis_columns(g - 1e-3 * np.arange(5), spec)[:, -1]
    assert np.all(left == 0.0)


def test_design_column_counts():
    data = _data(n_dummies=2)
    d = build_design(data, [CovariateSpec("d0", DUMMY), CovariateSpec("d1", DUMMY)])
    assert d.shape == (data.n, 3)
    assert d.column_labels[0] == INTERCEPT
    specs = resolve_knots(data, [CovariateSpec("x", degree=2, num_knots=3), CovariateSpec("d0", DUMMY)])
    d = build_design(data, specs)
    assert d.shape[1] == 1 + 5 + 1
    assert d.column_labels == [INTERCEPT, "x", "x^2", "x:knot1", "x:knot2", "x:knot3", "d0"]
    np.testing.assert_array_equal(d.columns[:, 0], 1.0)


def test_survey_parameter_accounting():
    # The survey table lists 51 parameters for a Poisson fit with age (D=1,k=1)
    # and family size (D=1,k=0): 51 = 1 + 2 + 1 + 47 dummy columns.  With the
    # same 47 dummies, two DW links with age (D=2,k=3) and family size (D=2,k=2)
    # must give 114 parameters, and two links with (1,1)/(3,3) give 112.
    n_dummies = 47
    data = _data(n=400, n_dummies=n_dummies)
    data.covariates["age"] = np.random.default_rng(1).uniform(28, 75, 400)
    data.covariates["fsize"] = np.random.default_rng(2).uniform(2, 12, 400)
    data.kinds["age"] = data.kinds["fsize"] = CONTINUOUS
    dummies = [CovariateSpec(f"d{j}", DUMMY) for j in range(n_dummies)]

    def ncol(age, fsize):
        specs = resolve_knots(data, [CovariateSpec("age", degree=age[0], num_knots=age[1]),
                                     CovariateSpec("fsize", degree=fsize[0], num_knots=fsize[1])]
                              + dummies)
        return build_design(data, specs).shape[1]

    assert ncol((1, 1), (1, 0)) == 51
    assert 2 * ncol((2, 3), (2, 2)) == 114
    assert 2 * ncol((1, 1), (3, 3)) == 112


def test_missing_column():
    with pytest.raises(DataError):
        build_design(_data(), [CovariateSpec("nope")])


def test_duplicate_covariate():
    with pytest.raises(BasisError):
        build_design(_data(), [CovariateSpec("x"), CovariateSpec("x", degree=2)])


def test_unresolved_knots():
    with pytest.raises(BasisError):
        basis_columns(np.arange(5.0), CovariateSpec("x", degree=1, num_knots=1))


def test_row_permutation():
    data = _data()
    specs = resolve_knots(data, [CovariateSpec("x", degree=3, num_knots=2), CovariateSpec("z")])
    perm = np.random.default_rng(9).permutation(data.n)
    a = build_design(data, specs).columns
    b = build_design(data.subset(perm), specs).columns
    np.testing.assert_array_equal(a[perm], b)


def test_serialized_spec_gives_identical_columns():
    data = _data()
    specs = resolve_knots(data, [CovariateSpec("x", degree=2, num_knots=3), CovariateSpec("d0", DUMMY)])
    blob = json.dumps([s.to_dict() for s in specs])
    back = [CovariateSpec.from_dict(d) for d in json.loads(blob)]
    assert back == specs
    a, b = build_design(data, specs), build_design(data, back)
    assert a.column_labels == b.column_labels
    assert np.array_equal(a.columns, b.columns)


def test_scaling_round_trip():
    data = _data()
    sc = Scaling.fit(data, ["x", "z", "d0"])
    assert "d0" not in sc.ranges
    z = sc.apply("z", data.column("z"))
    assert z.min() == 0.0 and z.max() == 1.0
    assert Scaling.from_dict(json.loads(json.dumps(sc.to_dict()))) == sc


def test_aliased_columns():
    rng = np.random.default_rng(0)
    x = rng.random(100)
    X = np.column_stack([np.ones(100), x, 2 * x, x ** 2])
    assert aliased_columns(X) == [2]
    assert aliased_columns(np.column_stack([np.ones(100), x])) == []
    # dummies that sum to one alias the intercept: the last is dropped
    g = rng.integers(0, 3, 100)
    D = np.column_stack([np.ones(100)] + [(g == k).astype(float) for k in range(3)])
    assert aliased_columns(D) == [3]
