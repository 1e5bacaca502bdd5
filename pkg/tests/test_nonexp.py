import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from xurates.hilbert import DimensionError
from xurates.nonexp import (AffineProjection, BallProjection, BoxProjection, Composite, CyclicFamily,
                            HalfspaceProjection, Identity, cyclic, default_tau, has_tau,
                            nonexpansive_violation, project_halfspace, tilde)

coords = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
points2 = arrays(np.float64, 2, elements=coords)


def _maps():
    return [
        Identity(2),
        HalfspaceProjection([1.0, -2.0], 0.5),
        BallProjection([0.5, 0.0], 1.5),
        BoxProjection([-1.0, -np.inf], [1.0, 2.0]),
        AffineProjection([[1.0], [1.0]], [0.0, 1.0]),
        Composite([BallProjection([0.0, 0.0], 1.0), HalfspaceProjection([0.0, 1.0], 0.0)]),
    ]


@pytest.mark.parametrize("x, expected", [((3, 2), (3, 0)), ((3, -2), (3, -2))])
def test_project_halfspace_examples(x, expected):
    np.testing.assert_array_equal(project_halfspace([0, 1], 0, x), expected)


def test_project_halfspace_zero_normal():
    with pytest.raises(ValueError):
        project_halfspace([0, 0], 0, [1, 1])


@given(points2, points2, st.floats(-10, 10))
def test_project_halfspace_feasible(a, x, b):
    if np.dot(a, a) < 1e-6:
        return
    y = project_halfspace(a, b, x)
    assert np.dot(a, y) <= b + 1e-10 * max(1.0, np.abs(a).sum() * np.abs(y).sum())


@pytest.mark.parametrize("op", _maps(), ids=lambda op: type(op).__name__)
def test_nonexpansive_sampling(op):
    assert nonexpansive_violation(op, 2, pairs=1000) <= 1e-10


@pytest.mark.parametrize("op", _maps(), ids=lambda op: type(op).__name__)
@settings(max_examples=200)
@given(x=points2, y=points2)
def test_nonexpansive_property(op, x, y):
    assert np.linalg.norm(op(x) - op(y)) <= np.linalg.norm(x - y) + 1e-10 * (1 + np.linalg.norm(x - y))


@pytest.mark.parametrize("op", _maps()[1:5], ids=lambda op: type(op).__name__)
@given(x=points2)
def test_projection_idempotent(op, x):
    y = op(x)
    np.testing.assert_allclose(op(y), y, atol=1e-10)


def test_ball_examples():
    B = BallProjection([0.0, 0.0], 1.0)
    np.testing.assert_allclose(B([2.0, 0.0]), [1.0, 0.0])
    np.testing.assert_array_equal(B([0.5, 0.0]), [0.5, 0.0])


def test_box_with_infinite_sides():
    B = BoxProjection([-1.0, -np.inf], [1.0, np.inf])
    np.testing.assert_array_equal(B([5.0, -7.0]), [1.0, -7.0])


def test_affine_rank_deficient():
    with pytest.raises(ValueError):
        AffineProjection([[1.0, 2.0], [1.0, 2.0]], [0.0, 0.0])


def test_composite_order():
    # ball first, then halfspace: (3,3) -> (2.12,2.12)/... -> y clipped to 0
    C = Composite([BallProjection([0.0, 0.0], 1.0), HalfspaceProjection([0.0, 1.0], 0.0)])
    np.testing.assert_allclose(C([3.0, 3.0]), [np.sqrt(0.5), 0.0])


def _family(l, tau=None):
    maps = [HalfspaceProjection([1.0, 0.0], 0.0), HalfspaceProjection([0.0, 1.0], 0.0),
            BallProjection([0.0, 0.0], 2.0)][:l]
    return CyclicFamily(maps, [0.0, 0.0], tau=tau)


@pytest.mark.parametrize("l, n, idx", [(3, 5, 2), (1, 7, 0), (2, 2, 0)])
def test_cyclic_index(l, n, idx):
    fam = _family(l)
    assert cyclic(fam, n) is fam.maps[idx]


def test_tilde_single_map():
    fam = _family(1)
    for i in range(5):
        assert tilde(fam, i) is fam.maps[0]


def test_tilde_order():
    fam = _family(2)
    x = np.array([3.0, 4.0])
    # T~_0 = T_2 T_1 = T_0 T_1: T_1 acts first
    np.testing.assert_array_equal(tilde(fam, 0)(x), fam.maps[0](fam.maps[1](x)))
    np.testing.assert_array_equal(tilde(fam, 1)(x), fam.maps[1](fam.maps[0](x)))


@given(points2, st.integers(0, 30))
def test_tilde_periodic(x, i):
    fam = _family(3)
    np.testing.assert_array_equal(tilde(fam, i)(x), tilde(fam, i + 3)(x))


def test_tilde_fixes_common_point():
    fam = _family(3)
    for p in ([0.0, 0.0], [-1.0, -1.0]):
        for i in range(3):
            np.testing.assert_allclose(tilde(fam, i)(np.array(p)), p, atol=1e-10)


def test_family_rejects_non_fixed_point():
    with pytest.raises(ValueError):
        CyclicFamily([HalfspaceProjection([1.0, 0.0], 0.0)], [1.0, 0.0])


def test_family_rejects_dimension_mismatch():
    with pytest.raises(DimensionError):
        CyclicFamily([BallProjection([0.0, 0.0, 0.0], 1.0)], [0.0, 0.0])


def test_family_rejects_nonmonotone_tau():
    with pytest.raises(ValueError):
        _family(2, tau=lambda k: 10 - k if k < 10 else 0)


@pytest.mark.parametrize("l, tau, k, expected", [(1, None, 9, 9), (2, lambda k: 3 * k + 2, 1, 5)])
def test_default_tau(l, tau, k, expected):
    assert default_tau(_family(l, tau), k) == expected


def test_default_tau_missing():
    fam = _family(2)
    assert not has_tau(fam)
    with pytest.raises(ValueError, match="tau modulus required"):
        default_tau(fam, 1)


def test_bP():
    fam = CyclicFamily([Identity(2)], [3.0, 4.0])
    assert fam.bP == 5
    assert _family(1).bP == 1

