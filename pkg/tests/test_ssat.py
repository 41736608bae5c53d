import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quantlab.basis import Basis, random_basis
from quantlab.errors import Degenerate, DimensionTooLarge, EnumerationBudgetExceeded
from quantlab.norms import Ellipsoidal, Euclidean, SepQuad, SupNorm
from quantlab.projection import FacePattern
from quantlab.ssat import (
    ClassId, class_centers, classify, classify_grid, constant_M, enumerate_grid,
    estimate_A_K, estimate_all_A_K, grid_counts, slice_uniqueness_check, slice_uniqueness_scan,
)

TAU = 0.25
I2 = Basis.identity(2)
SQ2 = SepQuad([1.0, 1.0])
SUP = SupNorm()


def test_classify_examples():
    cid, d = classify([0.1 * TAU, 0.0], TAU, SQ2, SUP, I2)
    assert cid.pattern.s == (0, 0) and d == 0.0
    cid, d = classify([1.0, 0.0], TAU, SQ2, SUP, I2)
    assert cid.pattern.s == (1, 0) and d == pytest.approx(0.875)
    assert np.allclose(cid.center(I2), [0.125, 0.0])
    cid, d = classify([1.0, 1.0], TAU, SQ2, SUP, I2)
    assert cid.pattern.s == (1, 1) and d == pytest.approx(0.875)


def test_classify_degenerate():
    f = Ellipsoidal(np.array([[1.0, 1.0 / 3], [1.0 / 3, 1.0]]))
    with pytest.raises(Degenerate):
        classify([-2.0, 0.0], 1.0, f, SUP, I2)


def test_class_centers():
    for n in (2, 3, 4):
        for K in range(n + 1):
            cs = class_centers(K, n, 0.5)
            assert len(cs) == math.comb(n, K) * 2**K
            assert all(c.K == K for c in cs)
    assert sum(len(class_centers(K, 3, 1.0)) for K in range(4)) == 3**3


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0))
def test_classification_rescale(seed, lam):
    # pulling u toward its class center keeps the class while it stays outside the cell
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    f = Ellipsoidal.diag(np.exp(rng.uniform(-1, 1, n)))
    b = Basis.identity(n)
    u = rng.uniform(-2, 2, n)
    try:
        cid, _ = classify(u, TAU, f, SUP, b)
    except Degenerate:
        return
    if cid.K == 0:
        return
    uc = cid.center(b)
    try:
        cid2, _ = classify(uc + lam * (u - uc), TAU, f, SUP, b)
    except Degenerate:
        return
    assert cid2 == cid


def test_constant_M_examples():
    assert constant_M(SUP, I2) == 0.5
    assert constant_M(Euclidean(), I2) == pytest.approx(math.sqrt(2) / 2)


def test_constant_M_sampling_oracle(rng):
    for _ in range(3):
        b = random_basis(3, rng)
        M = constant_M(Euclidean(), b)
        pts = rng.uniform(-0.5, 0.5, (10**6, 3))
        sampled = float(np.max(Euclidean().norm(b.from_coords(pts))))
        assert sampled <= M + 1e-12
        assert M - sampled <= 0.01 * M
        # the sign vectors are the only candidates convexity leaves
        verts = 0.5 * rng.choice([-1.0, 1.0], size=(4096, 3))
        assert float(np.max(Euclidean().norm(b.from_coords(verts)))) == pytest.approx(M, abs=1e-12)


def test_constant_M_dimension_guard():
    with pytest.raises(DimensionTooLarge):
        constant_M(SUP, Basis.identity(21))


def test_enumerate_grid_matches_bruteforce(rng):
    b = random_basis(2, rng)
    f_d = Euclidean()
    ks = enumerate_grid(f_d, b, 0.1, 1.0)
    box = np.array([(i, j) for i in range(-60, 61) for j in range(-60, 61)])
    inside = box[f_d.norm(b.from_coords(0.1 * box)) <= 1.0]
    assert {tuple(k) for k in ks} == {tuple(k) for k in inside}


def test_enumeration_budget():
    with pytest.raises(EnumerationBudgetExceeded) as exc:
        enumerate_grid(SUP, I2, 1e-4, 1.0, budget=10**6)
    assert exc.value.suggested_tau >= 1e-4 * 20
    # the suggested floor fits the budget
    enumerate_grid(SUP, I2, exc.value.suggested_tau * 1.01, 1.0, budget=10**6)


def test_grid_counts_setup_a():
    c = grid_counts(TAU, 1.0, SQ2, SUP, I2)
    assert (c[0].count, c[0].scaled) == (1, 1.0)
    assert (c[1].count, c[1].scaled) == (16, 4.0)
    # both coordinates nonzero: (2 * 4)^2 points, tau^2 * 64 = 4
    assert (c[2].count, c[2].scaled) == (64, 4.0)
    assert sum(v.count for v in c.values()) == 9**2
    for v in c.values():
        assert v.count_lo <= v.count <= v.count_hi
        assert v.degenerate_count == 0


@pytest.mark.parametrize("j", [2, 3, 4, 5])
def test_grid_counts_exact_along_ladder(j):
    tau = 2.0**-j
    c = grid_counts(tau, 1.0, SQ2, SUP, I2)
    m = round(1 / tau)
    assert c[1].count == 4 * m and c[1].scaled == 4.0
    assert c[2].count == 4 * m * m and c[2].scaled == 4.0


def test_grid_partition_ellipsoidal(rng):
    # every point in the ball gets exactly one class, whatever the objective
    b = random_basis(3, rng)
    f = Ellipsoidal.diag([3.0, 1.0, 0.5])
    g = classify_grid(0.2, 1.0, f, SUP, b)
    c = grid_counts(0.2, 1.0, f, SUP, b)
    inside = int(np.count_nonzero(g.fd_norm <= 1.0 + 1e-12))
    assert sum(v.count for v in c.values()) + c[0].degenerate_count == inside


def test_classify_grid_workers_invariant():
    f = Ellipsoidal.diag([2.0, 1.0])
    a = classify_grid(0.02, 1.0, f, SUP, I2, workers=1)
    b = classify_grid(0.02, 1.0, f, SUP, I2, workers=2)
    assert np.array_equal(a.K, b.K) and np.array_equal(a.patterns, b.patterns)


def test_estimate_A_K_setup_a():
    ladder = [2.0**-j for j in range(2, 7)]
    for K in (1, 2):
        est = estimate_A_K(K, 1.0, SQ2, SUP, I2, ladder)
        assert est.estimate == 4.0
        assert [r["scaled"] for r in est.table] == [4.0] * len(ladder)
    assert grid_counts(2.0**-6, 1.0, SQ2, SUP, I2)[0].scaled == 1.0


def test_estimate_A_K_doubling_converges():
    # tau' scaling: A_K is homogeneous of degree K in tau'
    ladder = [2.0**-j for j in range(3, 7)]
    a1 = estimate_all_A_K(1.0, SQ2, SUP, I2, ladder)
    a2 = estimate_all_A_K(2.0, SQ2, SUP, I2, ladder)
    for K in (1, 2):
        assert a2[K].estimate == pytest.approx(2**K * a1[K].estimate)


def test_ladder_validation():
    with pytest.raises(ValueError):
        estimate_all_A_K(1.0, SQ2, SUP, I2, [0.25, 0.125])
    with pytest.raises(ValueError):
        estimate_all_A_K(1.0, SQ2, SUP, I2, [0.125, 0.25, 0.0625])


def test_slice_examples():
    for s in ((1, 0), (1, 1)):
        chk = slice_uniqueness_check(ClassId(FacePattern(s), 2.0**-4), 2.0**-4, 1.0, SQ2, SUP, I2)
        assert chk.passed and chk.points > 0


@pytest.mark.parametrize("f", [SepQuad([1.0, 2.0]), Ellipsoidal.diag([4.0, 1.0]),
                               Ellipsoidal(np.array([[2.0, 0.6], [0.6, 1.0]]))],
                         ids=["sq", "ell-diag", "ell-coupled"])
def test_slice_scan_n2(f):
    res = slice_uniqueness_scan(2.0**-3, 1.0, f, SUP, I2)
    assert len(res) == 8
    assert all(c.passed for c in res.values())


def test_slice_dimension_guard():
    with pytest.raises(DimensionTooLarge):
        slice_uniqueness_scan(0.5, 1.0, SepQuad(np.ones(7)), SUP, Basis.identity(7))
