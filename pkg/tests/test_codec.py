import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quantlab.basis import Basis, cell_center, quantize, random_basis
from quantlab.codec import Code, decode, encode, reconstruction_error
from quantlab.errors import AmbiguousFace, Degenerate, InconsistentCode
from quantlab.norms import Ellipsoidal, L1Norm, PPower, SepQuad

TAU = 0.25
I2 = Basis.identity(2)
SQ2 = SepQuad([1.0, 1.0])


def test_encode_examples():
    assert encode([0.05, -0.1], TAU, SQ2, I2).entries == ()
    assert encode([0.5, 0.1], TAU, SQ2, I2).entries == ((1, 0.375),)
    assert encode([-0.5, 0.95], TAU, SQ2, I2).entries == ((1, -0.375), (2, 0.875))


def test_decode_examples():
    k, rec = decode(Code(TAU, 2, ()), SQ2, I2)
    assert k.tolist() == [0, 0] and np.array_equal(rec, [0.0, 0.0])
    k, rec = decode(Code(TAU, 2, ((1, 0.375),)), SQ2, I2)
    assert k.tolist() == [2, 0] and np.allclose(rec, [0.5, 0.0])
    k, rec = decode(Code(TAU, 2, ((1, -0.375),)), SQ2, I2)
    assert k.tolist() == [-2, 0] and np.allclose(rec, [-0.5, 0.0])
    k, _ = decode(Code(TAU, 2, ((1, -0.375), (2, 0.875))), SQ2, I2)
    assert k.tolist() == [-2, 4]


def test_reconstruction_error_examples(rng):
    l1 = L1Norm()
    code = encode([0.5, 0.1], TAU, SQ2, I2)
    assert reconstruction_error([0.5, 0.1], code, l1, SQ2, I2) == pytest.approx(0.1)
    assert reconstruction_error([0.5, 0.0], code, l1, SQ2, I2) == 0.0
    b = random_basis(3, rng)
    f = Ellipsoidal.diag([2.0, 1.0, 3.0])
    for u in rng.uniform(-1, 1, (20, 3)):
        code = encode(u, 0.1, f, b)
        # independent recomputation through quantize
        ref = l1.norm(u - cell_center(quantize(u, 0.1, b), 0.1, b))
        assert reconstruction_error(u, code, l1, f, b) == pytest.approx(ref, abs=1e-12)


CONFIGS = [(n, fk, bk) for n in (2, 4) for fk in ("sq", "ell", "pp") for bk in ("id", "rand")]


@pytest.mark.parametrize("n,fk,bk", CONFIGS)
def test_roundtrip(n, fk, bk, rng):
    f = {"sq": SepQuad(np.ones(n)), "ell": Ellipsoidal.diag([4.0] + [1.0] * (n - 1)),
         "pp": PPower(3.0)}[fk]
    b = Basis.identity(n) if bk == "id" else random_basis(n, rng)
    for u in rng.uniform(-1.5, 1.5, (200, n)):
        k, _ = decode(encode(u, 0.1, f, b), f, b)
        assert np.array_equal(k, quantize(u, 0.1, b))


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.03, 0.1, 0.7]))
def test_roundtrip_property(seed, tau):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    b = random_basis(n, rng)
    a = rng.standard_normal((n, n))
    f = Ellipsoidal(a @ a.T + 0.3 * np.eye(n))
    u = rng.uniform(-3, 3, n)
    try:
        code = encode(u, tau, f, b)
    except Degenerate:
        return
    assert all(1 <= j <= n for j, _ in code.entries)
    k, rec = decode(code, f, b)
    assert np.array_equal(k, quantize(u, tau, b))
    assert np.allclose(rec, cell_center(k, tau, b))


def test_code_size_is_active_count():
    f = SepQuad([1.0, 1.0, 1.0])
    b = Basis.identity(3)
    assert encode([0.01, 0.02, 0.03], 0.1, f, b).size == 0
    assert encode([0.31, 0.02, 0.03], 0.1, f, b).size == 1
    assert encode([0.31, -0.52, 0.73], 0.1, f, b).size == 3


def test_json_roundtrip_exact(rng):
    b = random_basis(4, rng)
    f = Ellipsoidal.diag([4.0, 1.0, 1.0, 1.0])
    for u in rng.uniform(-2, 2, (30, 4)):
        code = encode(u, 0.1 / 3, f, b)
        back = Code.from_json(code.to_json())
        assert back == code
        assert np.array_equal(decode(back, f, b)[0], decode(code, f, b)[0])
    doc = json.loads(Code(0.25, 2, ((1, 0.375),)).to_json())
    assert doc == {"tau": 0.25, "n": 2, "entries": [[1, 0.375]]}


@pytest.mark.parametrize("entries,msg", [
    (((2, 0.375), (1, 0.125)), "increasing"),
    (((1, 0.375), (1, 0.125)), "increasing"),
    (((0, 0.375),), "1..2"),
    (((3, 0.375),), "1..2"),
    (((1, 0.3),), "edge"),
])
def test_code_validation(entries, msg):
    with pytest.raises(InconsistentCode, match=msg):
        Code(TAU, 2, entries)


# coupled quadratic whose partial minimizers land exactly on cell faces at tau = 1
RHO_Q = Ellipsoidal(np.array([[1.0, 1.0 / 3], [1.0 / 3, 1.0]]))


def test_degenerate_encode():
    # over C(2, 0) the free coordinate minimizes to -1.5/3 = -0.5, a face, with zero gradient
    with pytest.raises(Degenerate):
        encode([2.0, 0.0], 1.0, RHO_Q, I2)


def test_ambiguous_face():
    # gradient on coordinate 1 is 2 (0.5 + (-1.5) / 3) = 0
    with pytest.raises(AmbiguousFace):
        decode(Code(1.0, 2, ((1, 0.5), (2, -1.5))), RHO_Q, I2)


def test_inconsistent_free_coordinate():
    with pytest.raises(InconsistentCode):
        decode(Code(1.0, 2, ((1, 1.5),)), RHO_Q, I2)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        decode(Code(TAU, 3, ()), SQ2, I2)
