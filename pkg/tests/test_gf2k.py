from __future__ import annotations

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from qnmlab.gf2k import PRIMITIVE_POLYS, clmul_mod, field, gf2_matrix_inverse


def _poly_mulmod(a: int, b: int, poly: int, k: int) -> int:
    # full carry-less product, then long division
    prod = 0
    for i in range(k):
        if (b >> i) & 1:
            prod ^= a << i
    for deg in range(2 * k - 2, k - 1, -1):
        if (prod >> deg) & 1:
            prod ^= poly << (deg - k)
    return prod


@given(st.sampled_from(sorted(PRIMITIVE_POLYS)), st.data())
def test_mul_matches_long_division(k, data):
    f = field(k)
    a = data.draw(st.integers(0, f.order - 1))
    b = data.draw(st.integers(0, f.order - 1))
    want = _poly_mulmod(a, b, f.poly, k)
    assert f.mul(a, b) == want
    assert clmul_mod(a, b, k, f.poly) == want


@given(st.sampled_from([1, 2, 3, 4, 8, 14]), st.data())
def test_field_axioms(k, data):
    f = field(k)
    a, b, c = (data.draw(st.integers(0, f.order - 1)) for _ in range(3))
    assert f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c))
    assert f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c))
    assert f.mul(a, b) == f.mul(b, a)
    if a:
        assert f.mul(a, f.inv(a)) == 1
        assert f.div(f.mul(a, b), a) == b


def test_multiplicative_group_is_cyclic():
    for k in (2, 3, 5, 8):
        f = field(k)
        powers = {f.pow(2, e) for e in range(f.order - 1)}
        assert powers == set(range(1, f.order))


def test_vectorised_mul_matches_scalar():
    f = field(6)
    rng = np.random.default_rng(0)
    a = rng.integers(0, 64, 200)
    b = rng.integers(0, 64, 200)
    got = f.mul(a, b)
    assert [int(v) for v in got] == [f.mul(int(x), int(y)) for x, y in zip(a, b)]
    assert f.mul(0, 13) == 0


def test_trace_is_linear_onto_gf2_and_balanced():
    for k in (1, 2, 3, 4):
        f = field(k)
        tr = [f.trace(a) for a in range(f.order)]
        assert set(tr) <= {0, 1}
        assert sum(tr) == f.order // 2
        for a in range(f.order):
            for b in range(f.order):
                assert f.trace(a ^ b) == tr[a] ^ tr[b]


def test_dual_basis_pairs_with_standard_basis():
    for k in (2, 3, 5):
        f = field(k)
        dual = f.dual_basis()
        for i in range(k):
            for j in range(k):
                assert f.trace(f.mul(1 << i, dual[j])) == int(i == j)


def test_dot_product():
    f = field(3)
    x, y = [1, 2, 3], [4, 5, 6]
    want = f.mul(1, 4) ^ f.mul(2, 5) ^ f.mul(3, 6)
    assert f.dot(x, y) == want


def test_gf2_matrix_inverse():
    rng = np.random.default_rng(1)
    found = 0
    while found < 5:
        m = rng.integers(0, 2, (5, 5))
        try:
            inv = gf2_matrix_inverse(m)
        except ValueError:
            continue
        found += 1
        assert np.array_equal((m @ inv) % 2, np.eye(5, dtype=int))
