import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neurem.tensor_core import (
    BadMagicError,
    DimensionError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
    decode_tensor,
    encode_tensor,
    fold,
    kron,
    modal_product,
    read_tensor,
    svd_singular_values,
    tucker_to_tensor,
    unfold,
    write_tensor,
)

dims3 = st.tuples(*[st.integers(1, 8)] * 3)


def random_tucker(rng, dims, ranks):
    core = rng.standard_normal(ranks)
    us = [rng.standard_normal((d, r)) for d, r in zip(dims, ranks)]
    return core, us


# --- unfold / fold ---------------------------------------------------------

def test_unfold_rank_one_mode1():
    rng = np.random.default_rng(0)
    u, v, w = rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal(2)
    t = np.einsum("i,j,k->ijk", u, v, w)
    expected = np.outer(u, np.kron(w, v))
    assert np.allclose(unfold(t, 1), expected, atol=1e-14)


def test_unfold_index_oracle():
    t = np.arange(1, 9, dtype=float).reshape(2, 2, 2)
    dims = t.shape
    for mode in (1, 2, 3):
        m = unfold(t, mode)
        rest = [n for n in range(3) if n != mode - 1]
        for idx in np.ndindex(*dims):
            # lower-numbered remaining mode varies fastest
            col = idx[rest[0]] + dims[rest[0]] * idx[rest[1]]
            assert m[idx[mode - 1], col] == t[idx]


@settings(max_examples=40, deadline=None)
@given(dims=dims3, mode=st.sampled_from([1, 2, 3]), seed=st.integers(0, 2**31))
def test_fold_unfold_roundtrip(dims, mode, seed):
    t = np.random.default_rng(seed).standard_normal(dims)
    m = unfold(t, mode)
    assert m.shape == (dims[mode - 1], int(np.prod(dims)) // dims[mode - 1])
    assert np.array_equal(fold(m, mode, dims), t)


def test_fold_unit_tensor():
    t = np.array([[[4.5]]])
    assert np.array_equal(fold(unfold(t, 2), 2, (1, 1, 1)), t)


def test_fold_mismatch_raises():
    with pytest.raises(DimensionError):
        fold(np.zeros((3, 5)), 1, (3, 2, 2))


def test_unfold_requires_3d():
    with pytest.raises(DimensionError):
        unfold(np.zeros((2, 2)), 1)
    with pytest.raises(DimensionError):
        unfold(np.zeros((2, 2, 2)), 4)


# --- kron ----------------------------------------------------------------

def test_kron_identities():
    assert np.array_equal(kron(np.eye(2), np.eye(3)), np.eye(6))
    b = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(kron(np.array([[2.0]]), b), 2 * b)


def test_kron_loop_oracle(rng):
    a = rng.standard_normal((2, 3))
    b = rng.standard_normal((3, 2))
    out = np.zeros((6, 6))
    for i in range(2):
        for j in range(3):
            for k in range(3):
                for l in range(2):
                    out[i * 3 + k, j * 2 + l] = a[i, j] * b[k, l]
    assert np.array_equal(kron(a, b), out)


# --- modal product / Tucker --------------------------------------------

def test_modal_product_identity_and_zero(rng):
    t = rng.standard_normal((3, 4, 5))
    for n, d in enumerate(t.shape, start=1):
        assert np.allclose(modal_product(t, np.eye(d), n), t, atol=0)
        z = modal_product(t, np.zeros((2, d)), n)
        assert not z.any() and z.shape[n - 1] == 2


@settings(max_examples=30, deadline=None)
@given(dims=dims3, rows=st.integers(1, 5), mode=st.sampled_from([1, 2, 3]),
       seed=st.integers(0, 2**31))
def test_modal_product_matches_unfolded_definition(dims, rows, mode, seed):
    rng = np.random.default_rng(seed)
    t = rng.standard_normal(dims)
    u = rng.standard_normal((rows, dims[mode - 1]))
    out = modal_product(t, u, mode)
    assert out.shape[mode - 1] == rows
    assert np.max(np.abs(unfold(out, mode) - u @ unfold(t, mode))) < 1e-12


def test_modal_product_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        modal_product(rng.standard_normal((3, 4, 5)), np.eye(3), 2)


def test_tucker_three_matrix_forms(rng):
    for _ in range(100):
        dims = tuple(rng.integers(2, 6, size=3))
        ranks = tuple(int(rng.integers(1, d + 1)) for d in dims)
        core, (u1, u2, u3) = random_tucker(rng, dims, ranks)
        x = tucker_to_tensor(core, [u1, u2, u3])
        m1 = u1 @ unfold(core, 1) @ kron(u3, u2).T
        m2 = u2 @ unfold(core, 2) @ kron(u3, u1).T
        m3 = u3 @ unfold(core, 3) @ kron(u2, u1).T
        assert np.max(np.abs(fold(m1, 1, dims) - x)) < 1e-12
        assert np.max(np.abs(fold(m2, 2, dims) - x)) < 1e-12
        assert np.max(np.abs(fold(m3, 3, dims) - x)) < 1e-12


def test_mode3_literal_order_is_a_column_permutation(rng):
    # (U1 kron U2) is (U2 kron U1) with the two remaining indices swapped
    dims, ranks = (3, 4, 2), (2, 3, 2)
    core, (u1, u2, u3) = random_tucker(rng, dims, ranks)
    x = tucker_to_tensor(core, [u1, u2, u3])
    literal = u3 @ np.moveaxis(core, 2, 0).reshape(ranks[2], -1) @ kron(u1, u2).T
    swapped = np.moveaxis(x, 2, 0).reshape(dims[2], -1)   # j fastest
    assert np.allclose(literal, swapped, atol=1e-12)


# --- SVD ---------------------------------------------------------------

def test_svd_examples(rng):
    assert np.allclose(svd_singular_values(np.eye(5)), np.ones(5))
    assert np.allclose(svd_singular_values(np.diag([1.0, 3.0])), [3, 1])
    m = rng.standard_normal((6, 4))
    s = svd_singular_values(m)
    assert len(s) == 4 and np.all(np.diff(s) <= 0) and np.all(s >= 0)
    assert abs(np.sum(s ** 2) - np.sum(m ** 2)) / np.sum(m ** 2) < 1e-10


def test_svd_rejects_nonfinite():
    with pytest.raises(ValueError):
        svd_singular_values(np.array([[1.0, np.nan]]))


# --- DRMT format -----------------------------------------------------------

def test_drmt_golden_bytes(tmp_path):
    p = tmp_path / "one.drmt"
    write_tensor(np.array([1.0]), p)
    data = p.read_bytes()
    assert data == bytes.fromhex("44524d54" "0100" "01" "01" "0100000000000000"
                                 "000000000000f03f")
    assert len(data) == 4 + 2 + 1 + 1 + 8 + 8


@pytest.mark.parametrize("dtype", [np.float64, np.complex128])
def test_drmt_roundtrip_bitwise(tmp_path, rng, dtype):
    t = rng.standard_normal((3, 4, 5))
    if dtype is np.complex128:
        t = t + 1j * rng.standard_normal((3, 4, 5))
    p = tmp_path / "t.drmt"
    write_tensor(t, p)
    back = read_tensor(p)
    assert back.dtype == dtype and back.shape == t.shape
    assert back.tobytes() == t.tobytes()


@settings(max_examples=30, deadline=None)
@given(dims=st.lists(st.integers(1, 4), min_size=1, max_size=4), seed=st.integers(0, 2**31))
def test_drmt_encode_decode_property(dims, seed):
    t = np.random.default_rng(seed).standard_normal(dims)
    assert decode_tensor(encode_tensor(t)).tobytes() == t.tobytes()


def test_drmt_errors():
    good = encode_tensor(np.arange(4.0))
    with pytest.raises(BadMagicError):
        decode_tensor(b"XXXX" + good[4:])
    with pytest.raises(UnsupportedVersionError):
        decode_tensor(good[:4] + struct.pack("<H", 2) + good[6:])
    with pytest.raises(UnsupportedDtypeError):
        decode_tensor(good[:6] + b"\x07" + good[7:])
    with pytest.raises(TruncatedPayloadError):
        decode_tensor(good[:-3])
    with pytest.raises(TruncatedPayloadError):
        decode_tensor(good[:9])
