"""Block-encoding layer: dilations, LCU averages, eigenvalue transforms, amplification."""

from __future__ import annotations

import math

import numpy as np
import pytest

from qgelab import encode
from qgelab.errors import AmplificationOverflowError, ContractError, NormalizationError
from qgelab.statevector import PureState


def _random_hermitian(rng, d, norm=None):
    raw = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    H = (raw + raw.conj().T) / 2
    if norm is not None:
        H *= norm / np.linalg.norm(H, 2)
    return H


def test_block_encode_unitary_input_has_zero_offblocks():
    be = encode.block_encode(np.diag([1.0, -1.0]), 1.0)
    assert np.allclose(be.unitary[:2, 2:], 0.0, atol=1e-12)
    assert np.allclose(be.block, np.diag([1.0, -1.0]))
    assert be.ancilla_dim == 2 and be.system_dim == 2


def test_block_encode_frozen_offblock_values():
    be = encode.block_encode(np.diag([0.5, -1.0 / 3.0]), 1.0)
    assert np.allclose(be.block, np.diag([0.5, -1.0 / 3.0]), atol=1e-14)
    assert np.allclose(
        be.unitary[:2, 2:], np.diag([math.sqrt(3) / 2, math.sqrt(8) / 3]), atol=1e-14
    )
    assert np.allclose(be.unitary[2:, 2:], np.diag([-0.5, 1.0 / 3.0]), atol=1e-14)


def test_block_encode_random_recovery():
    rng = np.random.default_rng(4)
    H = _random_hermitian(rng, 8)
    alpha = float(np.linalg.norm(H, 2))
    be = encode.block_encode(H, alpha)
    gap = np.abs(be.unitary.conj().T @ be.unitary - np.eye(16)).max()
    assert gap < 1e-10
    assert np.allclose(be.encoded_operator, H, atol=1e-10)


def test_block_encode_rejects_undernormalization():
    with pytest.raises(NormalizationError):
        encode.block_encode(np.diag([2.0, 0.0]), 1.0)


def test_controlled_lcu_identical_inputs():
    O = np.diag([0.3, -0.3])
    encs = [encode.block_encode(O, 1.0) for _ in range(4)]
    x = np.full(4, 0.25)
    out = encode.controlled_lcu(x, encs)
    assert np.allclose(out.encoded_operator, 0.25 * O, atol=1e-12)
    assert out.metadata["ancilla_budget"] == 3  # ceil(log2 4) + 1


def test_controlled_lcu_unit_vector():
    rng = np.random.default_rng(7)
    ops = [_random_hermitian(rng, 4, norm=1.0) for _ in range(3)]
    encs = [encode.block_encode(O, 1.0) for O in ops]
    x = np.array([0.5, 0.0, 0.0])
    out = encode.controlled_lcu(x, encs)
    assert np.allclose(out.encoded_operator, ops[0] / 6.0, atol=1e-12)


def test_controlled_lcu_matches_direct_sum():
    rng = np.random.default_rng(12)
    ops = [_random_hermitian(rng, 4, norm=1.0) for _ in range(3)]
    x = rng.uniform(-0.5, 0.5, size=3)
    out = encode.controlled_lcu(x, [encode.block_encode(O, 1.0) for O in ops])
    brute = sum(xj * Oj for xj, Oj in zip(x, ops)) / 3.0
    assert np.allclose(out.encoded_operator, brute, atol=1e-10)
    assert out.metadata["ancilla_budget"] == math.ceil(math.log2(3)) + 1


def test_controlled_lcu_validation():
    be2 = encode.block_encode(np.eye(2) * 0.5, 1.0)
    be4 = encode.block_encode(np.eye(4) * 0.5, 1.0)
    with pytest.raises(ValueError, match="dimension"):
        encode.controlled_lcu([0.1, 0.1], [be2, be4])
    with pytest.raises(ValueError, match="1/2"):
        encode.controlled_lcu([0.7], [be2])
    with pytest.raises(ValueError):
        encode.controlled_lcu([0.1], [encode.block_encode(np.eye(2), 2.0)])


def test_eigen_poly_identity_polynomial():
    rng = np.random.default_rng(3)
    H = _random_hermitian(rng, 5, norm=0.9)
    be = encode.block_encode(H, 1.0)
    out = encode.eigen_poly_transform(be, encode.PolynomialSpec((0.0, 1.0)))
    assert np.allclose(out.encoded_operator, H, atol=1e-10)


def test_eigen_poly_square_on_diagonal():
    be = encode.block_encode(np.diag([0.5, -1.0 / 3.0]), 1.0)
    out = encode.eigen_poly_transform(be, encode.PolynomialSpec((0.0, 0.0, 1.0)))
    assert np.allclose(out.encoded_operator, np.diag([0.25, 1.0 / 9.0]), atol=1e-12)


def test_eigen_poly_acts_blockwise():
    # Direct-sum input: the transform must equal the per-block transform.
    rng = np.random.default_rng(9)
    A = _random_hermitian(rng, 3, norm=0.95)
    B = _random_hermitian(rng, 5, norm=0.95)
    full = np.zeros((8, 8), dtype=complex)
    full[:3, :3] = A
    full[3:, 3:] = B
    cheb_t3 = encode.PolynomialSpec((0.0, 0.0, 0.0, 1.0), basis="chebyshev")
    out = encode.eigen_poly_transform(encode.block_encode(full, 1.0), cheb_t3)

    def t3(block):
        w, V = np.linalg.eigh(block)
        return (V * (4 * w**3 - 3 * w)) @ V.conj().T  # explicit T3, independent route

    expected = np.zeros((8, 8), dtype=complex)
    expected[:3, :3] = t3(A)
    expected[3:, 3:] = t3(B)
    assert np.abs(out.encoded_operator - expected).max() < 1e-10


def test_eigen_poly_random_bounded_polynomials():
    rng = np.random.default_rng(20)
    for _ in range(20):
        sizes = rng.integers(2, 7, size=rng.integers(1, 4))
        blocks = [_random_hermitian(rng, int(s), norm=0.99) for s in sizes]
        d = int(sizes.sum())
        full = np.zeros((d, d), dtype=complex)
        at = 0
        for blk in blocks:
            s = blk.shape[0]
            full[at : at + s, at : at + s] = blk
            at += s
        coeffs = rng.normal(size=rng.integers(2, 8))
        grid = np.linspace(-1, 1, 512)
        coeffs /= np.abs(np.polynomial.polynomial.polyval(grid, coeffs)).max() * (1 + 1e-9)
        spec = encode.PolynomialSpec(tuple(coeffs))
        out = encode.eigen_poly_transform(encode.block_encode(full, 1.0), spec)
        at = 0
        for blk in blocks:
            s = blk.shape[0]
            w, V = np.linalg.eigh(blk)
            per_block = (V * spec.evaluate(w)) @ V.conj().T
            assert np.abs(out.encoded_operator[at : at + s, at : at + s] - per_block).max() < 1e-9
            at += s


def test_eigen_poly_rejects_unbounded_polynomial():
    be = encode.block_encode(np.diag([0.5, -0.5]), 1.0)
    with pytest.raises(NormalizationError):
        encode.eigen_poly_transform(be, encode.PolynomialSpec((0.0, 2.0)))


def test_uniform_amplify_identity_rescaling():
    H = np.diag([0.4, -0.2])
    be = encode.block_encode(H, 1.0)
    out, report = encode.uniform_amplify(be, 1.0, 0.0)
    assert report.holds and report.measured_norm == pytest.approx(0.4, abs=1e-12)
    assert np.allclose(out.block, be.block, atol=1e-12)


def test_uniform_amplify_rescales_block():
    H = np.diag([0.1, -0.05])
    be = encode.block_encode(H, 1.0)
    out, report = encode.uniform_amplify(be, 0.5, 0.0)
    assert out.normalization == 0.5
    assert np.allclose(out.block, 2.0 * be.block, atol=1e-12)  # same operator, tighter alpha
    assert np.allclose(out.encoded_operator, be.encoded_operator, atol=1e-12)
    assert report.bound == 0.5


def test_uniform_amplify_overflow_is_loud():
    be = encode.block_encode(np.diag([0.8, 0.0]), 1.0)
    with pytest.raises(AmplificationOverflowError) as exc:
        encode.uniform_amplify(be, 0.5, 0.1)
    assert exc.value.measured_norm == pytest.approx(0.8, abs=1e-12)
    assert exc.value.bound == pytest.approx(0.45, abs=1e-12)


def test_uniform_amplify_sample_fraction():
    be = encode.block_encode(np.diag([0.1, 0.0]), 1.0)
    norms = np.array([0.05, 0.2, 0.4, 0.9])
    _, report = encode.uniform_amplify(be, 0.5, 0.0, sample_norms=norms)
    assert report.sample_fraction == pytest.approx(0.75)
    assert report.n_samples == 4


def test_sampled_lcu_norms_matches_direct():
    rng = np.random.default_rng(5)
    ops = [_random_hermitian(rng, 4, norm=1.0) for _ in range(5)]
    xs = rng.uniform(-0.5, 0.5, size=(7, 5))
    norms = encode.sampled_lcu_norms(ops, xs)
    for row, expected in zip(xs, norms):
        direct = np.linalg.norm(sum(xj * Oj for xj, Oj in zip(row, ops)) / 5.0, 2)
        assert expected == pytest.approx(direct, abs=1e-12)


def test_evolve_basics():
    assert np.allclose(encode.evolve(np.diag([1.0, -1.0]), 0.0), np.eye(2), atol=1e-14)
    U = encode.evolve(np.diag([1.0, -1.0]), math.pi / 2)
    assert np.allclose(U, np.diag([1j, -1j]), atol=1e-12)


def test_evolve_inverse_and_semigroup():
    rng = np.random.default_rng(8)
    H = _random_hermitian(rng, 6)
    U = encode.evolve(H, 0.7)
    assert np.abs(U @ encode.evolve(H, -0.7) - np.eye(6)).max() < 1e-10
    assert np.abs(encode.evolve(H, 0.3) @ encode.evolve(H, 0.5) - encode.evolve(H, 0.8)).max() < 1e-10


def test_phase_deviation_zero_observables():
    psi = PureState(np.array([1.0, 0.0, 0.0, 0.0]))
    dev = encode.phase_encoding_deviation([np.zeros((4, 4))] * 3, [0.5, -0.5, 0.25], 2, psi)
    assert dev == pytest.approx(0.0, abs=1e-12)


def test_phase_deviation_eigenstate_is_exact():
    # Evolution of an eigenstate is a pure phase, which the ideal oracle matches.
    A = np.diag([0.25, -0.25])
    psi = PureState(np.array([1.0, 0.0]))
    dev = encode.phase_encoding_deviation([A], [0.5], 2, psi)
    assert dev == pytest.approx(0.0, abs=1e-12)


def test_phase_deviation_shrinks_with_iteration_depth():
    rng = np.random.default_rng(14)
    B = [_random_hermitian(rng, 4, norm=1.0) for _ in range(3)]
    alphas = rng.uniform(-0.5, 0.5, size=3)
    x = rng.uniform(-0.5, 0.5, size=3)
    raw = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi = PureState(raw / np.linalg.norm(raw))
    devs = []
    for q in range(1, 6):
        A_set = [a * 2.0**-q * np.eye(4) + 4.0**-q * Bj for a, Bj in zip(alphas, B)]
        devs.append(encode.phase_encoding_deviation(A_set, x, q, psi))
    for earlier, later in zip(devs, devs[1:]):
        assert later < 0.5 * earlier  # theory says ~4x per level


def test_phase_deviation_contract_violation():
    A = np.diag([1.0, -1.0])
    psi = PureState(np.array([1.0, 0.0]))
    with pytest.raises(ContractError):
        encode.phase_encoding_deviation([A], [0.5], 2, psi)  # <A> = 1 > 2^-2


def test_dump_load_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    H = _random_hermitian(rng, 3, norm=0.8)
    be = encode.block_encode(H, 1.0)
    path = tmp_path / "be.bin"
    encode.dump_unitary(be, path)
    back = encode.load_unitary(path)
    assert np.array_equal(back, be.unitary)
    assert path.stat().st_size == 16 + 16 * 36  # header + complex128 payload


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOTMAGIC" + b"\0" * 24)
    with pytest.raises(ValueError, match="not a block-encoding"):
        encode.load_unitary(path)


def test_block_encoding_validation():
    with pytest.raises(ValueError, match="not unitary"):
        encode.BlockEncoding(np.eye(4) * 0.5, system_dim=2, ancilla_dim=2, normalization=1.0)
    with pytest.raises(ValueError, match="dimension"):
        encode.BlockEncoding(np.eye(4), system_dim=3, ancilla_dim=2, normalization=1.0)
    with pytest.raises(NormalizationError):
        encode.BlockEncoding(np.eye(4), system_dim=2, ancilla_dim=2, normalization=-1.0)
