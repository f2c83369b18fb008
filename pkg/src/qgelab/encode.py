"""Matrix-level block-encoding machinery.

Everything here works on explicit (small) matrices: a block-encoding is a
unitary dilation whose designated top-left block equals the target operator
divided by a normalization.  Polynomial eigenvalue transforms are applied at
the eigenvalue-function level rather than through phase-sequence synthesis,
which keeps the block-diagonal (sector-wise) action exact.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import AmplificationOverflowError, ContractError, NormalizationError
from .fermion import Observable
from .statevector import PureState

_UNITARY_TOL = 1e-10


def _as_dense(op) -> np.ndarray:
    if isinstance(op, Observable):
        op = op.matrix
    if sparse.issparse(op):
        op = op.toarray()
    return np.asarray(op, dtype=np.complex128)


def _unitarity_gap(U: np.ndarray) -> float:
    return float(np.abs(U.conj().T @ U - np.eye(U.shape[0])).max())


@dataclass
class BlockEncoding:
    """A unitary whose top-left system block times ``normalization`` is the target."""

    unitary: np.ndarray
    system_dim: int
    ancilla_dim: int
    normalization: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.unitary = np.asarray(self.unitary, dtype=np.complex128)
        total = self.unitary.shape[0]
        if self.unitary.shape[0] != self.unitary.shape[1]:
            raise ValueError(f"block-encoding unitary must be square, got {self.unitary.shape}")
        if total != self.system_dim * self.ancilla_dim:
            raise ValueError(
                f"total dimension {total} != system {self.system_dim} x ancilla {self.ancilla_dim}"
            )
        if self.normalization <= 0:
            raise NormalizationError(f"normalization must be positive, got {self.normalization}")
        gap = _unitarity_gap(self.unitary)
        if gap > _UNITARY_TOL:
            raise ValueError(f"dilation is not unitary: deviation {gap:.3g}")

    @property
    def block(self) -> np.ndarray:
        d = self.system_dim
        return self.unitary[:d, :d]

    @property
    def encoded_operator(self) -> np.ndarray:
        return self.normalization * self.block


@dataclass(frozen=True)
class PolynomialSpec:
    """Real polynomial in the monomial or Chebyshev basis, low to high order."""

    coefficients: tuple[float, ...]
    basis: str = "monomial"

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not self.coefficients:
            raise ValueError("polynomial needs at least one coefficient")
        if self.basis not in ("monomial", "chebyshev"):
            raise ValueError(f"unknown polynomial basis {self.basis!r}")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def evaluate(self, x):
        if self.basis == "monomial":
            return np.polynomial.polynomial.polyval(x, self.coefficients)
        return np.polynomial.chebyshev.chebval(x, self.coefficients)

    def is_bounded_on_unit_interval(self, tol: float = 1e-12) -> bool:
        """Dense-sample check of |f| <= 1 on [-1, 1] at 10 x degree points."""
        xs = np.linspace(-1.0, 1.0, max(10 * self.degree, 16))
        return bool(np.abs(self.evaluate(xs)).max() <= 1.0 + tol)


def block_encode(O, alpha: float) -> BlockEncoding:
    """Two-block unitary dilation [[A, B], [B, -A]] with A = O/alpha, B = sqrt(I - A^2)."""
    dense = _as_dense(O)
    if np.abs(dense - dense.conj().T).max() > 1e-10:
        raise ValueError("block_encode expects a Hermitian operator")
    d = dense.shape[0]
    A = dense / alpha if alpha != 1.0 else dense
    w, V = np.linalg.eigh(A)
    if np.abs(w).max() > 1.0 + 1e-12:
        raise NormalizationError(
            f"operator norm {np.abs(w).max() * alpha:.6g} exceeds normalization {alpha:.6g}"
        )
    B = (V * np.sqrt(np.maximum(1.0 - w**2, 0.0))) @ V.conj().T
    U = np.block([[A, B], [B, -A]])
    return BlockEncoding(unitary=U, system_dim=d, ancilla_dim=2, normalization=float(alpha))


def controlled_lcu(x, encodings: list[BlockEncoding]) -> BlockEncoding:
    """Block-encode the coefficient-weighted average (1/M) sum_j x_j O_j.

    All inputs must share the system dimension and carry normalization 1; the
    output also has normalization 1 (|x_j| <= 1/2 keeps the average strictly
    subnormalized).  The ancilla budget a real select-and-prepare circuit
    would need, ceil(log2 M) + 1, is recorded in metadata for cost accounting.
    """
    x = np.asarray(x, dtype=np.float64)
    M = len(encodings)
    if M == 0 or x.shape != (M,):
        raise ValueError(f"coefficient vector shape {x.shape} does not match {M} encodings")
    if np.abs(x).max() > 0.5 + 1e-12:
        raise ValueError(f"coefficients must lie in [-1/2, 1/2], got max |x| = {np.abs(x).max()}")
    d = encodings[0].system_dim
    for be in encodings:
        if be.system_dim != d:
            raise ValueError(f"system dimension mismatch: {be.system_dim} != {d}")
        if abs(be.normalization - 1.0) > 1e-12:
            raise ValueError("controlled_lcu requires unit-normalized input encodings")
    S = np.zeros((d, d), dtype=np.complex128)
    for xj, be in zip(x, encodings):
        S += xj * be.encoded_operator
    S /= M
    out = block_encode(S, 1.0)
    out.metadata["ancilla_budget"] = math.ceil(math.log2(M)) + 1
    return out


def eigen_poly_transform(B: BlockEncoding, f: PolynomialSpec) -> BlockEncoding:
    """Apply f to the eigenvalues of the encoded operator.

    For a block-diagonal (sector-split) operator this acts on every block
    independently, because a function of a Hermitian matrix is basis-free.
    """
    O = B.encoded_operator
    if np.abs(O - O.conj().T).max() > 1e-10:
        raise ValueError("eigen_poly_transform expects a Hermitian encoded operator")
    if not f.is_bounded_on_unit_interval():
        raise NormalizationError("polynomial exceeds 1 in magnitude on [-1, 1]")
    w, V = np.linalg.eigh(O)
    fw = np.real(f.evaluate(w))
    if np.abs(fw).max() > 1.0 + 1e-12:
        raise NormalizationError(
            f"polynomial reaches {np.abs(fw).max():.6g} on the spectrum; cannot block-encode"
        )
    transformed = (V * fw) @ V.conj().T
    transformed = (transformed + transformed.conj().T) / 2.0
    out = block_encode(transformed, 1.0)
    out.metadata["degree"] = f.degree
    return out


@dataclass(frozen=True)
class AmplificationReport:
    """Outcome of a uniform-amplification validity check."""

    measured_norm: float
    bound: float
    holds: bool
    sample_fraction: float | None = None
    n_samples: int = 0


def uniform_amplify(
    B: BlockEncoding, sigma: float, margin: float, sample_norms=None
) -> tuple[BlockEncoding, AmplificationReport]:
    """Re-encode the same operator at the tighter normalization sigma.

    Valid exactly when the encoded operator's norm stays below sigma*(1-margin);
    outside that region the call fails loudly rather than distorting the
    spectrum.  ``sample_norms`` (norms of candidate encoded operators, same
    scale as this one) yields the fraction of a coefficient-vector ensemble
    for which the amplification would have been valid.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not 0 <= margin < 1:
        raise ValueError(f"margin must lie in [0, 1), got {margin}")
    O = B.encoded_operator
    measured = float(np.linalg.norm(O, 2))
    bound = sigma * (1.0 - margin)
    fraction = None
    n_samples = 0
    if sample_norms is not None:
        sample_norms = np.asarray(sample_norms, dtype=np.float64)
        n_samples = sample_norms.size
        fraction = float(np.mean(sample_norms <= bound))
    report = AmplificationReport(
        measured_norm=measured,
        bound=bound,
        holds=measured <= bound + 1e-12,
        sample_fraction=fraction,
        n_samples=n_samples,
    )
    if not report.holds:
        raise AmplificationOverflowError(
            f"encoded norm {measured:.6g} exceeds amplification bound {bound:.6g}",
            measured_norm=measured,
            bound=bound,
        )
    out = block_encode(O, float(sigma))
    out.metadata.update(B.metadata)
    out.metadata["amplified_from"] = B.normalization
    return out, report


def sampled_lcu_norms(observables, xs) -> np.ndarray:
    """Spectral norms of (1/M) sum_j x_j O_j for a batch of coefficient rows.

    Matches the scale of what :func:`controlled_lcu` encodes, so the result
    can feed ``uniform_amplify(..., sample_norms=...)`` directly.
    """
    mats = np.stack([_as_dense(o) for o in observables])
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    M = mats.shape[0]
    sums = np.einsum("sm,mij->sij", xs, mats, optimize=True) / M
    eigs = np.linalg.eigvalsh(sums)
    return np.abs(eigs).max(axis=1)


def evolve(O, t: float) -> np.ndarray:
    """Exact unitary e^{iOt} of a Hermitian generator, by eigendecomposition."""
    dense = _as_dense(O)
    if np.abs(dense - dense.conj().T).max() > 1e-10:
        raise ValueError("evolve expects a Hermitian generator")
    w, V = np.linalg.eigh(dense)
    return (V * np.exp(1j * w * t)) @ V.conj().T


def phase_encoding_deviation(A_set, x, q: int, psi) -> float:
    """Distance between true evolution and the ideal linear-phase oracle.

    Returns |<psi| e^{i t sum_j x_j A_j} |psi> - e^{i t sum_j x_j <A_j>}| at
    t = pi * 2^q.  Requires the recentred-observable contract
    |<A_j>| <= 2^{-q}; callers use this to justify feeding exact expectations
    straight into probe registers.
    """
    vec = psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi, dtype=np.complex128)
    x = np.asarray(x, dtype=np.float64)
    mats = [_as_dense(a) for a in A_set]
    if len(mats) != x.size:
        raise ValueError(f"{len(mats)} observables vs {x.size} coefficients")
    exps = np.array([np.vdot(vec, m @ vec).real for m in mats])
    cap = 2.0 ** (-q)
    if np.abs(exps).max() > cap + 1e-12:
        raise ContractError(
            f"recentred expectation {np.abs(exps).max():.6g} exceeds 2^-q = {cap:.6g}"
        )
    t = math.pi * 2.0**q
    H = np.einsum("j,jkl->kl", x, np.stack(mats))
    lhs = complex(np.vdot(vec, evolve(H, t) @ vec))
    rhs = np.exp(1j * t * float(x @ exps))
    return float(abs(lhs - rhs))


_MAGIC = b"QGEBE\0\0\0"


def dump_unitary(obj, path) -> None:
    """Binary debug dump: 16-byte header (magic + two u32 LE dims), then row-major complex128 LE."""
    U = obj.unitary if isinstance(obj, BlockEncoding) else np.asarray(obj, dtype=np.complex128)
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<II", U.shape[0], U.shape[1]))
        fh.write(np.ascontiguousarray(U, dtype="<c16").tobytes())


def load_unitary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:8] != _MAGIC:
            raise ValueError(f"{path}: not a block-encoding dump")
        rows, cols = struct.unpack("<II", header[8:])
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != rows * cols:
        raise ValueError(f"{path}: payload has {data.size} entries, expected {rows * cols}")
    return data.reshape(rows, cols).astype(np.complex128)
