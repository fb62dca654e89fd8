"""Dense complex matrix substrate: block views, special matrices, random
unitaries and CMAT-JSON file I/O.

All matrices are plain numpy arrays of dtype complex128.  Block indices in
the public interface are 1-based (j, k = 1 .. r); a block covers consecutive
rows and columns of the parent matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "BlockPartition",
    "RandomSpec",
    "as_matrix",
    "multiply",
    "adjoint",
    "is_unitary",
    "block",
    "block_row_sum",
    "block_col_sum",
    "dft_matrix",
    "kronecker",
    "haar_random_unitary",
    "frobenius_distance",
    "save_matrix",
    "load_matrix",
]


@dataclass(frozen=True)
class BlockPartition:
    """Block grid of an n x n matrix: r = n/m blocks per side, each m x m."""

    n: int
    m: int
    r: int = field(init=False)
    q: int = field(init=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if self.n % self.m != 0:
            raise ValueError(f"block size m={self.m} does not divide n={self.n}")
        object.__setattr__(self, "r", self.n // self.m)
        object.__setattr__(self, "q", self.n - self.m)


@dataclass(frozen=True)
class RandomSpec:
    """Seeded request for one random unitary; equal seeds give equal matrices."""

    n: int
    seed: int


def as_matrix(values) -> np.ndarray:
    """Coerce input to a 2-D complex128 array, rejecting non-finite entries."""
    a = np.array(values, dtype=complex)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def multiply(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def adjoint(a) -> np.ndarray:
    """Conjugate transpose."""
    return as_matrix(a).conj().T.copy()


def is_unitary(a, tol: float) -> bool:
    """True iff ||a^H a - I||_F <= tol (a must be square)."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError("is_unitary needs a square matrix")
    n = a.shape[0]
    return float(np.linalg.norm(a.conj().T @ a - np.eye(n))) <= tol


def _check_partition(a: np.ndarray, p: BlockPartition):
    if a.shape != (p.n, p.n):
        raise ValueError(f"matrix shape {a.shape} does not match partition n={p.n}")


def block(a, p: BlockPartition, j: int, k: int) -> np.ndarray:
    """The m x m block at block row j, block column k (1-based)."""
    a = as_matrix(a)
    _check_partition(a, p)
    if not (1 <= j <= p.r and 1 <= k <= p.r):
        raise ValueError(f"block index ({j},{k}) out of range 1..{p.r}")
    m = p.m
    return a[(j - 1) * m : j * m, (k - 1) * m : k * m].copy()


def block_row_sum(a, p: BlockPartition, j: int) -> np.ndarray:
    """Sum of the r blocks in block row j (1-based)."""
    a = as_matrix(a)
    _check_partition(a, p)
    if not 1 <= j <= p.r:
        raise ValueError(f"block row {j} out of range 1..{p.r}")
    m = p.m
    strip = a[(j - 1) * m : j * m, :]
    return strip.reshape(m, p.r, m).sum(axis=1)


def block_col_sum(a, p: BlockPartition, k: int) -> np.ndarray:
    """Sum of the r blocks in block column k (1-based)."""
    a = as_matrix(a)
    _check_partition(a, p)
    if not 1 <= k <= p.r:
        raise ValueError(f"block column {k} out of range 1..{p.r}")
    m = p.m
    strip = a[:, (k - 1) * m : k * m]
    return strip.reshape(p.r, m, m).sum(axis=0)


def dft_matrix(r: int) -> np.ndarray:
    """Unitary r x r DFT: entry (j,k) = exp(-2*pi*i*j*k/r) / sqrt(r), 0-based."""
    if r < 1:
        raise ValueError("dft_matrix needs r >= 1")
    idx = np.arange(r)
    omega = np.exp(-2j * np.pi / r)
    return omega ** np.outer(idx, idx) / np.sqrt(r)


def kronecker(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def haar_random_unitary(spec: RandomSpec) -> np.ndarray:
    """Haar-distributed unitary: QR of a complex Gaussian matrix with the
    R-diagonal phase correction.  Deterministic per seed."""
    if spec.n < 1:
        raise ValueError("haar_random_unitary needs n >= 1")
    rng = np.random.default_rng(spec.seed)
    z = (rng.standard_normal((spec.n, spec.n)) + 1j * rng.standard_normal((spec.n, spec.n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r).copy()
    d[d == 0] = 1.0
    return q * (d / np.abs(d))


def frobenius_distance(a, b) -> float:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


# CMAT-JSON: {"rows": R, "cols": C, "data": [[[re, im], ...], ...]} row-major.

def save_matrix(path, a) -> None:
    """Write a matrix as CMAT-JSON."""
    a = as_matrix(a)
    payload = {
        "rows": a.shape[0],
        "cols": a.shape[1],
        "data": [[[float(v.real), float(v.imag)] for v in row] for row in a],
    }
    Path(path).write_text(json.dumps(payload))


def load_matrix(path) -> np.ndarray:
    """Read a CMAT-JSON matrix, rejecting shape mismatches and non-finite values."""
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or not {"rows", "cols", "data"} <= payload.keys():
        raise ValueError(f"{path}: missing CMAT-JSON keys rows/cols/data")
    rows, cols, data = payload["rows"], payload["cols"], payload["data"]
    if not (isinstance(rows, int) and isinstance(cols, int) and rows >= 1 and cols >= 1):
        raise ValueError(f"{path}: invalid dimensions rows={rows}, cols={cols}")
    if len(data) != rows or any(len(row) != cols for row in data):
        raise ValueError(f"{path}: data does not match declared shape {rows}x{cols}")
    try:
        a = np.array([[complex(re, im) for re, im in row] for row in data])
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed entries: {exc}") from exc
    return as_matrix(a)
