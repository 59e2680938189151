"""Dense complex linear algebra for operators on tensor-product spaces.

Everything downstream leans on the conventions fixed here:

* matrices are numpy ``complex128`` arrays, row-major, and the composite
  index of a Kronecker product ``A (x) B`` is ``i * cols(B) + k``;
* transposes and partial transposes are taken in the computational basis;
* Hermiticity is checked entrywise to ``HERMITIAN_TOL``, positivity via the
  smallest eigenvalue to ``PSD_TOL``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-9


class DimensionError(ValueError):
    """Operand shapes do not match the declared tensor structure."""


class ContractError(ValueError):
    """An input violates a documented precondition."""


def as_matrix(a) -> np.ndarray:
    """Coerce to a square complex matrix."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def kron(a, b) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


@dataclass(frozen=True)
class TensorShape:
    """Ordered factor dimensions of a tensor-product space."""

    factor_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"factor dimensions must be positive, got {dims}")
        object.__setattr__(self, "factor_dims", dims)

    @property
    def total(self) -> int:
        return prod(self.factor_dims)

    def check(self, a: np.ndarray):
        if a.shape != (self.total, self.total):
            raise DimensionError(
                f"matrix of shape {a.shape} does not act on factors {self.factor_dims}"
            )


def _dims_of(shape) -> tuple[int, ...]:
    if isinstance(shape, TensorShape):
        return shape.factor_dims
    return TensorShape(tuple(shape)).factor_dims


def partial_trace(a, shape, keep) -> np.ndarray:
    """Trace out every tensor factor not listed in ``keep``.

    ``keep`` is a set of factor indices; the result is ordered by ascending
    factor index.  Works on arbitrary (not necessarily Hermitian) matrices.
    """
    dims = _dims_of(shape)
    a = as_matrix(a)
    n = len(dims)
    if a.shape[0] != prod(dims):
        raise DimensionError(f"matrix of shape {a.shape} does not act on factors {dims}")
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ContractError("keep must name at least one factor")
    if keep[0] < 0 or keep[-1] >= n:
        raise DimensionError(f"keep {keep} out of range for {n} factors")
    t = a.reshape(dims + dims)
    ket = list(range(n))
    bra = [i if i not in keep else n + i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    r = np.einsum(t, ket + bra, out)
    dk = prod(dims[i] for i in keep)
    return np.ascontiguousarray(r.reshape(dk, dk))


def partial_transpose(a, shape, positions) -> np.ndarray:
    """Transpose the listed tensor factors in the computational basis."""
    dims = _dims_of(shape)
    a = as_matrix(a)
    n = len(dims)
    if a.shape[0] != prod(dims):
        raise DimensionError(f"matrix of shape {a.shape} does not act on factors {dims}")
    t = a.reshape(dims + dims)
    axes = list(range(2 * n))
    for p in positions:
        p = int(p)
        if p < 0 or p >= n:
            raise DimensionError(f"position {p} out of range for {n} factors")
        axes[p], axes[n + p] = axes[n + p], axes[p]
    return np.ascontiguousarray(t.transpose(axes).reshape(a.shape))


def embed_operator(op, shape, positions) -> np.ndarray:
    """Embed ``op`` acting on the listed factors into the full space.

    Identity is placed on every other factor.  ``op``'s own factor order is
    the order in which ``positions`` are listed.
    """
    dims = _dims_of(shape)
    op = as_matrix(op)
    n = len(dims)
    positions = [int(p) for p in positions]
    if len(set(positions)) != len(positions):
        raise DimensionError(f"repeated positions in {positions}")
    if any(p < 0 or p >= n for p in positions):
        raise DimensionError(f"positions {positions} out of range for {n} factors")
    ds = prod(dims[p] for p in positions)
    if op.shape != (ds, ds):
        raise DimensionError(f"operator shape {op.shape} does not match factors {positions}")
    rest = [i for i in range(n) if i not in positions]
    dr = prod(dims[i] for i in rest) if rest else 1
    big = np.kron(op, np.eye(dr))
    order = positions + rest
    perm = list(np.argsort(order))
    shp = [dims[f] for f in order]
    t = big.reshape(shp + shp)
    t = t.transpose(perm + [n + p for p in perm])
    d = prod(dims)
    return np.ascontiguousarray(t.reshape(d, d))


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    a = as_matrix(a)
    return bool(np.abs(a - a.conj().T).max() <= tol)


def hermitize(a) -> np.ndarray:
    a = as_matrix(a)
    return (a + a.conj().T) / 2


def require_hermitian(a, tol: float = HERMITIAN_TOL, what: str = "matrix") -> np.ndarray:
    """Check Hermiticity to ``tol`` and return the symmetrized matrix.

    Symmetrizing after the check absorbs round-off without masking modeling
    errors.
    """
    a = as_matrix(a)
    dev = np.abs(a - a.conj().T).max()
    if dev > tol:
        raise ContractError(f"{what} is not Hermitian (deviation {dev:.3e} > {tol:.1e})")
    return (a + a.conj().T) / 2


def eig_hermitian(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and matching eigenvector columns of a Hermitian matrix."""
    a = require_hermitian(a)
    w, v = np.linalg.eigh(a)
    return w[::-1].copy(), np.ascontiguousarray(v[:, ::-1])


def is_psd(a, tol: float = PSD_TOL) -> bool:
    """True iff the smallest eigenvalue of (the symmetrized) ``a`` is >= -tol."""
    a = hermitize(a)
    w = np.linalg.eigvalsh(a)
    return bool(w[0] >= -tol)


def op_norm(a, tol: float = PSD_TOL) -> float:
    """Largest eigenvalue of a Hermitian PSD matrix."""
    a = require_hermitian(a, what="op_norm input")
    w = np.linalg.eigvalsh(a)
    if w[0] < -tol:
        raise ContractError(f"op_norm input is not PSD (min eigenvalue {w[0]:.3e})")
    return float(max(w[-1], 0.0))


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Orthonormal (Frobenius) basis of d x d Hermitian matrices; d^2 elements."""
    if d < 1:
        raise DimensionError("dimension must be positive")
    basis = []
    for j in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[j, j] = 1.0
        basis.append(e)
    s = 1.0 / np.sqrt(2.0)
    for j in range(d):
        for k in range(j + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[j, k] = s
            e[k, j] = s
            basis.append(e)
            e = np.zeros((d, d), dtype=complex)
            e[j, k] = 1j * s
            e[k, j] = -1j * s
            basis.append(e)
    return basis


def swap_matrix(d: int) -> np.ndarray:
    """Exchange operator on C^d (x) C^d."""
    w = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            w[i * d + j, j * d + i] = 1.0
    return w


def matrix_to_json(a) -> dict:
    """Encode a complex matrix as ``{"rows", "cols", "data"}`` with row-major [re, im] pairs."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {a.shape}")
    data = [[float(z.real), float(z.imag)] for z in a.ravel()]
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]), "data": data}


def matrix_from_json(obj) -> np.ndarray:
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError) as e:
        raise ContractError(f"malformed matrix object: {e}")
    if rows < 1 or cols < 1:
        raise ContractError(f"matrix dimensions must be positive, got {rows}x{cols}")
    if len(data) != rows * cols:
        raise ContractError(f"matrix data has {len(data)} entries, expected {rows * cols}")
    flat = np.empty(rows * cols, dtype=complex)
    for i, pair in enumerate(data):
        if len(pair) != 2:
            raise ContractError(f"entry {i} is not a [re, im] pair")
        flat[i] = float(pair[0]) + 1j * float(pair[1])
    return flat.reshape(rows, cols)
