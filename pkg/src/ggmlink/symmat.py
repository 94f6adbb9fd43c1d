"""Dense symmetric matrices and symmetric index-pair sets.

Matrices store a single (lower) triangle, so symmetry is exact by
construction and never drifts through arithmetic. Index pairs are 1-based
everywhere in the public interface; a pair (i, j) always means the
unordered pair, stored canonically with i >= j.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg


def _packed_size(dim: int) -> int:
    return dim * (dim + 1) // 2


def _tril_of(arr: np.ndarray) -> np.ndarray:
    """Packed lower triangle (row-major) of a square array."""
    return arr[np.tril_indices(arr.shape[0])]


class SymmetricMatrix:
    """Immutable dense symmetric matrix of order ``dim``.

    Only the lower triangle (including the diagonal) is stored; reads of
    (i, j) and (j, i) hit the same entry. Indices are 1-based.
    """

    __slots__ = ("dim", "_packed")

    def __init__(self, dim: int, packed: np.ndarray):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        packed = np.asarray(packed, dtype=np.float64)
        if packed.shape != (_packed_size(dim),):
            raise ValueError(
                f"packed triangle has {packed.size} entries, "
                f"expected {_packed_size(dim)} for dim {dim}"
            )
        packed = packed.copy()
        packed.setflags(write=False)
        self.dim = dim
        self._packed = packed

    # ---- constructors ----

    @classmethod
    def from_array(cls, arr, tol: float = 1e-12) -> "SymmetricMatrix":
        """Wrap a full square array, verifying symmetry within ``tol``."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {arr.shape}")
        if arr.size and np.max(np.abs(arr - arr.T)) > tol:
            raise ValueError("matrix is not symmetric within tolerance")
        return cls(arr.shape[0], _tril_of(arr))

    @classmethod
    def zeros(cls, dim: int) -> "SymmetricMatrix":
        return cls(dim, np.zeros(_packed_size(dim)))

    @classmethod
    def identity(cls, dim: int) -> "SymmetricMatrix":
        return cls.from_array(np.eye(dim))

    @classmethod
    def diagonal(cls, values) -> "SymmetricMatrix":
        return cls.from_array(np.diag(np.asarray(values, dtype=np.float64)))

    # ---- access ----

    def to_array(self) -> np.ndarray:
        """Full dense (dim, dim) array; both triangles filled."""
        full = np.zeros((self.dim, self.dim))
        full[np.tril_indices(self.dim)] = self._packed
        full = full + np.tril(full, -1).T
        return full

    def packed(self) -> np.ndarray:
        """Read-only packed lower triangle (row-major)."""
        return self._packed

    def __getitem__(self, key) -> float:
        i, j = key
        if not (1 <= i <= self.dim and 1 <= j <= self.dim):
            raise IndexError(f"index ({i}, {j}) out of range for dim {self.dim}")
        if i < j:
            i, j = j, i
        return float(self._packed[(i - 1) * i // 2 + (j - 1)])

    # ---- arithmetic (symmetry is closed under these) ----

    def __add__(self, other: "SymmetricMatrix") -> "SymmetricMatrix":
        self._check_dim(other)
        return SymmetricMatrix(self.dim, self._packed + other._packed)

    def __sub__(self, other: "SymmetricMatrix") -> "SymmetricMatrix":
        self._check_dim(other)
        return SymmetricMatrix(self.dim, self._packed - other._packed)

    def __mul__(self, scalar: float) -> "SymmetricMatrix":
        return SymmetricMatrix(self.dim, self._packed * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SymmetricMatrix":
        return SymmetricMatrix(self.dim, -self._packed)

    def _check_dim(self, other: "SymmetricMatrix") -> None:
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __repr__(self) -> str:
        return f"SymmetricMatrix(dim={self.dim})"


class SupportPattern:
    """Symmetric set of 1-based index pairs over {1..dim} x {1..dim}.

    Pairs are stored canonically with i >= j and interpreted symmetrically:
    (i, j) is a member iff (j, i) is.
    """

    __slots__ = ("dim", "_pairs")

    def __init__(self, dim: int, pairs):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        canon = set()
        for i, j in pairs:
            i, j = int(i), int(j)
            if i < j:
                i, j = j, i
            if not (1 <= j <= i <= dim):
                raise ValueError(f"pair ({i}, {j}) out of range for dim {dim}")
            canon.add((i, j))
        self.dim = dim
        self._pairs = frozenset(canon)

    # ---- constructors ----

    @classmethod
    def empty(cls, dim: int) -> "SupportPattern":
        return cls(dim, ())

    @classmethod
    def diagonal(cls, dim: int) -> "SupportPattern":
        return cls(dim, ((i, i) for i in range(1, dim + 1)))

    @classmethod
    def full(cls, dim: int) -> "SupportPattern":
        return cls(dim, ((i, j) for i in range(1, dim + 1) for j in range(1, i + 1)))

    # ---- queries ----

    def __contains__(self, pair) -> bool:
        i, j = pair
        if i < j:
            i, j = j, i
        return (i, j) in self._pairs

    def __len__(self) -> int:
        return len(self._pairs)

    def __iter__(self):
        return iter(self.pairs())

    def pairs(self) -> list:
        """Canonical (i >= j) pairs in sorted order."""
        return sorted(self._pairs)

    def off_diagonal(self) -> list:
        """Canonical pairs with i > j, sorted."""
        return sorted(p for p in self._pairs if p[0] != p[1])

    def union(self, other: "SupportPattern") -> "SupportPattern":
        self._check_dim(other)
        return SupportPattern(self.dim, self._pairs | other._pairs)

    def minus(self, other: "SupportPattern") -> "SupportPattern":
        self._check_dim(other)
        return SupportPattern(self.dim, self._pairs - other._pairs)

    def complement(self) -> "SupportPattern":
        """All pairs of the full pattern not in this one."""
        return SupportPattern.full(self.dim).minus(self)

    def issubset(self, other: "SupportPattern") -> bool:
        self._check_dim(other)
        return self._pairs <= other._pairs

    def mask(self) -> np.ndarray:
        """Symmetric boolean (dim, dim) membership mask, 0-based."""
        m = np.zeros((self.dim, self.dim), dtype=bool)
        for i, j in self._pairs:
            m[i - 1, j - 1] = True
            m[j - 1, i - 1] = True
        return m

    def __eq__(self, other) -> bool:
        if not isinstance(other, SupportPattern):
            return NotImplemented
        return self.dim == other.dim and self._pairs == other._pairs

    def __hash__(self) -> int:
        return hash((self.dim, self._pairs))

    def _check_dim(self, other: "SupportPattern") -> None:
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __repr__(self) -> str:
        return f"SupportPattern(dim={self.dim}, npairs={len(self._pairs)})"


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def project_support(a: SymmetricMatrix, omega: SupportPattern) -> SymmetricMatrix:
    """Zero every entry of ``a`` outside ``omega`` (symmetrically)."""
    if a.dim != omega.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {omega.dim}")
    full = a.to_array()
    out = np.where(omega.mask(), full, 0.0)
    return SymmetricMatrix(a.dim, _tril_of(out))


def cholesky(a: SymmetricMatrix):
    """Lower-triangular L with L L^T = a, or None if a is not positive definite.

    The None return is the positive-definiteness oracle used throughout:
    no eigendecomposition, and non-PD input is a signal, not a crash.
    """
    return _chol_or_none(a.to_array())


def _chol_or_none(full: np.ndarray):
    # ValueError covers non-finite entries, which are never PD.
    try:
        return scipy.linalg.cholesky(full, lower=True)
    except (scipy.linalg.LinAlgError, ValueError):
        return None


def log_det(a: SymmetricMatrix) -> float:
    """log det of a positive definite matrix, via its Cholesky factor."""
    factor = cholesky(a)
    if factor is None:
        raise ValueError("log_det requires a positive definite matrix")
    return float(2.0 * np.sum(np.log(np.diag(factor))))


def inverse(a: SymmetricMatrix) -> SymmetricMatrix:
    """Inverse of a positive definite matrix; the result is symmetric PD."""
    factor = cholesky(a)
    if factor is None:
        raise ValueError("inverse requires a positive definite matrix")
    inv = scipy.linalg.cho_solve((factor, True), np.eye(a.dim))
    # cho_solve output is symmetric only up to rounding; canonicalize from
    # the lower triangle.
    return SymmetricMatrix(a.dim, _tril_of(inv))


def frobenius_norm(a: SymmetricMatrix) -> float:
    """Frobenius norm of the full matrix (off-diagonals counted twice)."""
    return float(np.linalg.norm(a.to_array()))


def support_of(a: SymmetricMatrix, zero_tol: float) -> SupportPattern:
    """Pairs where |a[i, j]| exceeds ``zero_tol`` (strictly)."""
    if zero_tol < 0:
        raise ValueError("zero_tol must be >= 0")
    full = a.to_array()
    ii, jj = np.nonzero(np.abs(np.tril(full)) > zero_tol)
    return SupportPattern(a.dim, zip(ii + 1, jj + 1))


# ---------------------------------------------------------------------------
# Text formats
# ---------------------------------------------------------------------------
# Matrix file: first line m, then m rows of m whitespace-separated decimals.
# Support file: first line m, then one "i j" pair per line.
# Lines starting with '#' are comments and skipped on read.

def _data_lines(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]


def write_matrix(a: SymmetricMatrix, path, header: str | None = None) -> None:
    full = a.to_array()
    lines = []
    if header:
        lines.append(f"# {header}")
    lines.append(str(a.dim))
    for row in full:
        lines.append(" ".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix(path, tol: float = 1e-12) -> SymmetricMatrix:
    lines = _data_lines(path)
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    dim = int(lines[0])
    if len(lines) != dim + 1:
        raise ValueError(f"{path}: expected {dim} rows, found {len(lines) - 1}")
    rows = [[float(tok) for tok in ln.split()] for ln in lines[1:]]
    arr = np.array(rows, dtype=np.float64)
    if arr.shape != (dim, dim):
        raise ValueError(f"{path}: malformed rows for dim {dim}")
    return SymmetricMatrix.from_array(arr, tol=tol)


def write_support(omega: SupportPattern, path, header: str | None = None) -> None:
    lines = []
    if header:
        lines.append(f"# {header}")
    lines.append(str(omega.dim))
    for i, j in omega.pairs():
        lines.append(f"{i} {j}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_support(path) -> SupportPattern:
    lines = _data_lines(path)
    if not lines:
        raise ValueError(f"{path}: empty support file")
    dim = int(lines[0])
    pairs = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"{path}: bad support line {ln!r}")
        pairs.append((int(parts[0]), int(parts[1])))
    return SupportPattern(dim, pairs)
