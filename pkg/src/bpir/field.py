"""Prime-field arithmetic and dense linear algebra over GF(q).

Matrices are plain ``numpy`` int64 arrays whose entries lie in ``[0, q)``.
Every product is reduced before it can overflow: the inner dimension of a
matrix product is chunked so that partial sums stay below 2**63.
"""

from __future__ import annotations

import numpy as np

from .errors import FieldTooSmallError, RngExhausted, SingularMatrixError

DEFAULT_MODULUS = 65537
RNG_ALGORITHM = "PCG64"
MAX_MODULUS = 2**31
_FULL_RANK_CAP = 1000
# below this many entries plain Python lists beat numpy's per-call overhead
_SMALL = 64


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
    for p in small:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def make_rng(seed: int) -> np.random.Generator:
    """The package-wide deterministic generator (PCG64, bit-identical across platforms)."""
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(seed: int, *offsets: int) -> int:
    """Child seed for a sub-stream (trial, thread, ...) of a master seed."""
    ss = np.random.SeedSequence([seed, *offsets])
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))


def _row_reduce_lists(a, limit, q):
    rows = len(a)
    pivots = []
    r = 0
    for c in range(limit):
        if r == rows:
            break
        p = next((i for i in range(r, rows) if a[i][c]), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = pow(a[r][c], -1, q)
        pivot_row = [v * inv % q for v in a[r]]
        a[r] = pivot_row
        for i in range(rows):
            f = a[i][c]
            if i != r and f:
                a[i] = [(v - f * w) % q for v, w in zip(a[i], pivot_row)]
        pivots.append(c)
        r += 1
    return np.array(a, dtype=np.int64).reshape(rows, -1), pivots


class PrimeField:
    """GF(q) for a prime 2 < q < 2**31."""

    def __init__(self, modulus: int = DEFAULT_MODULUS):
        modulus = int(modulus)
        if modulus <= 2:
            raise ValueError(f"modulus must exceed 2, got {modulus}")
        if modulus >= MAX_MODULUS:
            raise ValueError(f"modulus must be below 2**31, got {modulus}")
        if not is_prime(modulus):
            raise ValueError(f"modulus {modulus} is not prime")
        self.q = modulus
        self._chunk = max(1, (2**63 - 1) // ((modulus - 1) ** 2))

    def __repr__(self):
        return f"PrimeField({self.q})"

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.q == self.q

    def __hash__(self):
        return hash(("PrimeField", self.q))

    def require_codelength(self, n: int) -> None:
        """Distinct nonzero evaluation points 1..n need q > n."""
        if n >= self.q:
            raise FieldTooSmallError(
                f"field size q={self.q} too small: codeword length {n} needs q > {n}"
            )

    # scalars

    def inverse(self, x: int) -> int:
        x = int(x) % self.q
        if x == 0:
            raise ZeroDivisionError("zero has no inverse")
        return pow(x, -1, self.q)

    # arrays

    def array(self, values) -> np.ndarray:
        return np.asarray(values, dtype=np.int64) % self.q

    def matmul(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        inner = a.shape[-1]
        if inner <= self._chunk:
            return (a @ b) % self.q
        out = None
        for start in range(0, inner, self._chunk):
            stop = start + self._chunk
            part = (a[..., start:stop] @ b[start:stop]) % self.q
            out = part if out is None else (out + part) % self.q
        return out

    def random(self, shape, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.q, size=shape, dtype=np.int64)

    def vandermonde(self, points, k: int) -> np.ndarray:
        """Rows (1, x, x^2, ..., x^(k-1)) for each evaluation point x."""
        x = np.asarray(points, dtype=np.int64) % self.q
        v = np.ones((x.size, k), dtype=np.int64)
        for j in range(1, k):
            v[:, j] = v[:, j - 1] * x % self.q
        return v

    # elimination

    def row_reduce(self, m, ncols: int | None = None):
        """Reduced row echelon form; pivots are searched in the first ``ncols`` columns.

        Returns ``(rref, pivot_columns)``.
        """
        q = self.q
        a = np.array(m, dtype=np.int64) % q
        if a.ndim != 2:
            raise ValueError("expected a 2-D matrix")
        rows, cols = a.shape
        limit = cols if ncols is None else ncols
        if rows * cols <= _SMALL:
            return _row_reduce_lists(a.tolist(), limit, q)
        pivots = []
        r = 0
        for c in range(limit):
            if r == rows:
                break
            nz = np.flatnonzero(a[r:, c])
            if nz.size == 0:
                continue
            p = r + int(nz[0])
            if p != r:
                a[[r, p]] = a[[p, r]]
            a[r, c:] = a[r, c:] * pow(int(a[r, c]), -1, q) % q
            col = a[:, c].copy()
            col[r] = 0
            hit = np.flatnonzero(col)
            if hit.size:
                # entries left of c in the pivot row are already zero
                a[hit, c:] = (a[hit, c:] - col[hit, None] * a[r, c:]) % q
            pivots.append(c)
            r += 1
        return a, pivots

    def rank(self, m) -> int:
        m = np.asarray(m)
        if m.size == 0:
            return 0
        return len(self.row_reduce(m)[1])

    def invert(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=np.int64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"cannot invert non-square matrix of shape {m.shape}")
        n = m.shape[0]
        aug = np.concatenate([m % self.q, np.eye(n, dtype=np.int64)], axis=1)
        red, pivots = self.row_reduce(aug, ncols=n)
        if len(pivots) < n:
            raise SingularMatrixError(f"matrix is singular (rank {len(pivots)} < {n})")
        return red[:, n:]

    def solve(self, a, b):
        """One solution x of a @ x = b (free variables set to zero), or None if inconsistent."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        vec = b.ndim == 1
        rhs = b.reshape(a.shape[0], -1)
        n = a.shape[1]
        red, pivots = self.row_reduce(np.concatenate([a, rhs], axis=1), ncols=n)
        r = len(pivots)
        if np.any(red[r:, n:]):
            return None
        x = np.zeros((n, rhs.shape[1]), dtype=np.int64)
        x[pivots] = red[:r, n:]
        return x[:, 0] if vec else x

    def sample_full_rank(self, dim: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform draw from the invertible dim x dim matrices, by rejection."""
        if dim < 1:
            raise ValueError("dim must be at least 1")
        for _ in range(_FULL_RANK_CAP):
            m = self.random((dim, dim), rng)
            if self.rank(m) == dim:
                return m
        raise RngExhausted(f"no full-rank {dim}x{dim} draw in {_FULL_RANK_CAP} attempts")
