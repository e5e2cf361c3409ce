"""Vandermonde MDS codes: construction, puncturing, encoding and decoding.

A generator of length ``n`` and dimension ``k`` has row ``i`` equal to
``(1, x_i, ..., x_i^(k-1))``, so a codeword is the evaluation of the message
polynomial at the evaluation points and any ``k`` rows are invertible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property, lru_cache

import numpy as np

from .errors import DecodeFailure, InstanceTooLarge, PunctureError
from .field import PrimeField

ERASED = -1
ORACLE_LIMIT = 10**7


@dataclass(frozen=True, eq=False)
class MdsGenerator:
    n: int
    k: int
    eval_points: tuple
    field: PrimeField

    def __post_init__(self):
        if not 0 < self.k <= self.n:
            raise ValueError(f"need 0 < k <= n, got n={self.n}, k={self.k}")
        if len(self.eval_points) != self.n:
            raise ValueError("one evaluation point per codeword position")
        if len(set(self.eval_points)) != self.n:
            raise ValueError("evaluation points must be distinct")
        if self.n > self.field.q:
            raise ValueError(f"n={self.n} exceeds field size {self.field.q}")

    @cached_property
    def matrix(self) -> np.ndarray:
        m = self.field.vandermonde(self.eval_points, self.k)
        m.flags.writeable = False
        return m

    @property
    def distance(self) -> int:
        return self.n - self.k + 1

    def select(self, rows) -> "MdsGenerator":
        """Sub-generator on the given codeword positions, in the given order."""
        pts = tuple(self.eval_points[r] for r in rows)
        return MdsGenerator(len(pts), self.k, pts, self.field)


@lru_cache(maxsize=256)
def make_generator(n: int, k: int, field: PrimeField) -> MdsGenerator:
    if n > field.q:
        raise ValueError(f"codeword length {n} exceeds field size {field.q}")
    field.require_codelength(n)
    return MdsGenerator(n, k, tuple(range(1, n + 1)), field)


def encode(gen: MdsGenerator, message) -> np.ndarray:
    message = np.asarray(message, dtype=np.int64)
    if message.shape[0] != gen.k:
        raise ValueError(f"message length {message.shape[0]} != k={gen.k}")
    return gen.field.matmul(gen.matrix, message)


def puncture(gen: MdsGenerator, deleted) -> MdsGenerator:
    """Delete the positions in ``deleted``; the result stays MDS while z < n - k."""
    deleted = set(int(d) for d in deleted)
    if any(not 0 <= d < gen.n for d in deleted):
        raise PunctureError("puncture position out of range")
    z = len(deleted)
    if z >= gen.n - gen.k:
        raise PunctureError(
            f"puncturing z={z} positions of an ({gen.n},{gen.k}) code needs z < n - k = {gen.n - gen.k}"
        )
    return gen.select([i for i in range(gen.n) if i not in deleted])


@dataclass(frozen=True)
class ReceivedWord:
    """Received symbols; erased positions hold ``ERASED`` instead of a field value."""

    symbols: np.ndarray
    erasures: frozenset = dc_field(default_factory=frozenset)

    @classmethod
    def from_values(cls, values):
        """Build from a sequence where ``None`` marks an erasure."""
        erasures = frozenset(i for i, v in enumerate(values) if v is None)
        symbols = np.array([ERASED if v is None else int(v) for v in values], dtype=np.int64)
        return cls(symbols, erasures)

    @classmethod
    def with_erasures(cls, symbols, erasures=()):
        symbols = np.array(symbols, dtype=np.int64)
        erasures = frozenset(int(e) for e in erasures)
        if erasures:
            symbols[list(erasures)] = ERASED
        return cls(symbols, erasures)


@dataclass(frozen=True)
class DecodeOutcome:
    message: np.ndarray
    codeword: np.ndarray
    error_positions: frozenset
    distance: int = 0
    ambiguous: bool = False


def _poly_divmod(num, den, q):
    """Quotient and remainder of polynomials given low-degree-first."""
    num = [int(c) for c in num]
    den = [int(c) for c in den]
    while den and den[-1] == 0:
        den.pop()
    lead_inv = pow(den[-1], -1, q)
    dd = len(den) - 1
    if len(num) - 1 < dd:
        return [0], num
    quot = [0] * (len(num) - dd)
    for i in range(len(num) - 1, dd - 1, -1):
        c = num[i] * lead_inv % q
        quot[i - dd] = c
        if c:
            for j in range(dd + 1):
                num[i - dd + j] = (num[i - dd + j] - c * den[j]) % q
    return quot, num[:dd]


def decode(gen: MdsGenerator, rec: ReceivedWord) -> DecodeOutcome:
    """Correct up to floor((d - 1 - rho)/2) errors plus rho erasures.

    Berlekamp-Welch over the non-erased positions.  The error-locator degree
    starts at the maximal radius and steps down if the key equation has no
    usable solution.
    """
    field, q = gen.field, gen.field.q
    symbols = np.asarray(rec.symbols, dtype=np.int64)
    if symbols.shape != (gen.n,):
        raise ValueError(f"received length {symbols.shape} != n={gen.n}")
    live = np.array([i for i in range(gen.n) if i not in rec.erasures], dtype=np.int64)
    k = gen.k
    n_live = live.size
    if n_live < k:
        raise DecodeFailure(
            f"{len(rec.erasures)} erasures leave {n_live} < k={k} positions",
            erasures=len(rec.erasures), radius=0,
        )
    x = np.array(gen.eval_points, dtype=np.int64)[live] % q
    r = symbols[live] % q
    e_max = (n_live - k) // 2
    powers = field.vandermonde(x, e_max + k + 1)
    for e in range(e_max, -1, -1):
        # unknowns: Q_0..Q_{e+k-1}, E_0..E_{e-1}; E monic of degree e
        a = np.concatenate([powers[:, : e + k], (-r[:, None] * powers[:, :e]) % q], axis=1)
        b = r * powers[:, e] % q
        sol = field.solve(a, b)
        if sol is None:
            continue
        qpoly = sol[: e + k]
        epoly = list(sol[e + k:]) + [1]
        msg, rem = _poly_divmod(qpoly, epoly, q)
        if any(rem):
            continue
        msg = (msg + [0] * k)[:k]
        message = np.array(msg, dtype=np.int64)
        codeword = field.matmul(gen.matrix, message)
        wrong = live[codeword[live] != r]
        if wrong.size <= e:
            return DecodeOutcome(message, codeword, frozenset(int(i) for i in wrong), int(wrong.size))
    raise DecodeFailure(
        f"no codeword within radius {e_max} of received word "
        f"(n={gen.n}, k={k}, erasures={len(rec.erasures)})",
        erasures=len(rec.erasures), radius=e_max,
    )


@lru_cache(maxsize=64)
def _info_set_table(points: tuple, k: int, q: int, live: tuple):
    field = PrimeField(q)
    g = field.vandermonde(points, k)
    subsets = list(itertools.combinations(live, k))
    inverses = np.stack([field.invert(g[list(s)]) for s in subsets])
    return np.array(subsets, dtype=np.int64), inverses


def oracle_decode(gen: MdsGenerator, rec: ReceivedWord) -> DecodeOutcome:
    """Brute-force nearest-codeword search, used to cross-check ``decode``.

    Enumerates all q^k messages when that is at most 10^7; otherwise, for
    n <= 20, every codeword through k non-erased received symbols (which
    contains every codeword within distance n - rho - k of the word).
    Ties go to the lexicographically smallest message and set ``ambiguous``.
    """
    field, q, k = gen.field, gen.field.q, gen.k
    symbols = np.asarray(rec.symbols, dtype=np.int64)
    live = tuple(i for i in range(gen.n) if i not in rec.erasures)
    if len(live) < k:
        raise DecodeFailure("too many erasures for any decoding")
    live_idx = np.array(live, dtype=np.int64)
    r = symbols[live_idx] % q
    if q**k <= ORACLE_LIMIT:
        best = None
        chunk = max(1, 2**20 // max(1, gen.n))
        total = q**k
        weights = q ** np.arange(k, dtype=np.int64)
        for start in range(0, total, chunk):
            idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
            msgs = (idx[:, None] // weights) % q
            words = field.matmul(msgs, gen.matrix[live_idx].T)
            dist = np.count_nonzero(words != r, axis=1)
            best = _merge_best(best, msgs, dist)
        candidates = best
    else:
        if gen.n > 20 or math.comb(len(live), k) > ORACLE_LIMIT:
            raise InstanceTooLarge(
                f"oracle_decode refuses n={gen.n}, k={k}, q={q}: enumeration exceeds {ORACLE_LIMIT}"
            )
        subsets, inverses = _info_set_table(tuple(gen.eval_points), k, q, live)
        rs = symbols[subsets] % q
        msgs = np.einsum("sij,sj->si", inverses, rs) % q
        msgs = np.unique(msgs, axis=0)
        words = field.matmul(msgs, gen.matrix[live_idx].T)
        dist = np.count_nonzero(words != r, axis=1)
        candidates = _merge_best(None, msgs, dist)
    dmin, msgs = candidates
    order = np.lexsort(msgs.T[::-1])
    message = msgs[order[0]]
    codeword = field.matmul(gen.matrix, message)
    wrong = frozenset(int(i) for i in live_idx[codeword[live_idx] != r])
    return DecodeOutcome(message, codeword, wrong, int(dmin), ambiguous=len(msgs) > 1)


def _merge_best(best, msgs, dist):
    m = int(dist.min())
    here = msgs[dist == m]
    if best is None or m < best[0]:
        return m, here
    if m == best[0]:
        return m, np.concatenate([best[1], here])
    return best
