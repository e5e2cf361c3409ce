"""Query plans for Byzantine-resilient, T-private retrieval.

Messages and databases carry 1-based labels (as in the query tables);
codeword coordinates are 0-based array positions.

Vocabulary used throughout:

* ``effective`` is N - 2B - U, the number of databases the scheme may treat as
  honest and responsive.
* ``L_sets`` are the subsets of {1..M} containing the desired index,
  ``K_sets`` the nonempty subsets avoiding it.  Query group ``S`` asks every
  database for ``(effective - T)^(|S|-1) * T^(M-|S|)`` symbols.
* The desired layer is the outer codeword ``X = G_outer S_l W_l``.  Each
  K-set ``K`` owns a generator ``G_K`` of shape (N*alpha/T, alpha); its first
  ``u_len`` coordinates are downloaded as aligned sums and the remaining
  ``sigma_len`` coordinates ride along as side information on the mixed
  query for ``K + {l}``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from math import comb

import numpy as np

from .errors import RegimeError
from .field import DEFAULT_MODULUS, PrimeField
from .mds import MdsGenerator, make_generator


class Regime(str, enum.Enum):
    FULL = "FULL"
    TRIVIAL = "TRIVIAL"
    INFEASIBLE = "INFEASIBLE"


@dataclass(frozen=True)
class Params:
    N: int
    M: int
    T: int
    B: int
    U: int = 0
    q: int = DEFAULT_MODULUS
    seed: int = 0

    def __post_init__(self):
        for name in ("N", "M", "T", "B", "U", "q", "seed"):
            if not isinstance(getattr(self, name), (int, np.integer)):
                raise TypeError(f"{name} must be an integer")
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.B < 0 or self.U < 0:
            raise ValueError("B and U must be non-negative")

    @property
    def effective(self) -> int:
        return self.N - 2 * self.B - self.U

    @property
    def responsive(self) -> int:
        return self.N - self.U

    @property
    def regime(self) -> Regime:
        return classify_regime(self)

    @cached_property
    def field(self) -> PrimeField:
        return PrimeField(self.q)


def classify_regime(p: Params) -> Regime:
    if 2 * p.B + p.T + p.U < p.N:
        return Regime.FULL
    if 2 * p.B + 1 <= p.N - p.U <= 2 * p.B + p.T:
        return Regime.TRIVIAL
    return Regime.INFEASIBLE


def regime_violation(p: Params) -> str:
    """Human-readable statement of why ``p`` is not in the FULL regime."""
    r = classify_regime(p)
    if r is Regime.FULL:
        return ""
    lhs = f"2B+T+U={2 * p.B + p.T + p.U}" if p.U else f"2B+T={2 * p.B + p.T}"
    if r is Regime.TRIVIAL:
        return f"{lhs} >= N={p.N}: trivial regime, use --trivial"
    return f"N-U={p.N - p.U} < 2B+1={2 * p.B + 1}: infeasible, capacity is 0"


def _require_full(p: Params):
    if classify_regime(p) is not Regime.FULL:
        raise RegimeError(regime_violation(p))


@dataclass(frozen=True)
class SetSystem:
    M: int
    desired: int
    L_sets: tuple
    K_sets: tuple

    @property
    def delta(self) -> int:
        return len(self.L_sets)

    @property
    def Delta(self) -> int:
        return 2 ** (self.M - 2) if self.M >= 2 else 0

    def containing(self, k: int) -> list:
        """Indices into ``K_sets`` of the sets containing message ``k``, in order."""
        return [i for i, s in enumerate(self.K_sets) if k in s]

    def mixed_partner(self, i: int) -> int:
        """Index j with L_sets[j] == K_sets[i] + {desired}."""
        target = tuple(sorted(self.K_sets[i] + (self.desired,)))
        return self.L_sets.index(target)


def _ordered(sets):
    return tuple(sorted(sets, key=lambda s: (len(s), s)))


def enumerate_sets(M: int, desired: int) -> SetSystem:
    if not 1 <= desired <= M:
        raise ValueError(f"desired index {desired} outside 1..{M}")
    others = [m for m in range(1, M + 1) if m != desired]
    K = [c for r in range(1, M) for c in itertools.combinations(others, r)]
    L = [tuple(sorted(c + (desired,))) for c in [()] + K]
    return SetSystem(M, desired, _ordered(L), _ordered(K))


@dataclass(frozen=True)
class SchemeDims:
    L: int
    effective: int
    alpha: tuple
    u_len: tuple
    sigma_len: tuple
    code_len: tuple
    x_len: tuple
    per_round: tuple
    per_db: int
    D: int
    outer_len: int
    band_rows: int
    queried: int


def group_size(p: Params, size: int) -> int:
    """Symbols per database for a query group over ``size`` messages."""
    e = p.effective
    return (e - p.T) ** (size - 1) * p.T ** (p.M - size)


def compute_dims(p: Params, ss: SetSystem) -> SchemeDims:
    _require_full(p)
    N, M, T = p.N, p.M, p.T
    e = p.effective
    alpha = tuple(e * (e - T) ** (len(K) - 1) * T ** (M - len(K)) for K in ss.K_sets)
    u_len = tuple(N * a // e for a in alpha)
    sigma_len = tuple((e - T) * u // T for u in u_len)
    code_len = tuple(N * a // T for a in alpha)
    x_len = tuple(N * group_size(p, len(S)) for S in ss.L_sets)
    per_round = tuple(comb(M, i) * (e - T) ** (i - 1) * T ** (M - i) for i in range(1, M + 1))
    per_db = sum(per_round)
    dims = SchemeDims(
        L=e**M,
        effective=e,
        alpha=alpha,
        u_len=u_len,
        sigma_len=sigma_len,
        code_len=code_len,
        x_len=x_len,
        per_round=per_round,
        per_db=per_db,
        D=p.responsive * per_db,
        outer_len=N * e ** (M - 1),
        band_rows=T * e ** (M - 1),
        queried=N * per_db,
    )
    _check_dims(p, ss, dims)
    return dims


def _check_dims(p: Params, ss: SetSystem, d: SchemeDims):
    e, T, N, M = d.effective, p.T, p.N, p.M
    for a, u, s, n in zip(d.alpha, d.u_len, d.sigma_len, d.code_len):
        if a % T or a % e or u + s != n:
            raise AssertionError(f"inconsistent K-layer sizes alpha={a}, u={u}, sigma={s}, n={n}")
    if sum(d.x_len) != d.outer_len:
        raise AssertionError("desired segments do not tile the outer codeword")
    for k in range(1, M + 1):
        if k == ss.desired:
            continue
        rows = sum(d.alpha[i] for i in ss.containing(k))
        if rows != d.band_rows or rows > d.L:
            raise AssertionError(f"message {k} consumes {rows} mixing rows, expected {d.band_rows}")
        if sum(d.code_len[i] for i in ss.containing(k)) != d.outer_len:
            raise AssertionError(f"layer of message {k} has wrong length")
    if N * d.per_db != sum(d.x_len) + sum(d.u_len):
        raise AssertionError("per-database download does not match layer sizes")


@dataclass(frozen=True, eq=False)
class QuerySpec:
    """One requested answer symbol: sum over m in ``subset`` of <coeffs[m], W_m>.

    ``terms`` records which layer coordinate of each message the symbol
    carries; ``coeffs`` holds the explicit coefficient rows (None for
    skeleton plans).
    """

    subset: tuple
    terms: tuple
    coeffs: dict | None = None

    def to_json(self):
        out = {"subset": list(self.subset), "terms": [list(t) for t in self.terms]}
        if self.coeffs is not None:
            out["coeffs"] = {str(m): [int(v) for v in row] for m, row in self.coeffs.items()}
        return out


@dataclass(frozen=True, eq=False)
class QueryPlan:
    params: Params
    regime: Regime
    desired: int | None
    message_length: int
    specs: dict
    set_system: SetSystem | None = None
    dims: SchemeDims | None = None
    mixing: tuple | None = None
    outer: MdsGenerator | None = None
    k_generators: tuple | None = None
    layers: dict | None = None
    desired_slots: np.ndarray | None = None
    k_slots: tuple | None = None
    block_offsets: dict | None = None
    queried_databases: tuple = dc_field(default=())

    @property
    def materialized(self) -> bool:
        if self.regime is Regime.TRIVIAL:
            return True
        return self.layers is not None

    def spec_counts(self) -> dict:
        return {db: len(s) for db, s in self.specs.items()}

    def coefficient_row(self, m: int, coord: int) -> np.ndarray:
        return self.layers[m][coord]


def _group_kind(subset, desired):
    if subset == (desired,):
        return "desired"
    return "mixed" if desired in subset else "undesired"


def build_plan(p: Params, desired: int, rng: np.random.Generator, materialize: bool = True) -> QueryPlan:
    """Materialize a complete FULL-regime query plan.

    RNG use is fixed: one permutation per query group (in round order), then
    the M mixing matrices.  Skeleton plans (``materialize=False``) consume only
    the permutations and so share their layout with the full plan.
    """
    _require_full(p)
    ss = enumerate_sets(p.M, desired)
    dims = compute_dims(p, ss)
    N = p.N
    K_index = {K: i for i, K in enumerate(ss.K_sets)}
    L_index = {S: j for j, S in enumerate(ss.L_sets)}
    x_off = np.concatenate([[0], np.cumsum(dims.x_len)]).astype(int)

    desired_slots = [None] * dims.outer_len
    k_slots = [[None] * n for n in dims.code_len]
    x_off = x_off.tolist()
    groups = [S for r in range(1, p.M + 1) for S in itertools.combinations(range(1, p.M + 1), r)]
    slot_terms = {db: [] for db in range(1, N + 1)}
    for S in groups:
        kind = _group_kind(S, desired)
        total = N * group_size(p, len(S))
        perm = rng.permutation(total).tolist()
        for pos, t in enumerate(perm):
            db = pos % N + 1
            slot = len(slot_terms[db])
            if kind == "desired":
                coords = [(desired, "x", 0, t)]
            elif kind == "mixed":
                j = L_index[S]
                i = K_index[tuple(m for m in S if m != desired)]
                coords = [(desired, "x", j, t), (None, "k", i, dims.u_len[i] + t)]
            else:
                coords = [(None, "k", K_index[S], t)]
            for _, layer, idx, c in coords:
                if layer == "x":
                    desired_slots[x_off[idx] + c] = (db, slot)
                else:
                    k_slots[idx][c] = (db, slot)
            slot_terms[db].append((S, kind, coords))

    block_offsets = {}
    for k in range(1, p.M + 1):
        if k == desired:
            continue
        off, offs = 0, {}
        for i in ss.containing(k):
            offs[i] = off
            off += dims.code_len[i]
        block_offsets[k] = offs

    def terms_of(S, coords):
        out = []
        for _, layer, idx, c in coords:
            if layer == "x":
                out.append((desired, x_off[idx] + c))
            else:
                out.extend((k, block_offsets[k][idx] + c) for k in ss.K_sets[idx])
        return tuple(sorted(out, key=lambda mt: (mt[0] != desired, mt[0])))

    mixing = outer = k_gens = layers = None
    if materialize:
        field = p.field
        field.require_codelength(max((dims.outer_len,) + dims.code_len))
        mixing = tuple(field.sample_full_rank(dims.L, rng) for _ in range(p.M))
        outer = make_generator(dims.outer_len, dims.L, field)
        k_gens = tuple(make_generator(n, a, field) for n, a in zip(dims.code_len, dims.alpha))
        layers = {desired: field.matmul(outer.matrix, mixing[desired - 1])}
        for k, offs in block_offsets.items():
            blocks, band = [], 0
            for i in offs:
                a = dims.alpha[i]
                blocks.append(field.matmul(k_gens[i].matrix, mixing[k - 1][band:band + a]))
                band += a
            layers[k] = np.concatenate(blocks, axis=0)
        for arr in layers.values():
            arr.flags.writeable = False

    specs = {}
    for db, entries in slot_terms.items():
        row = []
        for S, _, coords in entries:
            terms = terms_of(S, coords)
            coeffs = None
            if layers is not None:
                coeffs = {m: layers[m][c] for m, c in terms}
            row.append(QuerySpec(S, terms, coeffs))
        specs[db] = tuple(row)

    desired_slots = np.array(desired_slots, dtype=np.int64).reshape(-1, 2)
    k_slots = [np.array(s, dtype=np.int64).reshape(-1, 2) for s in k_slots]
    desired_slots.flags.writeable = False
    for arr in k_slots:
        arr.flags.writeable = False
    return QueryPlan(
        params=p,
        regime=Regime.FULL,
        desired=desired,
        message_length=dims.L,
        specs=specs,
        set_system=ss,
        dims=dims,
        mixing=mixing,
        outer=outer,
        k_generators=k_gens,
        layers=layers,
        desired_slots=desired_slots,
        k_slots=tuple(k_slots),
        block_offsets=block_offsets,
        queried_databases=tuple(range(1, N + 1)),
    )


def build_trivial_plan(p: Params, rng: np.random.Generator, responsive=None) -> QueryPlan:
    """Download every message (length 1) from 2B+1 randomly chosen databases."""
    if classify_regime(p) is not Regime.TRIVIAL:
        raise RegimeError(f"trivial plan needs the trivial regime, got {classify_regime(p).value}")
    pool = sorted(responsive) if responsive is not None else list(range(1, p.N + 1))
    need = 2 * p.B + 1
    if len(pool) < need:
        raise RegimeError(f"only {len(pool)} candidate databases, need 2B+1={need}")
    chosen = tuple(sorted(int(x) for x in rng.choice(pool, size=need, replace=False)))
    one = np.ones(1, dtype=np.int64)
    one.flags.writeable = False
    full = tuple(QuerySpec((m,), ((m, 0),), {m: one}) for m in range(1, p.M + 1))
    specs = {db: (full if db in chosen else ()) for db in range(1, p.N + 1)}
    return QueryPlan(
        params=p,
        regime=Regime.TRIVIAL,
        desired=None,
        message_length=1,
        specs=specs,
        queried_databases=chosen,
    )


def message_letters(plan: QueryPlan) -> dict:
    """a for the desired message, then b, c, ... for the others in index order."""
    M = plan.params.M
    order = [plan.desired] + [m for m in range(1, M + 1) if m != plan.desired]
    letters = "abcdefghijklmnopqrstuvwxyz"
    return {m: (letters[i] if i < 26 else f"w{m}_") for i, m in enumerate(order)}


def spec_label(spec: QuerySpec, letters: dict) -> str:
    return "+".join(f"{letters[m]}{c + 1}" for m, c in spec.terms)


def dump_query_table(plan: QueryPlan) -> str:
    """Plain-text query table: one column per database, one row per slot."""
    if plan.regime is not Regime.FULL:
        raise RegimeError("query tables are defined for FULL-regime plans")
    letters = message_letters(plan)
    N = plan.params.N
    cols = [[spec_label(s, letters) for s in plan.specs[db]] for db in range(1, N + 1)]
    header = [f"DB {db}" for db in range(1, N + 1)]
    width = [max([len(h)] + [len(x) for x in col]) for h, col in zip(header, cols)]

    def line(cells):
        return " | ".join(c.ljust(w) for c, w in zip(cells, width)).rstrip()

    rule = "-" * len(" | ".join("x" * w for w in width))
    out = [line(header), rule]
    start = 0
    for count in plan.dims.per_round:
        for r in range(start, start + count):
            out.append(line([col[r] for col in cols]))
        out.append(rule)
        start += count
    return "\n".join(out) + "\n"
