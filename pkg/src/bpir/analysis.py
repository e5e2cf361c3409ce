"""Capacity formulas, rate accounting, and privacy / uniqueness probes.

All rates are exact ``Fraction`` values; floats appear only in the Monte
Carlo statistics.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InstanceTooLarge, RegimeError
from .field import derive_seed, make_rng
from .scheme import Params, QueryPlan, Regime, build_plan, classify_regime, regime_violation


def _tpir(n: int, M: int, T: int) -> Fraction:
    ratio = Fraction(T, n)
    return (1 - ratio) / (1 - ratio**M)


def tpir_capacity(N: int, M: int, T: int) -> Fraction:
    """Capacity with T colluding and no Byzantine databases (requires T < N)."""
    return _tpir(N, M, T)


def capacity(N: int, M: int, T: int, B: int):
    """Return ``(regime, C)`` for B Byzantine and T colluding databases."""
    regime = classify_regime(Params(N=N, M=M, T=T, B=B))
    if regime is Regime.FULL:
        e = N - 2 * B
        return regime, Fraction(e, N) * _tpir(e, M, T)
    if regime is Regime.TRIVIAL:
        return regime, Fraction(1, (2 * B + 1) * M)
    return regime, Fraction(0)


def capacity_unresponsive(N: int, M: int, T: int, B: int, U: int) -> Fraction:
    p = Params(N=N, M=M, T=T, B=B, U=U)
    if classify_regime(p) is not Regime.FULL:
        raise RegimeError(regime_violation(p))
    e = N - 2 * B - U
    return Fraction(e, N - U) * _tpir(e, M, T)


def post_expurgation_rate(N: int, M: int, T: int, B: int, B_tilde: int) -> Fraction:
    """Rate after dropping ``B_tilde`` databases caught misbehaving in an earlier retrieval."""
    if not 0 <= B_tilde <= B:
        raise ValueError(f"need 0 <= B_tilde <= B, got {B_tilde}")
    e = N + B_tilde - 2 * B
    if not T < e:
        raise RegimeError(f"T={T} >= N+B~-2B={e}: remaining system is not in the full regime")
    return Fraction(e, N - B_tilde) * _tpir(e, M, T)


def asymptotic_capacity(gamma) -> Fraction:
    """Large-N capacity when a fraction ``gamma`` of the databases is Byzantine."""
    gamma = Fraction(gamma)
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if gamma >= Fraction(1, 2):
        return Fraction(0)
    return 1 - 2 * gamma


def large_M_limit(N: int, T: int, B: int) -> Fraction:
    return 1 - Fraction(2 * B + T, N)


@dataclass(frozen=True)
class RateReport:
    regime: Regime
    L: int
    D: int
    R: Fraction
    C: Fraction
    match: bool

    def to_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "L": self.L,
            "D": self.D,
            "R_num": self.R.numerator,
            "R_den": self.R.denominator,
            "C_num": self.C.numerator,
            "C_den": self.C.denominator,
            "match": self.match,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def measure_rate(plan: QueryPlan) -> RateReport:
    """Count downloaded symbols from the plan's own query lists."""
    p = plan.params
    counts = plan.spec_counts()
    if plan.regime is Regime.TRIVIAL:
        D = sum(counts.values())
        C = Fraction(1, (2 * p.B + 1) * p.M)
    else:
        per_db = set(counts.values())
        if len(per_db) != 1:
            raise AssertionError(f"asymmetric plan: per-database counts {sorted(per_db)}")
        # only the N - U responsive databases deliver answers
        D = p.responsive * per_db.pop()
        C = capacity_unresponsive(p.N, p.M, p.T, p.B, p.U)
    R = Fraction(plan.message_length, D)
    return RateReport(plan.regime, plan.message_length, D, R, C, R == C)


@dataclass(frozen=True)
class PrivacyAudit:
    subset: tuple
    counts: dict
    ranks: dict
    expected: int
    passed: bool


def observed_rows(plan: QueryPlan, subset, m: int) -> np.ndarray:
    rows = [spec.coeffs[m] for db in subset for spec in plan.specs[db] if m in spec.coeffs]
    if not rows:
        return np.zeros((0, plan.message_length), dtype=np.int64)
    return np.asarray(rows)


def privacy_rank_audit(plan: QueryPlan, subset) -> PrivacyAudit:
    """Per message, stack every coefficient row the colluding ``subset`` sees and take its rank."""
    p = plan.params
    subset = tuple(sorted(subset))
    if len(subset) != p.T:
        raise ValueError(f"audit subset must have T={p.T} databases, got {len(subset)}")
    field = p.field
    expected = p.T * plan.dims.effective ** (p.M - 1)
    counts, ranks = {}, {}
    for m in range(1, p.M + 1):
        rows = observed_rows(plan, subset, m)
        counts[m] = rows.shape[0]
        ranks[m] = field.rank(rows)
    passed = all(c == expected for c in counts.values()) and all(r == expected for r in ranks.values())
    return PrivacyAudit(subset, counts, ranks, expected, passed)


def audit_all_subsets(plan: QueryPlan):
    return [privacy_rank_audit(plan, s)
            for s in itertools.combinations(range(1, plan.params.N + 1), plan.params.T)]


@dataclass(frozen=True)
class MonteCarloReport:
    trials: int
    database: int
    outcomes: int
    tv: dict
    max_tv: float | None
    histograms: dict


def _total_variation(a: Counter, b: Counter, n_a: int, n_b: int) -> float:
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a[k] / n_a - b[k] / n_b) for k in keys)


def privacy_monte_carlo(p: Params, trials: int, seed: int = 0, database: int = 1) -> MonteCarloReport:
    """Empirical check that one database's view does not depend on the desired index.

    For every desired index and each trial a fresh plan (fresh mixing
    matrices and fresh slot permutation) is built; the database's view of
    message m is summarised as the tuple of its coefficient rows for m applied
    to the all-ones vector.  For each message the per-index histograms are
    compared by total-variation distance; ``max_tv`` is the worst pair.
    """
    if classify_regime(p) is not Regime.FULL:
        raise RegimeError(regime_violation(p))
    e = p.N - 2 * p.B - p.U
    per_db = e ** (p.M - 1)
    if p.q**per_db > 10**4:
        raise InstanceTooLarge(f"observation space q^{per_db} = {p.q ** per_db} exceeds 10^4")
    hist = {(l, m): Counter() for l in range(1, p.M + 1) for m in range(1, p.M + 1)}
    field = p.field
    for l in range(1, p.M + 1):
        for t in range(trials):
            plan = build_plan(p, l, make_rng(derive_seed(seed, l, t)))
            for m in range(1, p.M + 1):
                rows = observed_rows(plan, (database,), m)
                hist[(l, m)][tuple(int(v) for v in rows.sum(axis=1) % field.q)] += 1
    if trials == 0:
        return MonteCarloReport(0, database, p.q**per_db, {}, None, hist)
    tv = {}
    for m in range(1, p.M + 1):
        for l1, l2 in itertools.combinations(range(1, p.M + 1), 2):
            tv[(m, l1, l2)] = _total_variation(hist[(l1, m)], hist[(l2, m)], trials, trials)
    return MonteCarloReport(trials, database, p.q**per_db, tv, max(tv.values()) if tv else 0.0, hist)


@dataclass(frozen=True)
class ProbeReport:
    pairs: int
    collisions: int
    confusable: int
    invisible: int


def answer_map(plan: QueryPlan) -> dict:
    """Per database, the matrix taking the stacked message vector to its honest answers."""
    p = plan.params
    L = plan.message_length
    out = {}
    for db, specs in plan.specs.items():
        a = np.zeros((len(specs), p.M * L), dtype=np.int64)
        for j, spec in enumerate(specs):
            for m, row in spec.coeffs.items():
                a[j, (m - 1) * L:m * L] = row
        out[db] = a
    return out


def confusability_probe(p: Params, pairs: int, seed: int = 0, desired: int = 1,
                        vary: tuple | None = None) -> ProbeReport:
    """Sample distinct message-set pairs and look for answer agreement on N-2B databases.

    ``vary`` restricts the differences to the listed messages.  A pair whose
    answers agree on every database is ``invisible``: it differs only in
    directions no query ever touches (the scheme reads just T(N-2B)^(M-1)
    rows of each undesired mixing matrix), so no decoder can or needs to
    tell the two apart.  ``confusable`` counts the visible collisions, which
    would break unique decoding; ``collisions`` counts both.
    """
    if classify_regime(p) is not Regime.FULL:
        raise RegimeError(regime_violation(p))
    rng = make_rng(seed)
    plan = build_plan(p, desired, rng)
    field = p.field
    L = plan.message_length
    maps = answer_map(plan)
    dbs = sorted(maps)
    stacked = np.concatenate([maps[db] for db in dbs], axis=0)
    bounds = np.cumsum([0] + [maps[db].shape[0] for db in dbs])
    need = p.N - 2 * p.B
    mask = np.ones(p.M * L, dtype=bool)
    if vary is not None:
        mask[:] = False
        for m in vary:
            mask[(m - 1) * L:m * L] = True
    collisions = confusable = invisible = 0
    done = 0
    while done < pairs:
        batch = min(4096, pairs - done)
        w = field.random((batch, p.M * L), rng)
        delta = field.random((batch, p.M * L), rng) * mask
        keep = np.any(delta != 0, axis=1)
        w, delta = w[keep], delta[keep]
        w2 = (w + delta) % field.q
        a1 = field.matmul(w, stacked.T)
        a2 = field.matmul(w2, stacked.T)
        same = a1 == a2
        per_db = np.stack([np.all(same[:, bounds[i]:bounds[i + 1]], axis=1) for i in range(len(dbs))], axis=1)
        agree = per_db.sum(axis=1)
        hit = agree >= need
        everywhere = agree == len(dbs)
        collisions += int(hit.sum())
        invisible += int((hit & everywhere).sum())
        confusable += int((hit & ~everywhere).sum())
        done += int(keep.sum())
    return ProbeReport(done, collisions, confusable, invisible)


def dimension_check(plan: QueryPlan) -> bool:
    """Structural privacy precondition: every T-subset sees T(N-2B-U)^(M-1) symbols per message."""
    p = plan.params
    expected = p.T * plan.dims.effective ** (p.M - 1)
    for subset in itertools.combinations(range(1, p.N + 1), p.T):
        for m in range(1, p.M + 1):
            seen = sum(1 for db in subset for spec in plan.specs[db] for mm, _ in spec.terms if mm == m)
            if seen != expected:
                return False
    return True
