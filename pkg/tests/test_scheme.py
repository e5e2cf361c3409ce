import itertools
from collections import Counter

import numpy as np
import pytest

from bpir.errors import FieldTooSmallError, RegimeError
from bpir.field import make_rng
from bpir.scheme import (
    Params,
    Regime,
    build_plan,
    build_trivial_plan,
    classify_regime,
    compute_dims,
    dump_query_table,
    enumerate_sets,
)

from oracles import scheme_counts

PAPER = [(5, 2, 2, 1), (6, 3, 1, 2), (6, 3, 2, 1)]


def P(N, M, T, B, U=0, **kw):
    return Params(N=N, M=M, T=T, B=B, U=U, **kw)


def full_params(maxN=12, maxM=4):
    for N in range(1, maxN + 1):
        for M in range(1, maxM + 1):
            for T in range(1, N):
                for B in range(0, N):
                    p = P(N, M, T, B)
                    if classify_regime(p) is Regime.FULL:
                        yield p


def test_regime_examples():
    assert classify_regime(P(5, 2, 2, 1)) is Regime.FULL
    assert classify_regime(P(4, 2, 3, 1)) is Regime.TRIVIAL
    assert classify_regime(P(2, 2, 1, 1)) is Regime.INFEASIBLE
    assert classify_regime(P(7, 2, 2, 1, U=1)) is Regime.FULL
    assert classify_regime(P(6, 2, 2, 1, U=2)) is Regime.TRIVIAL


def test_regime_partition_is_total():
    for N, M, T, B in itertools.product(range(1, 13), repeat=4):
        p = P(N, M, T, B)
        full = 2 * B + T < N
        trivial = 2 * B + 1 <= N <= 2 * B + T
        infeasible = N < 2 * B + 1
        assert full + trivial + infeasible == 1
        expected = Regime.FULL if full else Regime.TRIVIAL if trivial else Regime.INFEASIBLE
        assert classify_regime(p) is expected


def test_params_validation():
    with pytest.raises(ValueError):
        P(5, 2, 0, 1)
    with pytest.raises(ValueError):
        P(5, 0, 1, 1)
    with pytest.raises(TypeError):
        P(5.0, 2, 1, 1)


def test_enumerate_sets_examples():
    ss = enumerate_sets(3, 1)
    assert ss.L_sets == ((1,), (1, 2), (1, 3), (1, 2, 3))
    assert ss.K_sets == ((2,), (3,), (2, 3))
    ss = enumerate_sets(1, 1)
    assert ss.L_sets == ((1,),) and ss.K_sets == ()
    ss = enumerate_sets(2, 2)
    assert ss.L_sets == ((2,), (1, 2)) and ss.K_sets == ((1,),)


@pytest.mark.parametrize("M", [1, 2, 3, 4, 5])
def test_set_system_counts(M):
    for l in range(1, M + 1):
        ss = enumerate_sets(M, l)
        assert ss.L_sets[0] == (l,)
        assert ss.delta == 2 ** (M - 1) and len(ss.K_sets) == 2 ** (M - 1) - 1
        for k in range(1, M + 1):
            if k != l:
                assert len(ss.containing(k)) == 2 ** (M - 2)
        for i, K in enumerate(ss.K_sets):
            assert set(ss.L_sets[ss.mixed_partner(i)]) == set(K) | {l}


def test_dims_paper_examples():
    d = compute_dims(P(5, 2, 2, 1), enumerate_sets(2, 1))
    assert (d.L, d.alpha, d.u_len, d.sigma_len, d.D) == (9, (6,), (10,), (5,), 25)
    assert d.outer_len == 15
    d = compute_dims(P(6, 3, 2, 1), enumerate_sets(3, 1))
    assert (d.L, d.alpha, d.code_len, d.D) == (64, (16, 16, 16), (48, 48, 48), 168)
    d = compute_dims(P(6, 3, 1, 2), enumerate_sets(3, 1))
    assert (d.L, d.alpha, d.code_len, d.D) == (8, (2, 2, 2), (12, 12, 12), 42)


def test_dims_consistency_sweep():
    for p in full_params():
        ss = enumerate_sets(p.M, 1)
        d = compute_dims(p, ss)
        L, per_db, D = scheme_counts(p.N, p.M, p.T, p.B)
        assert (d.L, d.per_db, d.D) == (L, per_db, D)
        for k in range(2, p.M + 1):
            assert sum(d.alpha[i] for i in ss.containing(k)) == p.T * d.effective ** (p.M - 1) <= d.L
        assert sum(d.x_len) == p.N * d.effective ** (p.M - 1)


def test_dims_reject_non_full():
    with pytest.raises(RegimeError):
        compute_dims(P(4, 2, 3, 1), enumerate_sets(2, 1))


def test_plan_table_one_composition():
    plan = build_plan(P(5, 2, 2, 1), 1, make_rng(0))
    for db in range(1, 6):
        kinds = Counter(spec.subset for spec in plan.specs[db])
        assert kinds == {(1,): 2, (2,): 2, (1, 2): 1}


def test_plan_symmetry_and_coverage():
    for args in PAPER + [(7, 3, 2, 1, 1), (6, 2, 2, 1, 1), (5, 1, 2, 1)]:
        p = P(*args)
        plan = build_plan(p, 1, make_rng(5))
        counts = set(plan.spec_counts().values())
        assert counts == {plan.dims.per_db}
        # each x coordinate and each u coordinate lives in exactly one slot
        x_seen = Counter(c for specs in plan.specs.values() for s in specs for m, c in s.terms if m == 1)
        assert sorted(x_seen) == list(range(plan.dims.outer_len)) and set(x_seen.values()) == {1}
        pairs = {tuple(r) for r in plan.desired_slots}
        assert len(pairs) == plan.dims.outer_len
        for i, slots in enumerate(plan.k_slots):
            assert len({tuple(r) for r in slots}) == plan.dims.code_len[i]


def test_sigma_coordinates_only_in_mixed_specs():
    plan = build_plan(P(6, 3, 2, 1), 1, make_rng(1))
    ss = plan.set_system
    for i, K in enumerate(ss.K_sets):
        u = plan.dims.u_len[i]
        for db, slot in plan.k_slots[i][u:]:
            spec = plan.specs[int(db)][int(slot)]
            assert set(spec.subset) == set(K) | {1}
        for db, slot in plan.k_slots[i][:u]:
            assert plan.specs[int(db)][int(slot)].subset == K


def test_same_generator_shared_across_aligned_messages():
    plan = build_plan(P(6, 3, 2, 1), 1, make_rng(1))
    f = plan.params.field
    i = plan.set_system.K_sets.index((2, 3))
    gen = plan.k_generators[i]
    for k in (2, 3):
        off = plan.block_offsets[k][i]
        band = sum(plan.dims.alpha[j] for j in plan.set_system.containing(k) if j < i)
        block = plan.layers[k][off:off + gen.n]
        assert np.array_equal(block, f.matmul(gen.matrix, plan.mixing[k - 1][band:band + gen.k]))


def test_desired_layer_is_outer_code_times_mixing():
    plan = build_plan(P(5, 2, 2, 1), 2, make_rng(9))
    f = plan.params.field
    assert np.array_equal(plan.layers[2], f.matmul(plan.outer.matrix, plan.mixing[1]))
    assert (plan.outer.n, plan.outer.k) == (15, 9)


def test_m1_plan_is_pure_desired():
    plan = build_plan(P(4, 1, 1, 1), 1, make_rng(0))
    assert all(s.subset == (1,) for specs in plan.specs.values() for s in specs)
    assert plan.set_system.K_sets == ()
    table = dump_query_table(plan)
    assert "+" not in table and "b" not in table


def test_plan_determinism():
    a = build_plan(P(6, 3, 1, 2), 2, make_rng(42))
    b = build_plan(P(6, 3, 1, 2), 2, make_rng(42))
    ja = [[s.to_json() for s in a.specs[db]] for db in sorted(a.specs)]
    jb = [[s.to_json() for s in b.specs[db]] for db in sorted(b.specs)]
    assert ja == jb
    c = build_plan(P(6, 3, 1, 2), 2, make_rng(43))
    assert ja != [[s.to_json() for s in c.specs[db]] for db in sorted(c.specs)]


def test_skeleton_shares_layout():
    p = P(6, 3, 2, 1)
    full = build_plan(p, 1, make_rng(3))
    skel = build_plan(p, 1, make_rng(3), materialize=False)
    assert not skel.materialized
    for db in full.specs:
        assert [s.terms for s in full.specs[db]] == [s.terms for s in skel.specs[db]]


def test_structural_privacy_row_counts():
    for args in PAPER:
        p = P(*args)
        plan = build_plan(p, 1, make_rng(0), materialize=False)
        for subset in itertools.combinations(range(1, p.N + 1), p.T):
            for m in range(1, p.M + 1):
                seen = sum(1 for db in subset for s in plan.specs[db] for mm, _ in s.terms if mm == m)
                assert seen == p.T * (p.N - 2 * p.B) ** (p.M - 1)


def table_shape(text):
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("-")]
    header, rows = lines[0], lines[1:]
    return len(rows), len(header.split(" | "))


def test_query_table_shapes():
    t1 = dump_query_table(build_plan(P(5, 2, 2, 1), 1, make_rng(0)))
    assert table_shape(t1) == (5, 5)
    last = [ln for ln in t1.splitlines() if ln and not ln.startswith("-")][-1]
    assert all(cell.strip().startswith("a") and "+b" in cell for cell in last.split(" | "))
    t2 = dump_query_table(build_plan(P(6, 3, 1, 2), 1, make_rng(0)))
    assert table_shape(t2) == (7, 6)
    last = [ln for ln in t2.splitlines() if ln and not ln.startswith("-")][-1]
    assert all("+b" in c and "+c" in c for c in last.split(" | "))
    t3 = dump_query_table(build_plan(P(6, 3, 2, 1), 1, make_rng(0)))
    assert table_shape(t3) == (28, 6)
    assert t3.count("\n-") == 4


def test_table_one_rounds_are_4_and_1():
    plan = build_plan(P(5, 2, 2, 1), 1, make_rng(0))
    assert plan.dims.per_round == (4, 1)
    plan = build_plan(P(6, 3, 1, 2), 1, make_rng(0))
    assert plan.dims.per_round == (3, 3, 1)


def test_field_too_small():
    with pytest.raises(FieldTooSmallError):
        build_plan(P(5, 2, 2, 1, q=13), 1, make_rng(0))


def test_trivial_plan_examples():
    plan = build_trivial_plan(P(4, 2, 3, 1), make_rng(0))
    assert len(plan.queried_databases) == 3 and sum(plan.spec_counts().values()) == 6
    plan = build_trivial_plan(P(2, 3, 2, 0), make_rng(0))
    assert len(plan.queried_databases) == 1 and sum(plan.spec_counts().values()) == 3
    plan = build_trivial_plan(P(5, 3, 4, 1), make_rng(0))
    assert len(plan.queried_databases) == 3 and sum(plan.spec_counts().values()) == 9
    # identical requests to every queried database
    specs = {tuple(s.terms for s in plan.specs[db]) for db in plan.queried_databases}
    assert len(specs) == 1
    with pytest.raises(RegimeError):
        build_trivial_plan(P(5, 2, 2, 1), make_rng(0))


def test_build_plan_rejects_other_regimes():
    with pytest.raises(RegimeError):
        build_plan(P(4, 2, 3, 1), 1, make_rng(0))
    with pytest.raises(RegimeError):
        build_plan(P(2, 2, 1, 1), 1, make_rng(0))
