import itertools

import numpy as np
import pytest

from bpir.decoder import correct_k_layer, majority_decode, retrieve, u_code
from bpir.errors import DecodeFailure, NoMajorityError, RegimeError
from bpir.field import derive_seed, make_rng
from bpir.network import AdversaryConfig, AnswerSet, Behavior, MessageSet, collect, make_nodes, random_adversary
from bpir.scheme import Params, Regime, build_plan, build_trivial_plan, classify_regime

STRATEGIES = [Behavior.ANSWER_WORST, Behavior.ANSWER_RANDOM, Behavior.CONTENT_SWAP]


def trial(p, desired, seed, behavior=Behavior.ANSWER_WORST, byzantine=None, unresponsive=None, rate=1.0):
    rng = make_rng(seed)
    plan = build_plan(p, desired, rng)
    truth = MessageSet.random(p.M, plan.message_length, p.field, rng)
    cfg = random_adversary(p, rng, behavior, byzantine, unresponsive, rate)
    answers = collect(plan, make_nodes(p, truth, cfg), cfg)
    return plan, truth, cfg, answers


def test_table_one_walkthrough():
    p = Params(5, 2, 2, 1)
    plan, truth, cfg, answers = trial(p, 1, 0, byzantine={3})
    res = retrieve(plan, answers)
    assert np.array_equal(res.message, truth[1])
    assert res.identified_byzantine == {3}
    assert res.layer_errors == {("K", (2,)): 2, ("X", 1): 3}
    assert res.downloaded == 25
    k = correct_k_layer(plan, answers, 0)
    assert (u_code(plan, 0).n, u_code(plan, 0).k) == (10, 6)
    assert k.sigma.shape == (5,) and k.error_count == 2


def test_table_two_aligned_sum():
    p = Params(6, 3, 1, 2)
    plan, truth, cfg, answers = trial(p, 1, 1)
    i = plan.set_system.K_sets.index((2, 3))
    code = u_code(plan, i)
    assert (code.n, code.k) == (6, 2)
    layer = correct_k_layer(plan, answers, i)
    assert layer.error_count == 2
    res = retrieve(plan, answers)
    assert np.array_equal(res.message, truth[1])
    assert res.identified_byzantine == cfg.byzantine


def test_table_three_outer_budget():
    p = Params(6, 3, 2, 1)
    plan, truth, cfg, answers = trial(p, 1, 2)
    res = retrieve(plan, answers)
    assert np.array_equal(res.message, truth[1])
    assert res.layer_errors[("X", 1)] == 16
    assert plan.outer.n - plan.outer.k == 32


def test_honest_run_has_no_corrections():
    p = Params(6, 3, 2, 1)
    plan, truth, _, _ = trial(p, 2, 3)
    cfg = AdversaryConfig.none()
    res = retrieve(plan, collect(plan, make_nodes(p, truth, cfg), cfg))
    assert np.array_equal(res.message, truth[2])
    assert not res.identified_byzantine and not any(res.layer_errors.values())


def test_content_swap_on_undesired_message_is_caught():
    p = Params(5, 2, 2, 1)
    rng = make_rng(4)
    plan = build_plan(p, 1, rng)
    truth = MessageSet.random(2, 9, p.field, rng)
    alt = truth.messages.copy()
    alt[1] = (alt[1] + 1) % p.field.q
    cfg = AdversaryConfig(frozenset({4}), behavior=Behavior.CONTENT_SWAP, alternate=MessageSet(alt))
    res = retrieve(plan, collect(plan, make_nodes(p, truth, cfg), cfg))
    assert np.array_equal(res.message, truth[1])
    assert res.identified_byzantine == {4}
    assert res.layer_errors[("K", (2,))] > 0


def full_configs(maxN=8, maxM=3):
    for N in range(2, maxN + 1):
        for M in range(1, maxM + 1):
            for T in range(1, N):
                for B in range(0, N):
                    for U in range(0, 2):
                        p = Params(N, M, T, B, U=U)
                        if classify_regime(p) is Regime.FULL and (B or U):
                            yield p


def test_exactness_sweep():
    """Every FULL instance with N <= 8, M <= 3, each strategy, a few seeded trials."""
    count = 0
    for p in full_configs():
        for b, behavior in enumerate(STRATEGIES):
            for t in range(1):
                seed = derive_seed(p.N, p.M, p.T, p.B, p.U, b, t)
                desired = 1 + seed % p.M
                plan, truth, cfg, answers = trial(p, desired, seed, behavior)
                res = retrieve(plan, answers)
                assert np.array_equal(res.message, truth[desired]), (p, behavior, t)
                assert res.identified_byzantine <= cfg.byzantine
                assert not res.identified_byzantine & cfg.unresponsive
                e = p.effective
                for i in range(len(plan.set_system.K_sets)):
                    assert res.layer_errors[("K", plan.set_system.K_sets[i])] <= p.B * plan.dims.alpha[i] // e
                assert res.layer_errors[("X", desired)] <= p.B * e ** (p.M - 1)
                if behavior is Behavior.ANSWER_WORST:
                    assert res.identified_byzantine == cfg.byzantine
                count += 1
    assert count > 450


@pytest.mark.parametrize("args", [(5, 2, 2, 1), (6, 3, 1, 2), (7, 3, 2, 1, 1)])
def test_hundred_trials_worst(args):
    p = Params(*args[:4], U=args[4] if len(args) > 4 else 0)
    for t in range(100):
        plan, truth, cfg, answers = trial(p, 1 + t % p.M, derive_seed(11, t))
        res = retrieve(plan, answers)
        assert np.array_equal(res.message, truth[1 + t % p.M])
        assert res.identified_byzantine == cfg.byzantine


def test_sic_with_true_side_information():
    p = Params(6, 3, 2, 1)
    plan, truth, cfg, answers = trial(p, 1, 5)
    clean = collect(plan, make_nodes(p, truth, AdversaryConfig.none()), AdversaryConfig.none())
    true_sigma = {}
    for i in range(len(plan.set_system.K_sets)):
        u = plan.dims.u_len[i]
        true_sigma[i] = np.array([0] * (plan.dims.code_len[i] - u), dtype=np.int64)
        true_sigma[i] = correct_k_layer(plan, clean, i).sigma
    a = retrieve(plan, answers)
    b = retrieve(plan, answers, sigma_override=true_sigma)
    assert np.array_equal(a.message, b.message)
    assert np.array_equal(a.message, truth[1])


def test_erasures_and_errors_together():
    p = Params(7, 2, 2, 1, U=1)
    for t in range(30):
        plan, truth, cfg, answers = trial(p, 2, derive_seed(21, t))
        res = retrieve(plan, answers)
        assert np.array_equal(res.message, truth[2])
        assert res.identified_byzantine == cfg.byzantine
        layer = res.layers[-1]
        assert len(layer.erasures) == p.U * p.effective ** (p.M - 1)


def test_over_budget_adversary_is_loud():
    p = Params(5, 2, 2, 1)
    rng = make_rng(6)
    plan = build_plan(p, 1, rng)
    truth = MessageSet.random(2, 9, p.field, rng)
    cfg = AdversaryConfig(frozenset({1, 2, 3}), behavior=Behavior.ANSWER_RANDOM, seed=3)
    answers = collect(plan, make_nodes(p, truth, cfg), cfg)
    try:
        res = retrieve(plan, answers)
    except DecodeFailure as exc:
        assert exc.layer is not None
    else:
        # three corrupted databases may land on a wrong codeword, never an honest-looking exact one
        assert not np.array_equal(res.message, truth[1]) or res.identified_byzantine


def test_skeleton_plan_cannot_decode():
    p = Params(5, 2, 2, 1)
    plan = build_plan(p, 1, make_rng(0), materialize=False)
    with pytest.raises(RegimeError):
        retrieve(plan, AnswerSet({}))


def trivial_run(p, seed, byz):
    rng = make_rng(seed)
    plan = build_trivial_plan(p, rng)
    truth = MessageSet.random(p.M, 1, p.field, rng)
    cfg = AdversaryConfig(frozenset(byz), behavior=Behavior.ANSWER_WORST)
    return plan, truth, collect(plan, make_nodes(p, truth, cfg), cfg)


def test_majority_decode():
    p = Params(4, 2, 3, 1)
    for s in range(20):
        plan, truth, answers = trivial_run(p, s, {plan_db for plan_db in [1 + s % 4]})
        res = majority_decode(plan, answers, desired=2)
        assert res.message.tolist() == truth[2].tolist()
        full = retrieve(plan, answers)
        assert full.message.tolist() == truth.messages[:, 0].tolist()


def test_majority_all_agree_and_failure():
    p = Params(4, 2, 3, 1)
    plan, truth, answers = trivial_run(p, 0, set())
    assert majority_decode(plan, answers, 1).message.tolist() == truth[1].tolist()
    q = list(plan.queried_databases)
    broken = AnswerSet({db: (np.array([db, db]) if db in q else None) for db in range(1, 5)})
    with pytest.raises(NoMajorityError):
        majority_decode(plan, broken, 1)
    with pytest.raises(RegimeError):
        majority_decode(build_plan(Params(5, 2, 2, 1), 1, make_rng(0)), answers, 1)
