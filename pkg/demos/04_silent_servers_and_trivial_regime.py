"""Two corner cases: databases that never answer, and too much collusion.

With N=7, T=2, B=1 and one silent database the scheme treats the missing
answers as erasures.  With N=4, T=3, B=1 the only option left is to
download three full copies and take a majority vote.
"""

import numpy as np

from bpir.analysis import capacity_unresponsive, measure_rate
from bpir.decoder import retrieve
from bpir.field import make_rng
from bpir.network import AdversaryConfig, Behavior, MessageSet, collect, make_nodes
from bpir.scheme import Params, build_plan, build_trivial_plan

p = Params(N=7, M=3, T=2, B=1, U=1)
rng = make_rng(3)
plan = build_plan(p, desired=2, rng=rng)
truth = MessageSet.random(p.M, plan.message_length, p.field, rng)
cfg = AdversaryConfig(frozenset({6}), frozenset({2}), Behavior.ANSWER_RANDOM, rate=0.5, seed=4)
res = retrieve(plan, collect(plan, make_nodes(p, truth, cfg), cfg))
print("silent database 2, database 6 corrupting half its symbols")
print("  decoded:", np.array_equal(res.message, truth[2]), " caught:", sorted(res.identified_byzantine))
print("  erasures in the outer codeword:", len(res.layers[-1].erasures))
r = measure_rate(plan)
print(f"  rate {r.R} = {float(r.R):.6f}, formula {capacity_unresponsive(7, 3, 2, 1, 1)}")

p = Params(N=4, M=2, T=3, B=1)
rng = make_rng(5)
plan = build_trivial_plan(p, rng)
truth = MessageSet.random(p.M, 1, p.field, rng)
cfg = AdversaryConfig(frozenset({plan.queried_databases[0]}), behavior=Behavior.ANSWER_WORST)
res = retrieve(plan, collect(plan, make_nodes(p, truth, cfg), cfg))
print("\ntrivial regime, copies from databases", plan.queried_databases)
print("  majority vote correct:", np.array_equal(res.message, truth.messages[:, 0]),
      " rate", measure_rate(plan).R)
