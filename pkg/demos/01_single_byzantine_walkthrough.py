"""Two messages, five databases, any two may collude, one may lie.

Builds the query plan for N=5, M=2, T=2, B=1, prints the symbolic query
table, lets database 3 corrupt every symbol it returns, and follows the
decoder layer by layer.
"""

import numpy as np

from bpir.analysis import measure_rate
from bpir.decoder import retrieve
from bpir.field import make_rng
from bpir.network import AdversaryConfig, Behavior, MessageSet, collect, make_nodes
from bpir.scheme import Params, build_plan, dump_query_table

p = Params(N=5, M=2, T=2, B=1)
rng = make_rng(1)
plan = build_plan(p, desired=1, rng=rng)

print("query table (a = wanted message, b = the other one)")
print(dump_query_table(plan))

rate = measure_rate(plan)
print(f"message length {rate.L}, download {rate.D}, rate {rate.R} (capacity {rate.C})")

truth = MessageSet.random(p.M, plan.message_length, p.field, rng)
liar = AdversaryConfig(frozenset({3}), behavior=Behavior.ANSWER_WORST)
answers = collect(plan, make_nodes(p, truth, liar), liar)

result = retrieve(plan, answers)
for layer in result.layers:
    kind, which = layer.layer
    name = f"side information for {which}" if kind == "K" else "wanted message"
    where = sorted(int(layer.owners[i]) for i in layer.error_positions)
    print(f"{name:28s} {layer.error_count} corrected symbols, served by databases {where}")

print("decoded correctly:", np.array_equal(result.message, truth[1]))
print("databases caught lying:", sorted(result.identified_byzantine))
