"""Simulated replicated databases, honest and otherwise."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import PrimeField, make_rng
from .scheme import Params, QueryPlan


class Behavior(str, enum.Enum):
    HONEST = "honest"
    CONTENT_SWAP = "content"
    ANSWER_RANDOM = "random"
    ANSWER_WORST = "worst"
    UNRESPONSIVE = "unresponsive"


@dataclass(frozen=True, eq=False)
class MessageSet:
    """Row ``m - 1`` holds message W_m."""

    messages: np.ndarray

    def __post_init__(self):
        if self.messages.ndim != 2:
            raise ValueError("messages must be an (M, L) array")

    @property
    def M(self) -> int:
        return self.messages.shape[0]

    @property
    def length(self) -> int:
        return self.messages.shape[1]

    def __getitem__(self, m: int) -> np.ndarray:
        return self.messages[m - 1]

    def __eq__(self, other):
        return isinstance(other, MessageSet) and np.array_equal(self.messages, other.messages)

    @classmethod
    def random(cls, M: int, length: int, field: PrimeField, rng: np.random.Generator):
        return cls(field.random((M, length), rng))


@dataclass(eq=False)
class DatabaseNode:
    index: int
    contents: MessageSet
    behavior: Behavior = Behavior.HONEST


@dataclass
class AnswerSet:
    """Per-database answer arrays; ``None`` marks a database that never answered."""

    answers: dict

    def __getitem__(self, db):
        return self.answers[db]

    def missing(self) -> set:
        return {db for db, a in self.answers.items() if a is None}

    def received(self) -> int:
        return sum(len(a) for a in self.answers.values() if a is not None)

    def to_json(self) -> str:
        rows = []
        for db in sorted(self.answers):
            a = self.answers[db]
            rows.append(None if a is None else [int(v) for v in a])
        return json.dumps(rows)

    @classmethod
    def from_json(cls, text: str):
        rows = json.loads(text)
        return cls({
            i + 1: (None if r is None else np.array(r, dtype=np.int64)) for i, r in enumerate(rows)
        })


@dataclass(frozen=True)
class AdversaryConfig:
    """Who misbehaves and how.

    Every database in ``byzantine`` follows ``behavior`` (``rate`` is the
    per-symbol corruption probability for ANSWER_RANDOM); ``alternate`` is
    the stale/forged message set used by CONTENT_SWAP nodes, drawn from
    ``seed`` when omitted.  ``seed`` is shared by all Byzantine nodes.
    """

    byzantine: frozenset = dc_field(default_factory=frozenset)
    unresponsive: frozenset = dc_field(default_factory=frozenset)
    behavior: Behavior = Behavior.ANSWER_WORST
    rate: float = 1.0
    alternate: MessageSet | None = None
    seed: int = 0

    @classmethod
    def none(cls):
        return cls(behavior=Behavior.HONEST)


def random_adversary(p: Params, rng: np.random.Generator, behavior=Behavior.ANSWER_WORST,
                     byzantine=None, unresponsive=None, rate=1.0, b_count=None, u_count=None):
    """Seeded random Byzantine and unresponsive sets (disjoint) unless given."""
    b_count = p.B if b_count is None else b_count
    u_count = p.U if u_count is None else u_count
    dbs = np.arange(1, p.N + 1)
    if byzantine is None:
        byzantine = rng.choice(dbs, size=b_count, replace=False) if b_count else []
    byzantine = frozenset(int(x) for x in byzantine)
    if unresponsive is None:
        pool = np.array([d for d in dbs if d not in byzantine])
        unresponsive = rng.choice(pool, size=u_count, replace=False) if u_count else []
    unresponsive = frozenset(int(x) for x in unresponsive)
    seed = int(rng.integers(0, 2**62))
    return AdversaryConfig(byzantine, unresponsive, Behavior(behavior), rate, None, seed)


def honest_answer(node: DatabaseNode, specs, field: PrimeField) -> np.ndarray:
    """Answer symbol j = sum over m of <coeffs_m, W_m> from the node's own contents."""
    out = np.zeros(len(specs), dtype=np.int64)
    by_message = {}
    for j, spec in enumerate(specs):
        for m, row in spec.coeffs.items():
            by_message.setdefault(m, ([], []))
            by_message[m][0].append(j)
            by_message[m][1].append(row)
    for m, (slots, rows) in by_message.items():
        w = node.contents[m]
        rows = np.asarray(rows)
        if rows.shape[1] != w.shape[0]:
            raise ValueError(
                f"coefficient length {rows.shape[1]} != message length {w.shape[0]} at database {node.index}"
            )
        np.add.at(out, slots, field.matmul(rows, w))
    return out % field.q


def make_nodes(p: Params, truth: MessageSet, cfg: AdversaryConfig) -> list:
    nodes = []
    alternate = cfg.alternate
    if cfg.behavior is Behavior.CONTENT_SWAP and alternate is None and cfg.byzantine:
        alternate = MessageSet.random(truth.M, truth.length, p.field, make_rng(cfg.seed))
    for db in range(1, p.N + 1):
        if db in cfg.unresponsive:
            nodes.append(DatabaseNode(db, truth, Behavior.UNRESPONSIVE))
        elif db in cfg.byzantine:
            contents = alternate if cfg.behavior is Behavior.CONTENT_SWAP else truth
            nodes.append(DatabaseNode(db, contents, cfg.behavior))
        else:
            nodes.append(DatabaseNode(db, truth, Behavior.HONEST))
    return nodes


def apply_adversary(cfg: AdversaryConfig, answers: AnswerSet, field: PrimeField) -> AnswerSet:
    """Post-hoc answer corruption; CONTENT_SWAP already acted through the node contents."""
    rng = make_rng(cfg.seed)
    out = {}
    for db in sorted(answers.answers):
        a = answers.answers[db]
        if db in cfg.unresponsive:
            out[db] = None
            continue
        if a is None or db not in cfg.byzantine:
            out[db] = a
            continue
        if cfg.behavior is Behavior.ANSWER_WORST:
            a = (a + 1) % field.q
        elif cfg.behavior is Behavior.ANSWER_RANDOM:
            hit = rng.random(a.shape[0]) < cfg.rate
            fresh = field.random(a.shape[0], rng)
            a = np.where(hit, fresh, a)
        out[db] = a
    return AnswerSet(out)


def collect(plan: QueryPlan, nodes, cfg: AdversaryConfig) -> AnswerSet:
    """One round: every node answers its own queries, then the adversary acts."""
    field = plan.params.field
    raw = {}
    for node in nodes:
        if node.index in cfg.unresponsive or node.behavior is Behavior.UNRESPONSIVE:
            raw[node.index] = None
            continue
        raw[node.index] = honest_answer(node, plan.specs[node.index], field)
    return apply_adversary(cfg, AnswerSet(raw), field)
