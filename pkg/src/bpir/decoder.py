"""Decoding the desired message from possibly corrupted answers.

Every K-set layer is an aligned sum of undesired codewords sharing one
generator, so it is corrected jointly on the punctured code formed by its
downloaded coordinates.  The corrected band message regenerates the exact
side information, which is subtracted from the mixed answers; what is left
is the outer codeword of the desired message with errors only at Byzantine
positions.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DecodeFailure, NoMajorityError, RegimeError
from .mds import ERASED, MdsGenerator, ReceivedWord, decode, puncture
from .network import AnswerSet
from .scheme import QueryPlan, Regime


@dataclass(frozen=True)
class LayerCorrection:
    """Decoder-side view of one layer after correction."""

    layer: object
    received: np.ndarray
    corrected: np.ndarray
    owners: np.ndarray
    erasures: frozenset
    error_positions: frozenset
    band: np.ndarray | None = None
    sigma: np.ndarray | None = None

    @property
    def error_count(self) -> int:
        return len(self.error_positions)

    def accused(self) -> set:
        return {int(self.owners[i]) for i in self.error_positions}


@dataclass
class RetrievalResult:
    message: np.ndarray
    identified_byzantine: frozenset
    layer_errors: dict
    downloaded: int
    layers: list = dc_field(default_factory=list, repr=False)


def _gather(slots: np.ndarray, answers: AnswerSet):
    values = np.full(len(slots), ERASED, dtype=np.int64)
    erased = []
    for pos, (db, slot) in enumerate(slots):
        a = answers[int(db)]
        if a is None:
            erased.append(pos)
        else:
            values[pos] = a[slot]
    return values, frozenset(erased)


def u_code(plan: QueryPlan, i: int) -> MdsGenerator:
    """Punctured code of the downloaded (u) coordinates of K-set ``i``."""
    gen = plan.k_generators[i]
    u = plan.dims.u_len[i]
    deleted = range(u, gen.n)
    if len(deleted) < gen.n - gen.k:
        return puncture(gen, deleted)
    # no Byzantine or unresponsive slack: the u part is exactly an information set
    return gen.select(range(u))


def correct_k_layer(plan: QueryPlan, answers: AnswerSet, i: int) -> LayerCorrection:
    """Correct the aligned sum of K-set ``i`` and regenerate its side information."""
    u = plan.dims.u_len[i]
    slots = plan.k_slots[i][:u]
    received, erased = _gather(slots, answers)
    code = u_code(plan, i)
    try:
        out = decode(code, ReceivedWord(received, erased))
    except DecodeFailure as exc:
        exc.layer = ("K", plan.set_system.K_sets[i])
        raise
    gen = plan.k_generators[i]
    sigma = plan.params.field.matmul(gen.matrix[u:], out.message)
    return LayerCorrection(
        layer=("K", plan.set_system.K_sets[i]),
        received=received,
        corrected=out.codeword,
        owners=slots[:, 0],
        erasures=erased,
        error_positions=out.error_positions,
        band=out.message,
        sigma=sigma,
    )


def cancel_and_decode(plan: QueryPlan, answers: AnswerSet, sigmas: dict):
    """Subtract side information ``sigmas[i]`` and decode the outer codeword.

    Returns ``(W_l, LayerCorrection for the desired layer)``.
    """
    field = plan.params.field
    q = field.q
    ss, dims = plan.set_system, plan.dims
    received, erased = _gather(plan.desired_slots, answers)
    x_off = np.concatenate([[0], np.cumsum(dims.x_len)]).astype(int)
    for i in range(len(ss.K_sets)):
        j = ss.mixed_partner(i)
        seg = slice(x_off[j], x_off[j + 1])
        live = received[seg] != ERASED
        part = received[seg]
        part[live] = (part[live] - sigmas[i][live]) % q
        received[seg] = part
    try:
        out = decode(plan.outer, ReceivedWord(received, erased))
    except DecodeFailure as exc:
        exc.layer = ("X", plan.desired)
        raise
    L = dims.L
    lhs = field.matmul(plan.outer.matrix[:L], plan.mixing[plan.desired - 1])
    message = field.solve(lhs, out.codeword[:L])
    view = LayerCorrection(
        layer=("X", plan.desired),
        received=received,
        corrected=out.codeword,
        owners=plan.desired_slots[:, 0],
        erasures=erased,
        error_positions=out.error_positions,
    )
    return message, view


def identify_byzantine(layers) -> frozenset:
    """Databases owning at least one position where received and corrected disagree."""
    accused = set()
    for layer in layers:
        accused |= layer.accused()
    return frozenset(accused)


def retrieve(plan: QueryPlan, answers: AnswerSet, sigma_override: dict | None = None) -> RetrievalResult:
    """Full decode: K-layers in round order, cancellation, outer decode, identification.

    ``sigma_override`` replaces the regenerated side information (used to
    check cancellation against the true values).
    """
    if plan.regime is Regime.TRIVIAL:
        return majority_decode(plan, answers)
    if not plan.materialized:
        raise RegimeError("cannot decode with a skeleton plan")
    ss = plan.set_system
    order = sorted(range(len(ss.K_sets)), key=lambda i: (len(ss.K_sets[i]), i))
    k_layers = {i: correct_k_layer(plan, answers, i) for i in order}
    sigmas = sigma_override or {i: c.sigma for i, c in k_layers.items()}
    message, desired_view = cancel_and_decode(plan, answers, sigmas)
    layers = [k_layers[i] for i in order] + [desired_view]
    missing = answers.missing()
    accused = identify_byzantine(layers) - missing
    return RetrievalResult(
        message=message,
        identified_byzantine=frozenset(accused),
        layer_errors={layer.layer: layer.error_count for layer in layers},
        downloaded=answers.received(),
        layers=layers,
    )


def majority_decode(plan: QueryPlan, answers: AnswerSet, desired: int | None = None) -> RetrievalResult:
    """Per-symbol majority over the 2B+1 downloaded copies of the whole database.

    With ``desired`` unset the full majority-decoded database is returned
    (one row per message); otherwise just W_desired.
    """
    if plan.regime is not Regime.TRIVIAL:
        raise RegimeError("majority decoding applies to trivial-regime plans")
    p = plan.params
    copies = {db: answers[db] for db in plan.queried_databases if answers[db] is not None}
    need = p.B + 1
    decoded = np.zeros(p.M, dtype=np.int64)
    accused = set()
    for m in range(p.M):
        votes = Counter(int(copies[db][m]) for db in copies)
        value, count = votes.most_common(1)[0] if votes else (None, 0)
        if count < need:
            raise NoMajorityError(f"message {m + 1}: best value has {count} < B+1={need} votes")
        decoded[m] = value
        accused |= {db for db in copies if int(copies[db][m]) != value}
    message = decoded if desired is None else decoded[desired - 1:desired]
    return RetrievalResult(
        message=message,
        identified_byzantine=frozenset(accused),
        layer_errors={("copies", m + 1): sum(int(copies[db][m]) != decoded[m] for db in copies)
                      for m in range(p.M)},
        downloaded=answers.received(),
    )
