"""Experiment configuration, orchestration and report formatting."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import time
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from . import analysis
from .decoder import retrieve
from .errors import ConfigError, DecodeFailure, NoMajorityError, RegimeError
from .field import DEFAULT_MODULUS, PrimeField, derive_seed, make_rng
from .network import AdversaryConfig, Behavior, MessageSet, collect, make_nodes
from .scheme import (
    Params,
    Regime,
    build_plan,
    build_trivial_plan,
    classify_regime,
    compute_dims,
    dump_query_table,
    enumerate_sets,
    regime_violation,
)

EMIT_FORMATS = ("table", "json", "csv")
PARAM_KEYS = ("N", "M", "T", "B", "U", "q", "seed")


@dataclass(frozen=True)
class ExperimentConfig:
    params: Params
    desired: object = 1  # int, or "all" for every index in turn
    adversary: str = "worst"
    byzantine_set: frozenset | None = None
    unresponsive_set: frozenset | None = None
    trials: int = 1
    emit: str = "table"
    dump_queries: bool = False
    audit_privacy: bool = False
    probe_confusability: bool = False
    probe_pairs: int = 1000
    trivial: bool = False
    timing: bool = False

    @property
    def desired_indices(self) -> list:
        if self.desired == "all":
            return list(range(1, self.params.M + 1))
        return [self.desired]


def parse_adversary(text: str):
    """``none | content | random:<rate> | worst`` -> (Behavior, rate)."""
    text = str(text).strip().lower()
    if text == "none":
        return Behavior.HONEST, 0.0
    if text == "content":
        return Behavior.CONTENT_SWAP, 1.0
    if text == "worst":
        return Behavior.ANSWER_WORST, 1.0
    if text.startswith("random"):
        _, _, rate = text.partition(":")
        try:
            rate = float(rate) if rate else 1.0
        except ValueError:
            raise ConfigError(f"--adversary {text}: rate must be a number") from None
        if not 0.0 <= rate <= 1.0:
            raise ConfigError(f"--adversary {text}: rate must lie in [0, 1]")
        return Behavior.ANSWER_RANDOM, rate
    raise ConfigError(f"--adversary {text}: expected none, content, random:<rate> or worst")


def parse_index_set(value, name: str):
    if value is None:
        return None
    if isinstance(value, str):
        parts = [s for s in value.replace(" ", "").split(",") if s]
    else:
        parts = list(value)
    try:
        return frozenset(int(x) for x in parts)
    except (TypeError, ValueError):
        raise ConfigError(f"--{name}: expected comma-separated database indices, got {value!r}") from None


def _read_file(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a flat JSON object")
    return data


def _normalise_key(key: str) -> str:
    key = key.strip().replace("-", "_")
    if key.upper() in PARAM_KEYS and key.upper() not in ("Q", "SEED"):
        return key.upper()
    return key.lower()


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"params"}


def validate_and_load(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Merge a JSON config file (optional) with flag overrides and validate the result.

    Flags win over file values.  Missing parameters take the defaults
    q=65537, U=0, trials=1, seed=0; N, M, T and B are required.
    """
    raw = {}
    if path is not None:
        for key, value in _read_file(path).items():
            raw[_normalise_key(key)] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[_normalise_key(key)] = value
    unknown = set(raw) - set(PARAM_KEYS) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    missing = [k for k in ("N", "M", "T", "B") if k not in raw]
    if missing:
        raise ConfigError(f"missing required parameters: {', '.join('--' + k.lower() for k in missing)}")

    def as_int(key, default=None):
        value = raw.get(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, str)):
            raise ConfigError(f"--{key.lower()}: expected an integer, got {value!r}")
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"--{key.lower()}: expected an integer, got {value!r}") from None

    try:
        params = Params(
            N=as_int("N"), M=as_int("M"), T=as_int("T"), B=as_int("B"), U=as_int("U", 0),
            q=as_int("q", DEFAULT_MODULUS), seed=as_int("seed", 0),
        )
        PrimeField(params.q)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    desired = raw.get("desired", 1)
    if str(desired).lower() in ("all", "sweep-all"):
        desired = "all"
    else:
        try:
            desired = int(desired)
        except (TypeError, ValueError):
            raise ConfigError(f"--desired: expected an index or 'all', got {desired!r}") from None
        if not 1 <= desired <= params.M:
            raise ConfigError(f"--desired {desired}: must lie in 1..M={params.M}")

    adversary = str(raw.get("adversary", "worst"))
    behavior, _ = parse_adversary(adversary)
    byz = parse_index_set(raw.get("byzantine_set"), "byzantine-set")
    unr = parse_index_set(raw.get("unresponsive_set"), "unresponsive-set")
    for name, s, cap in (("byzantine-set", byz, params.B), ("unresponsive-set", unr, params.U)):
        if s is None:
            continue
        if any(not 1 <= d <= params.N for d in s):
            raise ConfigError(f"--{name}: indices must lie in 1..N={params.N}")
        if len(s) > cap:
            raise ConfigError(f"--{name}: {len(s)} databases exceeds the budget {cap}")
    if byz and unr and byz & unr:
        raise ConfigError("a database cannot be both Byzantine and unresponsive")
    if behavior is Behavior.HONEST and byz:
        raise ConfigError("--byzantine-set given with --adversary none")

    emit = str(raw.get("emit", "table")).lower()
    if emit not in EMIT_FORMATS:
        raise ConfigError(f"--emit {emit}: expected one of {', '.join(EMIT_FORMATS)}")
    trials = as_int("trials", 1)
    if trials < 0:
        raise ConfigError("--trials must be non-negative")
    probe_pairs = as_int("probe_pairs", 1000)

    cfg = ExperimentConfig(
        params=params,
        desired=desired,
        adversary=adversary,
        byzantine_set=byz,
        unresponsive_set=unr,
        trials=trials,
        emit=emit,
        dump_queries=bool(raw.get("dump_queries", False)),
        audit_privacy=bool(raw.get("audit_privacy", False)),
        probe_confusability=bool(raw.get("probe_confusability", False)),
        probe_pairs=probe_pairs,
        trivial=bool(raw.get("trivial", False)),
        timing=bool(raw.get("timing", False)),
    )
    check_regime(cfg)
    return cfg


def check_regime(cfg: ExperimentConfig):
    """Reject configs outside the regime the chosen scheme can serve, naming the inequality."""
    p = cfg.params
    regime = classify_regime(p)
    if regime is Regime.INFEASIBLE:
        raise RegimeError(regime_violation(p))
    if regime is Regime.TRIVIAL and not cfg.trivial:
        raise RegimeError(regime_violation(p))
    if regime is Regime.FULL:
        if cfg.trivial:
            raise RegimeError(f"2B+T+U={2 * p.B + p.T + p.U} < N={p.N}: full regime, drop --trivial")
        dims = compute_dims(p, enumerate_sets(p.M, 1))
        p.field.require_codelength(max((dims.outer_len,) + dims.code_len))


@dataclass
class TrialOutcome:
    trial: int
    desired: int
    seed: int
    byzantine: tuple
    unresponsive: tuple
    success: bool
    identified: tuple
    layer_errors: dict
    failure: str | None = None
    # Byzantine databases that were actually queried, hence identifiable
    exposed: tuple = ()


@dataclass
class RunReport:
    config: ExperimentConfig
    rate: analysis.RateReport
    trials: int
    successes: int
    identified_exact: int
    false_accusations: int
    layer_tallies: dict
    seeds: list
    outcomes: list = dc_field(repr=False, default_factory=list)
    privacy: list | None = None
    probe: analysis.ProbeReport | None = None
    query_table: str | None = None
    wall_clock: float = 0.0

    @property
    def decode_ok(self) -> bool:
        return self.successes == self.trials

    @property
    def audit_ok(self) -> bool:
        if self.privacy is not None and not all(a.passed for a in self.privacy):
            return False
        if self.probe is not None and self.probe.confusable:
            return False
        return True

    @property
    def failures(self) -> list:
        return [o for o in self.outcomes if not o.success]


def _adversary_for_trial(cfg: ExperimentConfig, rng: np.random.Generator) -> AdversaryConfig:
    p = cfg.params
    behavior, rate = parse_adversary(cfg.adversary)
    dbs = np.arange(1, p.N + 1)
    byz = cfg.byzantine_set
    if byz is None:
        byz = frozenset() if behavior is Behavior.HONEST or p.B == 0 else \
            frozenset(int(x) for x in rng.choice(dbs, size=p.B, replace=False))
    unr = cfg.unresponsive_set
    if unr is None:
        pool = np.array([d for d in dbs if d not in byz])
        unr = frozenset(int(x) for x in rng.choice(pool, size=p.U, replace=False)) if p.U else frozenset()
    return AdversaryConfig(byz, unr, behavior, rate, None, int(rng.integers(0, 2**62)))


def _one_trial(cfg: ExperimentConfig, desired: int, trial: int, seed: int) -> tuple:
    p = cfg.params
    field = p.field
    rng = make_rng(seed)
    adv = _adversary_for_trial(cfg, rng)
    if classify_regime(p) is Regime.TRIVIAL:
        plan = build_trivial_plan(p, rng, responsive=[d for d in range(1, p.N + 1) if d not in adv.unresponsive])
    else:
        plan = build_plan(p, desired, rng)
    truth = MessageSet.random(p.M, plan.message_length, field, rng)
    answers = collect(plan, make_nodes(p, truth, adv), adv)
    failure = None
    identified = ()
    layer_errors = {}
    try:
        result = retrieve(plan, answers)
        if plan.regime is Regime.TRIVIAL:
            got, want = result.message[desired - 1:desired], truth[desired]
        else:
            got, want = result.message, truth[desired]
        ok = got is not None and np.array_equal(got, want)
        if not ok:
            failure = "decoded message differs from ground truth"
        identified = tuple(sorted(result.identified_byzantine))
        layer_errors = {_layer_name(k): v for k, v in result.layer_errors.items()}
    except (DecodeFailure, NoMajorityError) as exc:
        ok = False
        layer = getattr(exc, "layer", None)
        failure = f"{type(exc).__name__} in layer {_layer_name(layer) if layer else '?'}: {exc}"
    outcome = TrialOutcome(trial, desired, seed, tuple(sorted(adv.byzantine)),
                           tuple(sorted(adv.unresponsive)), ok, identified, layer_errors, failure,
                           tuple(sorted(adv.byzantine & set(plan.queried_databases))))
    return outcome, plan


def _layer_name(layer) -> str:
    kind, what = layer
    if isinstance(what, tuple):
        return f"{kind}{{{','.join(str(m) for m in what)}}}"
    return f"{kind}{what}"


def run(cfg: ExperimentConfig) -> RunReport:
    """Build plans, simulate the databases, decode and aggregate over trials.

    Trial ``t`` for desired index ``l`` uses seed ``derive_seed(seed, l, t)``
    for its plan, messages and adversary, so runs are reproducible.
    """
    check_regime(cfg)
    p = cfg.params
    start = time.perf_counter()
    outcomes, seeds = [], []
    first_plan = None
    for desired in cfg.desired_indices:
        for t in range(cfg.trials):
            seed = derive_seed(p.seed, desired, t)
            outcome, plan = _one_trial(cfg, desired, t, seed)
            first_plan = first_plan or plan
            outcomes.append(outcome)
            seeds.append(seed)
    if first_plan is None:
        rng = make_rng(derive_seed(p.seed, cfg.desired_indices[0], 0))
        if classify_regime(p) is Regime.TRIVIAL:
            first_plan = build_trivial_plan(p, rng)
        else:
            first_plan = build_plan(p, cfg.desired_indices[0], rng)
    rate = analysis.measure_rate(first_plan)
    tallies = {}
    for o in outcomes:
        for k, v in o.layer_errors.items():
            tallies.setdefault(k, []).append(v)
    report = RunReport(
        config=cfg,
        rate=rate,
        trials=len(outcomes),
        successes=sum(o.success for o in outcomes),
        identified_exact=sum(o.success and set(o.identified) == set(o.exposed) for o in outcomes),
        false_accusations=sum(bool(set(o.identified) - set(o.byzantine)) for o in outcomes),
        layer_tallies=tallies,
        seeds=seeds,
        outcomes=outcomes,
    )
    if cfg.dump_queries and first_plan.regime is Regime.FULL:
        report.query_table = dump_query_table(first_plan)
    if cfg.audit_privacy and first_plan.regime is Regime.FULL:
        report.privacy = analysis.audit_all_subsets(first_plan)
    if cfg.probe_confusability and first_plan.regime is Regime.FULL:
        report.probe = analysis.confusability_probe(
            p, cfg.probe_pairs, derive_seed(p.seed, 0xC0), desired=cfg.desired_indices[0])
    report.wall_clock = time.perf_counter() - start
    return report


# sweeps

def sweep_capacity(T: int, M: int, Bs, Ns) -> list:
    """Rows (B, N, regime, C) over the grid; C is an exact Fraction."""
    rows = []
    for B in Bs:
        for N in Ns:
            regime, C = analysis.capacity(N, M, T, B)
            rows.append({"B": B, "N": N, "regime": regime.value, "C": C})
    return rows


def sweep_gamma(gammas, N: int = 1000, M: int = 3, T: int = 2) -> list:
    """Capacity at B = floor(gamma N) against the large-N limit 1 - 2 gamma."""
    rows = []
    for g in gammas:
        g = Fraction(g).limit_denominator(10**6)
        B = int(g * N)
        regime, C = analysis.capacity(N, M, T, B)
        rows.append({"gamma": g, "B": B, "N": N, "regime": regime.value, "C": C,
                     "limit": analysis.asymptotic_capacity(g)})
    return rows


# output

def fmt_fraction(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator} ({float(x):.6f})"


def sweep_to_csv(rows) -> str:
    buf = io.StringIO()
    fields = [k for k in rows[0] if not isinstance(rows[0][k], Fraction)] if rows else []
    fracs = [k for k in rows[0] if isinstance(rows[0][k], Fraction)] if rows else []
    header = fields + [f"{k}_{part}" for k in fracs for part in ("num", "den", "dec")]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([r[k] for k in fields]
                   + [v for k in fracs for v in (r[k].numerator, r[k].denominator, f"{float(r[k]):.6f}")])
    return buf.getvalue()


def report_to_dict(report: RunReport) -> dict:
    p = report.config.params
    rate = report.rate
    out = {
        "params": {k: getattr(p, k) for k in PARAM_KEYS},
        "rate": rate.to_dict(),
        "R": f"{rate.R.numerator}/{rate.R.denominator}",
        "R_decimal": f"{float(rate.R):.6f}",
        "C": f"{rate.C.numerator}/{rate.C.denominator}",
        "C_decimal": f"{float(rate.C):.6f}",
        "trials": report.trials,
        "successes": report.successes,
        "identified_exact": report.identified_exact,
        "false_accusations": report.false_accusations,
        "layer_errors": {k: v for k, v in sorted(report.layer_tallies.items())},
        "seeds": report.seeds,
        "failures": [dataclasses.asdict(o) for o in report.failures],
    }
    if report.privacy is not None:
        out["privacy"] = [{"subset": list(a.subset), "counts": a.counts, "ranks": a.ranks,
                           "expected": a.expected, "pass": a.passed} for a in report.privacy]
    if report.probe is not None:
        out["confusability"] = dataclasses.asdict(report.probe)
    if report.config.timing:
        out["wall_clock"] = report.wall_clock
    return out


def format_report(report: RunReport) -> str:
    emit = report.config.emit
    if emit == "json":
        return json.dumps(report_to_dict(report), indent=2, sort_keys=True, default=str) + "\n"
    rate = report.rate
    p = report.config.params
    if emit == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "M", "T", "B", "U", "q", "seed", "regime", "L", "D",
                    "R_num", "R_den", "R", "C_num", "C_den", "C", "match", "trials", "successes",
                    "identified_exact"])
        w.writerow([p.N, p.M, p.T, p.B, p.U, p.q, p.seed, rate.regime.value, rate.L, rate.D,
                    rate.R.numerator, rate.R.denominator, f"{float(rate.R):.6f}",
                    rate.C.numerator, rate.C.denominator, f"{float(rate.C):.6f}",
                    rate.match, report.trials, report.successes, report.identified_exact])
        return buf.getvalue()
    lines = []
    if report.query_table:
        lines.append(report.query_table.rstrip("\n"))
        lines.append("")
    lines += [
        f"N={p.N} M={p.M} T={p.T} B={p.B} U={p.U} q={p.q} seed={p.seed}",
        f"regime    {rate.regime.value}",
        f"L         {rate.L}",
        f"D         {rate.D}",
        f"R         {fmt_fraction(rate.R)}",
        f"C         {fmt_fraction(rate.C)}",
        f"R == C    {rate.match}",
        f"decoded   {report.successes}/{report.trials}",
        f"caught    {report.identified_exact}/{report.trials} exact Byzantine sets",
    ]
    for name, counts in sorted(report.layer_tallies.items()):
        lines.append(f"errors    {name}: max {max(counts)}, total {sum(counts)}")
    for o in report.failures:
        lines.append(f"FAILED    trial {o.trial} desired {o.desired} seed {o.seed}: {o.failure}")
    if report.privacy is not None:
        bad = [a for a in report.privacy if not a.passed]
        lines.append(f"privacy   {len(report.privacy) - len(bad)}/{len(report.privacy)} subsets pass "
                     f"(rank {report.privacy[0].expected} per message)" if report.privacy else "privacy   n/a")
    if report.probe is not None:
        pr = report.probe
        lines.append(f"probe     {pr.pairs} pairs, {pr.confusable} confusable, {pr.invisible} invisible")
    if report.config.timing:
        lines.append(f"time      {report.wall_clock:.3f} s")
    return "\n".join(lines) + "\n"
