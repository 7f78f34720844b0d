"""Session-log analysis: activity classification and the M1-M5 measures.

Events split into two categories. Design activity is either small-step
(weight tuning) or big-step (adding, removing, or editing objectives and
model terms). Evaluation activity is example-based (side-by-side views) or
metric-based (table, metric, and slice views plus new metric/slice
definitions), and either standard scope (dataset-level tables, the
task-provided anecdote queries) or additional scope (everything else).

Each event is attributed to the trade-off in force when it occurred: the
canonical serialization of the model most recently touched by a design
event, starting from the configured baseline. Repeated looks at the same
evaluation target under the same trade-off count once.

The derived measures:

    M1  distinct trade-offs with at least one evaluation
    M2  of those, trade-offs shaped by a big-step design event
    M3  distinct evaluations per evaluated trade-off
    M4  distinct additional-scope evaluations
    M5  metric/example balance: KL divergence of the distinct-evaluation
        split from the uniform one, Q(e) ln(Q(e)/0.5) + Q(m) ln(Q(m)/0.5),
        with 0 ln 0 = 0 (natural log; ln 2 is the maximum)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .ranker import canonical_terms_key
from .workspace import ACTIONS, SessionEvent, read_event_log

DESIGN = "design"
EVALUATION = "evaluation"

SMALL_STEP_ACTIONS = frozenset({"model.weight_change"})
BIG_STEP_ACTIONS = frozenset(
    {
        "objective.add",
        "objective.edit",
        "objective.remove",
        "model.term_add",
        "model.term_remove",
    }
)
EVALUATION_ACTIONS = frozenset(
    {"example.view", "table.view", "metric.view", "slice.view", "metric.define", "slice.define"}
)

INITIAL_TRADEOFF = "session-start"


class UnknownAction(Exception):
    pass


class EmptySession(Exception):
    pass


@dataclass(frozen=True)
class ActivityRecord:
    seq: int
    action: str
    category: str  # design | evaluation
    tradeoff_key: str
    design_step: str | None = None  # small | big
    eval_mode: str | None = None  # example | metric
    eval_scope: str | None = None  # standard | additional
    target: tuple | None = None  # what was evaluated, for dedup


@dataclass(frozen=True)
class SessionMetrics:
    m1_distinct_tradeoffs: int
    m2_distinct_bigstep: int
    m3_evals_per_tradeoff: float
    m4_additional_evals: int
    m5_balance_kl: float

    def to_dict(self) -> dict:
        return {
            "m1_distinct_tradeoffs": self.m1_distinct_tradeoffs,
            "m2_distinct_bigstep": self.m2_distinct_bigstep,
            "m3_evals_per_tradeoff": self.m3_evals_per_tradeoff,
            "m4_additional_evals": self.m4_additional_evals,
            "m5_balance_kl": self.m5_balance_kl,
        }


@dataclass
class SessionContext:
    """Running state while walking a log in order.

    `initial_terms` seeds the baseline trade-off key; without it, events
    before the first design action attach to a session-start sentinel.
    """

    anecdotes: frozenset[str]
    initial_terms: Mapping[str, float] | None = None
    current_key: str = field(init=False)
    bigstep_keys: set[str] = field(default_factory=set)

    def __post_init__(self):
        if self.initial_terms:
            self.current_key = canonical_terms_key(self.initial_terms)
        else:
            self.current_key = INITIAL_TRADEOFF


def classify(event: SessionEvent, ctx: SessionContext) -> ActivityRecord:
    """Classify one event, updating the context's trade-off tracking."""
    action = event.action
    if action not in ACTIONS:
        raise UnknownAction(f"unknown action {action!r}")
    payload = event.payload

    if action in SMALL_STEP_ACTIONS or action in BIG_STEP_ACTIONS:
        if action.startswith("model."):
            terms = payload.get("terms")
            if terms:
                ctx.current_key = canonical_terms_key(
                    {str(k): float(v) for k, v in terms.items()}
                )
        # Objective changes reshape the design without moving the weight
        # vector, so the key stays; the big-step flag still marks it.
        step = "small" if action in SMALL_STEP_ACTIONS else "big"
        if step == "big":
            ctx.bigstep_keys.add(ctx.current_key)
        return ActivityRecord(
            seq=event.seq,
            action=action,
            category=DESIGN,
            tradeoff_key=ctx.current_key,
            design_step=step,
        )

    if action == "example.view":
        query = str(payload.get("query_id", ""))
        scope = "standard" if query in ctx.anecdotes else "additional"
        mode = "example"
        target = ("example", query)
    elif action == "table.view":
        slice_name = str(payload.get("slice", "ALL"))
        scope = "standard" if slice_name == "ALL" else "additional"
        mode = "metric"
        target = ("table", slice_name)
    elif action == "metric.view":
        mode, scope = "metric", "additional"
        target = ("metric", str(payload.get("name", "")))
    elif action == "slice.view":
        mode, scope = "metric", "additional"
        target = ("slice", str(payload.get("name", "")))
    elif action == "metric.define":
        mode, scope = "metric", "additional"
        target = ("metric.define", str(payload.get("name", "")))
    else:  # slice.define
        mode, scope = "metric", "additional"
        target = ("slice.define", str(payload.get("name", "")))

    return ActivityRecord(
        seq=event.seq,
        action=action,
        category=EVALUATION,
        tradeoff_key=ctx.current_key,
        eval_mode=mode,
        eval_scope=scope,
        target=target,
    )


def classify_log(
    events: Sequence[SessionEvent],
    anecdotes: Iterable[str],
    initial_terms: Mapping[str, float] | None = None,
) -> tuple[list[ActivityRecord], SessionContext]:
    ctx = SessionContext(frozenset(str(q) for q in anecdotes), initial_terms)
    return [classify(event, ctx) for event in events], ctx


def session_metrics(
    events: Sequence[SessionEvent],
    anecdotes: Iterable[str],
    initial_terms: Mapping[str, float] | None = None,
) -> SessionMetrics:
    """Compute M1-M5 for one finished session log."""
    if not events:
        raise EmptySession("session log contains no events")
    records, ctx = classify_log(events, anecdotes, initial_terms)

    # Dedup evaluations on (target, trade-off); first occurrence wins.
    distinct: dict[tuple, ActivityRecord] = {}
    for record in records:
        if record.category != EVALUATION:
            continue
        key = (record.target, record.tradeoff_key)
        distinct.setdefault(key, record)

    evaluated_keys = {record.tradeoff_key for record in distinct.values()}
    m1 = len(evaluated_keys)
    m2 = len(evaluated_keys & ctx.bigstep_keys)
    m3 = len(distinct) / m1 if m1 else 0.0
    m4 = sum(1 for r in distinct.values() if r.eval_scope == "additional")
    m5 = balance_kl(
        sum(1 for r in distinct.values() if r.eval_mode == "example"),
        sum(1 for r in distinct.values() if r.eval_mode == "metric"),
    )
    return SessionMetrics(m1, m2, m3, m4, m5)


def balance_kl(example_count: int, metric_count: int) -> float:
    """KL divergence of an (example, metric) split from the uniform split."""
    total = example_count + metric_count
    if total == 0:
        return 0.0
    result = 0.0
    for count in (example_count, metric_count):
        q = count / total
        if q > 0.0:
            result += q * math.log(q / 0.5)
    return result


def distinct_flags(records: Sequence[ActivityRecord]) -> list[bool]:
    """Whether each record is the first sighting of its (target, trade-off)."""
    seen: set[tuple] = set()
    flags = []
    for record in records:
        if record.category != EVALUATION:
            flags.append(False)
            continue
        key = (record.target, record.tradeoff_key)
        flags.append(key not in seen)
        seen.add(key)
    return flags


def activity_rows(
    events: Sequence[SessionEvent],
    anecdotes: Iterable[str],
    initial_terms: Mapping[str, float] | None = None,
) -> list[dict]:
    """Per-event classification rows, ready for a CSV activity strip."""
    records, _ = classify_log(events, anecdotes, initial_terms)
    flags = distinct_flags(records)
    rows = []
    for event, record, fresh in zip(events, records, flags):
        rows.append(
            {
                "seq": event.seq,
                "timestamp": event.timestamp,
                "actor": event.actor,
                "action": event.action,
                "category": record.category,
                "design_step": record.design_step or "",
                "eval_mode": record.eval_mode or "",
                "eval_scope": record.eval_scope or "",
                "tradeoff_key": record.tradeoff_key,
                "target": "/".join(record.target) if record.target else "",
                "distinct": "1" if fresh else "0",
            }
        )
    return rows


__all__ = [
    "ActivityRecord",
    "SessionMetrics",
    "SessionContext",
    "UnknownAction",
    "EmptySession",
    "classify",
    "classify_log",
    "session_metrics",
    "balance_kl",
    "activity_rows",
    "read_event_log",
]
