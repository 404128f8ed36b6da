"""The embedded assessment mechanism.

Every logged action is classified exactly once:

* productive — matched the earliest ready unmatched step (matcher and
  post-conditions), no penalty;
* redundant  — identical in matcher terms to a step the log matches
  (before or after this action), penalty 2;
* hazardous  — the transition emitted a hazard event, penalty 5;
* irrelevant — everything else, penalty 1.

Redundancy is judged against the run's final matched set: a duplicate
fired *before* its step gets matched is upgraded to redundant as soon as
the step matches. This keeps the greedy scorer exactly equal to the
exhaustive best-assignment oracle on totally ordered procedures, which
purely time-local classification cannot achieve (matching the earliest
duplicate would then cost more than matching the latest one).

The score is ``max(0, 100 * matched/total - penalties)``; the integer
``score`` rounds that, the exact pre-rounding value is kept as
``score_raw`` (the ML environment's reward stream telescopes to it).

Classification is a single forward replay of the log, so the scorer
doubles as a log-consistency check.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

from .engine import Action, TransitionResult, WorldState, apply_action
from .errors import InconsistentLogError
from .procedures import Procedure, Step, action_matches, post_conditions_hold

if TYPE_CHECKING:  # pragma: no cover
    from .formats import ScenarioPack

PENALTY_REDUNDANT = 2.0
PENALTY_HAZARDOUS = 5.0
PENALTY_IRRELEVANT = 1.0


@dataclass(frozen=True)
class ActionClassification:
    tick: int
    klass: str  # productive | redundant | irrelevant | hazardous
    matched_step: str | None = None  # productive only
    penalty: float = 0.0

    def as_json(self) -> dict:
        out: dict = {"tick": self.tick, "class": self.klass, "penalty": self.penalty}
        if self.matched_step is not None:
            out["matched_step"] = self.matched_step
        return out


@dataclass(frozen=True)
class EvaluationReport:
    score: int  # 0..100
    score_raw: float  # pre-rounding value the score is derived from
    steps_matched: int
    steps_total: int
    penalty_total: float
    classifications: tuple[ActionClassification, ...]

    def as_json(self) -> dict:
        return {
            "score": self.score,
            "score_raw": self.score_raw,
            "steps_matched": self.steps_matched,
            "steps_total": self.steps_total,
            "penalty_total": self.penalty_total,
            "classifications": [c.as_json() for c in self.classifications],
        }


def raw_score(matched: int, total: int, penalty: float) -> float:
    ratio = 100.0 if total == 0 else 100.0 * matched / total
    return max(0.0, ratio - penalty)


def _final_report(cursor: ScoreCursor) -> EvaluationReport:
    raw = raw_score(len(cursor.matched), cursor.steps_total, cursor.penalty_total)
    return EvaluationReport(
        score=int(round(raw)),
        score_raw=raw,
        steps_matched=len(cursor.matched),
        steps_total=cursor.steps_total,
        penalty_total=cursor.penalty_total,
        classifications=tuple(cursor.classifications),
    )


@dataclass
class ScoreCursor:
    """Mutable scoring state advanced one action at a time (for live
    feedback); ``score_log`` is its fold. Earlier classifications may be
    upgraded to redundant when their step matches later; the final report
    is the authoritative view."""

    world: WorldState
    pack: "ScenarioPack"
    procedure: Procedure
    matched: set[str] = field(default_factory=set)
    penalty_total: float = 0.0
    classifications: list[ActionClassification] = field(default_factory=list)
    actions: list[Action] = field(default_factory=list)

    @property
    def steps_total(self) -> int:
        return len(self.procedure.steps)

    def running_raw_score(self) -> float:
        return raw_score(len(self.matched), self.steps_total, self.penalty_total)


def _upgrade_earlier_duplicates(cursor: ScoreCursor, step: Step) -> None:
    """When ``step`` just matched, earlier non-productive twins of it
    become redundant."""
    registry = cursor.pack.kinds
    for index, classification in enumerate(cursor.classifications):
        if classification.klass in ("productive", "redundant"):
            continue
        if action_matches(step.matcher, cursor.actions[index], cursor.world, registry):
            cursor.penalty_total += PENALTY_REDUNDANT - classification.penalty
            cursor.classifications[index] = replace(
                classification, klass="redundant", penalty=PENALTY_REDUNDANT
            )


def classify_action(cursor: ScoreCursor, action: Action, result: TransitionResult,
                    *, verify_against: TransitionResult | None = None) -> ActionClassification:
    """Classify one log entry and advance the cursor.

    ``result`` must be the transition recomputed on the cursor's world;
    pass the recorded one as ``verify_against`` to detect tampered logs.
    """
    if verify_against is not None and (
        verify_against.fired_rules != result.fired_rules
        or verify_against.state_delta != result.state_delta
    ):
        raise InconsistentLogError(
            f"log entry at tick {cursor.world.tick} does not match the replayed transition"
        )

    registry = cursor.pack.kinds
    classification: ActionClassification | None = None
    for step in cursor.procedure.ready_steps(cursor.matched):
        if action_matches(step.matcher, action, cursor.world, registry) and post_conditions_hold(
            step, cursor.world
        ):
            classification = ActionClassification(
                tick=cursor.world.tick, klass="productive", matched_step=step.id
            )
            cursor.matched.add(step.id)
            _upgrade_earlier_duplicates(cursor, step)
            break
    if classification is None:
        matched_steps = [s for s in cursor.procedure.steps if s.id in cursor.matched]
        if any(
            action_matches(s.matcher, action, cursor.world, registry) for s in matched_steps
        ):
            classification = ActionClassification(
                tick=cursor.world.tick, klass="redundant", penalty=PENALTY_REDUNDANT
            )
        elif result.has_hazard():
            classification = ActionClassification(
                tick=cursor.world.tick, klass="hazardous", penalty=PENALTY_HAZARDOUS
            )
        else:
            classification = ActionClassification(
                tick=cursor.world.tick, klass="irrelevant", penalty=PENALTY_IRRELEVANT
            )
    cursor.penalty_total += classification.penalty
    cursor.classifications.append(classification)
    cursor.actions.append(action)
    return classification


def score_log(log: list[tuple[Action, TransitionResult]], procedure: Procedure, *,
              pack: "ScenarioPack", initial_world: WorldState) -> EvaluationReport:
    """Score a full action log by replaying it from the initial world.

    Raises :class:`InconsistentLogError` when a recorded transition does
    not reproduce.
    """
    cursor = ScoreCursor(world=initial_world.copy(), pack=pack, procedure=procedure)
    for action, recorded in log:
        new_world, result = apply_action(cursor.world, pack, action)
        cursor.world = new_world  # post-conditions are checked post-action
        classify_action(cursor, action, result, verify_against=recorded)
    return _final_report(cursor)


def cursor_report(cursor: ScoreCursor) -> EvaluationReport:
    """Snapshot the cursor as a report (used for live scoring)."""
    return _final_report(cursor)
