"""Session lifecycle and the three playing modes.

* Instruction — only the currently suggested move is accepted; anything
  else is rejected with the hint and leaves the world untouched.
* Evaluation — free play against a procedure; the log is scored at the
  end by the assessment mechanism.
* Experimentation — free play with no procedure and no scoring.

A session has one logical owner; callers serialize operations per
session. Distinct sessions are fully independent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

from . import canon
from .assessment import EvaluationReport, ScoreCursor, classify_action, cursor_report
from .engine import (
    Action,
    TransitionResult,
    WorldState,
    apply_action,
    init_world,
    state_hash,
)
from .errors import (
    FormatSyntaxError,
    InconsistentLogError,
    ModeArgMismatchError,
    SessionFinishedError,
    UnknownProcedureError,
    VlabError,
    WrongModeError,
)
from .model import Affordance, SceneFile
from .procedures import Procedure, Step, action_matches, concretize, post_conditions_hold

if TYPE_CHECKING:  # pragma: no cover
    from .formats import ScenarioPack


class Mode(Enum):
    INSTRUCTION = "instruction"
    EVALUATION = "evaluation"
    EXPERIMENTATION = "experimentation"


@dataclass
class LogEntry:
    tick: int  # world tick after the action
    action: Action
    result: TransitionResult
    newly_matched: list[str] = field(default_factory=list)

    def as_json(self) -> dict:
        return {
            "tick": self.tick,
            "action": self.action.as_json(),
            "fired_rules": list(self.result.fired_rules),
            "newly_matched": list(self.newly_matched),
        }


@dataclass(frozen=True)
class Suggestion:
    step_id: str
    hint_text: str
    action: Action

    def as_json(self) -> dict:
        return {
            "step_id": self.step_id,
            "hint_text": self.hint_text,
            "action": self.action.as_json(),
        }


@dataclass
class SubmitResult:
    accepted: bool
    reason: str | None = None
    result: TransitionResult | None = None
    newly_matched: list[str] = field(default_factory=list)
    completed: bool = False

    def as_json(self) -> dict:
        out: dict = {
            "accepted": self.accepted,
            "newly_matched": list(self.newly_matched),
            "completed": self.completed,
            "events": [e.as_json() for e in self.result.events] if self.result else [],
            "state_delta": [d.as_json() for d in self.result.state_delta] if self.result else [],
        }
        if self.reason is not None:
            out["reason"] = self.reason
        return out


@dataclass(frozen=True)
class SessionReport:
    mode: Mode
    steps_matched: int
    steps_total: int
    action_count: int
    evaluation: EvaluationReport | None = None

    def as_json(self) -> dict:
        out: dict = {
            "mode": self.mode.value,
            "steps_matched": self.steps_matched,
            "steps_total": self.steps_total,
            "action_count": self.action_count,
        }
        if self.evaluation is not None:
            out["evaluation"] = self.evaluation.as_json()
        return out


@dataclass
class Session:
    id: str
    mode: Mode
    pack: "ScenarioPack"
    world: WorldState
    initial_world: WorldState
    procedure: Procedure | None = None
    focus: str | None = None
    matched_steps: set[str] = field(default_factory=set)
    matched_order: list[str] = field(default_factory=list)
    action_log: list[LogEntry] = field(default_factory=list)
    finished: bool = False
    cursor: ScoreCursor | None = None  # Evaluation-mode incremental scorer
    _report: SessionReport | None = None

    @property
    def completed(self) -> bool:
        return self.procedure is not None and len(self.matched_steps) == len(
            self.procedure.steps
        )


def start_session(scene: SceneFile, pack: "ScenarioPack", mode: Mode,
                  procedure_id: str | None = None, session_id: str = "local") -> Session:
    """Create a fresh session. Instruction and Evaluation bind a procedure;
    Experimentation forbids one."""
    if mode is Mode.EXPERIMENTATION:
        if procedure_id is not None:
            raise ModeArgMismatchError("experimentation takes no procedure")
        procedure = None
    else:
        if procedure_id is None:
            raise ModeArgMismatchError(f"{mode.value} requires a procedure id")
        procedure = next((p for p in pack.procedures if p.id == procedure_id), None)
        if procedure is None:
            raise UnknownProcedureError(f"unknown procedure {procedure_id!r}")
    world = init_world(scene, pack)
    session = Session(
        id=session_id,
        mode=mode,
        pack=pack,
        world=world,
        initial_world=world.copy(),
        procedure=procedure,
    )
    if mode is Mode.EVALUATION:
        session.cursor = ScoreCursor(world=world.copy(), pack=pack, procedure=procedure)
    return session


def suggest_next(session: Session) -> Suggestion | None:
    """The next expected move in Instruction mode, or None once the
    procedure is complete."""
    if session.mode is not Mode.INSTRUCTION:
        raise WrongModeError("suggestions are only available in instruction mode")
    assert session.procedure is not None
    ready = session.procedure.ready_steps(session.matched_steps)
    if not ready:
        return None
    step = ready[0]
    action = concretize(step.matcher, session.world, session.pack.kinds)
    return Suggestion(step_id=step.id, hint_text=step.hint_text, action=action)


def _commit(session: Session, action: Action, new_world: WorldState,
            result: TransitionResult, newly_matched: list[str]) -> SubmitResult:
    session.world = new_world
    if action.verb is Affordance.ZOOM:
        session.focus = action.subject
    for step_id in newly_matched:
        session.matched_steps.add(step_id)
        session.matched_order.append(step_id)
    entry = LogEntry(
        tick=new_world.tick, action=action, result=result, newly_matched=list(newly_matched)
    )
    session.action_log.append(entry)
    return SubmitResult(
        accepted=True,
        result=result,
        newly_matched=list(newly_matched),
        completed=session.completed,
    )


def submit_action(session: Session, action: Action) -> SubmitResult:
    """Apply one action under the session's mode rules.

    Rejections are outcomes, not errors: the world, tick and log are
    unchanged and the reason says why (in Instruction mode it echoes the
    current hint).
    """
    if session.finished:
        raise SessionFinishedError(f"session {session.id!r} is finished")

    if session.mode is Mode.INSTRUCTION:
        suggestion = suggest_next(session)
        if suggestion is None:
            return SubmitResult(accepted=False, reason="procedure already completed")
        step = next(s for s in session.procedure.steps if s.id == suggestion.step_id)
        if not action_matches(step.matcher, action, session.world, session.pack.kinds):
            return SubmitResult(accepted=False, reason=suggestion.hint_text)
        try:
            new_world, result = apply_action(session.world, session.pack, action)
        except VlabError as exc:
            return SubmitResult(accepted=False, reason=exc.message)
        if not post_conditions_hold(step, new_world):
            return SubmitResult(accepted=False, reason=suggestion.hint_text)
        return _commit(session, action, new_world, result, [step.id])

    # Evaluation / Experimentation: every engine-legal action is applied.
    try:
        new_world, result = apply_action(session.world, session.pack, action)
    except VlabError as exc:
        return SubmitResult(accepted=False, reason=exc.message)

    newly_matched: list[str] = []
    if session.mode is Mode.EVALUATION:
        assert session.cursor is not None
        session.cursor.world = new_world.copy()
        classification = classify_action(session.cursor, action, result)
        if classification.matched_step is not None:
            newly_matched.append(classification.matched_step)
    return _commit(session, action, new_world, result, newly_matched)


def finish_session(session: Session) -> SessionReport:
    """Freeze the session and produce its report. Idempotent; finishing
    early is allowed in every mode."""
    if session._report is not None:
        return session._report
    evaluation = None
    if session.mode is Mode.EVALUATION:
        assert session.cursor is not None
        evaluation = cursor_report(session.cursor)
    report = SessionReport(
        mode=session.mode,
        steps_matched=len(session.matched_steps),
        steps_total=len(session.procedure.steps) if session.procedure else 0,
        action_count=len(session.action_log),
        evaluation=evaluation,
    )
    session.finished = True
    session._report = report
    return report


# --- action-log wire format --------------------------------------------------

def export_log(session: Session) -> bytes:
    """Line-delimited canonical JSON, one record per applied action: the
    replay format consumed by ``vlab replay``."""
    lines = [canon.dumps_line(entry.as_json()) for entry in session.action_log]
    return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")


@dataclass(frozen=True)
class LogRecord:
    tick: int
    action: Action
    fired_rules: tuple[str, ...]
    newly_matched: tuple[str, ...]


def parse_log(data: bytes) -> list[LogRecord]:
    records = []
    for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatSyntaxError(f"bad log line: {exc.msg}", lineno, exc.colno) from None
        if not isinstance(raw, dict) or "action" not in raw or "tick" not in raw:
            raise FormatSyntaxError("log record needs tick and action", lineno, 1)
        records.append(
            LogRecord(
                tick=raw["tick"],
                action=Action.from_json(raw["action"]),
                fired_rules=tuple(raw.get("fired_rules", ())),
                newly_matched=tuple(raw.get("newly_matched", ())),
            )
        )
    return records


def replay_log(scene: SceneFile, pack: "ScenarioPack",
               records: list[LogRecord]) -> WorldState:
    """Re-apply a recorded log from a fresh world, verifying each record's
    tick and fired rules. Returns the final world."""
    world = init_world(scene, pack)
    for record in records:
        new_world, result = apply_action(world, pack, record.action)
        if new_world.tick != record.tick or tuple(result.fired_rules) != record.fired_rules:
            raise InconsistentLogError(
                f"log record at tick {record.tick} does not match the replayed transition"
            )
        world = new_world
    return world


def walkthrough(session: Session, limit: int = 1000) -> list[Action]:
    """Follow every suggestion until the procedure completes (Instruction
    mode). Returns the accepted actions; raises if a suggested action is
    ever rejected."""
    accepted: list[Action] = []
    while len(accepted) < limit:
        suggestion = suggest_next(session)
        if suggestion is None:
            return accepted
        outcome = submit_action(session, suggestion.action)
        if not outcome.accepted:
            raise VlabError(
                f"suggested action for step {suggestion.step_id!r} was rejected: "
                f"{outcome.reason}"
            )
        accepted.append(suggestion.action)
    raise VlabError("walkthrough did not complete within the action limit")


def session_state_hash(session: Session) -> str:
    return state_hash(session.world)
