"""Gym-style environment over Evaluation-mode sessions.

The action space is a fixed catalog computed at reset: every legal
action, with UseWith amount slots expanded over a configured grid. The
catalog never changes mid-episode; actions that are illegal in the
current state cost one irrelevant penalty instead of being masked.

The reward is the per-step delta of the running assessment score (the
exact pre-rounding value, scaled to [0, 1]), so the episode's reward sum
telescopes to the final score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .assessment import (
    PENALTY_IRRELEVANT,
    ActionClassification,
    EvaluationReport,
    raw_score,
)
from .engine import Action, legal_actions
from .errors import EpisodeDoneError, IndexOutOfRangeError, ValidationError
from .formats import ScenarioPack
from .model import FeatureSpec, SceneFile, Violation
from .procedures import Procedure
from .session import Mode, Session, start_session, submit_action


@dataclass(frozen=True)
class EnvConfig:
    scene: SceneFile
    pack: ScenarioPack
    procedure_id: str
    max_steps: int = 100
    amount_grid: tuple[float, ...] = (17.4, 54.0, 100.0, 400.0)

    def check(self) -> None:
        problems = []
        if self.max_steps < 1:
            problems.append(Violation("max_steps", "must be >= 1"))
        if not self.amount_grid:
            problems.append(Violation("amount_grid", "must not be empty"))
        elif any(b <= a for a, b in zip(self.amount_grid, self.amount_grid[1:])):
            problems.append(Violation("amount_grid", "must be strictly increasing"))
        if self.pack.procedure(self.procedure_id) is None:
            problems.append(Violation("procedure_id", f"unknown procedure {self.procedure_id!r}"))
        if problems:
            raise ValidationError(problems)


def _encode(spec: FeatureSpec, value) -> float:
    if spec.value_type == "bool":
        return 1.0 if value else 0.0
    if spec.value_type == "enum":
        values = spec.enum_values or ()
        if len(values) <= 1:
            return 0.0
        return values.index(value) / (len(values) - 1)
    # int/real: normalize when bounded, raw otherwise
    if spec.range is not None:
        lo, hi = spec.range
        if hi == lo:
            return 0.0
        return (float(value) - lo) / (hi - lo)
    return float(value)


class LabEnv:
    """One environment instance per agent; instances are independent."""

    def __init__(self, config: EnvConfig):
        config.check()
        self.config = config
        self._session: Session | None = None
        self._catalog: list[Action] = []
        self._schema: list[tuple[str, FeatureSpec]] = []
        self._procedure: Procedure = config.pack.procedure(config.procedure_id)
        self._done = True
        self._extra_penalty = 0.0
        self._classifications: list[ActionClassification] = []
        self._raw = 0.0

    # -- episode lifecycle ---------------------------------------------------

    def reset(self) -> tuple[list[float], list[Action]]:
        """Start a fresh episode; returns the initial observation and the
        fixed action catalog for this episode."""
        session = start_session(
            self.config.scene, self.config.pack, Mode.EVALUATION, self.config.procedure_id
        )
        self._session = session
        self._schema = [
            (entity_id, spec)
            for entity_id in sorted(session.world.entities)
            for spec in self.config.pack.kinds.resolve(
                session.world.entities[entity_id].kind
            ).features
            if spec.value_type != "string"  # strings have no numeric encoding
        ]
        catalog: list[Action] = []
        for action in legal_actions(session.world, self.config.pack):
            if action.amount is None and action.partner is not None:
                for amount in self.config.amount_grid:
                    catalog.append(
                        Action(
                            verb=action.verb,
                            subject=action.subject,
                            partner=action.partner,
                            amount=amount,
                        )
                    )
            else:
                catalog.append(action)
        self._catalog = catalog
        self._done = False
        self._extra_penalty = 0.0
        self._classifications = []
        self._raw = 0.0
        return self.observation(), list(catalog)

    @property
    def catalog(self) -> list[Action]:
        return list(self._catalog)

    def observation(self) -> list[float]:
        assert self._session is not None
        entities = self._session.world.entities
        values = [
            _encode(spec, entities[entity_id].state.get(spec.name))
            for entity_id, spec in self._schema
        ]
        matched = self._session.matched_steps
        values.extend(1.0 if step.id in matched else 0.0 for step in self._procedure.steps)
        return values

    def _running_raw(self) -> float:
        cursor = self._session.cursor
        return raw_score(
            len(cursor.matched), len(self._procedure.steps),
            cursor.penalty_total + self._extra_penalty,
        )

    def step(self, action_index: int) -> tuple[list[float], float, bool, dict]:
        """Submit the catalog action at ``action_index``.

        Returns (observation, reward, done, info); ``info`` carries the
        action's classification.
        """
        if self._done or self._session is None:
            raise EpisodeDoneError("episode is done; call reset()")
        if not 0 <= action_index < len(self._catalog):
            raise IndexOutOfRangeError(
                f"action index {action_index} outside catalog of {len(self._catalog)}"
            )
        action = self._catalog[action_index]
        outcome = submit_action(self._session, action)
        if outcome.accepted:
            classification = self._session.cursor.classifications[-1]
        else:
            # Illegal in the current state: penalized like an irrelevant
            # action, world unchanged.
            self._extra_penalty += PENALTY_IRRELEVANT
            classification = ActionClassification(
                tick=len(self._classifications) + 1,
                klass="irrelevant",
                penalty=PENALTY_IRRELEVANT,
            )
        self._classifications.append(classification)
        new_raw = self._running_raw()
        reward = (new_raw - self._raw) / 100.0
        self._raw = new_raw
        if self._session.completed or self._session.world.tick >= self.config.max_steps:
            self._done = True
        info = {"classification": classification.as_json()}
        if not outcome.accepted:
            info["rejected"] = outcome.reason
        return self.observation(), reward, self._done, info

    @property
    def done(self) -> bool:
        return self._done

    def report(self) -> EvaluationReport:
        """Episode report over every env step (rejected submissions count
        as irrelevant, matching the reward stream)."""
        assert self._session is not None
        cursor = self._session.cursor
        raw = self._running_raw()
        return EvaluationReport(
            score=int(round(raw)),
            score_raw=raw,
            steps_matched=len(cursor.matched),
            steps_total=len(self._procedure.steps),
            penalty_total=cursor.penalty_total + self._extra_penalty,
            classifications=tuple(self._classifications),
        )
