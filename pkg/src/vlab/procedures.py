"""Training procedures: ordered steps with matchers and post-conditions.

A step's matcher describes the expected action; subject and partner may
name a concrete entity id or a kind (any instance qualifies). Amount
constraints carry a tolerance so decimal entry is not brittle.
"""

from __future__ import annotations

from dataclasses import dataclass

from .engine import Action, WorldState
from .errors import UnknownEntityError
from .model import Affordance, KindRegistry, Value


@dataclass(frozen=True)
class AmountSpec:
    value: float
    tol: float = 0.0


@dataclass(frozen=True)
class Matcher:
    verb: Affordance
    subject: str  # entity id or kind name
    partner: str | None = None  # entity id or kind name
    direction: str | None = None
    target_zone: str | None = None
    amount: AmountSpec | None = None


@dataclass(frozen=True)
class PostCondition:
    entity: str
    feature: str
    op: str  # == != < <= > >=
    value: Value


@dataclass(frozen=True)
class Step:
    id: str
    hint_text: str
    matcher: Matcher
    post_conditions: tuple[PostCondition, ...] = ()
    requires: tuple[str, ...] = ()  # explicit prerequisite step ids


@dataclass(frozen=True)
class Procedure:
    id: str
    title: str
    steps: tuple[Step, ...] = ()
    ordering: str = "total"  # "total" | "partial"

    def prerequisites(self, index: int) -> tuple[str, ...]:
        if self.ordering == "total":
            return (self.steps[index - 1].id,) if index > 0 else ()
        return self.steps[index].requires

    def ready_steps(self, matched: set[str]) -> list[Step]:
        """Unmatched steps whose prerequisites are all matched, in
        declaration order."""
        ready = []
        for index, step in enumerate(self.steps):
            if step.id in matched:
                continue
            if all(req in matched for req in self.prerequisites(index)):
                ready.append(step)
        return ready


def _entity_qualifies(ref: str, entity_id: str, world: WorldState,
                      registry: KindRegistry) -> bool:
    """True if ``entity_id`` satisfies a matcher reference: exact id, or an
    instance of the named kind."""
    if ref in world.entities:
        return entity_id == ref
    if ref in registry:
        return registry.is_a(world.entities[entity_id].kind, ref)
    return False


def action_matches(matcher: Matcher, action: Action, world: WorldState,
                   registry: KindRegistry) -> bool:
    if action.verb is not matcher.verb:
        return False
    if not _entity_qualifies(matcher.subject, action.subject, world, registry):
        return False
    if matcher.partner is not None:
        if action.partner is None:
            return False
        if not _entity_qualifies(matcher.partner, action.partner, world, registry):
            return False
    if matcher.direction is not None and action.direction != matcher.direction:
        return False
    if matcher.target_zone is not None and action.target_zone != matcher.target_zone:
        return False
    if matcher.amount is not None:
        if action.amount is None:
            return False
        if abs(float(action.amount) - matcher.amount.value) > matcher.amount.tol:
            return False
    return True


def matchers_equal(a: Matcher, b: Matcher) -> bool:
    """Identity in matcher terms (used for redundancy classification)."""
    return a == b


def _concretize_ref(ref: str, world: WorldState, registry: KindRegistry) -> str:
    if ref in world.entities:
        return ref
    if ref in registry:
        for entity_id in sorted(world.entities):
            if registry.is_a(world.entities[entity_id].kind, ref):
                return entity_id
    raise UnknownEntityError(f"no entity in the scene satisfies matcher reference {ref!r}")


def concretize(matcher: Matcher, world: WorldState, registry: KindRegistry) -> Action:
    """Turn a matcher into one concrete action: kind references pick the
    lowest qualifying entity id, amount constraints pick their center."""
    subject = _concretize_ref(matcher.subject, world, registry)
    partner = _concretize_ref(matcher.partner, world, registry) if matcher.partner else None
    direction = matcher.direction
    if matcher.verb is Affordance.ROTATE and direction is None:
        direction = "cw"
    target_zone = matcher.target_zone
    if matcher.verb is Affordance.MOVE and target_zone is None:
        subject_zone = world.entities[subject].zone
        others = [z for z in world.zone_ids() if z != subject_zone]
        target_zone = others[0] if others else subject_zone
    return Action(
        verb=matcher.verb,
        subject=subject,
        partner=partner,
        direction=direction,
        amount=matcher.amount.value if matcher.amount is not None else None,
        target_zone=target_zone,
    )


_POST_OPS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def post_conditions_hold(step: Step, world: WorldState) -> bool:
    for cond in step.post_conditions:
        entity = world.entities.get(cond.entity)
        if entity is None:
            return False
        actual = entity.state.get(cond.feature)
        if actual is None:
            return False
        try:
            if not _POST_OPS[cond.op](actual, cond.value):
                return False
        except TypeError:
            return False
    return True
