"""Deterministic world-state transitions.

``apply_action`` is the single transition function: built-in verb
semantics first (unless a matching rule overrides them), then every
behavior rule whose trigger and conditions match, in specificity order.
It never mutates its input world; errors leave the caller's state
untouched by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Optional

from . import canon
from .errors import (
    InvalidParamError,
    MissingParamError,
    UnknownEntityError,
    UnknownZoneError,
    ValidationError,
    VerbNotAffordedError,
)
from .model import (
    Affordance,
    Entity,
    FeatureSpec,
    SceneFile,
    Value,
    Violation,
    Zone,
    validate_entity,
)

if TYPE_CHECKING:  # pragma: no cover - type-only import, avoids a cycle
    from .formats import ScenarioPack

DIRECTIONS = ("ccw", "cw")

# Pseudo-feature name used in state deltas for zone changes; real feature
# names are plain identifiers, so this cannot collide.
ZONE_FIELD = "@zone"


@dataclass(frozen=True)
class Action:
    """One user intent: a verb, its subject, and the verb's parameters."""

    verb: Affordance
    subject: str
    partner: str | None = None
    direction: str | None = None  # Rotate
    amount: float | None = None  # UseWith doses/pours
    target_zone: str | None = None  # Move

    def as_json(self) -> dict:
        params: dict = {}
        if self.direction is not None:
            params["direction"] = self.direction
        if self.amount is not None:
            params["amount"] = self.amount
        if self.target_zone is not None:
            params["target_zone"] = self.target_zone
        out: dict = {"verb": self.verb.value, "subject": self.subject}
        if self.partner is not None:
            out["partner"] = self.partner
        if params:
            out["params"] = params
        return out

    @staticmethod
    def from_json(data: dict) -> Action:
        try:
            verb = Affordance(data["verb"])
        except (KeyError, ValueError):
            raise InvalidParamError(f"unknown verb {data.get('verb')!r}") from None
        params = data.get("params") or {}
        return Action(
            verb=verb,
            subject=data.get("subject", ""),
            partner=data.get("partner"),
            direction=params.get("direction"),
            amount=params.get("amount"),
            target_zone=params.get("target_zone"),
        )

    def sort_key(self) -> tuple:
        return (
            self.subject,
            self.verb.value,
            self.partner or "",
            self.target_zone or "",
            self.direction or "",
        )


@dataclass(frozen=True)
class Trigger:
    verb: Affordance
    subject_kind: str
    partner_kind: str | None = None


@dataclass(frozen=True)
class Condition:
    target: str  # "subject" | "partner"
    feature: str
    op: str  # == != < <= > >=
    value: Value


@dataclass(frozen=True)
class EffectValue:
    """Where an effect's operand comes from: a literal, the action's
    amount parameter, or another feature read at application time.
    ``scale`` multiplies param/ref operands (e.g. -1 to deplete a source)."""

    literal: Value | None = None
    param: str | None = None  # only "amount"
    ref_target: str | None = None  # "subject" | "partner"
    ref_feature: str | None = None
    scale: float = 1.0


@dataclass(frozen=True)
class Effect:
    target: str  # "subject" | "partner"
    feature: str
    op: str  # "set" | "add"
    value: EffectValue


@dataclass(frozen=True)
class EventSpec:
    severity: str  # "info" | "hazard"
    message: str  # template; {subject}, {partner}, {amount} available


@dataclass(frozen=True)
class Rule:
    """Declarative trigger/condition/effect record.

    ``override`` suppresses the verb's built-in semantics when the rule's
    trigger matches and its conditions hold on the pre-action state.
    """

    name: str
    trigger: Trigger
    conditions: tuple[Condition, ...] = ()
    effects: tuple[Effect, ...] = ()
    events: tuple[EventSpec, ...] = ()
    override: bool = False


@dataclass(frozen=True)
class Event:
    severity: str
    message: str
    rule: str

    def as_json(self) -> dict:
        return {"severity": self.severity, "message": self.message, "rule": self.rule}


@dataclass(frozen=True)
class DeltaEntry:
    entity: str
    feature: str  # feature name, or ZONE_FIELD for moves
    old: Value
    new: Value

    def as_json(self) -> dict:
        return {"entity": self.entity, "feature": self.feature, "old": self.old, "new": self.new}


@dataclass
class TransitionResult:
    fired_rules: list[str] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)
    state_delta: list[DeltaEntry] = field(default_factory=list)
    rejected: str | None = None

    def has_hazard(self) -> bool:
        return any(e.severity == "hazard" for e in self.events)

    def as_json(self) -> dict:
        out: dict = {
            "fired_rules": list(self.fired_rules),
            "events": [e.as_json() for e in self.events],
            "state_delta": [d.as_json() for d in self.state_delta],
        }
        if self.rejected is not None:
            out["rejected"] = self.rejected
        return out


@dataclass
class WorldState:
    """All mutable simulation state: entities, zones, and the action
    counter. Treated as immutable by the engine (transitions copy)."""

    entities: dict[str, Entity]
    zones: list[Zone]
    tick: int = 0

    def copy(self) -> WorldState:
        return WorldState(
            entities={eid: e.copy() for eid, e in self.entities.items()},
            zones=list(self.zones),
            tick=self.tick,
        )

    def entity(self, entity_id: str) -> Entity:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise UnknownEntityError(f"unknown entity {entity_id!r}") from None

    def zone_ids(self) -> list[str]:
        return [z.id for z in self.zones]

    def entities_json(self) -> list[dict]:
        return [self.entities[eid].as_json() for eid in sorted(self.entities)]


def init_world(scene: SceneFile, pack: "ScenarioPack") -> WorldState:
    """Load a scene into a fresh world (tick 0, entities deep-copied and
    coerced to their runtime types)."""
    violations = validate_scene(scene, pack)
    if violations:
        raise ValidationError(violations)
    entities: dict[str, Entity] = {}
    for proto in scene.entities:
        flat = pack.kinds.resolve(proto.kind)
        specs = flat.feature_map
        state = {name: specs[name].coerce(value) for name, value in proto.state.items()}
        entities[proto.id] = Entity(id=proto.id, kind=proto.kind, zone=proto.zone, state=state)
    return WorldState(entities=entities, zones=list(scene.zones), tick=0)


def validate_scene(scene: SceneFile, pack: "ScenarioPack") -> list[Violation]:
    """Scene-against-pack validation: reference integrity plus per-entity
    checks. Deterministic order: scene-level findings, then zones, then
    entities in declaration order."""
    violations: list[Violation] = []
    if scene.pack_ref.pack_id != pack.pack_id or scene.pack_ref.version != pack.version:
        violations.append(
            Violation(
                "pack_ref",
                f"scene references pack {scene.pack_ref.pack_id!r} version "
                f"{scene.pack_ref.version!r} but was loaded with pack "
                f"{pack.pack_id!r} version {pack.version!r}",
            )
        )
    seen_zones: set[str] = set()
    for i, zone in enumerate(scene.zones):
        if zone.id in seen_zones:
            violations.append(Violation(f"zones[{i}]", f"duplicate zone id {zone.id!r}"))
        seen_zones.add(zone.id)
    seen_entities: set[str] = set()
    for i, entity in enumerate(scene.entities):
        where = f"entities[{i}]"
        if entity.id in seen_entities:
            violations.append(Violation(where, f"duplicate entity id {entity.id!r}"))
        seen_entities.add(entity.id)
        if entity.zone not in seen_zones:
            violations.append(Violation(f"{where}.zone", f"unknown zone {entity.zone!r}"))
        violations.extend(validate_entity(pack.kinds, entity))
    return violations


def _check_action_shape(action: Action) -> None:
    verb = action.verb
    if verb is Affordance.ROTATE:
        if action.direction is None:
            raise MissingParamError("rotate requires a direction (cw or ccw)")
        if action.direction not in DIRECTIONS:
            raise InvalidParamError(f"unknown rotate direction {action.direction!r}")
    elif action.direction is not None:
        raise InvalidParamError(f"{verb.value} takes no direction")

    if verb is Affordance.MOVE:
        if action.target_zone is None:
            raise MissingParamError("move requires a target_zone")
    elif action.target_zone is not None:
        raise InvalidParamError(f"{verb.value} takes no target_zone")

    if verb is Affordance.USE_WITH:
        if action.partner is None:
            raise MissingParamError("use_with requires a partner entity")
        if action.amount is not None:
            amount = action.amount
            if isinstance(amount, bool) or not isinstance(amount, (int, float)):
                raise InvalidParamError("amount must be a number")
            if not math.isfinite(float(amount)) or float(amount) < 0:
                raise InvalidParamError("amount must be a finite number >= 0")
    else:
        if action.partner is not None:
            raise InvalidParamError(f"{verb.value} takes no partner")
        if action.amount is not None:
            raise InvalidParamError(f"{verb.value} takes no amount")


def _trigger_matches(pack: "ScenarioPack", rule: Rule, action: Action, subject: Entity,
                     partner: Entity | None) -> bool:
    t = rule.trigger
    if t.verb is not action.verb:
        return False
    if not pack.kinds.is_a(subject.kind, t.subject_kind):
        return False
    if t.partner_kind is not None:
        if partner is None or not pack.kinds.is_a(partner.kind, t.partner_kind):
            return False
    return True


def _pick(target: str, subject: Entity, partner: Entity | None) -> Entity:
    if target == "subject":
        return subject
    if partner is None:
        raise MissingParamError("rule references the partner but the action has none")
    return partner


_OPS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _conditions_hold(rule: Rule, subject: Entity, partner: Entity | None) -> bool:
    for cond in rule.conditions:
        entity = _pick(cond.target, subject, partner)
        actual = entity.state.get(cond.feature)
        if actual is None:
            return False
        try:
            if not _OPS[cond.op](actual, cond.value):
                return False
        except TypeError:
            return False
    return True


def _clamped(spec: FeatureSpec, value: Value) -> Value:
    if spec.range is not None and isinstance(value, (int, float)) and not isinstance(value, bool):
        lo, hi = spec.range
        value = min(max(value, lo), hi)
        if spec.value_type == "int":
            value = int(value)
    return spec.coerce(value)


def _write(world_entity: Entity, spec: FeatureSpec, new_value: Value,
           deltas: list[DeltaEntry]) -> None:
    old = world_entity.state.get(spec.name)
    new = _clamped(spec, new_value)
    deltas.append(DeltaEntry(entity=world_entity.id, feature=spec.name, old=old, new=new))
    world_entity.state[spec.name] = new


def _effect_operand(effect: Effect, action: Action, subject: Entity,
                    partner: Entity | None) -> Value:
    v = effect.value
    if v.param is not None:
        if v.param != "amount":
            raise InvalidParamError(f"unknown effect parameter {v.param!r}")
        if action.amount is None:
            raise MissingParamError("this action needs an amount parameter")
        return float(action.amount) * v.scale
    if v.ref_target is not None:
        entity = _pick(v.ref_target, subject, partner)
        current = entity.state.get(v.ref_feature)
        if not isinstance(current, (int, float)) or isinstance(current, bool):
            raise InvalidParamError(
                f"effect reference {v.ref_target}.{v.ref_feature} is not numeric"
            )
        return float(current) * v.scale
    return v.literal


def _apply_effect(pack: "ScenarioPack", effect: Effect, action: Action, subject: Entity,
                  partner: Entity | None, deltas: list[DeltaEntry]) -> None:
    entity = _pick(effect.target, subject, partner)
    spec = pack.kinds.resolve(entity.kind).feature_map.get(effect.feature)
    if spec is None:
        raise InvalidParamError(
            f"kind {entity.kind!r} has no feature {effect.feature!r}"
        )
    operand = _effect_operand(effect, action, subject, partner)
    if effect.op == "set":
        _write(entity, spec, operand, deltas)
    elif effect.op == "add":
        if spec.value_type not in ("int", "real"):
            raise InvalidParamError(f"add needs a numeric feature, got {spec.value_type}")
        current = entity.state.get(spec.name, 0)
        _write(entity, spec, current + operand, deltas)
    else:
        raise InvalidParamError(f"unknown effect op {effect.op!r}")


def _render_events(rule: Rule, action: Action) -> list[Event]:
    context = {
        "subject": action.subject,
        "partner": action.partner or "",
        "amount": action.amount if action.amount is not None else "",
    }
    events = []
    for spec in rule.events:
        try:
            message = spec.message.format(**context)
        except (KeyError, IndexError, ValueError):
            message = spec.message
        events.append(Event(severity=spec.severity, message=message, rule=rule.name))
    return events


def _apply_builtin(pack: "ScenarioPack", action: Action, subject: Entity,
                   deltas: list[DeltaEntry]) -> None:
    specs = pack.kinds.resolve(subject.kind).feature_map
    verb = action.verb
    if verb is Affordance.PRESS:
        spec = specs.get("on")
        if spec is not None and spec.value_type == "bool":
            _write(subject, spec, not subject.state.get("on", False), deltas)
    elif verb is Affordance.ROTATE:
        spec = specs.get("position")
        if spec is not None and spec.value_type == "int":
            step = 1 if action.direction == "cw" else -1
            _write(subject, spec, subject.state.get("position", 0) + step, deltas)
    elif verb is Affordance.PULL:
        spec = specs.get("connected")
        if spec is not None and spec.value_type == "bool":
            _write(subject, spec, False, deltas)
    elif verb is Affordance.MOVE:
        old = subject.zone
        subject.zone = action.target_zone
        deltas.append(
            DeltaEntry(entity=subject.id, feature=ZONE_FIELD, old=old, new=action.target_zone)
        )
    # ZOOM changes no entity state (focus is session-level); USE_WITH has
    # no built-in semantics at all.


def apply_action(world: WorldState, pack: "ScenarioPack",
                 action: Action) -> tuple[WorldState, TransitionResult]:
    """Apply one action and fire matching rules.

    Pure: ``world`` is never mutated; on error the returned exception is
    the only outcome and the caller's state is untouched.
    """
    _check_action_shape(action)
    pre_subject = world.entity(action.subject)
    if action.partner is not None:
        world.entity(action.partner)
    flat = pack.kinds.resolve(pre_subject.kind)
    if action.verb not in flat.affordances:
        raise VerbNotAffordedError(
            f"kind {pre_subject.kind!r} does not afford {action.verb.value!r}"
        )
    if action.verb is Affordance.MOVE and action.target_zone not in world.zone_ids():
        raise UnknownZoneError(f"unknown zone {action.target_zone!r}")

    new_world = world.copy()
    subject = new_world.entities[action.subject]
    partner = new_world.entities[action.partner] if action.partner is not None else None

    matching = [
        (index, rule)
        for index, rule in enumerate(pack.rules)
        if _trigger_matches(pack, rule, action, subject, partner)
    ]
    # Specificity: most-derived subject kind first, declaration order on ties.
    matching.sort(key=lambda pair: (-pack.kinds.depth(pair[1].trigger.subject_kind), pair[0]))

    # Overrides are decided against the pre-action state.
    overridden = any(
        rule.override and _conditions_hold(rule, subject, partner) for _, rule in matching
    )

    result = TransitionResult()
    if not overridden:
        _apply_builtin(pack, action, subject, result.state_delta)

    for _, rule in matching:
        if not _conditions_hold(rule, subject, partner):
            continue
        for effect in rule.effects:
            _apply_effect(pack, effect, action, subject, partner, result.state_delta)
        result.events.extend(_render_events(rule, action))
        result.fired_rules.append(rule.name)

    new_world.tick = world.tick + 1
    return new_world, result


def use_with_partners(world: WorldState, pack: "ScenarioPack", subject_id: str) -> list[str]:
    """Entity ids that pair with ``subject_id`` under some UseWith rule
    trigger (the subject must afford UseWith)."""
    subject = world.entity(subject_id)
    if Affordance.USE_WITH not in pack.kinds.resolve(subject.kind).affordances:
        return []
    rules = [r for r in pack.rules if r.trigger.verb is Affordance.USE_WITH]
    partners = []
    for partner_id in sorted(world.entities):
        if partner_id == subject_id:
            continue
        partner = world.entities[partner_id]
        if any(
            pack.kinds.is_a(subject.kind, r.trigger.subject_kind)
            and (
                r.trigger.partner_kind is None
                or pack.kinds.is_a(partner.kind, r.trigger.partner_kind)
            )
            for r in rules
        ):
            partners.append(partner_id)
    return partners


def legal_actions(world: WorldState, pack: "ScenarioPack") -> list[Action]:
    """Enumerate every currently afforded action, deterministically ordered.

    UseWith amounts are not expanded: such actions carry ``amount=None``
    as an open parameter slot. UseWith pairs are listed only where some
    rule's trigger matches the kind pair.
    """
    actions: list[Action] = []
    zone_ids = world.zone_ids()
    for subject_id in sorted(world.entities):
        subject = world.entities[subject_id]
        flat = pack.kinds.resolve(subject.kind)
        for verb in flat.affordances:
            if verb in (Affordance.PRESS, Affordance.PULL, Affordance.ZOOM):
                actions.append(Action(verb=verb, subject=subject_id))
            elif verb is Affordance.ROTATE:
                for direction in DIRECTIONS:
                    actions.append(
                        Action(verb=verb, subject=subject_id, direction=direction)
                    )
            elif verb is Affordance.MOVE:
                for zone_id in zone_ids:
                    if zone_id != subject.zone:
                        actions.append(
                            Action(verb=verb, subject=subject_id, target_zone=zone_id)
                        )
            elif verb is Affordance.USE_WITH:
                for partner_id in use_with_partners(world, pack, subject_id):
                    actions.append(
                        Action(verb=verb, subject=subject_id, partner=partner_id)
                    )
    actions.sort(key=Action.sort_key)
    return actions


def state_hash(world: WorldState) -> str:
    """SHA-256 over the canonical serialization of the entities, sorted by
    id. Equal worlds hash equally regardless of insertion order."""
    return canon.sha256_hex(world.entities_json())


def replay_delta(world: WorldState, delta: list[DeltaEntry]) -> WorldState:
    """Apply a recorded state delta to a world copy (for delta-soundness
    checks and log tooling)."""
    new_world = world.copy()
    for entry in delta:
        entity = new_world.entity(entry.entity)
        if entry.feature == ZONE_FIELD:
            entity.zone = entry.new  # type: ignore[assignment]
        else:
            entity.state[entry.feature] = entry.new
    new_world.tick = world.tick + 1
    return new_world
