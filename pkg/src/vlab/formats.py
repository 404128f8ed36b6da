"""Scene-file and scenario-pack formats: strict parser, validator, and
canonical writer.

Concrete syntax is a constrained JSON document. Parsing is strict:
unknown keys, wrong types and missing fields are rejected with a single
located error. Output always goes through the canonical writer, so a
valid document has exactly one byte representation
(``write(parse(write(x))) == write(x)``).

File extensions: ``.vscene`` and ``.vpack``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from . import canon
from .engine import (
    Condition,
    Effect,
    EffectValue,
    EventSpec,
    Rule,
    Trigger,
    validate_scene,
)
from .errors import (
    FormatSyntaxError,
    SchemaError,
    UnsupportedVersionError,
    ValidationError,
)
from .model import (
    Affordance,
    Entity,
    FeatureSpec,
    KindDef,
    KindRegistry,
    PackRef,
    SceneFile,
    Violation,
    Zone,
)
from .procedures import AmountSpec, Matcher, PostCondition, Procedure, Step

SCENE_FORMAT = "vlab-scene/1"
PACK_FORMAT = "vlab-pack/1"

_COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")


@dataclass
class ScenarioPack:
    """A distributable content bundle: kinds, behavior rules, procedures
    and the default scene the engine core consumes."""

    format_version: str
    pack_id: str
    version: str
    kind_defs: tuple[KindDef, ...]
    rules: tuple[Rule, ...]
    procedures: tuple[Procedure, ...]
    default_scene: SceneFile
    kinds: KindRegistry = field(init=False, compare=False)

    def __post_init__(self):
        self.kinds = KindRegistry(self.kind_defs)

    def procedure(self, procedure_id: str) -> Procedure | None:
        return next((p for p in self.procedures if p.id == procedure_id), None)


# --- strict readers ----------------------------------------------------------

def _as_obj(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(path, "expected an object")
    return value


def _as_list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaError(path, "expected an array")
    return value


def _check_keys(data: dict, path: str, allowed: tuple[str, ...]) -> None:
    for key in data:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}", "unknown key")


def _take(data: dict, path: str, key: str) -> Any:
    if key not in data:
        raise SchemaError(path, f"missing key {key!r}")
    return data[key]


def _string(value: Any, path: str) -> str:
    if not isinstance(value, str) or not value:
        raise SchemaError(path, "expected a non-empty string")
    return value


def _boolean(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise SchemaError(path, "expected a boolean")
    return value


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, "expected a number")
    return value


def _scalar(value: Any, path: str) -> Any:
    if value is None or isinstance(value, (dict, list)):
        raise SchemaError(path, "expected a scalar value")
    return value


def _verb(value: Any, path: str) -> Affordance:
    name = _string(value, path)
    try:
        return Affordance(name)
    except ValueError:
        raise SchemaError(path, f"unknown verb {name!r}") from None


def _loads(text: bytes | str, expect_format: str, kind: str) -> dict:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    data = _as_obj(data, "$")
    version = _take(data, "$", "format_version")
    if version != expect_format:
        raise UnsupportedVersionError(
            f"expected {kind} format {expect_format!r}, got {version!r}"
        )
    return data


# --- scenes ------------------------------------------------------------------

def _parse_zone(raw: Any, path: str) -> Zone:
    data = _as_obj(raw, path)
    _check_keys(data, path, ("id", "label"))
    return Zone(
        id=_string(_take(data, path, "id"), f"{path}.id"),
        label=_string(_take(data, path, "label"), f"{path}.label"),
    )


def _parse_entity(raw: Any, path: str) -> Entity:
    data = _as_obj(raw, path)
    _check_keys(data, path, ("id", "kind", "zone", "state"))
    state_raw = _as_obj(_take(data, path, "state"), f"{path}.state")
    state = {
        key: _scalar(value, f"{path}.state.{key}") for key, value in state_raw.items()
    }
    return Entity(
        id=_string(_take(data, path, "id"), f"{path}.id"),
        kind=_string(_take(data, path, "kind"), f"{path}.kind"),
        zone=_string(_take(data, path, "zone"), f"{path}.zone"),
        state=state,
    )


def _parse_pack_ref(raw: Any, path: str) -> PackRef:
    data = _as_obj(raw, path)
    _check_keys(data, path, ("pack_id", "version"))
    return PackRef(
        pack_id=_string(_take(data, path, "pack_id"), f"{path}.pack_id"),
        version=_string(_take(data, path, "version"), f"{path}.version"),
    )


def _scene_from_obj(data: dict, path: str) -> SceneFile:
    _check_keys(data, path, ("format_version", "scene_id", "pack_ref", "zones", "entities"))
    zones = [
        _parse_zone(raw, f"{path}.zones[{i}]")
        for i, raw in enumerate(_as_list(_take(data, path, "zones"), f"{path}.zones"))
    ]
    entities = [
        _parse_entity(raw, f"{path}.entities[{i}]")
        for i, raw in enumerate(_as_list(_take(data, path, "entities"), f"{path}.entities"))
    ]
    scene = SceneFile(
        format_version=SCENE_FORMAT,
        scene_id=_string(_take(data, path, "scene_id"), f"{path}.scene_id"),
        pack_ref=_parse_pack_ref(_take(data, path, "pack_ref"), f"{path}.pack_ref"),
        zones=zones,
        entities=entities,
    )
    zone_ids = set()
    for i, zone in enumerate(scene.zones):
        if zone.id in zone_ids:
            raise SchemaError(f"{path}.zones[{i}].id", f"duplicate zone id {zone.id!r}")
        zone_ids.add(zone.id)
    entity_ids = set()
    for i, entity in enumerate(scene.entities):
        if entity.id in entity_ids:
            raise SchemaError(f"{path}.entities[{i}].id", f"duplicate entity id {entity.id!r}")
        entity_ids.add(entity.id)
        if entity.zone not in zone_ids:
            raise SchemaError(f"{path}.entities[{i}].zone", f"unknown zone {entity.zone!r}")
    return scene


def parse_scene(text: bytes | str) -> SceneFile:
    """Parse and structurally validate a ``.vscene`` document.

    Kind references need the pack and are checked by
    :func:`vlab.engine.validate_scene` / :func:`validate_pack`.
    """
    return _scene_from_obj(_loads(text, SCENE_FORMAT, "scene"), "$")


def scene_to_json(scene: SceneFile) -> dict:
    return {
        "format_version": scene.format_version,
        "scene_id": scene.scene_id,
        "pack_ref": scene.pack_ref.as_json(),
        "zones": [{"id": z.id, "label": z.label} for z in scene.zones],
        "entities": [e.as_json() for e in scene.entities],
    }


def write_scene(scene: SceneFile) -> bytes:
    """Render a scene in canonical form. The scene must be structurally
    valid (stand-alone invariants; pack-dependent checks are separate)."""
    problems = _scene_structural_violations(scene)
    if problems:
        raise ValidationError(problems)
    return canon.dumps_bytes(scene_to_json(scene))


def _scene_structural_violations(scene: SceneFile) -> list[Violation]:
    violations: list[Violation] = []
    if scene.format_version != SCENE_FORMAT:
        violations.append(Violation("format_version", f"must be {SCENE_FORMAT!r}"))
    zone_ids = set()
    for i, zone in enumerate(scene.zones):
        if zone.id in zone_ids:
            violations.append(Violation(f"zones[{i}]", f"duplicate zone id {zone.id!r}"))
        zone_ids.add(zone.id)
    entity_ids = set()
    for i, entity in enumerate(scene.entities):
        if entity.id in entity_ids:
            violations.append(Violation(f"entities[{i}]", f"duplicate entity id {entity.id!r}"))
        entity_ids.add(entity.id)
        if entity.zone not in zone_ids:
            violations.append(Violation(f"entities[{i}].zone", f"unknown zone {entity.zone!r}"))
    return violations


# --- kinds -------------------------------------------------------------------

def _parse_feature(raw: Any, path: str) -> FeatureSpec:
    data = _as_obj(raw, path)
    _check_keys(data, path, ("name", "type", "default", "range", "unit", "values"))
    name = _string(_take(data, path, "name"), f"{path}.name")
    value_type = _string(_take(data, path, "type"), f"{path}.type")
    rng = None
    if "range" in data:
        pair = _as_list(data["range"], f"{path}.range")
        if len(pair) != 2:
            raise SchemaError(f"{path}.range", "expected [min, max]")
        rng = (_number(pair[0], f"{path}.range[0]"), _number(pair[1], f"{path}.range[1]"))
    values = None
    if "values" in data:
        values = tuple(
            _string(v, f"{path}.values[{i}]")
            for i, v in enumerate(_as_list(data["values"], f"{path}.values"))
        )
    unit = _string(data["unit"], f"{path}.unit") if "unit" in data else None
    default = _scalar(_take(data, path, "default"), f"{path}.default")
    return FeatureSpec(
        name=name, value_type=value_type, default=default, range=rng, unit=unit,
        enum_values=values,
    )


def _parse_kind(raw: Any, path: str) -> KindDef:
    data = _as_obj(raw, path)
    _check_keys(data, path, ("name", "parent", "abstract", "features", "affordances"))
    features = tuple(
        _parse_feature(f, f"{path}.features[{i}]")
        for i, f in enumerate(_as_list(data.get("features", []), f"{path}.features"))
    )
    affordances = frozenset(
        _verb(v, f"{path}.affordances[{i}]")
        for i, v in enumerate(_as_list(data.get("affordances", []), f"{path}.affordances"))
    )
    parent = _string(data["parent"], f"{path}.parent") if "parent" in data else None
    abstract = _boolean(data["abstract"], f"{path}.abstract") if "abstract" in data else False
    return KindDef(
        name=_string(_take(data, path, "name"), f"{path}.name"),
        parent=parent,
        abstract=abstract,
        features=features,
        affordances=affordances,
    )


def _feature_to_json(spec: FeatureSpec) -> dict:
    out: dict = {"name": spec.name, "type": spec.value_type, "default": spec.default}
    if spec.range is not None:
        out["range"] = [spec.range[0], spec.range[1]]
    if spec.unit is not None:
        out["unit"] = spec.unit
    if spec.enum_values is not None:
        out["values"] = list(spec.enum_values)
    return out


def _kind_to_json(kind: KindDef) -> dict:
    out: dict = {"name": kind.name}
    if kind.parent is not None:
        out["parent"] = kind.parent
    if kind.abstract:
        out["abstract"] = True
    if kind.features:
        out["features"] = [_feature_to_json(f) for f in kind.features]
    if kind.affordances:
        out["affordances"] = sorted(a.value for a in kind.affordances)
    return out


# --- rules -------------------------------------------------------------------

def _parse_condition(raw: Any, path: str) -> Condition:
    data = _as_obj(raw, path)
    _check_keys(data, path, ("target", "feature", "op", "value"))
    target = _string(_take(data, path, "target"), f"{path}.target")
    if target not in ("subject", "partner"):
        raise SchemaError(f"{path}.target", "must be 'subject' or 'partner'")
    op = _string(_take(data, path, "op"), f"{path}.op")
    if op not in _COMPARE_OPS:
        raise SchemaError(f"{path}.op", f"unknown operator {op!r}")
    return Condition(
        target=target,
        feature=_string(_take(data, path, "feature"), f"{path}.feature"),
        op=op,
        value=_scalar(_take(data, path, "value"), f"{path}.value"),
    )


def _parse_effect_value(raw: Any, path: str) -> EffectValue:
    if isinstance(raw, dict):
        _check_keys(raw, path, ("param", "target", "feature", "scale"))
        scale = _number(raw["scale"], f"{path}.scale") if "scale" in raw else 1.0
        if "param" in raw:
            if "target" in raw or "feature" in raw:
                raise SchemaError(path, "param and feature reference are exclusive")
            param = _string(raw["param"], f"{path}.param")
            if param != "amount":
                raise SchemaError(f"{path}.param", f"unknown parameter {param!r}")
            return EffectValue(param=param, scale=scale)
        if "target" in raw or "feature" in raw:
            target = _string(_take(raw, path, "target"), f"{path}.target")
            if target not in ("subject", "partner"):
                raise SchemaError(f"{path}.target", "must be 'subject' or 'partner'")
            return EffectValue(
                ref_target=target,
                ref_feature=_string(_take(raw, path, "feature"), f"{path}.feature"),
                scale=scale,
            )
        raise SchemaError(path, "expected param or feature reference")
    return EffectValue(literal=_scalar(raw, path))


def _parse_effect(raw: Any, path: str) -> Effect:
    data = _as_obj(raw, path)
    _check_keys(data, path, ("target", "feature", "op", "value"))
    target = _string(_take(data, path, "target"), f"{path}.target")
    if target not in ("subject", "partner"):
        raise SchemaError(f"{path}.target", "must be 'subject' or 'partner'")
    op = _string(_take(data, path, "op"), f"{path}.op")
    if op not in ("set", "add"):
        raise SchemaError(f"{path}.op", "must be 'set' or 'add'")
    return Effect(
        target=target,
        feature=_string(_take(data, path, "feature"), f"{path}.feature"),
        op=op,
        value=_parse_effect_value(_take(data, path, "value"), f"{path}.value"),
    )


def _parse_event(raw: Any, path: str) -> EventSpec:
    data = _as_obj(raw, path)
    _check_keys(data, path, ("severity", "message"))
    severity = _string(_take(data, path, "severity"), f"{path}.severity")
    if severity not in ("info", "hazard"):
        raise SchemaError(f"{path}.severity", "must be 'info' or 'hazard'")
    return EventSpec(
        severity=severity,
        message=_string(_take(data, path, "message"), f"{path}.message"),
    )


def _parse_rule(raw: Any, path: str) -> Rule:
    data = _as_obj(raw, path)
    _check_keys(data, path, ("name", "trigger", "conditions", "effects", "events", "override"))
    trig = _as_obj(_take(data, path, "trigger"), f"{path}.trigger")
    _check_keys(trig, f"{path}.trigger", ("verb", "subject_kind", "partner_kind"))
    trigger = Trigger(
        verb=_verb(_take(trig, f"{path}.trigger", "verb"), f"{path}.trigger.verb"),
        subject_kind=_string(
            _take(trig, f"{path}.trigger", "subject_kind"), f"{path}.trigger.subject_kind"
        ),
        partner_kind=_string(trig["partner_kind"], f"{path}.trigger.partner_kind")
        if "partner_kind" in trig
        else None,
    )
    conditions = tuple(
        _parse_condition(c, f"{path}.conditions[{i}]")
        for i, c in enumerate(_as_list(data.get("conditions", []), f"{path}.conditions"))
    )
    effects = tuple(
        _parse_effect(e, f"{path}.effects[{i}]")
        for i, e in enumerate(_as_list(data.get("effects", []), f"{path}.effects"))
    )
    events = tuple(
        _parse_event(e, f"{path}.events[{i}]")
        for i, e in enumerate(_as_list(data.get("events", []), f"{path}.events"))
    )
    override = _boolean(data["override"], f"{path}.override") if "override" in data else False
    return Rule(
        name=_string(_take(data, path, "name"), f"{path}.name"),
        trigger=trigger,
        conditions=conditions,
        effects=effects,
        events=events,
        override=override,
    )


def _effect_value_to_json(value: EffectValue) -> Any:
    if value.param is not None:
        out: dict = {"param": value.param}
        if value.scale != 1.0:
            out["scale"] = value.scale
        return out
    if value.ref_target is not None:
        out = {"target": value.ref_target, "feature": value.ref_feature}
        if value.scale != 1.0:
            out["scale"] = value.scale
        return out
    return value.literal


def _rule_to_json(rule: Rule) -> dict:
    trigger: dict = {"verb": rule.trigger.verb.value, "subject_kind": rule.trigger.subject_kind}
    if rule.trigger.partner_kind is not None:
        trigger["partner_kind"] = rule.trigger.partner_kind
    out: dict = {"name": rule.name, "trigger": trigger}
    if rule.conditions:
        out["conditions"] = [
            {"target": c.target, "feature": c.feature, "op": c.op, "value": c.value}
            for c in rule.conditions
        ]
    if rule.effects:
        out["effects"] = [
            {
                "target": e.target,
                "feature": e.feature,
                "op": e.op,
                "value": _effect_value_to_json(e.value),
            }
            for e in rule.effects
        ]
    if rule.events:
        out["events"] = [{"severity": e.severity, "message": e.message} for e in rule.events]
    if rule.override:
        out["override"] = True
    return out


# --- procedures --------------------------------------------------------------

def _parse_matcher(raw: Any, path: str) -> Matcher:
    data = _as_obj(raw, path)
    _check_keys(
        data, path, ("verb", "subject", "partner", "direction", "target_zone", "amount", "tol")
    )
    amount = None
    if "amount" in data:
        tol = _number(data["tol"], f"{path}.tol") if "tol" in data else 0.0
        amount = AmountSpec(value=_number(data["amount"], f"{path}.amount"), tol=tol)
    elif "tol" in data:
        raise SchemaError(f"{path}.tol", "tol requires amount")
    direction = _string(data["direction"], f"{path}.direction") if "direction" in data else None
    if direction is not None and direction not in ("cw", "ccw"):
        raise SchemaError(f"{path}.direction", "must be 'cw' or 'ccw'")
    return Matcher(
        verb=_verb(_take(data, path, "verb"), f"{path}.verb"),
        subject=_string(_take(data, path, "subject"), f"{path}.subject"),
        partner=_string(data["partner"], f"{path}.partner") if "partner" in data else None,
        direction=direction,
        target_zone=_string(data["target_zone"], f"{path}.target_zone")
        if "target_zone" in data
        else None,
        amount=amount,
    )


def _parse_post(raw: Any, path: str) -> PostCondition:
    data = _as_obj(raw, path)
    _check_keys(data, path, ("entity", "feature", "op", "value"))
    op = _string(_take(data, path, "op"), f"{path}.op")
    if op not in _COMPARE_OPS:
        raise SchemaError(f"{path}.op", f"unknown operator {op!r}")
    return PostCondition(
        entity=_string(_take(data, path, "entity"), f"{path}.entity"),
        feature=_string(_take(data, path, "feature"), f"{path}.feature"),
        op=op,
        value=_scalar(_take(data, path, "value"), f"{path}.value"),
    )


def _parse_step(raw: Any, path: str) -> Step:
    data = _as_obj(raw, path)
    _check_keys(data, path, ("id", "hint", "matcher", "post", "requires"))
    post = tuple(
        _parse_post(p, f"{path}.post[{i}]")
        for i, p in enumerate(_as_list(data.get("post", []), f"{path}.post"))
    )
    requires = tuple(
        _string(r, f"{path}.requires[{i}]")
        for i, r in enumerate(_as_list(data.get("requires", []), f"{path}.requires"))
    )
    return Step(
        id=_string(_take(data, path, "id"), f"{path}.id"),
        hint_text=_string(_take(data, path, "hint"), f"{path}.hint"),
        matcher=_parse_matcher(_take(data, path, "matcher"), f"{path}.matcher"),
        post_conditions=post,
        requires=requires,
    )


def _parse_procedure(raw: Any, path: str) -> Procedure:
    data = _as_obj(raw, path)
    _check_keys(data, path, ("id", "title", "ordering", "steps"))
    ordering = _string(data["ordering"], f"{path}.ordering") if "ordering" in data else "total"
    if ordering not in ("total", "partial"):
        raise SchemaError(f"{path}.ordering", "must be 'total' or 'partial'")
    steps = tuple(
        _parse_step(s, f"{path}.steps[{i}]")
        for i, s in enumerate(_as_list(_take(data, path, "steps"), f"{path}.steps"))
    )
    return Procedure(
        id=_string(_take(data, path, "id"), f"{path}.id"),
        title=_string(_take(data, path, "title"), f"{path}.title"),
        ordering=ordering,
        steps=steps,
    )


def _matcher_to_json(matcher: Matcher) -> dict:
    out: dict = {"verb": matcher.verb.value, "subject": matcher.subject}
    if matcher.partner is not None:
        out["partner"] = matcher.partner
    if matcher.direction is not None:
        out["direction"] = matcher.direction
    if matcher.target_zone is not None:
        out["target_zone"] = matcher.target_zone
    if matcher.amount is not None:
        out["amount"] = matcher.amount.value
        if matcher.amount.tol:
            out["tol"] = matcher.amount.tol
    return out


def _step_to_json(step: Step) -> dict:
    out: dict = {
        "id": step.id,
        "hint": step.hint_text,
        "matcher": _matcher_to_json(step.matcher),
    }
    if step.post_conditions:
        out["post"] = [
            {"entity": p.entity, "feature": p.feature, "op": p.op, "value": p.value}
            for p in step.post_conditions
        ]
    if step.requires:
        out["requires"] = list(step.requires)
    return out


def _procedure_to_json(proc: Procedure) -> dict:
    out: dict = {"id": proc.id, "title": proc.title, "steps": [_step_to_json(s) for s in proc.steps]}
    if proc.ordering != "total":
        out["ordering"] = proc.ordering
    return out


# --- packs -------------------------------------------------------------------

def parse_pack(text: bytes | str, validate: bool = True) -> ScenarioPack:
    """Parse a ``.vpack`` document.

    With ``validate`` (the default), cross-reference problems raise a
    :class:`SchemaError` naming the offender; pass ``validate=False`` to
    collect all of them via :func:`validate_pack` instead.
    """
    data = _loads(text, PACK_FORMAT, "pack")
    path = "$"
    _check_keys(
        data,
        path,
        ("format_version", "pack_id", "version", "kinds", "rules", "procedures", "default_scene"),
    )
    kind_defs = tuple(
        _parse_kind(k, f"{path}.kinds[{i}]")
        for i, k in enumerate(_as_list(_take(data, path, "kinds"), f"{path}.kinds"))
    )
    rules = tuple(
        _parse_rule(r, f"{path}.rules[{i}]")
        for i, r in enumerate(_as_list(_take(data, path, "rules"), f"{path}.rules"))
    )
    procedures = tuple(
        _parse_procedure(p, f"{path}.procedures[{i}]")
        for i, p in enumerate(_as_list(_take(data, path, "procedures"), f"{path}.procedures"))
    )
    scene_data = _as_obj(_take(data, path, "default_scene"), f"{path}.default_scene")
    scene_version = _take(scene_data, f"{path}.default_scene", "format_version")
    if scene_version != SCENE_FORMAT:
        raise UnsupportedVersionError(
            f"expected scene format {SCENE_FORMAT!r}, got {scene_version!r}"
        )
    default_scene = _scene_from_obj(scene_data, f"{path}.default_scene")
    pack = ScenarioPack(
        format_version=PACK_FORMAT,
        pack_id=_string(_take(data, path, "pack_id"), f"{path}.pack_id"),
        version=_string(_take(data, path, "version"), f"{path}.version"),
        kind_defs=kind_defs,
        rules=rules,
        procedures=procedures,
        default_scene=default_scene,
    )
    if validate:
        violations = validate_pack(pack)
        if violations:
            first = violations[0]
            raise SchemaError(first.path, first.message)
    return pack


def pack_to_json(pack: ScenarioPack) -> dict:
    return {
        "format_version": pack.format_version,
        "pack_id": pack.pack_id,
        "version": pack.version,
        "kinds": [_kind_to_json(k) for k in pack.kind_defs],
        "rules": [_rule_to_json(r) for r in pack.rules],
        "procedures": [_procedure_to_json(p) for p in pack.procedures],
        "default_scene": scene_to_json(pack.default_scene),
    }


def write_pack(pack: ScenarioPack) -> bytes:
    """Render a pack in canonical form. The pack must validate."""
    violations = validate_pack(pack)
    if violations:
        raise ValidationError(violations)
    return canon.dumps_bytes(pack_to_json(pack))


# --- pack validation ---------------------------------------------------------

def _flat_or_none(pack: ScenarioPack, kind: str):
    try:
        return pack.kinds.resolve(kind)
    except Exception:
        return None


def _validate_rule(pack: ScenarioPack, index: int, rule: Rule,
                   violations: list[Violation]) -> None:
    where = f"rules[{index}]({rule.name})"
    trigger = rule.trigger
    subject_flat = None
    partner_flat = None
    if trigger.subject_kind not in pack.kinds:
        violations.append(
            Violation(f"{where}.trigger.subject_kind",
                      f"unknown kind {trigger.subject_kind!r}")
        )
    else:
        subject_flat = _flat_or_none(pack, trigger.subject_kind)
    if trigger.partner_kind is not None:
        if trigger.partner_kind not in pack.kinds:
            violations.append(
                Violation(f"{where}.trigger.partner_kind",
                          f"unknown kind {trigger.partner_kind!r}")
            )
        else:
            partner_flat = _flat_or_none(pack, trigger.partner_kind)
    if trigger.verb is not Affordance.USE_WITH and trigger.partner_kind is not None:
        violations.append(
            Violation(f"{where}.trigger.partner_kind",
                      f"{trigger.verb.value} actions have no partner")
        )

    def check_feature(place: str, target: str, feature: str, *, numeric_for: str | None = None):
        flat = subject_flat if target == "subject" else partner_flat
        if target == "partner" and trigger.partner_kind is None:
            violations.append(
                Violation(place, "targets the partner but the trigger declares no partner_kind")
            )
            return None
        if flat is None:
            return None
        spec = flat.feature_map.get(feature)
        if spec is None:
            violations.append(
                Violation(place, f"kind {flat.name!r} has no feature {feature!r}")
            )
            return None
        if numeric_for is not None and spec.value_type not in ("int", "real"):
            violations.append(
                Violation(place, f"{numeric_for} needs an int/real feature, got {spec.value_type}")
            )
        return spec

    for i, cond in enumerate(rule.conditions):
        check_feature(f"{where}.conditions[{i}]", cond.target, cond.feature)
    for i, effect in enumerate(rule.effects):
        place = f"{where}.effects[{i}]"
        spec = check_feature(
            place, effect.target, effect.feature,
            numeric_for="add" if effect.op == "add" else None,
        )
        value = effect.value
        if value.param is not None or value.ref_target is not None:
            if spec is not None and spec.value_type not in ("int", "real"):
                violations.append(
                    Violation(place, "amount/reference values need an int/real feature")
                )
        if value.ref_target == "partner" and trigger.partner_kind is None:
            violations.append(
                Violation(f"{place}.value",
                          "references the partner but the trigger declares no partner_kind")
            )
        elif value.ref_target is not None:
            flat = subject_flat if value.ref_target == "subject" else partner_flat
            if flat is not None and value.ref_feature not in flat.feature_map:
                violations.append(
                    Violation(f"{place}.value",
                              f"kind {flat.name!r} has no feature {value.ref_feature!r}")
                )
        if spec is not None and value.literal is not None and effect.op == "set":
            problem = spec.check_value(spec.coerce(value.literal))
            if problem is not None:
                violations.append(Violation(f"{place}.value", problem))


def _validate_matcher_ref(pack: ScenarioPack, place: str, ref: str, verb: Affordance,
                          violations: list[Violation]) -> None:
    scene_ids = {e.id: e.kind for e in pack.default_scene.entities}
    if ref in scene_ids:
        kind = scene_ids[ref]
    elif ref in pack.kinds:
        kind = ref
    else:
        violations.append(
            Violation(place, f"{ref!r} is neither an entity of the default scene nor a kind")
        )
        return
    flat = _flat_or_none(pack, kind)
    if flat is not None and verb is not None and verb not in flat.affordances:
        violations.append(Violation(place, f"kind {flat.name!r} does not afford {verb.value!r}"))


def _validate_procedure(pack: ScenarioPack, index: int, proc: Procedure,
                        violations: list[Violation]) -> None:
    where = f"procedures[{index}]({proc.id})"
    scene_entities = {e.id: e for e in pack.default_scene.entities}
    zone_ids = set(pack.default_scene.zone_ids())
    step_ids: set[str] = set()
    for i, step in enumerate(proc.steps):
        place = f"{where}.steps[{i}]"
        if step.id in step_ids:
            violations.append(Violation(place, f"duplicate step id {step.id!r}"))
        step_ids.add(step.id)
        matcher = step.matcher
        _validate_matcher_ref(pack, f"{place}.matcher.subject", matcher.subject, matcher.verb,
                              violations)
        if matcher.partner is not None:
            if matcher.verb is not Affordance.USE_WITH:
                violations.append(
                    Violation(f"{place}.matcher.partner",
                              f"{matcher.verb.value} actions have no partner")
                )
            else:
                _validate_matcher_ref(pack, f"{place}.matcher.partner", matcher.partner, None,
                                      violations)
        if matcher.amount is not None and matcher.verb is not Affordance.USE_WITH:
            violations.append(
                Violation(f"{place}.matcher.amount", "amount only applies to use_with")
            )
        if matcher.direction is not None and matcher.verb is not Affordance.ROTATE:
            violations.append(
                Violation(f"{place}.matcher.direction", "direction only applies to rotate")
            )
        if matcher.target_zone is not None:
            if matcher.verb is not Affordance.MOVE:
                violations.append(
                    Violation(f"{place}.matcher.target_zone", "target_zone only applies to move")
                )
            elif matcher.target_zone not in zone_ids:
                violations.append(
                    Violation(f"{place}.matcher.target_zone",
                              f"unknown zone {matcher.target_zone!r}")
                )
        for j, post in enumerate(step.post_conditions):
            post_place = f"{place}.post[{j}]"
            entity = scene_entities.get(post.entity)
            if entity is None:
                violations.append(
                    Violation(post_place,
                              f"entity {post.entity!r} is not in the default scene")
                )
                continue
            flat = _flat_or_none(pack, entity.kind)
            if flat is not None and post.feature not in flat.feature_map:
                violations.append(
                    Violation(post_place,
                              f"kind {entity.kind!r} has no feature {post.feature!r}")
                )
        if proc.ordering == "total" and step.requires:
            violations.append(
                Violation(f"{place}.requires",
                          "explicit prerequisites need ordering 'partial'")
            )
        for req in step.requires:
            if req not in {s.id for s in proc.steps}:
                violations.append(
                    Violation(f"{place}.requires", f"unknown step id {req!r}")
                )

    # prerequisite graph must be acyclic
    if proc.ordering == "partial":
        edges = {s.id: set(s.requires) for s in proc.steps}
        state: dict[str, int] = {}

        def has_cycle(node: str) -> bool:
            state[node] = 1
            for dep in edges.get(node, ()):
                mark = state.get(dep, 0)
                if mark == 1 or (mark == 0 and has_cycle(dep)):
                    return True
            state[node] = 2
            return False

        if any(state.get(s.id, 0) == 0 and has_cycle(s.id) for s in proc.steps):
            violations.append(Violation(where, "prerequisite graph has a cycle"))


def validate_pack(pack: ScenarioPack) -> list[Violation]:
    """All pack invariants as data: the kind hierarchy, the default scene
    against the kinds, and every rule/procedure reference. Empty result
    means the pack is valid. Deterministic order."""
    violations: list[Violation] = []
    violations.extend(pack.kinds.validate())
    violations.extend(validate_scene(pack.default_scene, pack))
    rule_names: set[str] = set()
    for i, rule in enumerate(pack.rules):
        if rule.name in rule_names:
            violations.append(Violation(f"rules[{i}]", f"duplicate rule name {rule.name!r}"))
        rule_names.add(rule.name)
        _validate_rule(pack, i, rule, violations)
    proc_ids: set[str] = set()
    for i, proc in enumerate(pack.procedures):
        if proc.id in proc_ids:
            violations.append(Violation(f"procedures[{i}]", f"duplicate procedure id {proc.id!r}"))
        proc_ids.add(proc.id)
        _validate_procedure(pack, i, proc, violations)
    return violations
