from __future__ import annotations

import random

import pytest

from vlab.content import install_bundled_content, microscopy_pack, tbe_pack
from vlab.engine import Condition, Effect, EffectValue, EventSpec, Rule, Trigger
from vlab.formats import PACK_FORMAT, SCENE_FORMAT, ScenarioPack
from vlab.model import (
    Affordance,
    Entity,
    FeatureSpec,
    KindDef,
    PackRef,
    SceneFile,
    Zone,
)
from vlab.procedures import Matcher, Procedure, Step


@pytest.fixture(scope="session")
def tbe():
    return tbe_pack()


@pytest.fixture(scope="session")
def microscopy():
    return microscopy_pack()


@pytest.fixture()
def content_dir(tmp_path):
    directory = tmp_path / "content"
    install_bundled_content(directory)
    return directory


def toy_pack(step_count: int = 3, extra_switches: int = 1) -> ScenarioPack:
    """A tiny pack for scoring tests: press sw1..swN in order, one extra
    irrelevant switch, and one switch wired to a hazard rule. All matchers
    are state-free on purpose."""
    kinds = (
        KindDef(name="HazardSwitch", parent="Switch"),
    )
    entities = [
        Entity(id=f"sw{i + 1}", kind="Switch", zone="bench", state={"on": False})
        for i in range(step_count)
    ]
    entities += [
        Entity(id=f"extra{i + 1}", kind="Switch", zone="bench", state={"on": False})
        for i in range(extra_switches)
    ]
    entities.append(Entity(id="sparker", kind="HazardSwitch", zone="bench", state={"on": False}))
    scene = SceneFile(
        format_version=SCENE_FORMAT,
        scene_id="toy-default",
        pack_ref=PackRef(pack_id="toy", version="1.0.0"),
        zones=[Zone("bench", "Bench")],
        entities=entities,
    )
    steps = tuple(
        Step(
            id=f"step-{i + 1}",
            hint_text=f"Press switch {i + 1}.",
            matcher=Matcher(verb=Affordance.PRESS, subject=f"sw{i + 1}"),
        )
        for i in range(step_count)
    )
    rules = (
        Rule(
            name="spark-hazard",
            trigger=Trigger(verb=Affordance.PRESS, subject_kind="HazardSwitch"),
            events=(EventSpec(severity="hazard", message="Sparks fly from {subject}!"),),
        ),
    )
    return ScenarioPack(
        format_version=PACK_FORMAT,
        pack_id="toy",
        version="1.0.0",
        kind_defs=kinds,
        rules=rules,
        procedures=(
            Procedure(id="toy-proc", title="Toy switch drill", steps=steps),
        ),
        default_scene=scene,
    )


@pytest.fixture(scope="session")
def toy():
    return toy_pack()


# --- random content generator (round-trip and determinism harnesses) --------

_ROOTS = ("Switch", "Knob", "Plug", "Container", "Item")
_TYPES = ("bool", "int", "real", "enum", "string")


def _random_feature(rng: random.Random, index: int) -> FeatureSpec:
    value_type = rng.choice(_TYPES)
    name = f"feat_{index}"
    if value_type == "bool":
        return FeatureSpec(name, "bool", rng.random() < 0.5)
    if value_type == "int":
        if rng.random() < 0.7:
            lo = rng.randint(-5, 5)
            hi = lo + rng.randint(0, 20)
            return FeatureSpec(name, "int", rng.randint(lo, hi), range=(lo, hi))
        return FeatureSpec(name, "int", rng.randint(-100, 100))
    if value_type == "real":
        if rng.random() < 0.7:
            lo = round(rng.uniform(-10, 0), 3)
            hi = round(lo + rng.uniform(0.5, 100), 3)
            default = min(hi, max(lo, round(rng.uniform(lo, hi), 3)))
            return FeatureSpec(name, "real", default, range=(lo, hi), unit=rng.choice(("g", "ml")))
        return FeatureSpec(name, "real", round(rng.uniform(-1000, 1000), 4))
    if value_type == "enum":
        values = tuple(f"v{i}" for i in range(rng.randint(1, 4)))
        return FeatureSpec(name, "enum", rng.choice(values), enum_values=values)
    return FeatureSpec(name, "string", rng.choice(("", "red", "blue", "greenish")))


def random_pack(rng: random.Random) -> ScenarioPack:
    """A structurally valid random pack (kinds, rules, procedures, scene).
    Used by round-trip and fuzz harnesses; always passes validate_pack."""
    kinds: list[KindDef] = []
    feature_counter = 0
    for i in range(rng.randint(1, 5)):
        parent = rng.choice(_ROOTS + tuple(k.name for k in kinds))
        features = []
        for _ in range(rng.randint(0, 3)):
            features.append(_random_feature(rng, feature_counter))
            feature_counter += 1
        extra_affordances = frozenset(
            rng.sample(list(Affordance), k=rng.randint(0, 2))
        )
        kinds.append(
            KindDef(
                name=f"Kind{i}",
                parent=parent,
                abstract=False,
                features=tuple(features),
                affordances=extra_affordances,
            )
        )

    zones = [Zone(f"zone{i}", f"Zone {i}") for i in range(rng.randint(1, 3))]
    registry_names = [k.name for k in kinds] + list(_ROOTS)

    from vlab.model import KindRegistry

    registry = KindRegistry(tuple(kinds))
    entities = []
    for i in range(rng.randint(1, 6)):
        kind = rng.choice(registry_names)
        flat = registry.resolve(kind)
        entities.append(
            Entity(
                id=f"ent{i}",
                kind=kind,
                zone=rng.choice(zones).id,
                state=flat.default_state(),
            )
        )

    scene = SceneFile(
        format_version=SCENE_FORMAT,
        scene_id=f"scene-{rng.randint(0, 999)}",
        pack_ref=PackRef(pack_id="randpack", version="1.0.0"),
        zones=zones,
        entities=entities,
    )

    rules = []
    for i in range(rng.randint(0, 4)):
        kind_name = rng.choice(registry_names)
        flat = registry.resolve(kind_name)
        if not flat.affordances:
            continue
        verb = rng.choice(sorted(flat.affordances, key=lambda a: a.value))
        partner_kind = None
        if verb is Affordance.USE_WITH:
            partner_kind = rng.choice(registry_names)
        numeric = [f for f in flat.features if f.value_type in ("int", "real")]
        bools = [f for f in flat.features if f.value_type == "bool"]
        effects = []
        conditions = []
        if bools and rng.random() < 0.7:
            spec = rng.choice(bools)
            effects.append(
                Effect("subject", spec.name, "set", EffectValue(literal=True))
            )
            if rng.random() < 0.5:
                conditions.append(Condition("subject", spec.name, "==", False))
        if numeric and rng.random() < 0.5:
            spec = rng.choice(numeric)
            if spec.value_type == "real" and verb is Affordance.USE_WITH:
                effects.append(
                    Effect("subject", spec.name, "add", EffectValue(param="amount"))
                )
            else:
                effects.append(
                    Effect("subject", spec.name, "add", EffectValue(literal=1))
                )
        events = ()
        if rng.random() < 0.3:
            events = (
                EventSpec(
                    severity=rng.choice(("info", "hazard")),
                    message=f"Rule {i} fired on {{subject}}.",
                ),
            )
        rules.append(
            Rule(
                name=f"rule-{i}",
                trigger=Trigger(verb=verb, subject_kind=kind_name, partner_kind=partner_kind),
                conditions=tuple(conditions),
                effects=tuple(effects),
                events=events,
            )
        )

    procedures = []
    if entities and rng.random() < 0.8:
        steps = []
        for i in range(rng.randint(1, 4)):
            entity = rng.choice(entities)
            flat = registry.resolve(entity.kind)
            if not flat.affordances:
                continue
            verb = rng.choice(sorted(flat.affordances, key=lambda a: a.value))
            matcher = None
            if verb in (Affordance.PRESS, Affordance.PULL, Affordance.ZOOM):
                matcher = Matcher(verb=verb, subject=entity.id)
            elif verb is Affordance.ROTATE:
                matcher = Matcher(verb=verb, subject=entity.id,
                                  direction=rng.choice(("cw", "ccw")))
            elif verb is Affordance.MOVE:
                matcher = Matcher(verb=verb, subject=entity.id,
                                  target_zone=rng.choice(zones).id)
            else:
                partner = rng.choice(entities)
                if partner.id == entity.id:
                    continue
                matcher = Matcher(verb=verb, subject=entity.id, partner=partner.id,
                                  amount=_maybe_amount(rng))
            steps.append(
                Step(id=f"s{i}", hint_text=f"Do step {i}.", matcher=matcher)
            )
        if steps:
            procedures.append(
                Procedure(
                    id=f"proc-{rng.randint(0, 99)}",
                    title="Random drill",
                    steps=tuple(steps),
                )
            )

    return ScenarioPack(
        format_version=PACK_FORMAT,
        pack_id="randpack",
        version="1.0.0",
        kind_defs=tuple(kinds),
        rules=tuple(rules),
        procedures=tuple(procedures),
        default_scene=scene,
    )


def _maybe_amount(rng: random.Random):
    from vlab.procedures import AmountSpec

    if rng.random() < 0.5:
        return AmountSpec(round(rng.uniform(0, 100), 2), tol=round(rng.uniform(0, 1), 2))
    return None
