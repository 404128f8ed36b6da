from __future__ import annotations

import random

import pytest

from conftest import toy_pack
from vlab.engine import (
    Action,
    apply_action,
    init_world,
    legal_actions,
    replay_delta,
    state_hash,
)
from vlab.errors import (
    InvalidParamError,
    MissingParamError,
    UnknownEntityError,
    UnknownZoneError,
    ValidationError,
    VerbNotAffordedError,
)
from vlab.formats import ScenarioPack, parse_pack, write_pack
from vlab.model import Affordance, SceneFile
from vlab.session import Mode, start_session, walkthrough

import json


def press(subject: str) -> Action:
    return Action(verb=Affordance.PRESS, subject=subject)


def rotate(subject: str, direction: str) -> Action:
    return Action(verb=Affordance.ROTATE, subject=subject, direction=direction)


def use(subject: str, partner: str, amount: float | None = None) -> Action:
    return Action(verb=Affordance.USE_WITH, subject=subject, partner=partner, amount=amount)


class TestInitWorld:
    def test_tbe_scale_starts_dark(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        assert world.entities["scale"].state["displayed_g"] == 0.0
        assert world.tick == 0

    def test_empty_scene(self, tbe):
        scene = SceneFile(
            format_version="vlab-scene/1",
            scene_id="empty",
            pack_ref=tbe.default_scene.pack_ref,
            zones=[],
            entities=[],
        )
        world = init_world(scene, tbe)
        assert world.entities == {} and world.tick == 0

    def test_version_mismatch_names_both(self, tbe, microscopy):
        with pytest.raises(ValidationError) as exc:
            init_world(tbe.default_scene, microscopy)
        assert "tbe" in exc.value.message and "microscopy" in exc.value.message

    def test_entities_are_deep_copied(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        world.entities["scale"].state["displayed_g"] = 99.0
        assert tbe.default_scene.entities[3].state["displayed_g"] == 0.0


class TestLegalActions:
    def test_single_switch_world(self, toy):
        scene = toy.default_scene
        lone = SceneFile(
            format_version=scene.format_version,
            scene_id="one-switch",
            pack_ref=scene.pack_ref,
            zones=list(scene.zones),
            entities=[scene.entities[0].copy()],
        )
        world = init_world(lone, toy)
        assert legal_actions(world, toy) == [press("sw1")]

    def test_microscope_knob_rotations(self, microscopy):
        world = init_world(microscopy.default_scene, microscopy)
        actions = legal_actions(world, microscopy)
        assert rotate("light_knob", "cw") in actions
        assert rotate("light_knob", "ccw") in actions

    def test_tbe_use_with_pairs_from_rule_table(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        actions = legal_actions(world, tbe)
        assert use("boric_acid_bottle", "scale") in actions
        assert use("scale", "beaker") in actions
        # no rule mentions bottle-with-bottle
        assert use("boric_acid_bottle", "trizma_bottle") not in actions

    def test_deterministic_ordering(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        actions = legal_actions(world, tbe)
        assert actions == sorted(actions, key=Action.sort_key)
        assert actions == legal_actions(world, tbe)


class TestBuiltinSemantics:
    def test_press_toggle_involution(self, toy):
        world = init_world(toy.default_scene, toy)
        initial = world.entities["sw1"].state["on"]
        world1, _ = apply_action(world, toy, press("sw1"))
        world2, _ = apply_action(world1, toy, press("sw1"))
        assert world1.entities["sw1"].state["on"] == (not initial)
        assert world2.entities["sw1"].state["on"] == initial

    def test_rotate_steps_and_clamps(self, microscopy):
        world = init_world(microscopy.default_scene, microscopy)
        world1, res = apply_action(world, microscopy, rotate("light_knob", "cw"))
        assert world1.entities["light_knob"].state["position"] == 12
        assert res.state_delta[0].old == 11 and res.state_delta[0].new == 12

    def test_rotate_clamp_at_max_notes_noop_delta(self, microscopy):
        world = init_world(microscopy.default_scene, microscopy)
        world.entities["light_knob"].state["position"] = 24
        new_world, res = apply_action(world, microscopy, rotate("light_knob", "cw"))
        assert new_world.entities["light_knob"].state["position"] == 24
        delta = res.state_delta[0]
        assert delta.old == 24 and delta.new == 24

    def test_rotate_clamp_at_min(self, microscopy):
        world = init_world(microscopy.default_scene, microscopy)
        world.entities["light_knob"].state["position"] = 1
        new_world, _ = apply_action(world, microscopy, rotate("light_knob", "ccw"))
        assert new_world.entities["light_knob"].state["position"] == 1

    def test_pull_disconnects(self, microscopy):
        world = init_world(microscopy.default_scene, microscopy)
        world.entities["power_plug"].state["connected"] = True
        new_world, _ = apply_action(
            world, microscopy, Action(verb=Affordance.PULL, subject="power_plug")
        )
        assert new_world.entities["power_plug"].state["connected"] is False

    def test_move_changes_zone_only(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        action = Action(verb=Affordance.MOVE, subject="beaker", target_zone="shelf")
        new_world, res = apply_action(world, tbe, action)
        assert new_world.entities["beaker"].zone == "shelf"
        assert [d.feature for d in res.state_delta] == ["@zone"]

    def test_zoom_changes_no_entity_state(self, microscopy):
        world = init_world(microscopy.default_scene, microscopy)
        new_world, res = apply_action(
            world, microscopy, Action(verb=Affordance.ZOOM, subject="microscope")
        )
        assert state_hash(new_world) == state_hash(world)
        assert res.state_delta == []
        assert new_world.tick == world.tick + 1


class TestRules:
    def test_boric_pour_updates_scale_and_display(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        world, _ = apply_action(world, tbe, press("scale"))  # power on
        new_world, res = apply_action(world, tbe, use("boric_acid_bottle", "scale", 17.4))
        scale = new_world.entities["scale"].state
        assert scale["boric_g"] == pytest.approx(17.4, abs=1e-12)
        assert scale["displayed_g"] == pytest.approx(17.4, abs=1e-12)
        assert new_world.entities["boric_acid_bottle"].state["content_g"] == pytest.approx(482.6)

    def test_specificity_most_derived_first(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        world, _ = apply_action(world, tbe, press("scale"))
        _, res = apply_action(world, tbe, use("boric_acid_bottle", "scale", 17.4))
        # BoricAcidBottle (depth 2) beats ReagentBottle (depth 1)
        assert res.fired_rules == ["pour-boric-acid", "scale-display"]

    def test_conditional_override_pre_state(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        # scale off: press toggles power (override rule's condition fails pre-action)
        world1, res1 = apply_action(world, tbe, press("scale"))
        assert world1.entities["scale"].state["on"] is True
        # scale on: the tare rule overrides the toggle
        world2, res2 = apply_action(world1, tbe, press("scale"))
        assert world2.entities["scale"].state["on"] is True
        assert "scale-tare" in res2.fired_rules
        assert any(e.message == "Scale tared." for e in res2.events)

    def test_hazard_event(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        _, res = apply_action(world, tbe, use("water_bottle", "scale", 10.0))
        assert res.has_hazard()
        assert res.fired_rules == ["water-on-scale-hazard"]

    def test_missing_amount_raises_when_rule_reads_it(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        with pytest.raises(MissingParamError):
            apply_action(world, tbe, use("boric_acid_bottle", "scale"))

    def test_amount_free_use_with_is_fine(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        new_world, res = apply_action(world, tbe, use("edta_bottle", "beaker"))
        assert new_world.entities["beaker"].state["edta_added"] is True
        assert new_world.entities["edta_bottle"].state["edta_ml"] == pytest.approx(99.5)

    def test_effect_writes_clamp_to_range(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        new_world, _ = apply_action(world, tbe, use("water_bottle", "beaker", 5000.0))
        # beaker volume clamps at 1000, wash bottle floor at 0
        assert new_world.entities["beaker"].state["volume_ml"] == 1000.0
        assert new_world.entities["water_bottle"].state["water_ml"] == 0.0


class TestErrors:
    def test_unknown_entity(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        with pytest.raises(UnknownEntityError):
            apply_action(world, tbe, press("ghost"))

    def test_verb_not_afforded(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        with pytest.raises(VerbNotAffordedError):
            apply_action(world, tbe, press("beaker"))

    def test_missing_direction(self, microscopy):
        world = init_world(microscopy.default_scene, microscopy)
        with pytest.raises(MissingParamError):
            apply_action(world, microscopy, Action(verb=Affordance.ROTATE, subject="light_knob"))

    def test_unknown_zone(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        with pytest.raises(UnknownZoneError):
            apply_action(
                world, tbe, Action(verb=Affordance.MOVE, subject="beaker", target_zone="attic")
            )

    def test_negative_amount(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        with pytest.raises(InvalidParamError):
            apply_action(world, tbe, use("boric_acid_bottle", "scale", -1.0))

    def test_extra_param_rejected(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        with pytest.raises(InvalidParamError):
            apply_action(
                world, tbe,
                Action(verb=Affordance.PRESS, subject="scale", direction="cw"),
            )

    @pytest.mark.parametrize(
        "bad",
        [
            press("ghost"),
            press("beaker"),
            Action(verb=Affordance.ROTATE, subject="scale"),
            Action(verb=Affordance.MOVE, subject="beaker", target_zone="attic"),
            use("boric_acid_bottle", "scale"),  # missing amount
        ],
    )
    def test_error_atomicity(self, tbe, bad):
        world = init_world(tbe.default_scene, tbe)
        before = state_hash(world)
        with pytest.raises(Exception):
            apply_action(world, tbe, bad)
        assert state_hash(world) == before


class TestStateHash:
    def test_init_hash_deterministic(self, tbe):
        h1 = state_hash(init_world(tbe.default_scene, tbe))
        h2 = state_hash(init_world(tbe.default_scene, tbe))
        assert h1 == h2
        assert len(h1) == 64

    def test_hash_changes_with_real_delta(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        new_world, res = apply_action(world, tbe, press("scale"))
        assert any(d.old != d.new for d in res.state_delta)
        assert state_hash(new_world) != state_hash(world)

    def test_hash_ignores_insertion_order(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        shuffled = world.copy()
        ids = list(shuffled.entities)
        random.Random(5).shuffle(ids)
        shuffled.entities = {eid: shuffled.entities[eid] for eid in ids}
        assert state_hash(shuffled) == state_hash(world)

    def test_delta_replay_reproduces_post_state(self, tbe):
        world = init_world(tbe.default_scene, tbe)
        rng = random.Random(11)
        grid = (5.0, 17.4, 54.0, 100.0, 400.0)
        for _ in range(60):
            options = legal_actions(world, tbe)
            action = rng.choice(options)
            if action.amount is None and action.partner is not None:
                action = use(action.subject, action.partner, rng.choice(grid))
            new_world, res = apply_action(world, tbe, action)
            replayed = replay_delta(world, res.state_delta)
            assert state_hash(replayed) == state_hash(new_world)
            world = new_world


class TestRuleOrderDeterminism:
    def test_disjoint_rules_commute(self, tbe):
        # pour-boric-acid and pour-trizma can never match one action
        doc = json.loads(write_pack(tbe))
        names = [r["name"] for r in doc["rules"]]
        i = names.index("pour-boric-acid")
        j = names.index("pour-trizma")
        doc["rules"][i], doc["rules"][j] = doc["rules"][j], doc["rules"][i]
        swapped = parse_pack(json.dumps(doc).encode())

        session_a = start_session(tbe.default_scene, tbe, Mode.INSTRUCTION, "tbe-10x")
        actions = walkthrough(session_a)
        world = init_world(swapped.default_scene, swapped)
        for action in actions:
            world, _ = apply_action(world, swapped, action)
        assert state_hash(world) == state_hash(session_a.world)


class TestClampSafety:
    def test_random_rotations_stay_in_range(self, microscopy):
        rng = random.Random(3)
        world = init_world(microscopy.default_scene, microscopy)
        for _ in range(500):
            direction = rng.choice(("cw", "ccw"))
            world, _ = apply_action(world, microscopy, rotate("light_knob", direction))
            assert 1 <= world.entities["light_knob"].state["position"] <= 24

    def test_random_action_storm_respects_all_ranges(self, tbe):
        rng = random.Random(23)
        world = init_world(tbe.default_scene, tbe)
        registry = tbe.kinds
        grid = (1.0, 17.4, 54.0, 400.0, 1500.0)
        for _ in range(300):
            action = rng.choice(legal_actions(world, tbe))
            if action.amount is None and action.partner is not None:
                action = use(action.subject, action.partner, rng.choice(grid))
            world, _ = apply_action(world, tbe, action)
            for entity in world.entities.values():
                for spec in registry.resolve(entity.kind).features:
                    if spec.range is not None:
                        value = entity.state[spec.name]
                        assert spec.range[0] <= value <= spec.range[1]
