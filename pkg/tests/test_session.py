from __future__ import annotations

import pytest

from conftest import toy_pack
from vlab.engine import Action, legal_actions, state_hash
from vlab.errors import (
    ModeArgMismatchError,
    SessionFinishedError,
    UnknownProcedureError,
    VlabError,
    WrongModeError,
)
from vlab.model import Affordance
from vlab.procedures import Matcher, Procedure, Step
from vlab.session import (
    Mode,
    export_log,
    finish_session,
    parse_log,
    replay_log,
    start_session,
    submit_action,
    suggest_next,
    walkthrough,
)


def press(subject: str) -> Action:
    return Action(verb=Affordance.PRESS, subject=subject)


def use(subject: str, partner: str, amount: float | None = None) -> Action:
    return Action(verb=Affordance.USE_WITH, subject=subject, partner=partner, amount=amount)


class TestStartSession:
    def test_evaluation_binds_procedure(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.EVALUATION, "tbe-10x")
        assert session.matched_steps == set()
        assert session.world.tick == 0

    def test_experimentation_has_no_procedure(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.EXPERIMENTATION)
        assert session.procedure is None

    def test_unknown_procedure(self, tbe):
        with pytest.raises(UnknownProcedureError):
            start_session(tbe.default_scene, tbe, Mode.INSTRUCTION, "sourdough")

    def test_mode_arg_mismatch(self, tbe):
        with pytest.raises(ModeArgMismatchError):
            start_session(tbe.default_scene, tbe, Mode.INSTRUCTION)
        with pytest.raises(ModeArgMismatchError):
            start_session(tbe.default_scene, tbe, Mode.EXPERIMENTATION, "tbe-10x")


class TestSuggestNext:
    def test_fresh_tbe_suggests_powering_the_scale(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.INSTRUCTION, "tbe-10x")
        suggestion = suggest_next(session)
        assert suggestion.step_id == "power-scale"
        assert suggestion.action == press("scale")
        assert "power" in suggestion.hint_text.lower()

    def test_completed_returns_none(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.INSTRUCTION, "tbe-10x")
        walkthrough(session)
        assert suggest_next(session) is None

    def test_wrong_mode(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.EVALUATION, "tbe-10x")
        with pytest.raises(WrongModeError):
            suggest_next(session)

    def test_partial_order_picks_lowest_index_ready(self, toy):
        base = toy.procedures[0]
        partial = Procedure(
            id="partial",
            title="Partial drill",
            ordering="partial",
            steps=(
                Step(id="a", hint_text="Press 1.",
                     matcher=Matcher(verb=Affordance.PRESS, subject="sw1")),
                Step(id="b", hint_text="Press 2.",
                     matcher=Matcher(verb=Affordance.PRESS, subject="sw2")),
                Step(id="c", hint_text="Press 3.",
                     matcher=Matcher(verb=Affordance.PRESS, subject="sw3"),
                     requires=("a", "b")),
            ),
        )
        pack = toy_pack()
        pack.procedures = (base, partial)
        session = start_session(pack.default_scene, pack, Mode.INSTRUCTION, "partial")
        # both a and b are ready; a is lower-indexed
        assert suggest_next(session).step_id == "a"
        submit_action(session, press("sw1"))
        assert suggest_next(session).step_id == "b"

    def test_kind_level_matcher_concretizes_to_lowest_id(self, toy):
        pack = toy_pack()
        kind_proc = Procedure(
            id="kindly",
            title="Press any switch",
            steps=(
                Step(id="any", hint_text="Press any switch.",
                     matcher=Matcher(verb=Affordance.PRESS, subject="Switch")),
            ),
        )
        pack.procedures = pack.procedures + (kind_proc,)
        session = start_session(pack.default_scene, pack, Mode.INSTRUCTION, "kindly")
        # lowest qualifying id: extra1 < sparker < sw1 ... and HazardSwitch is_a Switch
        assert suggest_next(session).action == press("extra1")


class TestSubmitInstruction:
    def test_suggested_action_accepted(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.INSTRUCTION, "tbe-10x")
        outcome = submit_action(session, press("scale"))
        assert outcome.accepted
        assert outcome.newly_matched == ["power-scale"]
        assert session.world.tick == 1

    def test_any_other_action_rejected_with_hint(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.INSTRUCTION, "tbe-10x")
        hint = suggest_next(session).hint_text
        before = state_hash(session.world)
        outcome = submit_action(session, press("stirrer"))
        assert not outcome.accepted
        assert outcome.reason == hint
        assert state_hash(session.world) == before
        assert session.world.tick == 0 and session.action_log == []

    def test_matcher_match_with_failed_post_condition_rejected(self, tbe):
        # kind-level matching accepts any qualifying subject, so craft a
        # matcher match whose post-condition fails: pour the wrong amount.
        session = start_session(tbe.default_scene, tbe, Mode.INSTRUCTION, "tbe-10x")
        submit_action(session, press("scale"))
        submit_action(session, press("scale"))
        before = state_hash(session.world)
        outcome = submit_action(session, use("boric_acid_bottle", "scale", 17.45))
        assert outcome.accepted  # within +-0.1 tolerance
        session2 = start_session(tbe.default_scene, tbe, Mode.INSTRUCTION, "tbe-10x")
        submit_action(session2, press("scale"))
        submit_action(session2, press("scale"))
        outcome2 = submit_action(session2, use("boric_acid_bottle", "scale", 20.0))
        assert not outcome2.accepted

    def test_unknown_entity_rejected_with_hint(self, tbe):
        # the matcher gate fires before the engine ever sees the action
        session = start_session(tbe.default_scene, tbe, Mode.INSTRUCTION, "tbe-10x")
        hint = suggest_next(session).hint_text
        outcome = submit_action(session, press("ghost"))
        assert not outcome.accepted
        assert outcome.reason == hint

    def test_engine_error_becomes_rejection_in_evaluation(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.EVALUATION, "tbe-10x")
        outcome = submit_action(session, press("ghost"))
        assert not outcome.accepted
        assert "ghost" in outcome.reason

    def test_completed_after_full_walkthrough(self, tbe, microscopy):
        for pack, expected in ((tbe, 13), (microscopy, 14)):
            session = start_session(
                pack.default_scene, pack, Mode.INSTRUCTION, pack.procedures[0].id
            )
            actions = walkthrough(session)
            assert len(actions) == expected
            assert session.completed
            assert session.matched_order == [s.id for s in pack.procedures[0].steps]


class TestSubmitEvaluation:
    def test_trizma_weighing_matches_after_prerequisites(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.EVALUATION, "tbe-10x")
        prefix = [
            press("scale"),
            press("scale"),
            use("boric_acid_bottle", "scale", 17.4),
            use("scale", "beaker"),
            press("scale"),
        ]
        for action in prefix:
            assert submit_action(session, action).accepted
        outcome = submit_action(session, use("trizma_bottle", "scale", 54.0))
        assert outcome.newly_matched == ["weigh-trizma"]

    def test_free_play_applies_any_legal_action(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.EVALUATION, "tbe-10x")
        outcome = submit_action(session, use("water_bottle", "scale", 1.0))
        assert outcome.accepted  # hazardous but legal
        assert outcome.newly_matched == []

    def test_rejection_leaves_log_untouched(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.EVALUATION, "tbe-10x")
        outcome = submit_action(session, use("boric_acid_bottle", "scale"))  # no amount
        assert not outcome.accepted
        assert session.action_log == [] and session.world.tick == 0

    def test_log_length_equals_tick(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.EVALUATION, "tbe-10x")
        submit_action(session, press("scale"))
        submit_action(session, press("ghost"))  # rejected
        submit_action(session, press("stirrer"))
        assert len(session.action_log) == session.world.tick == 2


class TestModeEquivalence:
    def test_instruction_walkthrough_replays_identically_in_evaluation(self, tbe, microscopy):
        for pack in (tbe, microscopy):
            procedure = pack.procedures[0]
            instruction = start_session(
                pack.default_scene, pack, Mode.INSTRUCTION, procedure.id
            )
            actions = walkthrough(instruction)
            evaluation = start_session(
                pack.default_scene, pack, Mode.EVALUATION, procedure.id
            )
            for action in actions:
                assert submit_action(evaluation, action).accepted
            assert evaluation.matched_order == instruction.matched_order
            assert state_hash(evaluation.world) == state_hash(instruction.world)


class TestFinish:
    def test_idempotent(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.EVALUATION, "tbe-10x")
        submit_action(session, press("scale"))
        first = finish_session(session)
        second = finish_session(session)
        assert first == second
        assert session.finished

    def test_experimentation_report_has_no_evaluation(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.EXPERIMENTATION)
        report = finish_session(session)
        assert report.evaluation is None
        assert report.steps_total == 0

    def test_perfect_run_scores_100(self, tbe):
        instruction = start_session(tbe.default_scene, tbe, Mode.INSTRUCTION, "tbe-10x")
        actions = walkthrough(instruction)
        evaluation = start_session(tbe.default_scene, tbe, Mode.EVALUATION, "tbe-10x")
        for action in actions:
            submit_action(evaluation, action)
        report = finish_session(evaluation)
        assert report.evaluation.score == 100

    def test_submit_after_finish_raises(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.EXPERIMENTATION)
        finish_session(session)
        with pytest.raises(SessionFinishedError):
            submit_action(session, press("scale"))

    def test_matched_steps_only_grow(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.EVALUATION, "tbe-10x")
        seen: set[str] = set()
        for action in [press("scale"), press("scale"), press("stirrer"), press("scale")]:
            submit_action(session, action)
            assert seen <= session.matched_steps
            seen = set(session.matched_steps)


class TestLogRoundTrip:
    def test_export_parse_replay(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.INSTRUCTION, "tbe-10x")
        walkthrough(session)
        data = export_log(session)
        records = parse_log(data)
        assert len(records) == 13
        world = replay_log(tbe.default_scene, tbe, records)
        assert state_hash(world) == state_hash(session.world)

    def test_tampered_action_fails_consistency(self, tbe):
        # swapping the subject changes which rules fire, which the recorded
        # fired_rules no longer match
        session = start_session(tbe.default_scene, tbe, Mode.INSTRUCTION, "tbe-10x")
        walkthrough(session)
        data = export_log(session).decode()
        tampered = data.replace('"subject":"boric_acid_bottle"', '"subject":"trizma_bottle"', 1)
        records = parse_log(tampered.encode())
        with pytest.raises(VlabError):
            replay_log(tbe.default_scene, tbe, records)

    def test_divergent_amount_caught_by_hash_expectation(self, tbe):
        # an amount tamper yields a *different but self-consistent* log;
        # the hash expectation is the guard for that case
        session = start_session(tbe.default_scene, tbe, Mode.INSTRUCTION, "tbe-10x")
        walkthrough(session)
        data = export_log(session).decode()
        tampered = data.replace('"amount":17.4', '"amount":17.5', 1)
        world = replay_log(tbe.default_scene, tbe, parse_log(tampered.encode()))
        assert state_hash(world) != state_hash(session.world)

    def test_empty_log(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.EXPERIMENTATION)
        assert export_log(session) == b""
        assert parse_log(b"") == []


class TestInstructionSoundnessSample:
    def test_first_three_prefixes_reject_everything_else(self, tbe):
        session = start_session(tbe.default_scene, tbe, Mode.INSTRUCTION, "tbe-10x")
        for _ in range(3):
            suggestion = suggest_next(session)
            before = state_hash(session.world)
            for other in legal_actions(session.world, tbe):
                if other == suggestion.action:
                    continue
                outcome = submit_action(session, other)
                assert not outcome.accepted
                assert state_hash(session.world) == before
            assert submit_action(session, suggestion.action).accepted
