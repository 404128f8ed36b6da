from __future__ import annotations

import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_pack
from vlab import canon
from vlab.content import BUILDERS, bundled_pack_bytes
from vlab.errors import (
    FormatSyntaxError,
    SchemaError,
    UnsupportedVersionError,
    VlabError,
)
from vlab.formats import (
    ScenarioPack,
    parse_pack,
    parse_scene,
    scene_to_json,
    validate_pack,
    write_pack,
    write_scene,
)

MINIMAL_SCENE = {
    "format_version": "vlab-scene/1",
    "scene_id": "empty",
    "pack_ref": {"pack_id": "p", "version": "1"},
    "zones": [],
    "entities": [],
}


def scene_bytes(obj) -> bytes:
    return json.dumps(obj).encode("utf-8")


class TestParseScene:
    def test_bundled_tbe_scene_entities(self, tbe):
        scene_json = scene_to_json(tbe.default_scene)
        scene = parse_scene(scene_bytes(scene_json))
        ids = {e.id for e in scene.entities}
        assert {"scale", "stirrer", "boric_acid_bottle", "trizma_bottle"} <= ids

    def test_minimal_document(self):
        scene = parse_scene(scene_bytes(MINIMAL_SCENE))
        assert scene.zones == [] and scene.entities == []

    def test_unknown_zone_reference(self):
        doc = dict(MINIMAL_SCENE)
        doc["zones"] = [{"id": "bench", "label": "Bench"}]
        doc["entities"] = [{"id": "e", "kind": "Switch", "zone": "benchX", "state": {}}]
        with pytest.raises(SchemaError) as exc:
            parse_scene(scene_bytes(doc))
        assert "entities[0].zone" in exc.value.path

    def test_unknown_top_level_key_rejected(self):
        doc = dict(MINIMAL_SCENE)
        doc["extras"] = 1
        with pytest.raises(SchemaError) as exc:
            parse_scene(scene_bytes(doc))
        assert "extras" in exc.value.path

    def test_syntax_error_carries_location(self):
        with pytest.raises(FormatSyntaxError) as exc:
            parse_scene(b'{"format_version": "vlab-scene/1",\n  "scene_id": }')
        assert exc.value.line == 2
        assert exc.value.col > 0

    def test_unsupported_version(self):
        doc = dict(MINIMAL_SCENE)
        doc["format_version"] = "vlab-scene/9"
        with pytest.raises(UnsupportedVersionError):
            parse_scene(scene_bytes(doc))

    def test_duplicate_entity_id(self):
        doc = dict(MINIMAL_SCENE)
        doc["zones"] = [{"id": "z", "label": "Z"}]
        doc["entities"] = [
            {"id": "e", "kind": "Switch", "zone": "z", "state": {}},
            {"id": "e", "kind": "Switch", "zone": "z", "state": {}},
        ]
        with pytest.raises(SchemaError) as exc:
            parse_scene(scene_bytes(doc))
        assert "duplicate entity id" in exc.value.reason


class TestWriteScene:
    def test_golden_fixed_point(self, tbe):
        golden = write_scene(tbe.default_scene)
        assert write_scene(parse_scene(golden)) == golden

    def test_shortest_round_trip_float(self):
        doc = dict(MINIMAL_SCENE)
        doc["zones"] = [{"id": "z", "label": "Z"}]
        value = 0.1 + 0.2  # 0.30000000000000004
        doc["entities"] = [
            {"id": "e", "kind": "K", "zone": "z", "state": {"x": value}}
        ]
        out1 = write_scene(parse_scene(scene_bytes(doc)))
        out2 = write_scene(parse_scene(out1))
        assert out1 == out2
        assert b"0.30000000000000004" in out1
        assert json.loads(out1)["entities"][0]["state"]["x"] == value

    def test_key_order_independent(self):
        a = scene_bytes(MINIMAL_SCENE)
        shuffled = dict(reversed(list(MINIMAL_SCENE.items())))
        b = json.dumps(shuffled).encode("utf-8")
        assert a != b
        assert write_scene(parse_scene(a)) == write_scene(parse_scene(b))

    def test_canonical_form_shape(self, tbe):
        data = write_scene(tbe.default_scene)
        text = data.decode("utf-8")
        assert "\r" not in text
        assert text.endswith("\n")
        assert text.startswith('{\n  "')


class TestParsePack:
    def test_bundled_microscopy_procedure(self):
        pack = parse_pack(bundled_pack_bytes("microscopy"))
        assert pack.procedures[0].title == "microscoping of a test specimen"

    def test_empty_rules_and_procedures_is_valid(self):
        doc = {
            "format_version": "vlab-pack/1",
            "pack_id": "bare",
            "version": "1",
            "kinds": [],
            "rules": [],
            "procedures": [],
            "default_scene": {
                "format_version": "vlab-scene/1",
                "scene_id": "bare-default",
                "pack_ref": {"pack_id": "bare", "version": "1"},
                "zones": [{"id": "bench", "label": "Bench"}],
                "entities": [
                    {"id": "sw", "kind": "Switch", "zone": "bench", "state": {"on": False}}
                ],
            },
        }
        pack = parse_pack(scene_bytes(doc))
        assert pack.rules == () and pack.procedures == ()

    def test_rule_with_unknown_kind_names_both(self, tbe):
        doc = json.loads(write_pack(tbe))
        doc["rules"].append(
            {
                "name": "spin-up",
                "trigger": {"verb": "press", "subject_kind": "Centrifuge"},
            }
        )
        with pytest.raises(SchemaError) as exc:
            parse_pack(scene_bytes(doc))
        assert "spin-up" in exc.value.path
        assert "Centrifuge" in exc.value.reason


class TestValidatePack:
    def test_bundled_packs_are_clean(self, tbe, microscopy):
        assert validate_pack(tbe) == []
        assert validate_pack(microscopy) == []

    def test_step_referencing_missing_entity(self, tbe):
        doc = json.loads(write_pack(tbe))
        doc["procedures"][0]["steps"][0]["matcher"]["subject"] = "ghost"
        pack = parse_pack(scene_bytes(doc), validate=False)
        violations = validate_pack(pack)
        assert len(violations) == 1
        assert "ghost" in violations[0].message

    def test_kind_cycle_reported(self, tbe):
        doc = json.loads(write_pack(tbe))
        doc["kinds"].append({"name": "A", "parent": "B"})
        doc["kinds"].append({"name": "B", "parent": "A"})
        pack = parse_pack(scene_bytes(doc), validate=False)
        violations = validate_pack(pack)
        assert any("cyclic" in v.message.lower() for v in violations)


class TestGoldenFiles:
    def test_shipped_files_match_builders(self):
        for name, builder in BUILDERS.items():
            assert bundled_pack_bytes(name) == write_pack(builder()), name

    def test_fixed_point_of_canonicalization(self):
        for name in BUILDERS:
            data = bundled_pack_bytes(name)
            assert write_pack(parse_pack(data)) == data


class TestRoundTripHarness:
    def test_hundred_generated_packs(self):
        for seed in range(100):
            pack = random_pack(random.Random(seed))
            data = write_pack(pack)
            reparsed = parse_pack(data)
            assert reparsed == pack, f"structural identity failed at seed {seed}"
            assert write_pack(reparsed) == data, f"byte idempotence failed at seed {seed}"

    def test_hundred_generated_scenes(self):
        for seed in range(100):
            scene = random_pack(random.Random(1000 + seed)).default_scene
            data = write_scene(scene)
            reparsed = parse_scene(data)
            assert reparsed == scene
            assert write_scene(reparsed) == data


class TestCorruptionStrictness:
    """Single-character corruptions either parse (possibly to a different
    but coherent document) or fail with exactly one located error."""

    @pytest.mark.parametrize("name", sorted(BUILDERS))
    def test_golden_corruptions(self, name):
        data = bundled_pack_bytes(name)
        rng = random.Random(42)
        positions = rng.sample(range(len(data)), 300)
        for pos in positions:
            corrupted = data[:pos] + b"~" + data[pos + 1:]
            try:
                pack = parse_pack(corrupted)
            except FormatSyntaxError as exc:
                assert exc.line >= 1 and exc.col >= 1
            except SchemaError as exc:
                assert exc.path
            except UnsupportedVersionError as exc:
                assert exc.message
            else:
                # still a coherent document: canonicalization must succeed
                assert write_pack(pack)

    def test_whitespace_corruption_parses_equal(self, tbe):
        data = write_pack(tbe)
        assert data[1:2] == b"\n"
        spaced = data[:1] + b" " + data[1:]  # extra blank after '{'
        assert parse_pack(spaced) == tbe


@settings(max_examples=200, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_rendering_round_trips(value):
    rendered = canon.dumps_line(value)
    assert json.loads(rendered) == value
