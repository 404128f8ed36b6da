"""Bundled scenario packs.

Two packs ship with the engine:

* ``tbe`` — preparation of 500 ml of 10X TBE solution on the electronic
  scale and magnetic stirrer (procedure ``tbe-10x``);
* ``microscopy`` — setting up the photonic microscope and examining a
  test specimen with all four objectives (procedure ``microscoping``).

The packs are authored programmatically here; the ``.vpack`` files next
to this module are their canonical renderings and must stay byte-equal
(guarded by tests).
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..engine import Condition, Effect, EffectValue, EventSpec, Rule, Trigger
from ..formats import PACK_FORMAT, SCENE_FORMAT, ScenarioPack, write_pack
from ..model import Affordance, Entity, FeatureSpec, KindDef, PackRef, SceneFile, Zone
from ..procedures import AmountSpec, Matcher, PostCondition, Procedure, Step

_P = Affordance.PRESS
_R = Affordance.ROTATE
_U = Affordance.USE_WITH
_M = Affordance.MOVE
_Z = Affordance.ZOOM


def _real(name: str, default: float, lo: float, hi: float, unit: str) -> FeatureSpec:
    return FeatureSpec(name=name, value_type="real", default=default, range=(lo, hi), unit=unit)


def _flag(name: str, default: bool = False) -> FeatureSpec:
    return FeatureSpec(name=name, value_type="bool", default=default)


def _set(target: str, feature: str, value) -> Effect:
    return Effect(target=target, feature=feature, op="set", value=EffectValue(literal=value))


def _add_amount(target: str, feature: str, scale: float = 1.0) -> Effect:
    return Effect(
        target=target, feature=feature, op="add", value=EffectValue(param="amount", scale=scale)
    )


def _add_ref(target: str, feature: str, ref_target: str, ref_feature: str,
             scale: float = 1.0) -> Effect:
    return Effect(
        target=target,
        feature=feature,
        op="add",
        value=EffectValue(ref_target=ref_target, ref_feature=ref_feature, scale=scale),
    )


def _add_lit(target: str, feature: str, value: float) -> Effect:
    return Effect(target=target, feature=feature, op="add", value=EffectValue(literal=value))


def _cond(target: str, feature: str, op: str, value) -> Condition:
    return Condition(target=target, feature=feature, op=op, value=value)


def tbe_pack() -> ScenarioPack:
    kinds = (
        KindDef(
            name="ReagentBottle",
            parent="Container",
            abstract=True,
            features=(_real("content_g", 500.0, 0.0, 1000.0, "g"),),
            affordances=frozenset({_M}),
        ),
        KindDef(name="BoricAcidBottle", parent="ReagentBottle"),
        KindDef(name="TrizmaBottle", parent="ReagentBottle"),
        KindDef(
            name="WashBottle",
            parent="Container",
            features=(_real("water_ml", 2000.0, 0.0, 2000.0, "ml"),),
            affordances=frozenset({_M}),
        ),
        KindDef(
            name="EdtaBottle",
            parent="Container",
            features=(_real("edta_ml", 100.0, 0.0, 500.0, "ml"),),
            affordances=frozenset({_M}),
        ),
        KindDef(
            name="Beaker",
            parent="Container",
            features=(
                _real("volume_ml", 0.0, 0.0, 1000.0, "ml"),
                _real("boric_acid_g", 0.0, 0.0, 500.0, "g"),
                _real("trizma_g", 0.0, 0.0, 500.0, "g"),
                _flag("edta_added"),
                _flag("dissolved"),
                _flag("on_stirrer"),
            ),
            affordances=frozenset({_M}),
        ),
        KindDef(
            name="ElectronicScale",
            parent="Container",
            features=(
                _flag("on"),
                _flag("tared"),
                _real("displayed_g", 0.0, 0.0, 2000.0, "g"),
                _real("boric_g", 0.0, 0.0, 2000.0, "g"),
                _real("trizma_g", 0.0, 0.0, 2000.0, "g"),
            ),
            affordances=frozenset({_P}),
        ),
        KindDef(
            name="MagneticStirrer",
            parent="Switch",
            features=(_flag("occupied"),),
        ),
    )

    rules = (
        # A powered scale treats further presses as taring instead of the
        # built-in power toggle.
        Rule(
            name="scale-tare",
            trigger=Trigger(verb=_P, subject_kind="ElectronicScale"),
            conditions=(_cond("subject", "on", "==", True),),
            effects=(_set("subject", "displayed_g", 0.0), _set("subject", "tared", True)),
            events=(EventSpec(severity="info", message="Scale tared."),),
            override=True,
        ),
        Rule(
            name="pour-boric-acid",
            trigger=Trigger(verb=_U, subject_kind="BoricAcidBottle",
                            partner_kind="ElectronicScale"),
            conditions=(_cond("subject", "content_g", ">", 0.0),),
            effects=(
                _add_amount("partner", "boric_g"),
                _add_amount("subject", "content_g", scale=-1.0),
            ),
        ),
        Rule(
            name="pour-trizma",
            trigger=Trigger(verb=_U, subject_kind="TrizmaBottle",
                            partner_kind="ElectronicScale"),
            conditions=(_cond("subject", "content_g", ">", 0.0),),
            effects=(
                _add_amount("partner", "trizma_g"),
                _add_amount("subject", "content_g", scale=-1.0),
            ),
        ),
        # Any reagent pour shows up on the display while the scale is on.
        Rule(
            name="scale-display",
            trigger=Trigger(verb=_U, subject_kind="ReagentBottle",
                            partner_kind="ElectronicScale"),
            conditions=(_cond("partner", "on", "==", True),),
            effects=(_add_amount("partner", "displayed_g"),),
        ),
        Rule(
            name="transfer-boric-acid",
            trigger=Trigger(verb=_U, subject_kind="ElectronicScale", partner_kind="Beaker"),
            conditions=(_cond("subject", "boric_g", ">", 0.0),),
            effects=(
                _add_ref("partner", "boric_acid_g", "subject", "boric_g"),
                _add_ref("subject", "displayed_g", "subject", "boric_g", scale=-1.0),
                _set("subject", "boric_g", 0.0),
            ),
        ),
        Rule(
            name="transfer-trizma",
            trigger=Trigger(verb=_U, subject_kind="ElectronicScale", partner_kind="Beaker"),
            conditions=(_cond("subject", "trizma_g", ">", 0.0),),
            effects=(
                _add_ref("partner", "trizma_g", "subject", "trizma_g"),
                _add_ref("subject", "displayed_g", "subject", "trizma_g", scale=-1.0),
                _set("subject", "trizma_g", 0.0),
            ),
        ),
        Rule(
            name="add-water",
            trigger=Trigger(verb=_U, subject_kind="WashBottle", partner_kind="Beaker"),
            conditions=(_cond("subject", "water_ml", ">", 0.0),),
            effects=(
                _add_amount("partner", "volume_ml"),
                _add_amount("subject", "water_ml", scale=-1.0),
            ),
        ),
        Rule(
            name="add-edta",
            trigger=Trigger(verb=_U, subject_kind="EdtaBottle", partner_kind="Beaker"),
            conditions=(_cond("subject", "edta_ml", ">", 0.0),),
            effects=(_set("partner", "edta_added", True), _add_lit("subject", "edta_ml", -0.5)),
        ),
        Rule(
            name="place-beaker-on-stirrer",
            trigger=Trigger(verb=_U, subject_kind="Beaker", partner_kind="MagneticStirrer"),
            conditions=(_cond("subject", "on_stirrer", "==", False),),
            effects=(_set("subject", "on_stirrer", True), _set("partner", "occupied", True)),
        ),
        Rule(
            name="stir-dissolve",
            trigger=Trigger(verb=_U, subject_kind="Beaker", partner_kind="MagneticStirrer"),
            conditions=(
                _cond("subject", "on_stirrer", "==", True),
                _cond("partner", "on", "==", True),
                _cond("subject", "volume_ml", ">", 0.0),
            ),
            effects=(_set("subject", "dissolved", True),),
            events=(EventSpec(severity="info", message="The solution is fully dissolved."),),
        ),
        Rule(
            name="water-on-scale-hazard",
            trigger=Trigger(verb=_U, subject_kind="WashBottle", partner_kind="ElectronicScale"),
            events=(
                EventSpec(severity="hazard", message="Water spilled on the electronic scale!"),
            ),
        ),
        Rule(
            name="powder-on-stirrer-hazard",
            trigger=Trigger(verb=_U, subject_kind="ReagentBottle",
                            partner_kind="MagneticStirrer"),
            events=(
                EventSpec(severity="hazard", message="Powder spilled on the stirrer plate!"),
            ),
        ),
    )

    scene = SceneFile(
        format_version=SCENE_FORMAT,
        scene_id="tbe-default",
        pack_ref=PackRef(pack_id="tbe", version="1.0.0"),
        zones=[Zone("bench", "Lab bench"), Zone("shelf", "Reagent shelf")],
        entities=[
            Entity(
                id="beaker",
                kind="Beaker",
                zone="bench",
                state={
                    "volume_ml": 0.0, "boric_acid_g": 0.0, "trizma_g": 0.0,
                    "edta_added": False, "dissolved": False, "on_stirrer": False,
                },
            ),
            Entity(
                id="boric_acid_bottle", kind="BoricAcidBottle", zone="shelf",
                state={"content_g": 500.0},
            ),
            Entity(id="edta_bottle", kind="EdtaBottle", zone="shelf", state={"edta_ml": 100.0}),
            Entity(
                id="scale",
                kind="ElectronicScale",
                zone="bench",
                state={
                    "on": False, "tared": False, "displayed_g": 0.0,
                    "boric_g": 0.0, "trizma_g": 0.0,
                },
            ),
            Entity(
                id="stirrer", kind="MagneticStirrer", zone="bench",
                state={"on": False, "occupied": False},
            ),
            Entity(
                id="trizma_bottle", kind="TrizmaBottle", zone="shelf",
                state={"content_g": 500.0},
            ),
            Entity(
                id="water_bottle", kind="WashBottle", zone="shelf",
                state={"water_ml": 2000.0},
            ),
        ],
    )

    procedure = Procedure(
        id="tbe-10x",
        title="preparation of 500 ml of 10X TBE solution",
        steps=(
            Step(
                id="power-scale",
                hint_text="Press the scale's power button to switch it on.",
                matcher=Matcher(verb=_P, subject="scale"),
                post_conditions=(PostCondition("scale", "on", "==", True),),
            ),
            Step(
                id="tare-scale",
                hint_text="Press the scale again to tare the display.",
                matcher=Matcher(verb=_P, subject="scale"),
                post_conditions=(PostCondition("scale", "tared", "==", True),),
            ),
            Step(
                id="weigh-boric-acid",
                hint_text="Pour 17.4 g of boric acid onto the scale.",
                matcher=Matcher(verb=_U, subject="boric_acid_bottle", partner="scale",
                                amount=AmountSpec(17.4, 0.1)),
                post_conditions=(PostCondition("scale", "boric_g", ">", 0.0),),
            ),
            Step(
                id="transfer-boric-acid",
                hint_text="Transfer the weighed boric acid into the beaker.",
                matcher=Matcher(verb=_U, subject="scale", partner="beaker"),
                post_conditions=(PostCondition("beaker", "boric_acid_g", ">", 0.0),),
            ),
            Step(
                id="tare-again",
                hint_text="Tare the scale before the next weighing.",
                matcher=Matcher(verb=_P, subject="scale"),
                post_conditions=(PostCondition("scale", "tared", "==", True),),
            ),
            Step(
                id="weigh-trizma",
                hint_text="Pour 54 g of Trizma base onto the scale.",
                matcher=Matcher(verb=_U, subject="trizma_bottle", partner="scale",
                                amount=AmountSpec(54.0, 0.1)),
                post_conditions=(PostCondition("scale", "trizma_g", ">", 0.0),),
            ),
            Step(
                id="transfer-trizma",
                hint_text="Transfer the weighed Trizma base into the beaker.",
                matcher=Matcher(verb=_U, subject="scale", partner="beaker"),
                post_conditions=(PostCondition("beaker", "trizma_g", ">", 0.0),),
            ),
            Step(
                id="add-water",
                hint_text="Add 400 ml of water to the beaker.",
                matcher=Matcher(verb=_U, subject="water_bottle", partner="beaker",
                                amount=AmountSpec(400.0, 0.5)),
                post_conditions=(PostCondition("beaker", "volume_ml", ">=", 399.5),),
            ),
            Step(
                id="place-beaker",
                hint_text="Place the beaker on the magnetic stirrer.",
                matcher=Matcher(verb=_U, subject="beaker", partner="stirrer"),
                post_conditions=(PostCondition("beaker", "on_stirrer", "==", True),),
            ),
            Step(
                id="power-stirrer",
                hint_text="Switch on the magnetic stirrer.",
                matcher=Matcher(verb=_P, subject="stirrer"),
                post_conditions=(PostCondition("stirrer", "on", "==", True),),
            ),
            Step(
                id="stir-dissolve",
                hint_text="Keep the beaker on the running stirrer until the powders dissolve.",
                matcher=Matcher(verb=_U, subject="beaker", partner="stirrer"),
                post_conditions=(PostCondition("beaker", "dissolved", "==", True),),
            ),
            Step(
                id="add-edta",
                hint_text="Add the EDTA pH 8.0 to the solution.",
                matcher=Matcher(verb=_U, subject="edta_bottle", partner="beaker"),
                post_conditions=(PostCondition("beaker", "edta_added", "==", True),),
            ),
            Step(
                id="top-up-water",
                hint_text="Top up with water to 500 ml.",
                matcher=Matcher(verb=_U, subject="water_bottle", partner="beaker",
                                amount=AmountSpec(100.0, 0.5)),
                post_conditions=(PostCondition("beaker", "volume_ml", ">=", 499.5),),
            ),
        ),
    )

    return ScenarioPack(
        format_version=PACK_FORMAT,
        pack_id="tbe",
        version="1.0.0",
        kind_defs=kinds,
        rules=rules,
        procedures=(procedure,),
        default_scene=scene,
    )


def microscopy_pack() -> ScenarioPack:
    kinds = (
        KindDef(
            name="LightIntensityKnob",
            parent="Knob",
            features=(FeatureSpec("position", "int", 1, range=(1, 100)),),
        ),
        KindDef(
            name="PhotonicMicroscope_LightIntensityKnob",
            parent="LightIntensityKnob",
            features=(FeatureSpec("position", "int", 1, range=(1, 24)),),
        ),
        KindDef(
            name="Nosepiece",
            parent="Knob",
            features=(FeatureSpec("position", "int", 0, range=(0, 4)),),
        ),
        KindDef(
            name="CoarseFocusKnob",
            parent="Knob",
            features=(FeatureSpec("position", "int", 15, range=(0, 30)),),
        ),
        KindDef(name="PowerPlug", parent="Plug"),
        KindDef(name="WallSocket", parent="Item"),
        KindDef(name="PhotonicMicroscopeSwitch", parent="Switch"),
        KindDef(
            name="PhotonicMicroscope",
            parent="Item",
            features=(_flag("slide_mounted"),),
        ),
        KindDef(
            name="Slide",
            parent="Item",
            features=(_flag("has_specimen"), _flag("covered"), _flag("on_stage")),
        ),
        KindDef(name="TestSpecimen", parent="Item"),
        KindDef(name="CoverSlip", parent="Item"),
    )

    rules = (
        Rule(
            name="connect-plug",
            trigger=Trigger(verb=_U, subject_kind="PowerPlug", partner_kind="WallSocket"),
            effects=(_set("subject", "connected", True),),
            events=(EventSpec(severity="info", message="The microscope is plugged in."),),
        ),
        Rule(
            name="specimen-on-slide",
            trigger=Trigger(verb=_U, subject_kind="TestSpecimen", partner_kind="Slide"),
            conditions=(_cond("partner", "has_specimen", "==", False),),
            effects=(_set("partner", "has_specimen", True),),
        ),
        Rule(
            name="cover-slip-on-slide",
            trigger=Trigger(verb=_U, subject_kind="CoverSlip", partner_kind="Slide"),
            conditions=(
                _cond("partner", "has_specimen", "==", True),
                _cond("partner", "covered", "==", False),
            ),
            effects=(_set("partner", "covered", True),),
        ),
        Rule(
            name="mount-slide",
            trigger=Trigger(verb=_U, subject_kind="Slide", partner_kind="PhotonicMicroscope"),
            conditions=(
                _cond("subject", "covered", "==", True),
                _cond("partner", "slide_mounted", "==", False),
            ),
            effects=(_set("partner", "slide_mounted", True), _set("subject", "on_stage", True)),
        ),
        Rule(
            name="specimen-on-stage-hazard",
            trigger=Trigger(verb=_U, subject_kind="TestSpecimen",
                            partner_kind="PhotonicMicroscope"),
            events=(
                EventSpec(
                    severity="hazard",
                    message="Specimen placed directly on the stage. Use a prepared slide.",
                ),
            ),
        ),
    )

    scene = SceneFile(
        format_version=SCENE_FORMAT,
        scene_id="microscopy-default",
        pack_ref=PackRef(pack_id="microscopy", version="1.0.0"),
        zones=[Zone("bench", "Microscope bench"), Zone("prep", "Preparation table")],
        entities=[
            Entity(id="cover_slip", kind="CoverSlip", zone="prep", state={}),
            Entity(id="focus_knob", kind="CoarseFocusKnob", zone="bench",
                   state={"position": 15}),
            Entity(
                id="light_knob", kind="PhotonicMicroscope_LightIntensityKnob", zone="bench",
                state={"position": 11},
            ),
            Entity(id="micro_switch", kind="PhotonicMicroscopeSwitch", zone="bench",
                   state={"on": False}),
            Entity(id="microscope", kind="PhotonicMicroscope", zone="bench",
                   state={"slide_mounted": False}),
            Entity(id="nosepiece", kind="Nosepiece", zone="bench", state={"position": 0}),
            Entity(id="power_plug", kind="PowerPlug", zone="bench",
                   state={"connected": False}),
            Entity(
                id="slide", kind="Slide", zone="prep",
                state={"has_specimen": False, "covered": False, "on_stage": False},
            ),
            Entity(id="specimen", kind="TestSpecimen", zone="prep", state={}),
            Entity(id="wall_socket", kind="WallSocket", zone="bench", state={}),
        ],
    )

    def objective(n: int, label: str) -> tuple[Step, Step]:
        return (
            Step(
                id=f"objective-{n}",
                hint_text=f"Rotate the nosepiece to the {label} objective.",
                matcher=Matcher(verb=_R, subject="nosepiece", direction="cw"),
                post_conditions=(PostCondition("nosepiece", "position", "==", n),),
            ),
            Step(
                id=f"focus-{n}",
                hint_text=f"Look through the eyepiece and focus with the {label} objective.",
                matcher=Matcher(verb=_Z, subject="microscope"),
            ),
        )

    steps: list[Step] = [
        Step(
            id="connect-plug",
            hint_text="Connect the microscope's power plug to the wall socket.",
            matcher=Matcher(verb=_U, subject="power_plug", partner="wall_socket"),
            post_conditions=(PostCondition("power_plug", "connected", "==", True),),
        ),
        Step(
            id="power-on",
            hint_text="Press the microscope's power switch.",
            matcher=Matcher(verb=_P, subject="micro_switch"),
            post_conditions=(PostCondition("micro_switch", "on", "==", True),),
        ),
        Step(
            id="set-light",
            hint_text="Turn the light intensity knob up to a comfortable mid level.",
            matcher=Matcher(verb=_R, subject="light_knob", direction="cw"),
            post_conditions=(PostCondition("light_knob", "position", ">=", 12),),
        ),
        Step(
            id="place-specimen",
            hint_text="Put the test specimen on the slide.",
            matcher=Matcher(verb=_U, subject="specimen", partner="slide"),
            post_conditions=(PostCondition("slide", "has_specimen", "==", True),),
        ),
        Step(
            id="cover-slide",
            hint_text="Cover the specimen with the cover slip.",
            matcher=Matcher(verb=_U, subject="cover_slip", partner="slide"),
            post_conditions=(PostCondition("slide", "covered", "==", True),),
        ),
        Step(
            id="mount-slide",
            hint_text="Mount the prepared slide on the microscope stage.",
            matcher=Matcher(verb=_U, subject="slide", partner="microscope"),
            post_conditions=(PostCondition("microscope", "slide_mounted", "==", True),),
        ),
    ]
    for n, label in ((1, "first"), (2, "second"), (3, "third"), (4, "fourth")):
        steps.extend(objective(n, label))

    procedure = Procedure(
        id="microscoping",
        title="microscoping of a test specimen",
        steps=tuple(steps),
    )

    return ScenarioPack(
        format_version=PACK_FORMAT,
        pack_id="microscopy",
        version="1.0.0",
        kind_defs=kinds,
        rules=rules,
        procedures=(procedure,),
        default_scene=scene,
    )


BUILDERS = {"tbe": tbe_pack, "microscopy": microscopy_pack}


def bundled_pack_bytes(name: str) -> bytes:
    """Canonical bytes of a bundled pack, from the shipped data files."""
    return resources.files(__package__).joinpath(f"{name}.vpack").read_bytes()


def install_bundled_content(directory: str | Path) -> list[Path]:
    """Copy the bundled .vpack files into ``directory`` (e.g. to seed a
    service content dir). Returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(BUILDERS):
        path = directory / f"{name}.vpack"
        path.write_bytes(bundled_pack_bytes(name))
        written.append(path)
    return written


def regenerate_bundled_files(directory: str | Path | None = None) -> list[Path]:
    """Write the builders' canonical renderings next to this module (used
    to refresh the shipped golden files after content changes)."""
    directory = Path(directory) if directory is not None else Path(__file__).parent
    written = []
    for name, builder in sorted(BUILDERS.items()):
        path = directory / f"{name}.vpack"
        path.write_bytes(write_pack(builder()))
        written.append(path)
    return written
