"""Entity kinds, the inheritance hierarchy, and instance validation.

A *kind* describes a family of lab objects: the features (typed state
variables) its instances carry and the affordances (verbs) they accept.
Kinds form trees rooted at the five built-in roots; a child inherits
every feature and affordance of its ancestors, may add new ones, and may
override an inherited feature's default or narrow its range, but can
never change a feature's type, widen a range, or drop anything it
inherited.

Registries are immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .errors import CyclicInheritanceError, IllegalOverrideError, UnknownKindError

Value = Union[bool, int, float, str]

VALUE_TYPES = ("bool", "int", "real", "enum", "string")


class Affordance(Enum):
    """The closed verb vocabulary. Picking objects up is deliberately not
    part of it: objects are moved between zones instead of being carried."""

    PRESS = "press"
    ROTATE = "rotate"
    PULL = "pull"
    ZOOM = "zoom"
    MOVE = "move"
    USE_WITH = "use_with"


def _fmt_bound(x: float) -> str:
    if isinstance(x, float) and x.is_integer():
        return str(int(x))
    return str(x)


@dataclass(frozen=True)
class FeatureSpec:
    """Schema of one typed state variable of a kind."""

    name: str
    value_type: str  # one of VALUE_TYPES
    default: Value
    range: tuple[float, float] | None = None  # int/real only; None = unbounded
    unit: str | None = None  # real only, e.g. "g", "ml"
    enum_values: tuple[str, ...] | None = None  # enum only

    def range_label(self) -> str:
        assert self.range is not None
        lo, hi = self.range
        return f"[{_fmt_bound(lo)},{_fmt_bound(hi)}]"

    def check_value(self, value: Value) -> str | None:
        """Return a problem description for ``value``, or None if it fits."""
        t = self.value_type
        if t == "bool":
            if not isinstance(value, bool):
                return f"{self.name} must be a bool"
        elif t == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                return f"{self.name} must be an int"
            if self.range is not None and not self.range[0] <= value <= self.range[1]:
                return f"{self.name} out of range {self.range_label()}"
        elif t == "real":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return f"{self.name} must be a real"
            if not math.isfinite(float(value)):
                return f"{self.name} must be finite"
            if self.range is not None and not self.range[0] <= float(value) <= self.range[1]:
                return f"{self.name} out of range {self.range_label()}"
        elif t == "enum":
            if value not in (self.enum_values or ()):
                return f"{self.name} must be one of {list(self.enum_values or ())}"
        elif t == "string":
            if not isinstance(value, str):
                return f"{self.name} must be a string"
        else:
            return f"{self.name} has unknown value type {t!r}"
        return None

    def coerce(self, value: Value) -> Value:
        """Normalize a JSON scalar to the runtime representation (ints are
        accepted for real features and become floats)."""
        if self.value_type == "real" and isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        return value

    def spec_problems(self) -> list[str]:
        """Internal consistency problems of the spec itself."""
        problems = []
        if self.value_type not in VALUE_TYPES:
            problems.append(f"unknown value type {self.value_type!r}")
            return problems
        if self.range is not None:
            if self.value_type not in ("int", "real"):
                problems.append("range only applies to int/real features")
            elif self.range[0] > self.range[1]:
                problems.append(f"range has min > max ({self.range_label()})")
        if self.enum_values is not None and self.value_type != "enum":
            problems.append("enum_values only applies to enum features")
        if self.value_type == "enum" and not self.enum_values:
            problems.append("enum feature needs at least one value")
        if self.unit is not None and self.value_type != "real":
            problems.append("unit only applies to real features")
        problem = self.check_value(self.default)
        if problem is not None:
            problems.append(f"default invalid: {problem}")
        return problems


@dataclass(frozen=True)
class KindDef:
    """One node of the kind hierarchy, as authored.

    ``features`` and ``affordances`` are this kind's own additions and
    overrides; the flattened view is computed by :meth:`KindRegistry.resolve`.
    Affordance sets are strictly additive down the tree, so removing an
    inherited verb is not expressible.
    """

    name: str
    parent: str | None = None
    abstract: bool = False
    features: tuple[FeatureSpec, ...] = ()
    affordances: frozenset[Affordance] = frozenset()


@dataclass(frozen=True)
class FlatKind:
    """A kind with its whole ancestor chain merged in."""

    name: str
    abstract: bool
    features: tuple[FeatureSpec, ...]  # sorted by name
    affordances: frozenset[Affordance]

    @property
    def feature_map(self) -> dict[str, FeatureSpec]:
        return {f.name: f for f in self.features}

    def default_state(self) -> dict[str, Value]:
        return {f.name: f.coerce(f.default) for f in self.features}


BUILTIN_ROOTS = (
    KindDef(
        name="Switch",
        features=(FeatureSpec("on", "bool", False),),
        affordances=frozenset({Affordance.PRESS}),
    ),
    KindDef(
        name="Knob",
        features=(FeatureSpec("position", "int", 0),),
        affordances=frozenset({Affordance.ROTATE}),
    ),
    KindDef(
        name="Plug",
        features=(FeatureSpec("connected", "bool", False),),
        affordances=frozenset({Affordance.PULL, Affordance.USE_WITH}),
    ),
    KindDef(
        # Content features (volumes, masses) are declared per derived kind.
        name="Container",
        affordances=frozenset({Affordance.USE_WITH}),
    ),
    KindDef(
        name="Item",
        affordances=frozenset({Affordance.MOVE, Affordance.USE_WITH, Affordance.ZOOM}),
    ),
)

BUILTIN_ROOT_NAMES = frozenset(k.name for k in BUILTIN_ROOTS)


def _check_override(child_kind: str, parent_spec: FeatureSpec, child_spec: FeatureSpec) -> None:
    if child_spec.value_type != parent_spec.value_type:
        raise IllegalOverrideError(
            f"kind {child_kind!r} changes type of feature {child_spec.name!r} "
            f"from {parent_spec.value_type} to {child_spec.value_type}"
        )
    if parent_spec.range is not None:
        if child_spec.range is None:
            raise IllegalOverrideError(
                f"kind {child_kind!r} drops the range of feature {child_spec.name!r}"
            )
        if child_spec.range[0] < parent_spec.range[0] or child_spec.range[1] > parent_spec.range[1]:
            raise IllegalOverrideError(
                f"kind {child_kind!r} widens range of feature {child_spec.name!r} "
                f"from {parent_spec.range_label()} to {child_spec.range_label()}"
            )
    if parent_spec.enum_values is not None and child_spec.enum_values != parent_spec.enum_values:
        raise IllegalOverrideError(
            f"kind {child_kind!r} changes enum values of feature {child_spec.name!r}"
        )


class KindRegistry:
    """Immutable name -> KindDef map with flattening and ancestry queries.

    Always contains the five built-in roots; scenario packs contribute the
    rest. Resolution results are cached, so lookups after load are cheap.
    """

    def __init__(self, kinds: list[KindDef] | tuple[KindDef, ...] = ()):
        table: dict[str, KindDef] = {k.name: k for k in BUILTIN_ROOTS}
        self.duplicate_names: list[str] = []
        for kind in kinds:
            if kind.name in table:
                self.duplicate_names.append(kind.name)
            table[kind.name] = kind
        self._kinds = table
        self._flat_cache: dict[str, FlatKind] = {}

    @property
    def kinds(self) -> dict[str, KindDef]:
        return dict(self._kinds)

    def pack_kinds(self) -> list[KindDef]:
        """The non-builtin kinds, in name order."""
        return [k for n, k in sorted(self._kinds.items()) if n not in BUILTIN_ROOT_NAMES]

    def __contains__(self, name: str) -> bool:
        return name in self._kinds

    def get(self, name: str) -> KindDef:
        try:
            return self._kinds[name]
        except KeyError:
            raise UnknownKindError(f"unknown kind {name!r}") from None

    def chain(self, name: str) -> list[KindDef]:
        """Ancestor chain from root down to ``name``. Raises on unknown
        names and on parent cycles."""
        chain: list[KindDef] = []
        seen: set[str] = set()
        current: str | None = name
        while current is not None:
            if current in seen:
                raise CyclicInheritanceError(f"kind {name!r} has a cyclic parent chain")
            seen.add(current)
            kind = self.get(current)
            chain.append(kind)
            current = kind.parent
        chain.reverse()
        return chain

    def resolve(self, name: str) -> FlatKind:
        """Flatten ``name``: all inherited features and affordances merged,
        child overrides applied, features sorted by name."""
        cached = self._flat_cache.get(name)
        if cached is not None:
            return cached
        merged: dict[str, FeatureSpec] = {}
        affordances: set[Affordance] = set()
        abstract = False
        for kind in self.chain(name):
            abstract = kind.abstract
            affordances |= kind.affordances
            for spec in kind.features:
                existing = merged.get(spec.name)
                if existing is not None:
                    _check_override(kind.name, existing, spec)
                merged[spec.name] = spec
        flat = FlatKind(
            name=name,
            abstract=abstract,
            features=tuple(merged[n] for n in sorted(merged)),
            affordances=frozenset(affordances),
        )
        self._flat_cache[name] = flat
        return flat

    def is_a(self, name: str, ancestor: str) -> bool:
        """True iff ``ancestor`` lies on ``name``'s parent chain (reflexive)."""
        self.get(ancestor)  # both names must exist
        return any(k.name == ancestor for k in self.chain(name))

    def depth(self, name: str) -> int:
        """Distance from the root (root kinds have depth 0)."""
        return len(self.chain(name)) - 1

    def validate(self) -> list[Violation]:
        """Collect every hierarchy problem as data instead of raising."""
        violations: list[Violation] = []
        for name in self.duplicate_names:
            violations.append(Violation(f"kinds.{name}", "duplicate kind name"))
        for name in sorted(self._kinds):
            kind = self._kinds[name]
            where = f"kinds.{name}"
            if name not in BUILTIN_ROOT_NAMES and kind.parent is None:
                violations.append(
                    Violation(where, "must derive from a built-in root (parent missing)")
                )
            try:
                flat = self.resolve(name)
            except (UnknownKindError, CyclicInheritanceError, IllegalOverrideError) as exc:
                violations.append(Violation(where, exc.message))
                continue
            for spec in flat.features:
                for problem in spec.spec_problems():
                    violations.append(Violation(f"{where}.features.{spec.name}", problem))
        return violations


@dataclass(frozen=True)
class Violation:
    """One validation finding. Violations are data, not failures."""

    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass(frozen=True)
class Zone:
    id: str
    label: str


@dataclass
class Entity:
    """A concrete instance placed in a zone, with one value per feature of
    its flattened kind."""

    id: str
    kind: str
    zone: str
    state: dict[str, Value] = field(default_factory=dict)

    def copy(self) -> Entity:
        return Entity(id=self.id, kind=self.kind, zone=self.zone, state=dict(self.state))

    def as_json(self) -> dict:
        return {"id": self.id, "kind": self.kind, "zone": self.zone, "state": dict(self.state)}


@dataclass(frozen=True)
class PackRef:
    pack_id: str
    version: str

    def as_json(self) -> dict:
        return {"pack_id": self.pack_id, "version": self.version}


@dataclass
class SceneFile:
    """Runtime-loadable scene setup: zones, entity instances, initial state."""

    format_version: str
    scene_id: str
    pack_ref: PackRef
    zones: list[Zone]
    entities: list[Entity]

    def zone_ids(self) -> list[str]:
        return [z.id for z in self.zones]


def resolve_kind(registry: KindRegistry, name: str) -> FlatKind:
    """Module-level alias for :meth:`KindRegistry.resolve`."""
    return registry.resolve(name)


def kind_is_a(registry: KindRegistry, name: str, ancestor: str) -> bool:
    """Module-level alias for :meth:`KindRegistry.is_a`."""
    return registry.is_a(name, ancestor)


def validate_entity(registry: KindRegistry, entity: Entity) -> list[Violation]:
    """Check one entity against the registry.

    Reports unknown kind, abstract kind instantiation, missing and
    unexpected state keys, and out-of-range values, in deterministic
    order (entity-level findings first, then feature findings sorted by
    feature name).
    """
    where = f"entity {entity.id}"
    if entity.kind not in registry:
        return [Violation(where, f"unknown kind {entity.kind!r}")]
    try:
        flat = registry.resolve(entity.kind)
    except (UnknownKindError, CyclicInheritanceError, IllegalOverrideError) as exc:
        # an ancestor may be missing or broken even when the kind itself exists
        return [Violation(where, exc.message)]

    violations: list[Violation] = []
    if flat.abstract:
        violations.append(Violation(where, f"kind {entity.kind!r} is abstract"))

    specs = flat.feature_map
    for name in sorted(set(specs) | set(entity.state)):
        spec = specs.get(name)
        if spec is None:
            violations.append(Violation(f"{where}.state.{name}", "unexpected feature"))
            continue
        if name not in entity.state:
            violations.append(Violation(f"{where}.state.{name}", "missing feature"))
            continue
        problem = spec.check_value(entity.state[name])
        if problem is not None:
            violations.append(Violation(f"{where}.state.{name}", problem))
    return violations
