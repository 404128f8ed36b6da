"""vlab: a headless, data-driven virtual-laboratory scenario engine.

The simulation core is strictly separated from scenario content: packs
(kinds + rules + procedures + default scene) and scenes are plain data
files; the engine, session modes, assessment scorer, ML environment,
HTTP service and CLI all consume them uniformly.
"""

from .assessment import (
    ActionClassification,
    EvaluationReport,
    ScoreCursor,
    classify_action,
    score_log,
)
from .engine import (
    Action,
    Rule,
    TransitionResult,
    WorldState,
    apply_action,
    init_world,
    legal_actions,
    state_hash,
    validate_scene,
)
from .errors import VlabError
from .formats import (
    ScenarioPack,
    parse_pack,
    parse_scene,
    validate_pack,
    write_pack,
    write_scene,
)
from .model import (
    Affordance,
    Entity,
    FeatureSpec,
    KindDef,
    KindRegistry,
    SceneFile,
    Zone,
    kind_is_a,
    resolve_kind,
    validate_entity,
)
from .procedures import Matcher, Procedure, Step
from .session import (
    Mode,
    Session,
    SessionReport,
    finish_session,
    start_session,
    submit_action,
    suggest_next,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionClassification",
    "Affordance",
    "Entity",
    "EvaluationReport",
    "FeatureSpec",
    "KindDef",
    "KindRegistry",
    "Matcher",
    "Mode",
    "Procedure",
    "Rule",
    "ScenarioPack",
    "SceneFile",
    "ScoreCursor",
    "Session",
    "SessionReport",
    "Step",
    "TransitionResult",
    "VlabError",
    "WorldState",
    "Zone",
    "apply_action",
    "classify_action",
    "finish_session",
    "init_world",
    "kind_is_a",
    "legal_actions",
    "parse_pack",
    "parse_scene",
    "resolve_kind",
    "score_log",
    "start_session",
    "state_hash",
    "submit_action",
    "suggest_next",
    "validate_entity",
    "validate_pack",
    "validate_scene",
    "write_pack",
    "write_scene",
]
