"""Multi-session HTTP+JSON API.

Rejected moves are domain outcomes (200 with ``accepted=false``), not
transport failures; every error body carries a machine ``code`` and a
human ``message``. Sessions live in memory; mutation is serialized per
session, different sessions are fully independent.

The event stream at ``GET /sessions/{id}/events`` is line-delimited
JSON: it replays the full history from tick 0 on connect and then
follows live until the session is finished, which makes client
reconnects trivially safe.
"""

from __future__ import annotations

import secrets
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response, StreamingResponse

from . import canon
from .engine import Action, use_with_partners
from .errors import (
    ModeArgMismatchError,
    SessionFinishedError,
    UnknownProcedureError,
    ValidationError,
    VlabError,
)
from .formats import ScenarioPack, parse_pack, parse_scene, scene_to_json
from .model import Affordance, SceneFile
from .session import (
    Mode,
    Session,
    finish_session,
    start_session,
    submit_action,
    suggest_next,
)

DEFAULT_LISTEN = "127.0.0.1:7180"
DEFAULT_SESSION_CAP = 256


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class SessionEntry:
    session: Session
    pack_id: str
    created_at: float
    lock: threading.Lock = field(default_factory=threading.Lock)
    events: list[dict] = field(default_factory=list)
    changed: threading.Condition = field(default_factory=threading.Condition)
    report_bytes: bytes | None = None

    def push_events(self, events: list[dict]) -> None:
        with self.changed:
            self.events.extend(events)
            self.changed.notify_all()


class SessionStore:
    """Loaded packs plus all live sessions. The store lock guards the
    maps; per-entry locks serialize session mutation."""

    def __init__(self, content_dir: str | Path | None, session_cap: int = DEFAULT_SESSION_CAP):
        self.content_dir = Path(content_dir) if content_dir else None
        self.session_cap = session_cap
        self.packs: dict[str, ScenarioPack] = {}
        self.sessions: "OrderedDict[str, SessionEntry]" = OrderedDict()
        self.lock = threading.Lock()
        self.load_packs()

    def load_packs(self) -> int:
        packs: dict[str, ScenarioPack] = {}
        if self.content_dir is not None and self.content_dir.is_dir():
            for path in sorted(self.content_dir.glob("*.vpack")):
                pack = parse_pack(path.read_bytes())
                packs[pack.pack_id] = pack
        with self.lock:
            self.packs = packs
        return len(packs)

    def pack(self, pack_id: str) -> ScenarioPack:
        with self.lock:
            pack = self.packs.get(pack_id)
        if pack is None:
            raise ApiError(404, "unknown_pack", f"unknown pack {pack_id!r}")
        return pack

    def entry(self, session_id: str) -> SessionEntry:
        with self.lock:
            entry = self.sessions.get(session_id)
        if entry is None:
            raise ApiError(404, "unknown_session", f"unknown session {session_id!r}")
        return entry

    def add(self, session: Session, pack_id: str) -> tuple[str, SessionEntry]:
        with self.lock:
            if len(self.sessions) >= self.session_cap:
                evicted = next(
                    (sid for sid, e in self.sessions.items() if e.session.finished), None
                )
                if evicted is None:
                    raise ApiError(
                        503, "session_capacity",
                        f"session cap of {self.session_cap} reached and none are finished",
                    )
                del self.sessions[evicted]
            session_id = secrets.token_urlsafe(16)
            while session_id in self.sessions:  # pragma: no cover - 128-bit collision
                session_id = secrets.token_urlsafe(16)
            session.id = session_id
            entry = SessionEntry(session=session, pack_id=pack_id, created_at=time.time())
            self.sessions[session_id] = entry
            return session_id, entry

    def snapshot(self, directory: str | Path) -> list[Path]:
        """Dump every session's log (and report, if finished) as canonical
        JSON, one file per session."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        with self.lock:
            entries = list(self.sessions.items())
        for session_id, entry in entries:
            with entry.lock:
                session = entry.session
                payload = {
                    "session_id": session_id,
                    "pack_id": entry.pack_id,
                    "mode": session.mode.value,
                    "tick": session.world.tick,
                    "log": [e.as_json() for e in session.action_log],
                }
                if session.finished:
                    payload["report"] = finish_session(session).as_json()
            path = directory / f"{session_id}.json"
            path.write_bytes(canon.dumps_bytes(payload))
            written.append(path)
        return written


def _state_view(session_id: str, session: Session) -> dict:
    pack = session.pack
    # per-entity card data for UIs: verbs afforded by the kind plus the
    # UseWith partners some rule trigger actually matches
    cards = [
        {
            "id": entity_id,
            "affordances": sorted(
                a.value
                for a in pack.kinds.resolve(session.world.entities[entity_id].kind).affordances
            ),
            "use_with_partners": use_with_partners(session.world, pack, entity_id),
        }
        for entity_id in sorted(session.world.entities)
    ]
    view: dict = {
        "session_id": session_id,
        "mode": session.mode.value,
        "tick": session.world.tick,
        "focus": session.focus,
        "zones": [{"id": z.id, "label": z.label} for z in session.world.zones],
        "entities": session.world.entities_json(),
        "cards": cards,
        "matched_steps": list(session.matched_order),
        "completed": session.completed,
        "finished": session.finished,
    }
    if session.procedure is not None:
        view["procedure"] = {
            "id": session.procedure.id,
            "title": session.procedure.title,
            "steps": [{"id": s.id, "hint": s.hint_text} for s in session.procedure.steps],
        }
    if session.mode is Mode.INSTRUCTION:
        suggestion = suggest_next(session) if not session.finished else None
        view["suggestion"] = suggestion.as_json() if suggestion else None
    return view


def _session_events(session: Session, outcome_events: list, tick: int,
                    action: Action, state_delta: list, newly_matched: list[str],
                    completed: bool) -> list[dict]:
    events = [
        {
            "tick": tick,
            "type": "action",
            "payload": {
                "action": action.as_json(),
                "state_delta": [d.as_json() for d in state_delta],
            },
        }
    ]
    for event in outcome_events:
        events.append({"tick": tick, "type": "rule_event", "payload": event.as_json()})
    for step_id in newly_matched:
        events.append({"tick": tick, "type": "step_matched", "payload": {"step_id": step_id}})
    if completed:
        events.append({"tick": tick, "type": "completed", "payload": {}})
    return events


def _parse_action_body(body: dict) -> Action:
    verb_name = body.get("verb")
    try:
        verb = Affordance(verb_name)
    except ValueError:
        raise ApiError(422, "invalid_verb", f"unknown verb {verb_name!r}") from None
    subject = body.get("subject")
    if not isinstance(subject, str) or not subject:
        raise ApiError(422, "invalid_body", "subject must be a non-empty string")
    partner = body.get("partner")
    if partner is not None and not isinstance(partner, str):
        raise ApiError(422, "invalid_body", "partner must be a string")
    params = body.get("params") or {}
    if not isinstance(params, dict):
        raise ApiError(422, "invalid_body", "params must be an object")
    unknown = set(params) - {"direction", "amount", "target_zone"}
    if unknown:
        raise ApiError(422, "invalid_body", f"unknown params: {sorted(unknown)}")
    unknown_keys = set(body) - {"verb", "subject", "partner", "params"}
    if unknown_keys:
        raise ApiError(422, "invalid_body", f"unknown keys: {sorted(unknown_keys)}")
    return Action(
        verb=verb,
        subject=subject,
        partner=partner,
        direction=params.get("direction"),
        amount=params.get("amount"),
        target_zone=params.get("target_zone"),
    )


def create_app(content_dir: str | Path | None = None,
               session_cap: int = DEFAULT_SESSION_CAP,
               snapshot_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="vlab", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = SessionStore(content_dir, session_cap)
    app.state.store = store

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    @app.exception_handler(RequestValidationError)
    async def _invalid_body(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422, content={"code": "invalid_body", "message": str(exc.errors())}
        )

    @app.get("/packs")
    def list_packs() -> list[dict]:
        with store.lock:
            packs = sorted(store.packs.values(), key=lambda p: p.pack_id)
        return [
            {
                "pack_id": pack.pack_id,
                "version": pack.version,
                "procedures": [{"id": p.id, "title": p.title} for p in pack.procedures],
            }
            for pack in packs
        ]

    @app.post("/packs/reload")
    def reload_packs() -> dict:
        return {"packs": store.load_packs()}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict = Body(...)) -> dict:
        unknown = set(body) - {"pack_id", "mode", "procedure_id", "scene_override"}
        if unknown:
            raise ApiError(422, "invalid_body", f"unknown keys: {sorted(unknown)}")
        pack_id = body.get("pack_id")
        if not isinstance(pack_id, str) or not pack_id:
            raise ApiError(422, "invalid_body", "pack_id must be a non-empty string")
        pack = store.pack(pack_id)
        try:
            mode = Mode(body.get("mode"))
        except ValueError:
            raise ApiError(422, "invalid_mode", f"unknown mode {body.get('mode')!r}") from None
        scene: SceneFile = pack.default_scene
        if body.get("scene_override") is not None:
            override = body["scene_override"]
            if not isinstance(override, dict):
                raise ApiError(422, "invalid_body", "scene_override must be a scene document")
            try:
                scene = parse_scene(canon.dumps_line(override))
            except VlabError as exc:
                raise ApiError(422, exc.code, exc.message) from None
        try:
            session = start_session(scene, pack, mode, body.get("procedure_id"))
        except UnknownProcedureError as exc:
            raise ApiError(404, exc.code, exc.message) from None
        except ModeArgMismatchError as exc:
            raise ApiError(422, exc.code, exc.message) from None
        except ValidationError as exc:
            raise ApiError(422, exc.code, exc.message) from None
        session_id, entry = store.add(session, pack.pack_id)
        with entry.lock:
            return _state_view(session_id, session)

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str) -> dict:
        entry = store.entry(session_id)
        with entry.lock:
            return _state_view(session_id, entry.session)

    @app.post("/sessions/{session_id}/actions")
    def post_action(session_id: str, body: dict = Body(...)) -> dict:
        entry = store.entry(session_id)
        action = _parse_action_body(body)
        with entry.lock:
            session = entry.session
            if session.finished:
                raise ApiError(409, "session_finished", "session is already finished")
            outcome = submit_action(session, action)
            response = outcome.as_json()
            if session.mode is Mode.INSTRUCTION:
                suggestion = suggest_next(session)
                response["suggestion"] = suggestion.as_json() if suggestion else None
            response["tick"] = session.world.tick
            if outcome.accepted:
                entry.push_events(
                    _session_events(
                        session,
                        outcome.result.events,
                        session.world.tick,
                        action,
                        outcome.result.state_delta,
                        outcome.newly_matched,
                        outcome.completed,
                    )
                )
        return response

    @app.post("/sessions/{session_id}/finish")
    def post_finish(session_id: str) -> Response:
        entry = store.entry(session_id)
        with entry.lock:
            session = entry.session
            if entry.report_bytes is None:
                report = finish_session(session)
                entry.report_bytes = canon.dumps_bytes(report.as_json())
                entry.push_events(
                    [{"tick": session.world.tick, "type": "finished", "payload": {}}]
                )
            body = entry.report_bytes
        return Response(content=body, media_type="application/json")

    @app.get("/sessions/{session_id}/report")
    def get_report(session_id: str) -> Response:
        entry = store.entry(session_id)
        with entry.lock:
            if entry.report_bytes is None:
                raise ApiError(409, "not_finished", "session has not been finished")
            body = entry.report_bytes
        return Response(content=body, media_type="application/json")

    @app.get("/sessions/{session_id}/events")
    def get_events(session_id: str) -> StreamingResponse:
        entry = store.entry(session_id)

        def stream():
            cursor = 0
            while True:
                with entry.changed:
                    pending = entry.events[cursor:]
                    finished = entry.session.finished
                    if not pending and not finished:
                        entry.changed.wait(timeout=0.25)
                        pending = entry.events[cursor:]
                        finished = entry.session.finished
                for event in pending:
                    yield canon.dumps_line(event) + "\n"
                cursor += len(pending)
                if finished and cursor >= len(entry.events):
                    return

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    @app.get("/sessions/{session_id}/log")
    def get_log(session_id: str) -> Response:
        entry = store.entry(session_id)
        with entry.lock:
            lines = [canon.dumps_line(e.as_json()) for e in entry.session.action_log]
        body = ("\n".join(lines) + "\n") if lines else ""
        return Response(content=body, media_type="application/x-ndjson")

    if snapshot_dir is not None:
        @app.on_event("shutdown")
        def _snapshot() -> None:  # pragma: no cover - exercised via CLI
            store.snapshot(snapshot_dir)

    return app


def serve(content_dir: str | Path | None, listen: str = DEFAULT_LISTEN,
          session_cap: int = DEFAULT_SESSION_CAP,
          snapshot_dir: str | Path | None = None) -> None:
    """Run the service with uvicorn (blocking)."""
    import uvicorn

    host, _, port = listen.partition(":")
    app = create_app(content_dir, session_cap, snapshot_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 7180), log_level="warning")
