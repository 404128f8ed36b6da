"""Operator and developer command line.

Exit codes are uniform across subcommands: 0 success, 1 domain failure
(validation violations, hash mismatch, rejected expectations), 2
environment failure (I/O, syntax, bind errors). Data goes to stdout,
diagnostics to stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import canon
from .engine import Action, WorldState, legal_actions, state_hash
from .errors import (
    FormatSyntaxError,
    SchemaError,
    UnsupportedVersionError,
    VlabError,
)
from .formats import (
    ScenarioPack,
    parse_pack,
    parse_scene,
    scene_to_json,
    validate_pack,
    write_scene,
)
from .engine import init_world, validate_scene
from .mlenv import EnvConfig, LabEnv
from .model import SceneFile, Violation
from .session import (
    Mode,
    Session,
    finish_session,
    parse_log,
    replay_log,
    start_session,
    submit_action,
    suggest_next,
)

PARSE_ERRORS = (FormatSyntaxError, UnsupportedVersionError, SchemaError)


def _fail(code: int, message: str) -> None:
    click.echo(message, err=True)
    sys.exit(code)


def _read_file(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        _fail(2, f"cannot read {path}: {exc}")
        raise AssertionError  # unreachable


def _load_pack(path: str) -> ScenarioPack:
    data = _read_file(path)
    try:
        pack = parse_pack(data, validate=False)
    except PARSE_ERRORS as exc:
        _fail(2, f"{path}: {exc.message}")
        raise AssertionError
    violations = validate_pack(pack)
    if violations:
        for violation in violations:
            click.echo(f"{path}: {violation}", err=True)
        sys.exit(1)
    return pack


@click.group()
@click.version_option(package_name="vlab")
def main() -> None:
    """Headless virtual-laboratory scenario engine."""


@main.command()
@click.argument("path", type=click.Path())
@click.option("--pack", "pack_path", type=click.Path(), default=None,
              help="Pack to resolve a scene against.")
def validate(path: str, pack_path: str | None) -> None:
    """Validate a .vpack or .vscene file; violations go to stderr."""
    data = _read_file(path)
    violations: list[Violation] = []
    if path.endswith(".vpack"):
        try:
            pack = parse_pack(data, validate=False)
        except PARSE_ERRORS as exc:
            _fail(2, f"{path}: {exc.message}")
            raise AssertionError
        violations = validate_pack(pack)
    elif path.endswith(".vscene"):
        try:
            scene = parse_scene(data)
        except PARSE_ERRORS as exc:
            _fail(2, f"{path}: {exc.message}")
            raise AssertionError
        if pack_path is not None:
            violations = validate_scene(scene, _load_pack(pack_path))
        else:
            violations = [
                Violation(
                    "pack_ref",
                    f"cannot resolve pack {scene.pack_ref.pack_id!r} "
                    f"version {scene.pack_ref.version!r} (pass --pack)",
                )
            ]
    else:
        _fail(2, f"{path}: expected a .vpack or .vscene file")
    if violations:
        for violation in violations:
            click.echo(f"{path}: {violation}", err=True)
        sys.exit(1)
    click.echo(f"{path}: OK")


@main.command("export-scene")
@click.option("--pack", "pack_path", type=click.Path(), required=True)
@click.option("--session", "log_path", type=click.Path(), default=None,
              help="Replay this action log and export the resulting world.")
@click.option("-o", "--output", type=click.Path(), required=True)
def export_scene(pack_path: str, log_path: str | None, output: str) -> None:
    """Write a canonical .vscene: the pack default, or the world after
    replaying a session log."""
    pack = _load_pack(pack_path)
    scene = pack.default_scene
    if log_path is not None:
        records = _parse_log_file(log_path)
        try:
            world = replay_log(pack.default_scene, pack, records)
        except VlabError as exc:
            _fail(2, f"{log_path}: {exc.message}")
            raise AssertionError
        scene = SceneFile(
            format_version=scene.format_version,
            scene_id=f"{scene.scene_id}-export",
            pack_ref=scene.pack_ref,
            zones=list(world.zones),
            entities=[world.entities[eid].copy() for eid in sorted(world.entities)],
        )
    try:
        data = write_scene(scene)
    except VlabError as exc:
        _fail(1, exc.message)
        raise AssertionError
    try:
        Path(output).write_bytes(data)
    except OSError as exc:
        _fail(2, f"cannot write {output}: {exc}")
    click.echo(f"wrote {output}")


def _parse_log_file(path: str):
    data = _read_file(path)
    try:
        return parse_log(data)
    except VlabError as exc:
        _fail(2, f"{path}: {exc.message}")
        raise AssertionError


@main.command()
@click.option("--pack", "pack_path", type=click.Path(), required=True)
@click.option("--log", "log_path", type=click.Path(), required=True)
@click.option("--expect-hash", "expect_hash", default=None,
              help="Fail (exit 1) unless the final state hash matches.")
def replay(pack_path: str, log_path: str, expect_hash: str | None) -> None:
    """Deterministically replay an action log; prints the final state hash."""
    pack = _load_pack(pack_path)
    records = _parse_log_file(log_path)
    try:
        world = replay_log(pack.default_scene, pack, records)
    except VlabError as exc:
        _fail(2, f"{log_path}: {exc.message}")
        raise AssertionError
    final_hash = state_hash(world)
    click.echo(final_hash)
    if expect_hash is not None and final_hash != expect_hash:
        _fail(1, f"state hash mismatch: expected {expect_hash}, got {final_hash}")


# --- interactive terminal session -------------------------------------------

_USAGE = (
    "commands: press <id> | rotate <id> cw|ccw | pull <id> | zoom <id> | "
    "move <id> <zone> | use <a> <b> [amount] | finish"
)


def _parse_command(line: str) -> Action | str | None:
    """One terminal command -> Action, 'finish', or None for a no-op."""
    words = line.strip().split()
    if not words or words[0].startswith("#"):
        return None
    verb, args = words[0].lower(), words[1:]
    from .model import Affordance

    if verb == "finish":
        return "finish"
    if verb == "press" and len(args) == 1:
        return Action(verb=Affordance.PRESS, subject=args[0])
    if verb == "rotate" and len(args) == 2:
        return Action(verb=Affordance.ROTATE, subject=args[0], direction=args[1])
    if verb == "pull" and len(args) == 1:
        return Action(verb=Affordance.PULL, subject=args[0])
    if verb == "zoom" and len(args) == 1:
        return Action(verb=Affordance.ZOOM, subject=args[0])
    if verb == "move" and len(args) == 2:
        return Action(verb=Affordance.MOVE, subject=args[0], target_zone=args[1])
    if verb == "use" and len(args) in (2, 3):
        amount = None
        if len(args) == 3:
            try:
                amount = float(args[2])
            except ValueError:
                return "bad-amount"
        return Action(verb=Affordance.USE_WITH, subject=args[0], partner=args[1], amount=amount)
    return "unknown"


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _print_state(world: WorldState) -> None:
    for zone in world.zones:
        members = [e for e in sorted(world.entities) if world.entities[e].zone == zone.id]
        click.echo(f"[{zone.id}] {zone.label}")
        for entity_id in members:
            entity = world.entities[entity_id]
            state = " ".join(
                f"{k}={_fmt_value(v)}" for k, v in sorted(entity.state.items())
            )
            click.echo(f"  {entity_id} ({entity.kind}) {state}".rstrip())


def _print_report(session: Session) -> None:
    report = finish_session(session)
    click.echo("-- session report --")
    click.echo(f"mode: {report.mode.value}")
    click.echo(f"steps matched: {report.steps_matched}/{report.steps_total}")
    click.echo(f"actions: {report.action_count}")
    if report.evaluation is not None:
        click.echo(f"score: {report.evaluation.score}")


@main.command()
@click.option("--pack", "pack_path", type=click.Path(), required=True)
@click.option("--mode", "mode_name",
              type=click.Choice([m.value for m in Mode]), required=True)
@click.option("--procedure", "procedure_id", default=None)
@click.option("--script", "script_path", type=click.Path(), default=None,
              help="Replay commands from a file instead of stdin.")
def run(pack_path: str, mode_name: str, procedure_id: str | None,
        script_path: str | None) -> None:
    """Interactive terminal session (line commands; scriptable via --script)."""
    pack = _load_pack(pack_path)
    try:
        session = start_session(pack.default_scene, pack, Mode(mode_name), procedure_id)
    except VlabError as exc:
        _fail(1, exc.message)
        raise AssertionError

    if script_path is not None:
        lines = _read_file(script_path).decode("utf-8").splitlines()
    else:
        lines = (line.rstrip("\n") for line in sys.stdin)

    click.echo(f"session: {pack.pack_id} / {mode_name}"
               + (f" / {procedure_id}" if procedure_id else ""))
    _print_state(session.world)
    if session.mode is Mode.INSTRUCTION:
        suggestion = suggest_next(session)
        if suggestion:
            click.echo(f"hint: {suggestion.hint_text}")

    for line in lines:
        command = _parse_command(line)
        if command is None:
            continue
        if command == "finish":
            _print_report(session)
            return
        if isinstance(command, str):
            click.echo(_USAGE, err=True)
            continue
        outcome = submit_action(session, command)
        if outcome.accepted:
            matched = f" matched={','.join(outcome.newly_matched)}" if outcome.newly_matched else ""
            click.echo(f"ok: tick {session.world.tick}{matched}")
            for event in outcome.result.events:
                click.echo(f"[{event.severity}] {event.message}")
            if outcome.completed:
                click.echo("procedure completed")
        else:
            click.echo(f"rejected: {outcome.reason}")
        _print_state(session.world)
        if session.mode is Mode.INSTRUCTION:
            suggestion = suggest_next(session)
            if suggestion:
                click.echo(f"hint: {suggestion.hint_text}")
    _print_report(session)


@main.command()
@click.option("--content", "content_dir",
              type=click.Path(), envvar="VLAB_CONTENT_DIR", default=None,
              help="Directory of .vpack files (env: VLAB_CONTENT_DIR).")
@click.option("--listen", default="127.0.0.1:7180", show_default=True)
@click.option("--session-cap", default=256, show_default=True)
@click.option("--snapshot-dir", type=click.Path(), default=None,
              help="Dump session snapshots here on shutdown.")
def serve(content_dir: str | None, listen: str, session_cap: int,
          snapshot_dir: str | None) -> None:
    """Serve the HTTP session API."""
    from .service import serve as _serve

    try:
        _serve(content_dir, listen, session_cap, snapshot_dir)
    except OSError as exc:
        _fail(2, f"cannot bind {listen}: {exc}")


@main.command()
@click.option("--pack", "pack_path", type=click.Path(), required=True)
@click.option("--procedure", "procedure_id", required=True)
@click.option("--max-steps", default=100, show_default=True)
@click.option("--amount-grid", default="17.4,54.0,100.0,400.0", show_default=True,
              help="Comma-separated UseWith amounts for the action catalog.")
def env(pack_path: str, procedure_id: str, max_steps: int, amount_grid: str) -> None:
    """ML environment over stdio: one JSON request per line
    ({"op":"reset"} | {"op":"step","action":i}), one JSON reply per line."""
    pack = _load_pack(pack_path)
    try:
        grid = tuple(float(x) for x in amount_grid.split(","))
        config = EnvConfig(
            scene=pack.default_scene, pack=pack, procedure_id=procedure_id,
            max_steps=max_steps, amount_grid=grid,
        )
    except (ValueError, VlabError) as exc:
        _fail(1, str(exc))
        raise AssertionError
    lab = LabEnv(config)

    def reply(payload: dict) -> None:
        click.echo(canon.dumps_line(payload))

    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError:
            reply({"error": "bad_json", "message": "request is not valid JSON"})
            continue
        op = request.get("op") if isinstance(request, dict) else None
        if op == "reset":
            observation, catalog = lab.reset()
            reply({
                "observation": observation,
                "num_actions": len(catalog),
                "catalog": [a.as_json() for a in catalog],
            })
        elif op == "step":
            index = request.get("action")
            if not isinstance(index, int):
                reply({"error": "invalid_action", "message": "step needs an integer action"})
                continue
            try:
                observation, reward, done, info = lab.step(index)
            except VlabError as exc:
                reply({"error": exc.code, "message": exc.message})
                continue
            payload = {
                "observation": observation, "reward": reward, "done": done, "info": info,
            }
            if done:
                payload["report"] = lab.report().as_json()
            reply(payload)
        else:
            reply({"error": "unknown_op", "message": f"unknown op {op!r}"})


if __name__ == "__main__":  # pragma: no cover
    main()
