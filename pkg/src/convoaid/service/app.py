"""FastAPI application: WebSocket wire protocol plus REST replay/report.

One session per controlling connection; observers may reattach by session id
to rebuild their view from the snapshot. Unknown or malformed client
messages are answered with an error message, never with a disconnect.
"""

from __future__ import annotations

import asyncio
import contextlib
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import ValidationError as PydanticValidationError

from .. import metrics
from ..config import EngineConfig
from ..engine import run_replay_session
from ..session import EventKind, event_to_json, read_event_log
from ..transcript import parse_transcript
from ..types import ConvoaidError, FeatureConfig, ParseError
from .models import (
    ClientMessage,
    GazeFocusPayload,
    HelloPayload,
    ReplayRequest,
    ReplayResponse,
    ReportRequest,
    ReportResponse,
    SetConfigPayload,
    SnapshotResponse,
    UtterancePayload,
)
from .sessions import ClientHandle, LiveSession, SessionManager

_SIMPLE_EVENTS = {
    "gaze_trigger": EventKind.GAZE_TRIGGER,
    "gaze_unfocus": EventKind.GAZE_UNFOCUS,
    "trigger_poke": EventKind.TRIGGER_POKED,
    "confetti_tap": EventKind.CONFETTI_TAP,
    "end": EventKind.END_SESSION,
}


def create_app(
    cfg: EngineConfig | None = None,
    backend_kind: str = "mock",
    log_dir: str | Path | None = None,
) -> FastAPI:
    cfg = cfg or EngineConfig()
    manager = SessionManager(
        cfg, backend_kind, Path(log_dir) if log_dir is not None else None
    )

    @contextlib.asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        await manager.close_all()

    app = FastAPI(title="convoaid", version="0.1.0", lifespan=lifespan)
    app.state.manager = manager

    @app.get("/healthz")
    async def healthz() -> dict:
        return {"status": "ok", "sessions": len(manager.sessions)}

    @app.get("/sessions/{sid}", response_model=SnapshotResponse)
    async def session_snapshot(sid: str) -> SnapshotResponse:
        session = manager.get(sid)
        if session is None:
            raise HTTPException(status_code=404, detail="no such session")
        return SnapshotResponse(session=sid, seq=session.seq_out, snapshot=session.snapshot())

    @app.post("/replay", response_model=ReplayResponse)
    async def replay(req: ReplayRequest) -> ReplayResponse:
        try:
            transcript = parse_transcript(req.transcript)
        except ParseError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        run_cfg = (
            EngineConfig.from_dict(req.config) if req.config is not None else cfg
        ).with_seed(req.seed)
        result = await asyncio.to_thread(
            run_replay_session, transcript, run_cfg, speed=req.speed
        )
        report = metrics.compute_report(
            result.events, transcript, req.pause_threshold_ms, run_cfg
        )
        return ReplayResponse(
            events_ndjson="".join(event_to_json(e) + "\n" for e in result.events),
            report=report.to_dict(),
            feedback=result.feedback.to_dict(),
        )

    @app.post("/report", response_model=ReportResponse)
    async def report(req: ReportRequest) -> ReportResponse:
        run_cfg = EngineConfig.from_dict(req.config) if req.config is not None else cfg
        try:
            events = read_event_log(req.events_ndjson)
            rep = metrics.compute_report(
                events, None, req.pause_threshold_ms, run_cfg
            )
        except (ConvoaidError, ValueError, KeyError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return ReportResponse(report=rep.to_dict())

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        client = ClientHandle()
        session: Optional[LiveSession] = None

        async def writer() -> None:
            # a client that overflowed its outbox is cut loose once the
            # backlog drains, rather than ever stalling the session
            while True:
                try:
                    message = await asyncio.wait_for(client.outbox.get(), timeout=0.5)
                except asyncio.TimeoutError:
                    if client.dropped:
                        await ws.close(code=1013)
                        return
                    continue
                await ws.send_json(message)

        writer_task = asyncio.create_task(writer())
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = ClientMessage.model_validate_json(text)
                except PydanticValidationError as exc:
                    client.push(_err("", "bad_message", _first_error(exc)))
                    continue

                if session is None:
                    if msg.type != "hello":
                        client.push(_err("", "expected_hello", "send hello first"))
                        continue
                    try:
                        hello = HelloPayload.model_validate(msg.payload)
                    except PydanticValidationError as exc:
                        client.push(_err("", "bad_payload", _first_error(exc)))
                        continue
                    if hello.session:
                        existing = manager.get(hello.session)
                        if existing is None:
                            client.push(_err("", "no_such_session", hello.session))
                            continue
                        existing.attach(client, as_controller=False)
                        session = existing
                    else:
                        session = manager.create(topic=hello.topic)
                        if not session.attach(client, as_controller=True):
                            client.push(_err(session.sid, "busy", "session has a controller"))
                            continue
                    client.push(
                        {
                            "type": "session_created",
                            "session": session.sid,
                            "seq": session.seq_out,
                            "payload": session.snapshot(),
                        }
                    )
                    continue

                _handle_message(session, client, msg)
        except WebSocketDisconnect:
            pass
        finally:
            writer_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await writer_task
            if session is not None:
                session.detach(client)

    return app


def _first_error(exc: PydanticValidationError) -> str:
    err = exc.errors()[0]
    loc = ".".join(str(p) for p in err.get("loc", ()))
    return f"{loc}: {err.get('msg', 'invalid')}"


def _err(sid: str, kind: str, detail: str) -> dict:
    return {"type": "error", "session": sid, "payload": {"error": kind, "detail": detail}}


def _handle_message(session: LiveSession, client: ClientHandle, msg: ClientMessage) -> None:
    """Map one protocol message to a session event (or a service-side action)."""
    if msg.type == "hello":
        client.push(_err(session.sid, "already_attached", "session already created"))
    elif msg.type == "set_config":
        try:
            payload = SetConfigPayload.model_validate(msg.payload)
        except PydanticValidationError as exc:
            client.push(_err(session.sid, "bad_payload", _first_error(exc)))
            return
        if session.state.phase.value != "function_selection":
            client.push(_err(session.sid, "illegal_phase", "config is frozen after confirm"))
            return
        session.draft_config = FeatureConfig.from_dict(
            {**session.draft_config.to_dict(), **payload.config}
        )
        session.broadcast("config_draft", {"config": session.draft_config.to_dict()})
    elif msg.type == "confirm":
        session.enqueue(
            EventKind.CONFIRM_FUNCTIONS,
            {"config": session.draft_config.to_dict()},
            client,
        )
    elif msg.type == "utterance":
        try:
            payload = UtterancePayload.model_validate(msg.payload)
        except PydanticValidationError as exc:
            client.push(_err(session.sid, "bad_payload", _first_error(exc)))
            return
        if session.controller is not None and client is not session.controller:
            client.push(
                _err(session.sid, "not_controller", "one utterance source per session")
            )
            return
        utt = session.next_utterance(payload.speaker, payload.text)
        session.enqueue(EventKind.UTTERANCE_ARRIVED, {"utterance": utt.to_dict()}, client)
    elif msg.type == "gaze_focus":
        try:
            payload = GazeFocusPayload.model_validate(msg.payload)
        except PydanticValidationError as exc:
            client.push(_err(session.sid, "bad_payload", _first_error(exc)))
            return
        session.enqueue(EventKind.GAZE_FOCUS, {"panel": payload.panel}, client)
    elif msg.type in _SIMPLE_EVENTS:
        session.enqueue(_SIMPLE_EVENTS[msg.type], {}, client)
    else:
        client.push(_err(session.sid, "unknown_type", msg.type))
