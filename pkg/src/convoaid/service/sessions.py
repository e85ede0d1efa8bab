"""Live session runtime.

One single-writer asyncio task per session applies events in order; producers
(socket clients, the ticker, backend completions) only enqueue. Clients get
broadcasts through bounded outboxes and are dropped if they fall too far
behind rather than stalling the session.
"""

from __future__ import annotations

import asyncio
import json
import secrets
from dataclasses import replace
from pathlib import Path
from typing import Optional

from ..backend import HttpBackend, mock_latency_ms
from ..config import EngineConfig
from ..engine import mock_reply_text
from ..session import (
    CancelRequest,
    Emit,
    EventKind,
    IssueRequest,
    SessionEvent,
    apply_event,
    build_feedback_report,
    event_to_json,
    initial_state,
    snapshot_view,
)
from ..types import ConvoaidError, FeatureConfig, SessionPhase, Speaker, Utterance

OUTBOX_LIMIT = 256


class ClientHandle:
    """One connected client: a bounded outbox drained by the transport."""

    def __init__(self) -> None:
        self.outbox: asyncio.Queue[dict] = asyncio.Queue(maxsize=OUTBOX_LIMIT)
        self.dropped = False

    def push(self, message: dict) -> None:
        if self.dropped:
            return
        try:
            self.outbox.put_nowait(message)
        except asyncio.QueueFull:
            self.dropped = True


class LiveSession:
    def __init__(
        self,
        sid: str,
        cfg: EngineConfig,
        backend_kind: str = "mock",
        topic: str = "",
        log_dir: Optional[Path] = None,
    ) -> None:
        self.sid = sid
        self.cfg = cfg
        self.backend_kind = backend_kind
        self.topic = topic
        self.log_dir = log_dir
        self.state = initial_state()
        self.events: list[SessionEvent] = []
        self.draft_config: FeatureConfig = cfg.features
        self.seq_out = 0
        self.clients: list[ClientHandle] = []
        self.controller: Optional[ClientHandle] = None  # the one utterance source
        self.utterance_counter = 0
        self.closed = False
        self._queue: asyncio.Queue[tuple[EventKind, dict, int, Optional[ClientHandle]]] = (
            asyncio.Queue()
        )
        self._t0 = asyncio.get_event_loop().time()
        self._tasks: set[asyncio.Task] = set()
        self._log_fh = None
        if log_dir is not None:
            log_dir.mkdir(parents=True, exist_ok=True)
            self._log_fh = open(log_dir / f"{sid}.events.ndjson", "w", encoding="utf-8")
        self._http = (
            HttpBackend(timeout_ms=cfg.backend_timeout_ms) if backend_kind == "http" else None
        )
        self._worker = asyncio.create_task(self._run())
        self._ticker = asyncio.create_task(self._tick_loop())

    # -- producers ----------------------------------------------------------

    def now_ms(self) -> int:
        return int((asyncio.get_event_loop().time() - self._t0) * 1000)

    def enqueue(self, kind: EventKind, payload: dict, client: Optional[ClientHandle] = None) -> None:
        if self.closed:
            return
        self._queue.put_nowait((kind, payload, self.now_ms(), client))

    def next_utterance(self, speaker: str, text: str) -> Utterance:
        self.utterance_counter += 1
        at = self.now_ms()
        return Utterance(
            id=self.utterance_counter,
            t_start_ms=at,
            t_end_ms=at,
            speaker=Speaker(speaker),
            text=text,
        )

    async def _tick_loop(self) -> None:
        try:
            while not self.closed:
                await asyncio.sleep(self.cfg.tick_ms / 1000.0)
                # ticks are idempotent clock pulses; coalesce under backlog
                if (
                    self.state.phase is SessionPhase.CONVERSATION
                    and self._queue.qsize() < 128
                ):
                    self.enqueue(EventKind.TICK, {})
        except asyncio.CancelledError:
            pass

    # -- the single writer ---------------------------------------------------

    async def _run(self) -> None:
        try:
            while True:
                kind, payload, at_ms, client = await self._queue.get()
                try:
                    self._apply(kind, payload, at_ms, client)
                except Exception as exc:  # keep the session loop alive
                    if client is not None:
                        self.send_error(client, f"internal: {exc}")
        except asyncio.CancelledError:
            pass

    def _apply(
        self, kind: EventKind, payload: dict, at_ms: int, client: Optional[ClientHandle]
    ) -> None:
        at_ms = max(at_ms, self.state.clock_ms)
        event = SessionEvent(
            seq=self.state.last_seq + 1, at_ms=at_ms, kind=kind, payload=payload
        )
        try:
            new_state, effects = apply_event(self.state, event, self.cfg)
        except ConvoaidError as exc:
            if client is not None:
                self.send_error(client, str(exc))
            return
        self.state = new_state
        self.events.append(event)
        if self._log_fh is not None:
            self._log_fh.write(event_to_json(event) + "\n")
            self._log_fh.flush()
        for effect in effects:
            if isinstance(effect, Emit):
                self.broadcast(effect.type, effect.payload)
            elif isinstance(effect, IssueRequest):
                self._spawn_request(effect)
            elif isinstance(effect, CancelRequest):
                pass  # mock/http requests resolve or time out on their own

    def _spawn_request(self, effect: IssueRequest) -> None:
        request, meta = effect.request, effect.meta
        if self._http is not None:

            async def http_call() -> None:
                resp = await self._http.submit(request)
                payload = {
                    "request_id": resp.request_id,
                    "channel": request.channel.value,
                    "text": resp.text,
                    "latency_ms": resp.latency_ms,
                }
                if meta.utterance_id is not None:
                    payload["utterance_id"] = meta.utterance_id
                if resp.error:
                    payload["error"] = resp.error
                self.enqueue(EventKind.BACKEND_ARRIVED, payload)

            task = asyncio.create_task(http_call())
        else:
            text = mock_reply_text(meta, self.state, self.topic, self.cfg.seed)
            latency = mock_latency_ms(
                request.channel, request.request_id, self.cfg.mock_latencies, self.cfg.seed
            )

            async def mock_call() -> None:
                await asyncio.sleep(latency / 1000.0)
                payload = {
                    "request_id": request.request_id,
                    "channel": request.channel.value,
                    "text": text,
                    "latency_ms": latency,
                }
                if meta.utterance_id is not None:
                    payload["utterance_id"] = meta.utterance_id
                self.enqueue(EventKind.BACKEND_ARRIVED, payload)

            task = asyncio.create_task(mock_call())
        self._tasks.add(task)
        task.add_done_callback(self._tasks.discard)

    # -- fan-out --------------------------------------------------------------

    def broadcast(self, type_: str, payload: dict) -> None:
        self.seq_out += 1
        message = {"type": type_, "session": self.sid, "seq": self.seq_out, "payload": payload}
        if len(json.dumps(message)) > 64 * 1024:  # protocol cap; payloads are tiny
            return
        for client in list(self.clients):
            client.push(message)

    def send_error(self, client: ClientHandle, detail: str) -> None:
        kind = "illegal_phase" if "phase" in detail else "error"
        client.push(
            {
                "type": "error",
                "session": self.sid,
                "payload": {"error": kind, "detail": detail},
            }
        )

    def snapshot(self) -> dict:
        snap = snapshot_view(self.state, self.cfg)
        if self.state.phase is SessionPhase.FUNCTION_SELECTION:
            snap["config"] = self.draft_config.to_dict()
        return snap

    # -- lifecycle -------------------------------------------------------------

    def attach(self, client: ClientHandle, *, as_controller: bool) -> bool:
        if as_controller:
            if self.controller is not None and not self.controller.dropped:
                return False
            self.controller = client
        self.clients.append(client)
        return True

    def detach(self, client: ClientHandle) -> None:
        if client in self.clients:
            self.clients.remove(client)
        if self.controller is client:
            self.controller = None

    async def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        if self.state.phase is SessionPhase.CONVERSATION:
            self._apply(EventKind.END_SESSION, {}, self.now_ms(), None)
        for task in list(self._tasks):
            task.cancel()
        self._ticker.cancel()
        self._worker.cancel()
        if self._log_fh is not None:
            self._log_fh.flush()
            self._log_fh.close()
            self._log_fh = None
        if self.log_dir is not None and self.state.phase is SessionPhase.FEEDBACK:
            report = build_feedback_report(self.state)
            path = self.log_dir / f"{self.sid}.feedback.json"
            path.write_text(
                json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )


class SessionManager:
    def __init__(
        self, cfg: EngineConfig, backend_kind: str = "mock", log_dir: Optional[Path] = None
    ) -> None:
        self.cfg = cfg
        self.backend_kind = backend_kind
        self.log_dir = log_dir
        self.sessions: dict[str, LiveSession] = {}

    def create(self, topic: str = "") -> LiveSession:
        sid = secrets.token_hex(8)
        session = LiveSession(
            sid, self.cfg, self.backend_kind, topic=topic, log_dir=self.log_dir
        )
        self.sessions[sid] = session
        return session

    def get(self, sid: str) -> Optional[LiveSession]:
        return self.sessions.get(sid)

    async def close_all(self) -> None:
        for session in list(self.sessions.values()):
            await session.close()
