"""Authoritative websocket service hosting one shared session.

Connection I/O runs concurrently, but every session mutation happens in a
synchronous `SessionHost` call on the event loop thread, so the single-writer
contract holds without locks. Outbound frames go through a per-connection
queue drained by a writer task; the queue preserves order, which keeps
reliable events ahead of the close that may follow them.
"""

from __future__ import annotations

import asyncio
import itertools
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

from websockets.asyncio.server import serve as ws_serve
from websockets.exceptions import ConnectionClosed

from . import protocol as pr
from .host import SessionHost
from .scene import Scene, SceneError, load_scene
from .session import SessionConfig

__all__ = [
    "BindError",
    "SceneError",
    "ServerConfig",
    "ServerError",
    "SessionServer",
]


class ServerError(Exception):
    pass


class BindError(ServerError):
    """The listen address could not be claimed."""


@dataclass(frozen=True)
class ServerConfig:
    scene_path: str | Path
    port: int = 8765
    host: str = "127.0.0.1"
    tick_hz: float = 60.0
    pose_fanout_hz: float = 20.0
    angular_speed: float = math.radians(90.0)
    decoupling_enabled: bool = True
    snapshot_path: str | Path | None = None

    def __post_init__(self) -> None:
        if not self.pose_fanout_hz > 0.0:
            raise ValueError(
                f"pose_fanout_hz must be positive, got {self.pose_fanout_hz}"
            )
        if self.tick_hz < self.pose_fanout_hz:
            raise ValueError(
                "tick_hz must be at least pose_fanout_hz, got "
                f"{self.tick_hz} < {self.pose_fanout_hz}"
            )
        if not 0 <= self.port <= 65535:
            raise ValueError(f"port must fit in 16 bits, got {self.port}")

    def session_config(self) -> SessionConfig:
        return SessionConfig(
            angular_speed=self.angular_speed,
            decoupling_enabled=self.decoupling_enabled,
            pose_fanout_hz=self.pose_fanout_hz,
        )


def _load_scene_file(path: str | Path) -> Scene:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SceneError(f"cannot read scene {path}: {exc}") from exc
    return load_scene(raw)


@dataclass
class _ConnIO:
    queue: asyncio.Queue = field(default_factory=asyncio.Queue)

    def send(self, frame: str, droppable: bool) -> None:
        self.queue.put_nowait(frame)

    def close(self) -> None:
        self.queue.put_nowait(None)


class SessionServer:
    """One listening socket, one session, one authoritative clock.

    `serve()` runs until `shutdown()` is called (idempotent, safe from a
    signal handler). On the way out every client gets user_left notices for
    all users, sockets close, and the final snapshot is written to
    `config.snapshot_path` when set.
    """

    def __init__(self, config: ServerConfig, *, log_stream: IO[str] | None = None):
        self.config = config
        self._log = log_stream if log_stream is not None else sys.stdout
        scene = _load_scene_file(config.scene_path)
        self.host = SessionHost(
            scene, config.session_config(), event_sink=self._log_event
        )
        self._ids = itertools.count(1)
        self._stopping = asyncio.Event()
        self.started = asyncio.Event()
        self.port: int | None = None
        self._t0 = 0.0
        self.final_snapshot: dict | None = None

    # -- logging -------------------------------------------------------------

    def _log_event(self, kind: str, t: float, payload: dict) -> None:
        line = pr.dumps_canonical({"kind": kind, "t": t, **payload})
        self._log.write(line + "\n")
        self._log.flush()

    # -- lifecycle -----------------------------------------------------------

    def shutdown(self) -> None:
        self._stopping.set()

    @property
    def now(self) -> float:
        return asyncio.get_running_loop().time() - self._t0

    async def serve(self) -> dict:
        loop = asyncio.get_running_loop()
        try:
            server = await ws_serve(self._handler, self.config.host, self.config.port)
        except OSError as exc:
            raise BindError(
                f"cannot bind {self.config.host}:{self.config.port}: {exc}"
            ) from exc
        self._t0 = loop.time()
        self.port = server.sockets[0].getsockname()[1]
        self.started.set()
        ticker = asyncio.ensure_future(self._tick_loop())
        try:
            await self._stopping.wait()
        finally:
            self._stopping.set()
            ticker.cancel()
            try:
                await ticker
            except asyncio.CancelledError:
                pass
            snapshot = self.host.shutdown()
            self.final_snapshot = snapshot
            if self.config.snapshot_path is not None:
                Path(self.config.snapshot_path).write_text(
                    pr.dumps_canonical(snapshot) + "\n", encoding="utf-8"
                )
            server.close()
            await server.wait_closed()
        return snapshot

    async def _tick_loop(self) -> None:
        interval = 1.0 / self.config.tick_hz
        per_fanout = max(1, round(self.config.tick_hz / self.config.pose_fanout_hz))
        loop = asyncio.get_running_loop()
        k = 0
        while not self._stopping.is_set():
            k += 1
            delay = self._t0 + k * interval - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            self.host.tick(loop.time() - self._t0)
            if k % per_fanout == 0:
                self.host.fanout()

    # -- per-connection ------------------------------------------------------

    async def _handler(self, ws) -> None:
        conn_id = next(self._ids)
        io = _ConnIO()
        writer = asyncio.ensure_future(self._drain(ws, io.queue))
        self.host.connect(conn_id, io.send, io.close)
        try:
            async for raw in ws:
                if isinstance(raw, bytes):
                    raw = raw.decode("utf-8", errors="replace")
                self.host.frame_received(conn_id, raw)
        except ConnectionClosed:
            pass
        finally:
            self.host.disconnect(conn_id)
            io.close()
            await writer

    @staticmethod
    async def _drain(ws, queue: asyncio.Queue) -> None:
        while True:
            frame = await queue.get()
            if frame is None:
                await ws.close()
                return
            try:
                await ws.send(frame)
            except ConnectionClosed:
                return
