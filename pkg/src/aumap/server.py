"""Newline-delimited JSON projection service over TCP or stdin/stdout.

Request:  ``{"id": "a", "x": [1.0, 0.0]}``
Response: ``{"id": "a", "u": [0.5, 0], "latency_us": 42}``
Error:    ``{"id": "a", "error": {"code": "dimension_mismatch", "message": "..."}}``

Every input line yields exactly one output line, in order. Unknown request
fields are ignored. Error codes: parse_error, dimension_mismatch,
non_finite_value, internal.
"""

from __future__ import annotations

import asyncio
import json
import logging
import math
import signal
import sys
import time

import numpy as np

from .core import DimensionMismatch, NonFiniteValue
from .projector import Projector

log = logging.getLogger(__name__)

MAX_ID_BYTES = 64
ERROR_CODES = ("parse_error", "dimension_mismatch", "non_finite_value", "internal")


class BindFailure(OSError):
    code = "bind_failure"


class _RequestError(Exception):
    def __init__(self, code, message, req_id=""):
        super().__init__(message)
        self.code = code
        self.req_id = req_id


def _num(v: float) -> str:
    return "%.17g" % v


def _error(req_id: str, code: str, message: str) -> bytes:
    body = {"id": req_id, "error": {"code": code, "message": message}}
    return (json.dumps(body) + "\n").encode("utf-8")


def _success(req_id: str, u, latency_us: int) -> bytes:
    coords = ",".join(_num(v) for v in u)
    return (
        '{"id":' + json.dumps(req_id)
        + ',"u":[' + coords + '],"latency_us":' + str(int(latency_us)) + "}\n"
    ).encode("utf-8")


def _parse(line: bytes, dim: int):
    try:
        text = line.decode("utf-8")
    except UnicodeDecodeError:
        raise _RequestError("parse_error", "request is not valid UTF-8") from None
    try:
        obj = json.loads(text)
    except (ValueError, RecursionError):
        raise _RequestError("parse_error", "request is not a JSON object") from None
    if not isinstance(obj, dict):
        raise _RequestError("parse_error", "request is not a JSON object")
    req_id = obj.get("id")
    if not isinstance(req_id, str) or not req_id:
        raise _RequestError("parse_error", "'id' must be a non-empty string")
    try:
        id_bytes = len(req_id.encode("utf-8"))
    except UnicodeEncodeError:
        raise _RequestError("parse_error", "'id' is not valid Unicode") from None
    if id_bytes > MAX_ID_BYTES:
        raise _RequestError("parse_error", f"'id' exceeds {MAX_ID_BYTES} bytes")
    x = obj.get("x")
    if not isinstance(x, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in x
    ):
        raise _RequestError("parse_error", "'x' must be an array of numbers", req_id)
    if len(x) != dim:
        raise _RequestError("dimension_mismatch", f"'x' has {len(x)} values, expected {dim}", req_id)
    try:
        arr = np.array(x, dtype=np.float64)
    except OverflowError:
        raise _RequestError("non_finite_value", "'x' contains a value outside float64 range", req_id) from None
    if not np.all(np.isfinite(arr)):
        raise _RequestError("non_finite_value", "'x' contains NaN or infinity", req_id)
    return req_id, arr


def handle_request(projector: Projector, line: bytes) -> bytes:
    """Answer one request line. Never raises; failures become error responses."""
    req_id = ""
    try:
        req_id, x = _parse(line.rstrip(b"\r\n"), projector.dim)
        start = time.perf_counter_ns()
        u = projector.project_point(x)
        latency_us = (time.perf_counter_ns() - start) // 1000
        if not all(math.isfinite(v) for v in u):
            raise _RequestError("internal", "projection produced a non-finite value", req_id)
        return _success(req_id, u, latency_us)
    except _RequestError as exc:
        return _error(exc.req_id, exc.code, str(exc))
    except DimensionMismatch as exc:
        return _error(req_id, "dimension_mismatch", str(exc))
    except NonFiniteValue as exc:
        return _error(req_id, "non_finite_value", str(exc))
    except Exception as exc:  # noqa: BLE001 - the wire contract forbids raising
        log.exception("internal error handling request")
        return _error(req_id, "internal", f"{type(exc).__name__}: {exc}")


# --- transports --------------------------------------------------------------


def serve_stdio(projector: Projector, stdin=None, stdout=None) -> int:
    """Answer requests from ``stdin`` until EOF; returns the line count."""
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    count = 0
    for line in stdin:
        stdout.write(handle_request(projector, line))
        stdout.flush()
        count += 1
    return count


# A single request line may not exceed this many bytes.
LINE_LIMIT = 1 << 24


class ProjectionServer:
    """Asyncio TCP server; one task per connection, responses in request order."""

    def __init__(self, projector: Projector, host: str = "127.0.0.1", port: int = 0):
        self.projector = projector
        self.host = host
        self.port = port
        self._server: asyncio.base_events.Server | None = None
        self._connections: set[asyncio.Task] = set()
        self._busy: set[asyncio.Task] = set()
        self._stopping = False

    async def start(self) -> tuple[str, int]:
        try:
            self._server = await asyncio.start_server(
                self._handle, self.host, self.port, limit=LINE_LIMIT
            )
        except OSError as exc:
            raise BindFailure(exc.errno, f"cannot listen on {self.host}:{self.port}: {exc.strerror}") from exc
        host, port = self._server.sockets[0].getsockname()[:2]
        self.port = port
        return host, port

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        task = asyncio.current_task()
        self._connections.add(task)
        loop = asyncio.get_running_loop()
        try:
            while True:
                try:
                    line = await reader.readuntil(b"\n")
                except asyncio.IncompleteReadError as exc:
                    line = exc.partial
                    if not line:
                        break
                except asyncio.LimitOverrunError as exc:
                    # drain the oversized line and answer it in-band
                    await reader.readexactly(exc.consumed)
                    rest = await _skip_line(reader)
                    writer.write(_error("", "parse_error", "request line too long"))
                    await writer.drain()
                    if not rest:
                        break
                    continue
                self._busy.add(task)
                try:
                    response = await loop.run_in_executor(None, handle_request, self.projector, line)
                    writer.write(response)
                    await writer.drain()
                finally:
                    self._busy.discard(task)
                if self._stopping:
                    break
        except (ConnectionResetError, BrokenPipeError):
            pass
        finally:
            self._connections.discard(task)
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass

    async def serve_forever(self):
        async with self._server:
            await self._server.serve_forever()

    async def shutdown(self, timeout: float = 5.0):
        """Stop accepting; connections finish their current request, then close."""
        self._stopping = True
        if self._server is not None:
            self._server.close()
        for task in self._connections - self._busy:
            task.cancel()
        if self._connections:
            _, pending = await asyncio.wait(set(self._connections), timeout=timeout)
            for task in pending:
                task.cancel()
        if self._server is not None:
            await self._server.wait_closed()


async def _skip_line(reader: asyncio.StreamReader) -> bool:
    while True:
        try:
            await reader.readuntil(b"\n")
            return True
        except asyncio.LimitOverrunError as exc:
            await reader.readexactly(exc.consumed)
        except asyncio.IncompleteReadError:
            return False


async def _run_tcp(projector, host, port, ready=None):
    server = ProjectionServer(projector, host, port)
    bound = await server.start()
    log.info("listening on %s:%d", *bound)
    if ready:
        ready(bound)
    stop = asyncio.Event()
    loop = asyncio.get_running_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        try:
            loop.add_signal_handler(sig, stop.set)
        except (NotImplementedError, RuntimeError):
            pass
    serving = asyncio.ensure_future(server.serve_forever())
    await stop.wait()
    # close the listener before awaiting in-flight connections
    await server.shutdown()
    serving.cancel()
    try:
        await serving
    except asyncio.CancelledError:
        pass


def serve(projector: Projector, host: str | None = "127.0.0.1", port: int = 0, stdio: bool = False, ready=None):
    """Run until interrupted. ``stdio=True`` reads stdin instead of listening."""
    if stdio:
        return serve_stdio(projector)
    asyncio.run(_run_tcp(projector, host, port, ready))
