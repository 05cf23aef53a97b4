"""Real-time frame transport over a local byte-stream socket.

Wire format: on connect the server sends a two-byte handshake (protocol
version, payload format). Every frame then travels as a 4-byte little-endian
length ``n`` followed by ``n`` payload bytes.

Payload formats:

* ``FORMAT_PNG``: a PNG image; the capture timestamp rides in a ``tEXt`` chunk
  under the key ``t``.
* ``FORMAT_RAW``: ``<d`` timestamp, ``<H`` width, ``<H`` height, then
  row-major RGB bytes.
"""

from __future__ import annotations

import io
import logging
import socket
import struct
import threading
import time
from collections import deque
from typing import Callable, Iterable, Iterator

import numpy as np
from PIL import Image, PngImagePlugin

from .errors import Disconnected, EmptyPayload, Truncated
from .imaging import Frame

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
FORMAT_PNG = 0
FORMAT_RAW = 1
HEADER = struct.Struct("<I")
MAX_PAYLOAD = 1 << 30


# codec ----------------------------------------------------------------------

def encode_message(payload: bytes) -> bytes:
    if not payload:
        raise EmptyPayload("frame payload must not be empty")
    if len(payload) > 0xFFFFFFFF:
        raise ValueError("payload does not fit a 4-byte length")
    return HEADER.pack(len(payload)) + bytes(payload)


class MessageDecoder:
    """Incremental decoder; feed arbitrary chunks, collect whole payloads."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, chunk: bytes) -> list[bytes]:
        self._buf += chunk
        out = []
        while len(self._buf) >= 4:
            (n,) = HEADER.unpack_from(self._buf)
            if n == 0 or n > MAX_PAYLOAD:
                raise ValueError(f"invalid frame length {n}")
            if len(self._buf) < 4 + n:
                break
            out.append(bytes(self._buf[4:4 + n]))
            del self._buf[:4 + n]
        return out

    @property
    def pending(self) -> int:
        return len(self._buf)

    def close(self) -> None:
        """Signal end of stream; fails if a message was cut short."""
        if self._buf:
            raise Truncated(f"stream ended with {len(self._buf)} bytes of an unfinished message")


def decode_stream(chunks: Iterable[bytes]) -> Iterator[bytes]:
    dec = MessageDecoder()
    for chunk in chunks:
        yield from dec.feed(chunk)
    dec.close()


def frame_to_payload(frame: Frame, fmt: int = FORMAT_PNG) -> bytes:
    if fmt == FORMAT_RAW:
        return struct.pack("<dHH", frame.timestamp_ms, frame.width, frame.height) + frame.to_rgb_bytes()
    info = PngImagePlugin.PngInfo()
    info.add_text("t", repr(float(frame.timestamp_ms)))
    buf = io.BytesIO()
    Image.fromarray(frame.pixels, "RGB").save(buf, format="PNG", compress_level=1, pnginfo=info)
    return buf.getvalue()


def payload_to_frame(payload: bytes, fmt: int = FORMAT_PNG) -> Frame:
    if fmt == FORMAT_RAW:
        t, w, h = struct.unpack_from("<dHH", payload)
        return Frame.from_rgb_bytes(payload[12:], w, h, t)
    with Image.open(io.BytesIO(payload)) as im:
        t = float(im.text.get("t", "0")) if hasattr(im, "text") else 0.0
        return Frame(np.array(im.convert("RGB")), t)


# server ---------------------------------------------------------------------

class _Subscriber:
    """One connection; a one-slot mailbox so the producer never waits on it."""

    def __init__(self, conn: socket.socket):
        self.conn = conn
        self.slot: bytes | None = None
        self.cond = threading.Condition()
        self.closed = False
        self.thread = threading.Thread(target=self._pump, daemon=True)

    def offer(self, message: bytes) -> None:
        with self.cond:
            self.slot = message  # drop-oldest: an unsent frame is simply replaced
            self.cond.notify()

    def _pump(self) -> None:
        try:
            while True:
                with self.cond:
                    while self.slot is None and not self.closed:
                        self.cond.wait()
                    if self.closed:
                        return
                    msg, self.slot = self.slot, None
                self.conn.sendall(msg)
        except OSError:
            pass
        finally:
            self.close()

    def close(self) -> None:
        with self.cond:
            self.closed = True
            self.cond.notify()
        try:
            self.conn.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.conn.close()


class FrameServer:
    """Pushes ``source(t_ms)`` to every connected client at ``fps``.

    ``t_ms`` is measured from :meth:`start`.
    """

    def __init__(self, source: Callable[[float], Frame], fps: float = 30.0, host: str = "127.0.0.1",
                 port: int = 0, payload_format: int = FORMAT_PNG):
        if fps <= 0:
            raise ValueError("fps must be positive")
        self.source, self.fps, self.payload_format = source, fps, payload_format
        self._sock = socket.create_server((host, port))
        self.address = self._sock.getsockname()[:2]
        self._subs: list[_Subscriber] = []
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self.frames_sent = 0
        self.started_at: float | None = None
        self._threads: list[threading.Thread] = []

    @property
    def port(self) -> int:
        return self.address[1]

    def start(self) -> "FrameServer":
        self.started_at = time.monotonic()
        for fn in (self._accept_loop, self._produce_loop):
            th = threading.Thread(target=fn, daemon=True)
            th.start()
            self._threads.append(th)
        return self

    def elapsed_ms(self) -> float:
        return (time.monotonic() - self.started_at) * 1000.0

    def _accept_loop(self) -> None:
        self._sock.settimeout(0.05)
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn.sendall(bytes([PROTOCOL_VERSION, self.payload_format]))
            sub = _Subscriber(conn)
            sub.thread.start()
            with self._lock:
                self._subs.append(sub)

    def _produce_loop(self) -> None:
        period = 1.0 / self.fps
        k = 0
        while not self._stop.is_set():
            due = self.started_at + k * period
            delay = due - time.monotonic()
            if delay > 0 and self._stop.wait(delay):
                return
            frame = self.source(k * period * 1000.0)
            message = encode_message(frame_to_payload(frame, self.payload_format))
            with self._lock:
                self._subs = [s for s in self._subs if not s.closed]
                for s in self._subs:
                    s.offer(message)
            self.frames_sent += 1
            k += 1
            # after a stall, skip frames that are already late rather than bursting
            behind = int((time.monotonic() - self.started_at) / period)
            k = max(k, behind)

    def stop(self) -> None:
        self._stop.set()
        self._sock.close()
        with self._lock:
            subs, self._subs = self._subs, []
        for s in subs:
            s.close()
        for th in self._threads:
            th.join(timeout=1.0)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def serve(session, fps: float = 30.0, host: str = "127.0.0.1", port: int = 0,
          payload_format: int = FORMAT_PNG) -> FrameServer:
    """Start streaming a device session. ``session`` needs ``frame_at(t) -> (Frame, phase)``
    and is read under ``session_lock`` on the returned server so taps can be applied safely."""
    lock = threading.Lock()

    def source(t):
        with lock:
            return session.frame_at(t)[0]

    server = FrameServer(source, fps, host, port, payload_format)
    server.session_lock = lock
    return server.start()


# client ---------------------------------------------------------------------

class StreamClient:
    """Keeps only the newest fully received frame.

    ``latency_ms`` delays the visibility of every frame, standing in for a
    slow capture path such as pulling screenshots over a debug bridge.
    """

    def __init__(self, host: str, port: int, latency_ms: float = 0.0, timeout: float = 5.0):
        self.latency_ms = latency_ms
        self._sock = socket.create_connection((host, port), timeout=timeout)
        hs = self._recv_exact(2)
        if hs[0] != PROTOCOL_VERSION:
            self._sock.close()
            raise ValueError(f"unsupported protocol version {hs[0]}")
        self.payload_format = hs[1]
        self._sock.settimeout(None)
        self._cond = threading.Condition()
        self._pending: deque[tuple[float, Frame]] = deque()
        self._latest: Frame | None = None
        self._seq = 0
        self._taken = 0
        self.frames_received = 0
        self._closed = False
        self._error: Exception | None = None
        self._thread = threading.Thread(target=self._read_loop, daemon=True)
        self._thread.start()

    def _recv_exact(self, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            chunk = self._sock.recv(n - len(buf))
            if not chunk:
                raise Disconnected("server closed during handshake")
            buf += chunk
        return buf

    def _read_loop(self) -> None:
        dec = MessageDecoder()
        try:
            while True:
                chunk = self._sock.recv(1 << 16)
                if not chunk:
                    dec.close()
                    break
                for payload in dec.feed(chunk):
                    frame = payload_to_frame(payload, self.payload_format)
                    with self._cond:
                        self.frames_received += 1
                        self._pending.append((time.monotonic() + self.latency_ms / 1000.0, frame))
                        self._cond.notify_all()
        except (OSError, Truncated, ValueError) as exc:
            # a cut-off message is discarded, never surfaced
            self._error = exc
        finally:
            with self._cond:
                self._closed = True
                self._cond.notify_all()

    def _promote(self) -> float | None:
        """Move frames whose latency has elapsed into view; returns seconds until the next one."""
        now = time.monotonic()
        while self._pending and self._pending[0][0] <= now:
            _, frame = self._pending.popleft()
            if self._latest is None or frame.timestamp_ms >= self._latest.timestamp_ms:
                self._latest = frame
                self._seq += 1
        return self._pending[0][0] - now if self._pending else None

    def latest_frame(self) -> Frame | None:
        with self._cond:
            self._promote()
            return self._latest

    def next_frame(self, timeout: float | None = None) -> Frame:
        """Block until a frame newer than the last one returned here becomes visible."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cond:
            while True:
                wait = self._promote()
                if self._seq > self._taken:
                    self._taken = self._seq
                    return self._latest
                if self._closed and not self._pending:
                    raise Disconnected("frame stream closed")
                if deadline is not None:
                    left = deadline - time.monotonic()
                    if left <= 0:
                        raise TimeoutError("no new frame in time")
                    wait = left if wait is None else min(wait, left)
                self._cond.wait(wait)

    @property
    def closed(self) -> bool:
        return self._closed

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
        self._thread.join(timeout=1.0)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def subscribe(host: str, port: int, latency_ms: float = 0.0) -> StreamClient:
    return StreamClient(host, port, latency_ms)
