"""Real-time orchestration: sources, the 0.5 s classification tick, posterior
smoothing, pause/resume/save control, and UDP/WebSocket emitters.

Thread layout: one producer thread fills a bounded sample queue from the
source; a single pipeline thread owns the causal filter state, the 2 s ring
buffer, the model, and smoothing; each sink drains its own bounded broadcast
queue (drop-oldest on overflow). Control commands land on a command queue
drained once per tick, so a blocked sink or a slow controller can never stall
frame production.
"""

from __future__ import annotations

import json
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry
from .classifier import TrainedModel, predict_posterior
from .errors import InvalidArgument, InvalidData
from .features import WindowSpec, feature_row
from .signal_core import DEFAULT_BANDS, EegRecording, StreamingBandpass
from .synth import SubjectProfile, apply_class_signature, generate_noise

MSCP_MAGIC = b"MSCP"
MSCP_VERSION = 1
FLAG_PAUSED = 0x01
_HEADER = struct.Struct("<4sBBBBIQ")  # magic, version, n_classes, flags, pad, seq, timestamp_ms

DEFAULT_SMOOTH_ALPHA = 0.3


@dataclass
class PosteriorFrame:
    seq: int
    timestamp_ms: int
    probs: np.ndarray
    smoothed: np.ndarray
    paused: bool = False

    def __post_init__(self):
        for v in (self.probs, self.smoothed):
            if abs(float(np.sum(v)) - 1.0) > 1e-6 or np.any(v < 0) or np.any(v > 1):
                raise InvalidArgument("posterior vectors must be distributions")


def smooth(prev: np.ndarray, new: np.ndarray, alpha: float = DEFAULT_SMOOTH_ALPHA) -> np.ndarray:
    """Exponential blend of probability vectors, renormalized."""
    out = alpha * np.asarray(new, float) + (1.0 - alpha) * np.asarray(prev, float)
    return out / out.sum()


def encode_frame(frame: PosteriorFrame) -> bytes:
    """Little-endian MSCP datagram: 20-byte header + n_classes float32."""
    flags = FLAG_PAUSED if frame.paused else 0
    header = _HEADER.pack(
        MSCP_MAGIC, MSCP_VERSION, len(frame.smoothed), flags, 0, frame.seq, frame.timestamp_ms
    )
    return header + np.asarray(frame.smoothed, dtype="<f4").tobytes()


def decode_frame(payload: bytes) -> PosteriorFrame:
    """Strict reference parser for MSCP datagrams; rejects any malformed input."""
    if len(payload) < _HEADER.size:
        raise InvalidData("datagram shorter than the MSCP header")
    magic, version, n_classes, flags, pad, seq, ts = _HEADER.unpack_from(payload)
    if magic != MSCP_MAGIC:
        raise InvalidData("bad magic bytes")
    if version != MSCP_VERSION:
        raise InvalidData(f"unsupported MSCP version {version}")
    if pad != 0:
        raise InvalidData("non-zero pad byte")
    if len(payload) != _HEADER.size + 4 * n_classes:
        raise InvalidData(
            f"datagram length {len(payload)} != {_HEADER.size + 4 * n_classes} for {n_classes} classes"
        )
    smoothed = np.frombuffer(payload, dtype="<f4", count=n_classes, offset=_HEADER.size).astype(float)
    return PosteriorFrame(
        seq=seq, timestamp_ms=ts, probs=smoothed.copy(), smoothed=smoothed, paused=bool(flags & FLAG_PAUSED)
    )


class RingBuffer:
    """Fixed-capacity channels x samples buffer keeping the latest window."""

    def __init__(self, n_channels: int, capacity: int):
        self._buf = np.zeros((n_channels, capacity))
        self.capacity = capacity
        self.filled = 0
        self._pos = 0

    def push(self, block: np.ndarray) -> None:
        n = block.shape[1]
        if n >= self.capacity:
            self._buf[:] = block[:, -self.capacity :]
            self._pos = 0
            self.filled = self.capacity
            return
        end = self._pos + n
        if end <= self.capacity:
            self._buf[:, self._pos : end] = block
        else:
            split = self.capacity - self._pos
            self._buf[:, self._pos :] = block[:, :split]
            self._buf[:, : end - self.capacity] = block[:, split:]
        self._pos = end % self.capacity
        self.filled = min(self.capacity, self.filled + n)

    def latest(self) -> np.ndarray:
        """The buffer contents in chronological order (requires full buffer)."""
        return np.concatenate([self._buf[:, self._pos :], self._buf[:, : self._pos]], axis=1)


# ---------------------------------------------------------------------------
# Sources


@dataclass
class SourceDescriptor:
    kind: str  # "synth-live" | "file-replay"
    pacing: str = "realtime"  # "realtime" | "fast"
    parameters: dict = field(default_factory=dict)


class SynthLiveSource:
    """Endless synthetic EEG whose class signature follows set_active_class."""

    def __init__(
        self, profile: SubjectProfile, fs: float = 256.0, block_s: float = 0.5, buffer_s: float = 120.0
    ):
        self.profile = profile
        self.fs = fs
        self.block_samples = int(round(block_s * fs))
        self.n_channels = profile.n_channels
        self._active_class = 0
        # background comes from one long looped buffer so its spectrum (and
        # hence in-band power after RMS normalization) matches recorded
        # sessions; short per-block synthesis would have no sub-1 Hz content
        self._background = generate_noise(
            profile.n_channels, int(round(buffer_s * fs)), fs, profile.noise_slope, profile.seed
        ).data
        # signatures are applied per 1 s chunk; a class switch lands at the
        # next chunk boundary
        self._chunk_samples = max(int(fs), self.block_samples)
        self._cursor = 0

    def set_active_class(self, class_id: int) -> None:
        if class_id not in self.profile.region_map:
            raise InvalidArgument(f"unknown class {class_id}")
        self._active_class = class_id

    def blocks(self):
        total = self._background.shape[1]
        while True:
            start = self._cursor % (total - self._chunk_samples + 1)
            chunk = EegRecording(
                data=self._background[:, start : start + self._chunk_samples], fs=self.fs
            )
            signed = apply_class_signature(chunk, self._active_class, self.profile)
            self._cursor += self._chunk_samples
            for s in range(0, self._chunk_samples, self.block_samples):
                yield signed.data[:, s : s + self.block_samples]


class FileReplaySource:
    """Replays a recording block by block, then ends."""

    def __init__(self, rec: EegRecording, block_s: float = 0.5):
        self.rec = rec
        self.fs = rec.fs
        self.n_channels = rec.n_channels
        self.block_samples = int(round(block_s * rec.fs))

    def blocks(self):
        for start in range(0, self.rec.n_samples - self.block_samples + 1, self.block_samples):
            yield self.rec.data[:, start : start + self.block_samples]


# ---------------------------------------------------------------------------
# Sinks


class Sink:
    """Base sink: a bounded queue drained by a daemon thread, drop-oldest."""

    def __init__(self, maxsize: int = 64):
        self.queue: queue.Queue = queue.Queue(maxsize=maxsize)
        self.dropped = 0
        self._thread = threading.Thread(target=self._drain, daemon=True)
        self._stop = threading.Event()
        self._thread.start()

    def offer(self, event: tuple) -> None:
        try:
            self.queue.put_nowait(event)
        except queue.Full:
            try:
                self.queue.get_nowait()
            except queue.Empty:
                pass
            self.dropped += 1
            try:
                self.queue.put_nowait(event)
            except queue.Full:
                pass

    def _drain(self) -> None:
        while not self._stop.is_set():
            try:
                event = self.queue.get(timeout=0.1)
            except queue.Empty:
                continue
            try:
                self.emit(event)
            except Exception:
                self.dropped += 1  # a failing sink never propagates into the tick

    def emit(self, event: tuple) -> None:
        raise NotImplementedError

    def close(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2)


class CollectSink(Sink):
    """Keeps every event in memory; used by tests and session logs."""

    def __init__(self):
        self.events: list[tuple] = []
        self._lock = threading.Lock()
        super().__init__(maxsize=100000)

    def emit(self, event):
        with self._lock:
            self.events.append(event)

    def frames(self) -> list[PosteriorFrame]:
        with self._lock:
            return [e[1] for e in self.events if e[0] == "posterior"]


class UdpSink(Sink):
    """Sends one MSCP datagram per posterior frame."""

    def __init__(self, host: str, port: int):
        self.addr = (host, port)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        super().__init__()

    def emit(self, event):
        kind, payload = event
        if kind == "posterior":
            self.sock.sendto(encode_frame(payload), self.addr)

    def close(self):
        super().close()
        self.sock.close()


class WebSocketSink(Sink):
    """Broadcasts JSON frames to browser clients and feeds control back."""

    def __init__(self, port: int, control_queue: queue.Queue):
        from websockets.sync.server import serve

        self._clients: list = []
        self._clients_lock = threading.Lock()
        self._control_queue = control_queue
        self._server = serve(self._handle_client, "0.0.0.0", port)
        self.port = self._server.socket.getsockname()[1]
        self._server_thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._server_thread.start()
        super().__init__()

    def _handle_client(self, ws):
        with self._clients_lock:
            self._clients.append(ws)
        try:
            for message in ws:
                try:
                    msg = json.loads(message)
                except json.JSONDecodeError:
                    continue
                if msg.get("type") == "control":
                    cmd = Command(msg.get("cmd", ""), msg.get("class_id"))
                    self._control_queue.put(cmd)
                    cmd.done.wait(timeout=5)
                    ws.send(json.dumps({
                        "type": "ack",
                        "cmd": cmd.name,
                        "ok": cmd.error is None,
                        "result": cmd.result,
                        "error": cmd.error,
                    }))
        finally:
            with self._clients_lock:
                if ws in self._clients:
                    self._clients.remove(ws)

    def emit(self, event):
        kind, payload = event
        if kind == "posterior":
            msg = {
                "type": "posterior",
                "seq": payload.seq,
                "probs": [float(p) for p in payload.probs],
                "smoothed": [float(p) for p in payload.smoothed],
                "paused": payload.paused,
            }
        elif kind == "geometry":
            msg = {"type": "geometry", "occupied": payload["occupied"], "grid_n": payload["grid_n"]}
        else:
            msg = {"type": "status", **payload}
        text = json.dumps(msg)
        with self._clients_lock:
            clients = list(self._clients)
        for ws in clients:
            try:
                ws.send(text)
            except Exception:
                pass

    def close(self):
        super().close()
        self._server.shutdown()


# ---------------------------------------------------------------------------
# Control and the pipeline


class Command:
    """One control command with a completion event for acknowledgement."""

    def __init__(self, name: str, class_id: int | None = None):
        self.name = name
        self.class_id = class_id
        self.done = threading.Event()
        self.result = None
        self.error: str | None = None


class Controller:
    """Thread-safe handle posting commands to a running pipeline."""

    def __init__(self):
        self.queue: queue.Queue = queue.Queue()

    def send(self, name: str, class_id: int | None = None, timeout: float = 10.0):
        cmd = Command(name, class_id)
        self.queue.put(cmd)
        if not cmd.done.wait(timeout):
            raise TimeoutError(f"command {name} not acknowledged")
        if cmd.error:
            raise InvalidArgument(cmd.error)
        return cmd.result

    def pause(self):
        return self.send("pause")

    def resume(self):
        return self.send("resume")

    def save(self):
        return self.send("save")

    def imagine(self, class_id: int):
        return self.send("imagine", class_id)


def weights_from_posterior(model: TrainedModel, smoothed: np.ndarray) -> np.ndarray:
    """Map the model's class posterior onto the fixed 4-shape weight vector."""
    w = np.zeros(4)
    for cls, p in zip(model.classes, smoothed):
        w[cls] = p
    total = w.sum()
    return w / total if total > 0 else np.full(4, 0.25)


@dataclass
class SessionLog:
    frames: int = 0
    stalls: int = 0
    saves: list[str] = field(default_factory=list)
    drops: dict = field(default_factory=dict)
    tick_times_ms: list[float] = field(default_factory=list)


class Pipeline:
    """Owns filter state, ring buffer, model, smoothing; runs the tick loop."""

    def __init__(
        self,
        source,
        model: TrainedModel,
        sinks: list[Sink],
        controller: Controller | None = None,
        window_spec: WindowSpec = WindowSpec(),
        smooth_alpha: float = DEFAULT_SMOOTH_ALPHA,
        grid_n: int = geometry.DEFAULT_GRID_N,
        tau: float = geometry.DEFAULT_TAU,
        save_dir=".",
        pacing: str = "fast",
        max_frames: int | None = None,
        max_seconds: float | None = None,
    ):
        self.source = source
        self.model = model
        self.sinks = sinks
        self.controller = controller or Controller()
        self.spec = window_spec
        self.smooth_alpha = smooth_alpha
        self.grid_n = grid_n
        self.tau = tau
        self.save_dir = Path(save_dir)
        self.pacing = pacing
        self.max_frames = max_frames
        self.max_seconds = max_seconds
        self.log = SessionLog()
        self._paused = False
        self._current_grid = None

    def run(self) -> SessionLog:
        fs = self.source.fs
        window = self.spec.window_samples(fs)
        step = self.spec.step_samples(fs)
        ring = RingBuffer(self.source.n_channels, window)
        bp = StreamingBandpass(self.source.n_channels, fs)
        sample_queue: queue.Queue = queue.Queue(maxsize=32)
        producer_done = threading.Event()

        def produce():
            try:
                for block in self.source.blocks():
                    if self.pacing == "realtime":
                        time.sleep(block.shape[1] / fs)
                    sample_queue.put(block)
                    if producer_done.is_set():
                        return
            finally:
                producer_done.set()
                sample_queue.put(None)

        producer = threading.Thread(target=produce, daemon=True)
        producer.start()

        seq = 0
        next_tick_at = window  # first tick once the ring holds a full window
        samples_seen = 0
        smoothed = None
        paused = False
        frozen_smoothed = None
        current_grid = None
        last_occupied: np.ndarray | None = None
        start_time = time.monotonic()
        try:
            while True:
                if self.max_seconds is not None and time.monotonic() - start_time > self.max_seconds:
                    break
                try:
                    block = sample_queue.get(timeout=2.0)
                except queue.Empty:
                    self.log.stalls += 1
                    self._broadcast(("status", {"state": "stalled", "frames": self.log.frames}))
                    continue
                if block is None:
                    break
                block = bp.process(block)
                ring.push(block)
                samples_seen += block.shape[1]
                while samples_seen >= next_tick_at and ring.filled >= window:
                    next_tick_at += step
                    tick_start = time.perf_counter()
                    self._drain_control()
                    paused = self._paused
                    win = EegRecording(ring.latest(), fs=fs)
                    row = feature_row(win, DEFAULT_BANDS)
                    probs = predict_posterior(self.model, row)
                    if paused:
                        frame_smoothed = frozen_smoothed if frozen_smoothed is not None else probs
                    else:
                        frame_smoothed = probs if smoothed is None else smooth(smoothed, probs, self.smooth_alpha)
                        smoothed = frame_smoothed
                        frozen_smoothed = frame_smoothed
                    frame = PosteriorFrame(
                        seq=seq,
                        timestamp_ms=int(samples_seen / fs * 1000),
                        probs=probs,
                        smoothed=np.asarray(frame_smoothed),
                        paused=paused,
                    )
                    seq += 1
                    self.log.frames += 1
                    self._broadcast(("posterior", frame))
                    if not paused or current_grid is None:
                        weights = weights_from_posterior(self.model, frame.smoothed)
                        current_grid = geometry.blend(weights, n=self.grid_n, tau=self.tau)
                        occ = current_grid.flat_indices()
                        if last_occupied is None or not np.array_equal(occ, last_occupied):
                            last_occupied = occ
                            self._broadcast(
                                ("geometry", {"occupied": occ.tolist(), "grid_n": self.grid_n})
                            )
                    self._current_grid = current_grid
                    self.log.tick_times_ms.append((time.perf_counter() - tick_start) * 1000)
                    if self.max_frames is not None and self.log.frames >= self.max_frames:
                        producer_done.set()
                        raise _StopPipeline
        except _StopPipeline:
            pass
        finally:
            producer_done.set()
            for sink in self.sinks:
                self.log.drops[type(sink).__name__] = sink.dropped
        return self.log

    def _broadcast(self, event: tuple) -> None:
        for sink in self.sinks:
            sink.offer(event)

    def _drain_control(self) -> None:
        while True:
            try:
                cmd = self.controller.queue.get_nowait()
            except queue.Empty:
                return
            try:
                if cmd.name == "pause":
                    self._paused = True
                    cmd.result = "paused"
                elif cmd.name == "resume":
                    self._paused = False
                    cmd.result = "resumed"
                elif cmd.name == "save":
                    if self._current_grid is None:
                        cmd.error = "no geometry yet"
                    else:
                        self.save_dir.mkdir(parents=True, exist_ok=True)
                        path = self.save_dir / f"design_{len(self.log.saves):04d}.obj"
                        geometry.export_mesh(self._current_grid, path)
                        self.log.saves.append(str(path))
                        cmd.result = str(path)
                elif cmd.name == "imagine":
                    if hasattr(self.source, "set_active_class"):
                        self.source.set_active_class(int(cmd.class_id))
                        cmd.result = f"imagining {cmd.class_id}"
                    else:
                        cmd.error = "source does not support imagine"
                else:
                    cmd.error = f"unknown command {cmd.name!r}"
            except Exception as e:  # surface errors to the caller, keep ticking
                cmd.error = str(e)
            finally:
                cmd.done.set()


class _StopPipeline(Exception):
    pass


def run_pipeline(
    source, model: TrainedModel, sinks: list[Sink], controller: Controller | None = None, **kwargs
) -> SessionLog:
    """Convenience wrapper constructing and running a Pipeline."""
    return Pipeline(source, model, sinks, controller, **kwargs).run()
