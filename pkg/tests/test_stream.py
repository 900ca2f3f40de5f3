import json
import socket
import struct
import threading

import numpy as np
import pytest

from neurovoxel.errors import InvalidArgument, InvalidData
from neurovoxel.stream import (
    CollectSink,
    Controller,
    FileReplaySource,
    Pipeline,
    PosteriorFrame,
    RingBuffer,
    Sink,
    SynthLiveSource,
    UdpSink,
    WebSocketSink,
    decode_frame,
    encode_frame,
    smooth,
    weights_from_posterior,
)
from neurovoxel.synth import SessionProtocol, SubjectProfile, generate_session

FS = 256.0


def frame_of(seq=0, probs=(0.1, 0.2, 0.3, 0.4), paused=False, ts=1000):
    p = np.asarray(probs, dtype=float)
    return PosteriorFrame(seq=seq, timestamp_ms=ts, probs=p, smoothed=p, paused=paused)


class TestFrameAndSmoothing:
    def test_rejects_non_distribution(self):
        with pytest.raises(InvalidArgument):
            frame_of(probs=(0.5, 0.2, 0.2, 0.2))
        with pytest.raises(InvalidArgument):
            frame_of(probs=(1.2, -0.2, 0.0, 0.0))

    def test_smooth_is_convex_and_normalized(self):
        prev = np.array([0.7, 0.1, 0.1, 0.1])
        new = np.array([0.1, 0.7, 0.1, 0.1])
        out = smooth(prev, new, alpha=0.3)
        assert out.sum() == pytest.approx(1.0)
        assert np.allclose(out, 0.3 * new + 0.7 * prev)

    def test_smooth_alpha_one_is_identity(self):
        prev = np.array([0.25, 0.25, 0.25, 0.25])
        new = np.array([0.4, 0.3, 0.2, 0.1])
        assert np.allclose(smooth(prev, new, alpha=1.0), new)


class TestMscpWire:
    def test_exact_layout(self):
        frame = frame_of(seq=7, ts=123456, paused=True)
        payload = encode_frame(frame)
        assert len(payload) == 20 + 4 * 4
        assert payload[:4] == b"MSCP"
        assert payload[4] == 1  # version
        assert payload[5] == 4  # n_classes
        assert payload[6] == 1  # paused flag
        assert payload[7] == 0  # pad
        assert struct.unpack_from("<I", payload, 8)[0] == 7
        assert struct.unpack_from("<Q", payload, 12)[0] == 123456
        floats = struct.unpack_from("<4f", payload, 20)
        assert floats == pytest.approx((0.1, 0.2, 0.3, 0.4))

    def test_roundtrip(self):
        frame = frame_of(seq=99, ts=500, paused=False)
        got = decode_frame(encode_frame(frame))
        assert got.seq == 99 and got.timestamp_ms == 500 and not got.paused
        assert np.allclose(got.smoothed, frame.smoothed, atol=1e-7)

    def test_rejects_bad_magic(self):
        payload = bytearray(encode_frame(frame_of()))
        payload[0] = ord("X")
        with pytest.raises(InvalidData):
            decode_frame(bytes(payload))

    def test_rejects_bad_version(self):
        payload = bytearray(encode_frame(frame_of()))
        payload[4] = 2
        with pytest.raises(InvalidData):
            decode_frame(bytes(payload))

    def test_rejects_nonzero_pad(self):
        payload = bytearray(encode_frame(frame_of()))
        payload[7] = 1
        with pytest.raises(InvalidData):
            decode_frame(bytes(payload))

    def test_rejects_wrong_length(self):
        payload = encode_frame(frame_of())
        with pytest.raises(InvalidData):
            decode_frame(payload + b"\x00\x00\x00\x00")

    @pytest.mark.parametrize("cut", [0, 1, 8, 15, 19, 20, 24, 35])
    def test_rejects_every_truncation(self, cut):
        payload = encode_frame(frame_of())
        with pytest.raises(InvalidData):
            decode_frame(payload[:cut])


class TestRingBuffer:
    def test_chronological_latest(self):
        ring = RingBuffer(1, 6)
        for start in range(0, 12, 3):
            ring.push(np.arange(start, start + 3, dtype=float)[None, :])
        assert ring.latest()[0].tolist() == [6, 7, 8, 9, 10, 11]

    def test_oversized_block_keeps_tail(self):
        ring = RingBuffer(2, 4)
        ring.push(np.arange(20, dtype=float).reshape(2, 10))
        assert ring.latest()[0].tolist() == [6, 7, 8, 9]
        assert ring.filled == 4

    def test_wraparound_split_block(self):
        ring = RingBuffer(1, 5)
        ring.push(np.array([[0.0, 1, 2]]))
        ring.push(np.array([[3.0, 4, 5, 6]]))
        assert ring.latest()[0].tolist() == [2, 3, 4, 5, 6]

    def test_filled_tracks_until_capacity(self):
        ring = RingBuffer(1, 10)
        ring.push(np.zeros((1, 4)))
        assert ring.filled == 4
        ring.push(np.zeros((1, 4)))
        assert ring.filled == 8
        ring.push(np.zeros((1, 4)))
        assert ring.filled == 10


class TestSources:
    def test_synth_live_deterministic_blocks(self):
        profile = SubjectProfile(seed=2, snr=1.0)
        a = SynthLiveSource(profile)
        b = SynthLiveSource(profile)
        ga, gb = a.blocks(), b.blocks()
        for _ in range(3):
            assert np.array_equal(next(ga), next(gb))

    def test_synth_live_class_switch_changes_output(self):
        profile = SubjectProfile(seed=2, snr=1.0)
        a = SynthLiveSource(profile)
        b = SynthLiveSource(profile)
        b.set_active_class(2)
        assert not np.array_equal(next(a.blocks()), next(b.blocks()))

    def test_synth_live_rejects_unknown_class(self):
        src = SynthLiveSource(SubjectProfile(seed=0))
        with pytest.raises(InvalidArgument):
            src.set_active_class(9)

    def test_file_replay_covers_recording(self, default_session):
        rec, _ = default_session
        src = FileReplaySource(rec)
        total = sum(b.shape[1] for b in src.blocks())
        assert total == rec.n_samples  # 242 s divides evenly into 0.5 s blocks

    def test_file_replay_blocks_match_data(self, default_session):
        rec, _ = default_session
        src = FileReplaySource(rec)
        first = next(src.blocks())
        assert np.array_equal(first, rec.data[:, :128])


class TestWeightsFromPosterior:
    def test_four_class_identity(self, four_class_model):
        p = np.array([0.4, 0.3, 0.2, 0.1])
        assert np.allclose(weights_from_posterior(four_class_model, p), p)

    def test_pair_model_maps_onto_its_classes(self, pair_model):
        w = weights_from_posterior(pair_model, np.array([0.8, 0.2]))
        assert np.allclose(w, [0.8, 0.2, 0.0, 0.0])


class TestSinkBackpressure:
    def test_drop_oldest_under_blocked_drain(self):
        release = threading.Event()
        seen = []

        class SlowSink(Sink):
            def emit(self, event):
                release.wait(timeout=5)
                seen.append(event)

        sink = SlowSink(maxsize=4)
        try:
            for i in range(20):
                sink.offer(("posterior", i))
            assert sink.dropped > 0
            release.set()
            import time

            deadline = time.monotonic() + 5
            while not sink.queue.empty() and time.monotonic() < deadline:
                time.sleep(0.01)
            time.sleep(0.2)  # let the last emit land
        finally:
            sink.close()
        # the most recent event survived the drops
        assert ("posterior", 19) in seen

    def test_failing_sink_counts_drops_and_survives(self):
        class FailingSink(Sink):
            def emit(self, event):
                raise RuntimeError("boom")

        sink = FailingSink()
        try:
            sink.offer(("posterior", 1))
            sink.queue.join() if False else None
            import time

            deadline = time.monotonic() + 2
            while sink.dropped == 0 and time.monotonic() < deadline:
                time.sleep(0.01)
            assert sink.dropped == 1
        finally:
            sink.close()


@pytest.fixture(scope="module")
def replay_session():
    return generate_session(SessionProtocol(reps_per_class=1), SubjectProfile(seed=1, snr=1.0))


class TestPipeline:
    def test_tick_arithmetic_on_replay(self, four_class_model, replay_session, tmp_path):
        rec, _ = replay_session
        clip = rec.slice_samples(0, int(30 * FS))
        sink = CollectSink()
        log = Pipeline(
            FileReplaySource(clip), four_class_model, [sink], save_dir=tmp_path
        ).run()
        sink.close()
        # 30 s at 0.5 s steps with a 2 s warmup window: 57 frames
        assert log.frames == 57
        frames = sink.frames()
        assert [f.seq for f in frames] == list(range(57))
        assert frames[0].timestamp_ms == 2000
        assert frames[1].timestamp_ms - frames[0].timestamp_ms == 500

    def test_frames_are_valid_distributions(self, four_class_model, replay_session, tmp_path):
        rec, _ = replay_session
        clip = rec.slice_samples(0, int(10 * FS))
        sink = CollectSink()
        Pipeline(FileReplaySource(clip), four_class_model, [sink], save_dir=tmp_path).run()
        sink.close()
        for f in sink.frames():
            assert f.probs.sum() == pytest.approx(1.0, abs=1e-6)
            assert f.smoothed.sum() == pytest.approx(1.0, abs=1e-6)

    def test_geometry_events_only_on_change(self, four_class_model, replay_session, tmp_path):
        rec, _ = replay_session
        clip = rec.slice_samples(0, int(20 * FS))
        sink = CollectSink()
        Pipeline(FileReplaySource(clip), four_class_model, [sink], save_dir=tmp_path).run()
        sink.close()
        occupied = [tuple(e[1]["occupied"]) for e in sink.events if e[0] == "geometry"]
        assert len(occupied) >= 1
        for a, b in zip(occupied, occupied[1:]):
            assert a != b

    def test_imagine_drives_argmax(self, four_class_model, tmp_path):
        source = SynthLiveSource(SubjectProfile(seed=11, snr=1.0))
        source.set_active_class(2)
        sink = CollectSink()
        Pipeline(
            source, four_class_model, [sink], save_dir=tmp_path, max_frames=60
        ).run()
        sink.close()
        frames = sink.frames()[20:]  # skip smoothing warmup
        hits = np.mean([int(np.argmax(f.smoothed)) == 2 for f in frames])
        assert hits >= 0.7

    def test_pause_freezes_smoothed_and_keeps_seq(self, four_class_model, tmp_path):
        source = SynthLiveSource(SubjectProfile(seed=3, snr=1.0))
        controller = Controller()
        sink = CollectSink()
        pipeline = Pipeline(
            source, four_class_model, [sink], controller, save_dir=tmp_path, max_frames=40
        )
        done = []
        t = threading.Thread(target=lambda: done.append(pipeline.run()))
        t.start()
        # wait until a few frames exist, then pause
        import time

        while len(sink.frames()) < 10:
            time.sleep(0.01)
        controller.pause()
        while len(sink.frames()) < 25:
            time.sleep(0.01)
        controller.resume()
        t.join(timeout=30)
        sink.close()
        frames = sink.frames()
        assert [f.seq for f in frames] == list(range(len(frames)))  # gap-free
        paused = [f for f in frames if f.paused]
        assert len(paused) >= 2
        ref = paused[0].smoothed
        for f in paused[1:]:
            assert np.array_equal(f.smoothed, ref)  # frozen while paused

    def test_save_writes_obj_and_acks_path(self, four_class_model, tmp_path):
        source = SynthLiveSource(SubjectProfile(seed=4, snr=1.0))
        controller = Controller()
        sink = CollectSink()
        pipeline = Pipeline(
            source, four_class_model, [sink], controller, save_dir=tmp_path, max_frames=30
        )
        t = threading.Thread(target=pipeline.run)
        t.start()
        import time

        while len(sink.frames()) < 5:
            time.sleep(0.01)
        path = controller.save()
        t.join(timeout=30)
        sink.close()
        assert path.endswith("design_0000.obj")
        text = (tmp_path / "design_0000.obj").read_text()
        assert text.startswith("# neurovoxel voxel mesh")
        assert pipeline.log.saves == [path]

    def test_unknown_command_errors(self, four_class_model, tmp_path):
        source = SynthLiveSource(SubjectProfile(seed=5, snr=1.0))
        controller = Controller()
        pipeline = Pipeline(
            source, four_class_model, [CollectSink()], controller, save_dir=tmp_path, max_frames=15
        )
        t = threading.Thread(target=pipeline.run)
        t.start()
        with pytest.raises(InvalidArgument):
            controller.send("explode")
        t.join(timeout=30)

    def test_imagine_rejected_on_replay_source(self, four_class_model, replay_session, tmp_path):
        rec, _ = replay_session
        clip = rec.slice_samples(0, int(60 * FS))
        controller = Controller()
        pipeline = Pipeline(
            FileReplaySource(clip), four_class_model, [CollectSink()], controller,
            save_dir=tmp_path,
        )
        t = threading.Thread(target=pipeline.run)
        t.start()
        with pytest.raises(InvalidArgument, match="does not support imagine"):
            controller.imagine(1)
        t.join(timeout=30)


class TestUdpSink:
    def test_datagrams_arrive_and_decode(self, four_class_model, replay_session, tmp_path):
        rec, _ = replay_session
        clip = rec.slice_samples(0, int(10 * FS))
        recv = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        recv.bind(("127.0.0.1", 0))
        recv.settimeout(5.0)
        port = recv.getsockname()[1]
        sink = UdpSink("127.0.0.1", port)
        try:
            log = Pipeline(
                FileReplaySource(clip), four_class_model, [sink], save_dir=tmp_path
            ).run()
            frames = []
            while len(frames) < log.frames:
                frames.append(decode_frame(recv.recv(4096)))
            seqs = [f.seq for f in frames]
            assert seqs == sorted(seqs)
            assert all(len(f.smoothed) == 4 for f in frames)
        finally:
            sink.close()
            recv.close()


class TestWebSocketSink:
    def test_posterior_geometry_and_control_roundtrip(self, four_class_model, tmp_path):
        from websockets.sync.client import connect

        controller = Controller()
        sink = WebSocketSink(0, controller.queue)
        source = SynthLiveSource(SubjectProfile(seed=6, snr=1.0))
        pipeline = Pipeline(
            source, four_class_model, [sink], controller, save_dir=tmp_path, max_frames=80
        )
        t = threading.Thread(target=pipeline.run)
        try:
            with connect(f"ws://127.0.0.1:{sink.port}") as ws:
                t.start()
                got_posterior = got_geometry = None
                ws.send(json.dumps({"type": "control", "cmd": "pause"}))
                ack = None
                deadline = 200
                while deadline and not (got_posterior and got_geometry and ack):
                    msg = json.loads(ws.recv(timeout=10))
                    if msg["type"] == "posterior":
                        got_posterior = msg
                    elif msg["type"] == "geometry":
                        got_geometry = msg
                    elif msg["type"] == "ack":
                        ack = msg
                    deadline -= 1
                assert got_posterior and len(got_posterior["smoothed"]) == 4
                assert got_geometry["grid_n"] == 24
                assert ack["cmd"] == "pause" and ack["ok"] and ack["result"] == "paused"
                ws.send(json.dumps({"type": "control", "cmd": "resume"}))
        finally:
            t.join(timeout=30)
            sink.close()

    def test_save_ack_carries_path(self, four_class_model, tmp_path):
        from websockets.sync.client import connect

        controller = Controller()
        sink = WebSocketSink(0, controller.queue)
        source = SynthLiveSource(SubjectProfile(seed=7, snr=1.0))
        pipeline = Pipeline(
            source, four_class_model, [sink], controller, save_dir=tmp_path, max_frames=40
        )
        t = threading.Thread(target=pipeline.run)
        try:
            with connect(f"ws://127.0.0.1:{sink.port}") as ws:
                t.start()
                # wait for geometry to exist before asking for a save
                while True:
                    msg = json.loads(ws.recv(timeout=10))
                    if msg["type"] == "geometry":
                        break
                ws.send(json.dumps({"type": "control", "cmd": "save"}))
                while True:
                    msg = json.loads(ws.recv(timeout=10))
                    if msg["type"] == "ack":
                        break
                assert msg["ok"] and msg["result"].endswith(".obj")
                assert (tmp_path / "design_0000.obj").exists()
        finally:
            t.join(timeout=30)
            sink.close()
