"""Frame sources: synthetic scene generators and detection-log replay.

A source is an iterable of Frames. Synthetic cameras pace themselves with
real sleeps (scaled by ``time_scale``) and carry the per-frame extraction
delay on the frame itself.
"""

from __future__ import annotations

import json
import random
import time
from pathlib import Path
from typing import Iterator, Optional

from ..core import DetectionRecord
from .buffers import Frame


def now_ms() -> float:
    return time.monotonic() * 1000.0


class SyntheticCamera:
    """Emits frames of a (possibly constant) ground-truth count scene.

    The frame payload is a dict of the four class counts visible to the
    camera. ``extract_delay_ms`` is slept (scaled) and recorded on the
    frame as the extraction-stage latency sample.
    """

    def __init__(
        self,
        camera_id: int,
        fps: float = 10.0,
        motorized_in: int = 0,
        non_motorized_in: int = 0,
        motorized_out: int = 0,
        non_motorized_out: int = 0,
        extract_delay_ms: float = 5.0,
        jitter_ms: float = 0.0,
        n_frames: Optional[int] = None,
        time_scale: float = 1.0,
        seed: int = 0,
        fail_after: Optional[int] = None,
    ):
        if fps <= 0:
            raise ValueError("fps must be > 0")
        self.camera_id = camera_id
        self.fps = fps
        self.counts = {
            "motorized_in": motorized_in,
            "non_motorized_in": non_motorized_in,
            "motorized_out": motorized_out,
            "non_motorized_out": non_motorized_out,
        }
        self.extract_delay_ms = extract_delay_ms
        self.jitter_ms = jitter_ms
        self.n_frames = n_frames
        self.time_scale = time_scale
        self.fail_after = fail_after
        self._rng = random.Random((seed << 8) ^ camera_id)

    def extraction_sample(self) -> float:
        jitter = self._rng.uniform(-self.jitter_ms, self.jitter_ms)
        return max(0.0, self.extract_delay_ms + jitter)

    def __iter__(self) -> Iterator[Frame]:
        period_s = 1.0 / self.fps
        seq = 0
        while self.n_frames is None or seq < self.n_frames:
            if self.fail_after is not None and seq >= self.fail_after:
                raise RuntimeError(f"camera {self.camera_id} stream lost")
            extraction_ms = self.extraction_sample()
            sleep_s = (period_s + extraction_ms / 1000.0) * self.time_scale
            if sleep_s > 0:
                time.sleep(sleep_s)
            yield Frame(
                camera_id=self.camera_id,
                seq=seq,
                capture_ts_ms=now_ms(),
                payload=dict(self.counts),
                extraction_ms=extraction_ms,
            )
            seq += 1


class ReplaySource:
    """Replays a line-delimited JSON detection log as frames.

    Each frame's payload is the logged DetectionRecord; pair with the
    replay detector, which passes it through verbatim.
    """

    def __init__(self, path: str | Path, camera_id: Optional[int] = None,
                 time_scale: float = 0.0, fps: float = 10.0):
        self.path = Path(path)
        self.camera_id = camera_id
        self.time_scale = time_scale
        self.fps = fps

    def __iter__(self) -> Iterator[Frame]:
        period_s = 1.0 / self.fps
        seq = 0
        with self.path.open() as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = DetectionRecord.from_dict(json.loads(line))
                if self.camera_id is not None and record.camera_id != self.camera_id:
                    continue
                if self.time_scale > 0:
                    time.sleep(period_s * self.time_scale)
                yield Frame(
                    camera_id=record.camera_id,
                    seq=seq,
                    capture_ts_ms=now_ms(),
                    payload=record,
                    extraction_ms=0.0,
                )
                seq += 1
