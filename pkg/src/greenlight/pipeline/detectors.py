"""Detector adapters converting frames to DetectionRecords.

``detect`` returns (record, inference_ms). The synthetic adapter emulates a
model with a characteristic per-frame delay and configurable count noise;
the replay adapter passes logged records through verbatim.
"""

from __future__ import annotations

import random
import time
from typing import Protocol

from ..core import DetectionRecord
from .buffers import Frame
from .sources import now_ms


class DetectorAdapter(Protocol):
    def detect(self, frame: Frame) -> tuple[DetectionRecord, float]: ...


class SyntheticDetector:
    """Emulated detector: fixed delay with jitter, miss/false-count noise.

    ``time_scale`` scales the real sleep only; the reported inference
    sample is always the emulated delay, so latency ledgers reflect the
    modeled detector regardless of how fast the test host runs.
    """

    def __init__(
        self,
        delay_ms: float = 0.0,
        jitter_ms: float = 0.0,
        miss_rate: float = 0.0,
        false_rate: float = 0.0,
        time_scale: float = 1.0,
        seed: int = 0,
        fail_every: int = 0,
    ):
        if not (0.0 <= miss_rate <= 1.0):
            raise ValueError("miss_rate must be in [0, 1]")
        self.delay_ms = delay_ms
        self.jitter_ms = jitter_ms
        self.miss_rate = miss_rate
        self.false_rate = false_rate
        self.time_scale = time_scale
        self.fail_every = fail_every
        self._rng = random.Random(seed)
        self._n = 0

    def _noisy(self, count: int) -> int:
        if self.miss_rate > 0:
            count = sum(
                1 for _ in range(count) if self._rng.random() >= self.miss_rate
            )
        if self.false_rate > 0:
            # Poisson draw via inversion; rates are small.
            L = self.false_rate
            k, p, thresh = 0, 1.0, pow(2.718281828459045, -L)
            while True:
                p *= self._rng.random()
                if p <= thresh:
                    break
                k += 1
            count += k
        return count

    def detect(self, frame: Frame) -> tuple[DetectionRecord, float]:
        self._n += 1
        if self.fail_every and self._n % self.fail_every == 0:
            raise RuntimeError("detector failure (synthetic)")
        jitter = self._rng.uniform(-self.jitter_ms, self.jitter_ms)
        inference_ms = max(0.0, self.delay_ms + jitter)
        if inference_ms > 0 and self.time_scale > 0:
            time.sleep(inference_ms / 1000.0 * self.time_scale)
        counts = frame.payload
        record = DetectionRecord(
            camera_id=frame.camera_id,
            frame_ts_ms=int(frame.capture_ts_ms),
            motorized_in=self._noisy(counts["motorized_in"]),
            motorized_out=counts.get("motorized_out", 0),
            non_motorized_in=self._noisy(counts.get("non_motorized_in", 0)),
            non_motorized_out=counts.get("non_motorized_out", 0),
        )
        return record, inference_ms


class ReplayDetector:
    """Passes a logged DetectionRecord payload through unchanged."""

    def __init__(self, delay_ms: float = 0.0):
        self.delay_ms = delay_ms

    def detect(self, frame: Frame) -> tuple[DetectionRecord, float]:
        record = frame.payload
        if not isinstance(record, DetectionRecord):
            raise TypeError("replay detector expects DetectionRecord payloads")
        return record, self.delay_ms
