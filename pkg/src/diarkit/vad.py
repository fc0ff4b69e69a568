"""Voice activity detection and fixed-window segmentation.

Speech is detected by frame energy relative to the buffer's own noise
floor, so the decision is unaffected by overall gain. Detected regions
are then cut into overlapping fixed-length windows for embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer
from .errors import TooShort

MIN_REGION_S = 0.1
MIN_TAIL_S = 0.5

# Sentinel dB level for frames with exactly zero energy. Scaling the
# buffer leaves zero frames at zero, so using a constant keeps the
# classifier scale-invariant where log10 would produce -inf.
_ZERO_DB = -1e12


@dataclass(frozen=True)
class SpeechRegion:
    """A maximal detected span of speech, in seconds."""

    onset_s: float
    offset_s: float

    def __post_init__(self) -> None:
        if self.onset_s < 0:
            raise ValueError("onset_s must be >= 0")
        if self.offset_s <= self.onset_s:
            raise ValueError("offset_s must exceed onset_s")

    @property
    def duration_s(self) -> float:
        return self.offset_s - self.onset_s


@dataclass(frozen=True)
class Segment:
    """One clusterable window cut from a speech region."""

    file_id: str
    onset_s: float
    offset_s: float
    index: int

    def __post_init__(self) -> None:
        if self.onset_s < 0:
            raise ValueError("onset_s must be >= 0")
        if self.offset_s <= self.onset_s:
            raise ValueError("offset_s must exceed onset_s")
        if self.index < 0:
            raise ValueError("index must be >= 0")

    @property
    def duration_s(self) -> float:
        return self.offset_s - self.onset_s


def _frame_energies(x: np.ndarray, frame: int, hop: int) -> np.ndarray:
    n_frames = 1 + (len(x) - frame) // hop
    idx = np.arange(frame)[None, :] + (np.arange(n_frames) * hop)[:, None]
    return np.sum(x[idx] ** 2, axis=1)


def _spectral_flatness(x: np.ndarray, frame: int, hop: int) -> float:
    """Geometric over arithmetic mean of the averaged power spectrum.

    Near 1 for broadband noise, near 0 for tonal content. Normalised by
    the peak bin so the measure is independent of signal scale.
    """
    n_frames = 1 + (len(x) - frame) // hop
    idx = np.arange(frame)[None, :] + (np.arange(n_frames) * hop)[:, None]
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(frame) / frame)
    spec = np.abs(np.fft.rfft(x[idx] * w, axis=1)) ** 2
    power = np.mean(spec, axis=0)[1:]  # DC excluded; it was removed anyway
    peak = float(np.max(power))
    if peak <= 0.0:
        return 1.0
    p = power / peak + 1e-12
    return float(np.exp(np.mean(np.log(p))) / np.mean(p))


def energy_vad(
    buf: AudioBuffer,
    frame_ms: float = 30.0,
    hop_ms: float = 10.0,
    threshold_db: float = 6.0,
    hangover_ms: float = 200.0,
) -> list[SpeechRegion]:
    """Detect speech spans by relative frame energy.

    A frame is speech when its energy in dB is at least ``threshold_db``
    above the noise floor, taken as the 10th percentile of frame
    energies. Gaps shorter than ``hangover_ms`` are closed and regions
    shorter than 100 ms dropped.

    When the frame energies span less than ``threshold_db`` the relative
    rule cannot separate anything (a constant tone and steady noise look
    identical to it); the whole buffer is then classified at once by
    spectral flatness: tonal content becomes one region, broadband noise
    none.

    Raises TooShort when the buffer holds less than one frame.
    """
    if frame_ms <= 0 or hop_ms <= 0 or hangover_ms < 0:
        raise ValueError("frame_ms and hop_ms must be > 0, hangover_ms >= 0")
    frame = int(round(buf.sample_rate_hz * frame_ms / 1000.0))
    hop = int(round(buf.sample_rate_hz * hop_ms / 1000.0))
    if len(buf) < frame:
        raise TooShort(
            f"buffer of {len(buf)} samples is shorter than one "
            f"{frame}-sample frame"
        )

    x = buf.samples.astype(np.float64)
    x = x - np.mean(x)
    if not np.any(x):
        return []

    energy = _frame_energies(x, frame, hop)
    db = np.full(len(energy), _ZERO_DB)
    nz = energy > 0.0
    db[nz] = 10.0 * np.log10(energy[nz])

    floor = float(np.percentile(db, 10.0))
    if float(np.max(db)) - floor < threshold_db:
        # Uniform-energy buffer; fall back to a whole-buffer decision.
        if _spectral_flatness(x, frame, hop) < 0.3:
            return [SpeechRegion(0.0, buf.duration_s)]
        return []

    speech = db >= floor + threshold_db

    # Contiguous speech frame runs, as [onset, offset) sample intervals.
    rate = buf.sample_rate_hz
    runs: list[list[int]] = []
    for i in np.flatnonzero(speech):
        on = int(i) * hop
        off = int(i) * hop + frame
        if runs and on <= runs[-1][1]:
            runs[-1][1] = max(runs[-1][1], off)
        else:
            runs.append([on, off])

    hangover = hangover_ms / 1000.0 * rate
    merged: list[list[int]] = []
    for on, off in runs:
        if merged and on - merged[-1][1] < hangover:
            merged[-1][1] = max(merged[-1][1], off)
        else:
            merged.append([on, off])

    return [
        SpeechRegion(on / rate, off / rate)
        for on, off in merged
        if (off - on) / rate >= MIN_REGION_S
    ]


def uniform_segment(
    regions: list[SpeechRegion],
    window_s: float = 1.5,
    hop_s: float = 0.75,
    file_id: str = "",
) -> list[Segment]:
    """Cut speech regions into overlapping fixed-length windows.

    Full windows slide at ``hop_s`` while they fit inside the region. A
    final window ending at the region offset is added when it covers
    time the full windows missed and is at least 0.5 s long; it is the
    whole region when the region is shorter than ``window_s``.
    """
    if window_s <= 0 or hop_s <= 0:
        raise ValueError("window_s and hop_s must be > 0")
    eps = 1e-9
    spans: list[tuple[float, float]] = []
    for r in sorted(regions, key=lambda r: r.onset_s):
        last_onset = None
        k = 0
        while r.onset_s + k * hop_s + window_s <= r.offset_s + eps:
            onset = r.onset_s + k * hop_s
            spans.append((onset, min(onset + window_s, r.offset_s)))
            last_onset = onset
            k += 1
        tail_onset = max(r.onset_s, r.offset_s - window_s)
        is_new = last_onset is None or tail_onset > last_onset + eps
        if is_new and r.offset_s - tail_onset >= MIN_TAIL_S - eps:
            spans.append((tail_onset, r.offset_s))
    return [
        Segment(file_id=file_id, onset_s=on, offset_s=off, index=i)
        for i, (on, off) in enumerate(spans)
    ]
