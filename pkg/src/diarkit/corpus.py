"""Synthetic conversation corpus with exact ground-truth annotations.

Voices are harmonic sources shaped by formant resonances, so no
recorded speech is needed: every file's speaker turns are known to the
millisecond, and the whole tree regenerates bit-identically from one
seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import AudioBuffer, Turn, emit_rttm, write_wav
from .errors import BadSpeakerCount, BadSplit, IoError, TooShort

RATE = 16_000
DEFAULT_LAYOUT = {0: 60, 1: 58, 2: 51, 3: 50, 4: 50}
DEFAULT_SPLIT = (0.7, 0.2, 0.1)
SPLIT_NAMES = ("train", "val", "test")

# Conversation scheduling constants (seconds).
TURN_LO, TURN_HI = 2.0, 4.5
TURN_FLOOR = 0.5
PAUSE_LO, PAUSE_HI = 0.3, 0.9
LEAD_LO, LEAD_HI = 0.5, 1.0
BED_NOISE_RMS = 1e-3  # -60 dBFS behind speech
MAX_HARMONIC_HZ = 3600.0


@dataclass(frozen=True)
class SpeakerProfile:
    """Parameters of one synthetic voice.

    ``formants`` holds three (center_hz, bandwidth_hz) pairs with
    ascending centers.
    """

    f0_hz: float
    formants: tuple[tuple[float, float], ...]
    harmonic_tilt_db_per_octave: float
    seed: int

    def __post_init__(self) -> None:
        if not 90.0 <= self.f0_hz <= 280.0:
            raise ValueError("f0_hz must lie in [90, 280]")
        if len(self.formants) != 3:
            raise ValueError("exactly three formants required")
        centers = [f for f, _ in self.formants]
        if sorted(centers) != centers or len(set(centers)) != 3:
            raise ValueError("formant centers must be strictly ascending")
        if any(bw <= 0 for _, bw in self.formants):
            raise ValueError("formant bandwidths must be > 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


def default_profile_pool() -> list[SpeakerProfile]:
    """The fixed pool of 24 voices used for corpus generation."""
    pool = []
    for i in range(24):
        f1 = 320.0 + 130.0 * (i % 4)
        f2 = 1100.0 + 400.0 * ((i // 4) % 4) + 50.0 * (i % 2)
        f3 = 2500.0 + 400.0 * (i % 3)
        pool.append(
            SpeakerProfile(
                f0_hz=92.0 + 8.0 * i,
                formants=(
                    (f1, 80.0 + 30.0 * (i % 3)),
                    (f2, 120.0 + 40.0 * ((i + 1) % 3)),
                    (f3, 200.0 + 50.0 * (i % 2)),
                ),
                harmonic_tilt_db_per_octave=-12.0 + 2.0 * (i % 5),
                seed=1000 + i,
            )
        )
    return pool


def _formant_weight(freqs: np.ndarray, profile: SpeakerProfile) -> np.ndarray:
    w = np.full(freqs.shape, 0.05)
    for center, bw in profile.formants:
        w = w + 1.0 / (1.0 + ((freqs - center) / bw) ** 2)
    return w


def synth_utterance(profile: SpeakerProfile, duration_s: float, seed: int) -> AudioBuffer:
    """One continuous stretch of voiced speech, deterministic per seed.

    Raises TooShort below 0.5 s.
    """
    if duration_s < 0.5:
        raise TooShort(f"utterance needs >= 0.5 s, got {duration_s}")
    rng = np.random.default_rng(np.random.SeedSequence([profile.seed, abs(int(seed))]))
    n = int(round(duration_s * RATE))
    t = np.arange(n) / RATE

    # Slow +-3% wander of the fundamental.
    n_ctrl = max(int(math.ceil(duration_s * 25.0)) + 2, 4)
    ctrl = np.clip(rng.normal(scale=0.5, size=n_ctrl), -1.0, 1.0)
    ctrl_t = np.linspace(0.0, duration_s, n_ctrl)
    f0_track = profile.f0_hz * (1.0 + 0.03 * np.interp(t, ctrl_t, ctrl))
    phase = 2.0 * np.pi * np.cumsum(f0_track) / RATE

    n_harm = max(1, int(MAX_HARMONIC_HZ / profile.f0_hz))
    k = np.arange(1, n_harm + 1)
    tilt_gain = 10.0 ** (profile.harmonic_tilt_db_per_octave * np.log2(k) / 20.0)
    amps = _formant_weight(k * profile.f0_hz, profile) * tilt_gain
    phases0 = rng.uniform(0.0, 2.0 * np.pi, size=n_harm)

    base = np.exp(1j * phase)
    rot = np.exp(1j * phases0)
    cur = np.ones(n, dtype=np.complex128)
    voiced = np.zeros(n)
    for i in range(n_harm):
        cur = cur * base
        voiced += amps[i] * np.imag(cur * rot[i])
    voiced /= max(np.sqrt(np.mean(voiced**2)), 1e-12)

    # Syllabic amplitude modulation with inter-syllable dips.
    syl_rate = rng.uniform(3.0, 5.0)
    am_phase = rng.uniform(0.0, 2.0 * np.pi)
    env = 0.5 + 0.5 * np.sin(2.0 * np.pi * syl_rate * t + am_phase)
    env = 0.25 + 0.75 * env**1.5

    x = (voiced + 0.04 * rng.standard_normal(n)) * env
    x *= 0.1 / max(np.sqrt(np.mean(x**2)), 1e-12)
    return AudioBuffer(samples=x.astype(np.float32), sample_rate_hz=RATE)


def _schedule_turns(n_speakers, duration_s, overlap_fraction, rng):
    """Round-robin turn schedule; every speaker talks at least once.

    Times are quantized to 1 ms so the RTTM round trip is exact.
    """
    t_max = duration_s - min(rng.uniform(LEAD_LO, LEAD_HI), 0.1 * duration_s)
    queue = [int(s) for s in rng.permutation(n_speakers)]
    schedule = []
    prev_off = None
    prev_len = None
    last_spk = None
    while True:
        if queue:
            spk = queue.pop(0)
        else:
            others = [s for s in range(n_speakers) if s != last_spk]
            spk = int(rng.choice(others)) if others else last_spk

        if prev_off is None:
            onset = min(rng.uniform(LEAD_LO, LEAD_HI), 0.1 * duration_s)
        elif overlap_fraction > 0 and rng.random() < 2.0 * overlap_fraction:
            back = min(rng.uniform(0.2, 0.7), 0.4 * prev_len)
            onset = max(0.0, prev_off - back)
        else:
            # Keep enough room for the speakers still waiting.
            need = len(queue) * (TURN_FLOOR + PAUSE_LO) + TURN_FLOOR
            pause_cap = max(0.05, t_max - prev_off - need)
            onset = prev_off + min(rng.uniform(PAUSE_LO, PAUSE_HI), pause_cap)

        reserve = len(queue) * (TURN_FLOOR + PAUSE_LO)
        cap = t_max - onset - reserve
        length = min(rng.uniform(TURN_LO, TURN_HI), max(cap, TURN_FLOOR))
        offset = min(onset + length, duration_s)
        if offset - onset >= TURN_FLOOR - 1e-9:
            onset_q = round(onset, 3)
            offset_q = round(offset, 3)
            schedule.append((spk, onset_q, offset_q))
            prev_off = offset_q
            prev_len = offset_q - onset_q
            last_spk = spk
        if not queue and (prev_off is None or prev_off + PAUSE_LO + TURN_LO > t_max):
            break
        if prev_off is not None and prev_off >= duration_s - TURN_FLOOR:
            break
    return schedule


def generate_mixture(
    n_speakers: int,
    duration_s: float,
    overlap_fraction: float = 0.1,
    seed=0,
    profiles: list[SpeakerProfile] | None = None,
    speaker_ids: list[str] | None = None,
    file_id: str = "mix",
) -> tuple[AudioBuffer, list[Turn]]:
    """A multi-speaker conversation and its exact reference turns.

    Zero speakers yields low-level white noise and no turns. Raises
    BadSpeakerCount outside 0..4 and TooShort below 4 s with speakers.
    """
    if not 0 <= n_speakers <= 4:
        raise BadSpeakerCount(f"n_speakers must be 0..4, got {n_speakers}")
    if not 0.0 <= overlap_fraction <= 0.3:
        raise ValueError("overlap_fraction must lie in [0, 0.3]")
    if n_speakers >= 1 and duration_s < 4.0:
        raise TooShort("mixtures with speakers need >= 4 s")
    if duration_s <= 0:
        raise ValueError("duration_s must be > 0")

    rng = np.random.default_rng(seed)
    n = int(round(duration_s * RATE))

    if n_speakers == 0:
        level = 10.0 ** (rng.uniform(-40.0, -30.0) / 20.0)
        x = rng.standard_normal(n) * level
        return AudioBuffer(samples=x.astype(np.float32), sample_rate_hz=RATE), []

    if profiles is None:
        pool = default_profile_pool()
        picks = rng.choice(len(pool), size=n_speakers, replace=False)
        profiles = [pool[int(i)] for i in picks]
        if speaker_ids is None:
            speaker_ids = [f"p{int(i)}" for i in picks]
    if len(profiles) != n_speakers:
        raise ValueError("profiles must match n_speakers")
    if speaker_ids is None:
        speaker_ids = [f"s{i}" for i in range(n_speakers)]

    schedule = _schedule_turns(n_speakers, duration_s, overlap_fraction, rng)

    x = rng.standard_normal(n) * BED_NOISE_RMS
    turns = []
    for spk, onset, offset in schedule:
        turn_seed = int(rng.integers(0, 2**31))
        utt = synth_utterance(profiles[spk], offset - onset, seed=turn_seed)
        start = int(round(onset * RATE))
        stop = min(start + len(utt), n)
        x[start:stop] += utt.samples[: stop - start].astype(np.float64)
        turns.append(
            Turn(
                file_id=file_id,
                speaker_id=speaker_ids[spk],
                onset_s=onset,
                duration_s=round(offset - onset, 3),
            )
        )

    peak = np.max(np.abs(x))
    if peak > 0.97:
        x *= 0.97 / peak
    buf = AudioBuffer(samples=x.astype(np.float32), sample_rate_hz=RATE)
    return buf, sorted(turns, key=lambda t: (t.onset_s, t.speaker_id))


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    folder: int
    duration_s: float
    speaker_ids: tuple[str, ...]
    rttm_path: str
    split: str

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "folder": self.folder,
            "duration_s": self.duration_s,
            "speaker_ids": list(self.speaker_ids),
            "rttm_path": self.rttm_path,
            "split": self.split,
        }


@dataclass(frozen=True)
class CorpusManifest:
    """Index of one generated corpus tree, ordered by file path."""

    entries: tuple[ManifestEntry, ...]
    seed: int

    def folder_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for e in self.entries:
            counts[e.folder] = counts.get(e.folder, 0) + 1
        return counts

    def to_dict(self) -> dict:
        return {"seed": self.seed, "entries": [e.to_dict() for e in self.entries]}

    def save(self, path) -> None:
        try:
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(self.to_dict(), fh, indent=2)
                fh.write("\n")
        except OSError as exc:
            raise IoError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise IoError(str(exc)) from exc
        entries = tuple(
            ManifestEntry(
                path=e["path"],
                folder=int(e["folder"]),
                duration_s=float(e["duration_s"]),
                speaker_ids=tuple(e["speaker_ids"]),
                rttm_path=e["rttm_path"],
                split=e["split"],
            )
            for e in raw["entries"]
        )
        return cls(entries=entries, seed=int(raw["seed"]))


def split_counts(total: int, split=DEFAULT_SPLIT) -> tuple[int, int, int]:
    """Largest-remainder apportionment; ties break train > val > test."""
    base = [int(math.floor(total * f)) for f in split]
    # Quantized so float noise cannot break an intended tie.
    remainders = [round(total * f - b, 9) for f, b in zip(split, base)]
    order = sorted(range(3), key=lambda i: (-remainders[i], i))
    for i in range(total - sum(base)):
        base[order[i % 3]] += 1
    return tuple(base)


def generate_dataset(
    out_dir,
    layout: dict[int, int] | None = None,
    split=DEFAULT_SPLIT,
    seed: int = 0,
    overlap_fraction: float = 0.1,
) -> CorpusManifest:
    """Write the WAV + RTTM corpus tree and its manifest.

    Layout maps folder index (= speaker count) to file count. Every file
    derives its own random stream from (seed, folder, index), so the
    tree is byte-identical across runs and machines.

    Raises BadSplit on malformed fractions, BadSpeakerCount on folder
    indices above 4, and IoError on filesystem failures.
    """
    layout = dict(DEFAULT_LAYOUT) if layout is None else dict(layout)
    if len(split) != 3 or any(f < 0 for f in split) or abs(sum(split) - 1.0) > 1e-9:
        raise BadSplit(f"split must be three fractions summing to 1, got {split}")
    for folder, count in layout.items():
        if not 0 <= folder <= 4:
            raise BadSpeakerCount(f"folder index {folder} outside 0..4")
        if count < 0:
            raise ValueError("file counts must be >= 0")

    out_dir = Path(out_dir)
    pool = default_profile_pool()
    entries = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for folder in sorted(layout):
            count = layout[folder]
            if count == 0:
                continue
            folder_dir = out_dir / str(folder)
            folder_dir.mkdir(exist_ok=True)
            n_train, n_val, _ = split_counts(count, split)
            for idx in range(count):
                file_rng = np.random.default_rng(
                    np.random.SeedSequence([seed, folder, idx, 0])
                )
                duration = float(file_rng.uniform(15.0, 45.0))
                file_id = f"{folder}_{idx:03d}"
                if folder == 0:
                    picks, profiles, ids = [], None, None
                else:
                    picks = [
                        int(i)
                        for i in file_rng.choice(len(pool), size=folder, replace=False)
                    ]
                    profiles = [pool[i] for i in picks]
                    ids = [f"p{i}" for i in picks]
                buf, turns = generate_mixture(
                    n_speakers=folder,
                    duration_s=duration,
                    overlap_fraction=overlap_fraction,
                    seed=np.random.SeedSequence([seed, folder, idx, 1]),
                    profiles=profiles,
                    speaker_ids=ids,
                    file_id=file_id,
                )
                wav_rel = f"{folder}/{file_id}.wav"
                rttm_rel = f"{folder}/{file_id}.rttm"
                write_wav(folder_dir / f"{file_id}.wav", buf)
                with open(folder_dir / f"{file_id}.rttm", "w", encoding="utf-8") as fh:
                    fh.write(emit_rttm(turns))
                if idx < n_train:
                    part = "train"
                elif idx < n_train + n_val:
                    part = "val"
                else:
                    part = "test"
                entries.append(
                    ManifestEntry(
                        path=wav_rel,
                        folder=folder,
                        duration_s=round(len(buf) / RATE, 3),
                        speaker_ids=tuple(f"p{i}" for i in picks),
                        rttm_path=rttm_rel,
                        split=part,
                    )
                )
    except OSError as exc:
        raise IoError(str(exc)) from exc

    entries.sort(key=lambda e: e.path)
    manifest = CorpusManifest(entries=tuple(entries), seed=seed)
    manifest.save(out_dir / "manifest.json")
    return manifest
