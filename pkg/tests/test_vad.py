"""Voice activity detection and windowing behavior."""

import numpy as np
import pytest

from diarkit.audio_io import AudioBuffer
from diarkit.errors import TooShort
from diarkit.vad import SpeechRegion, Segment, energy_vad, uniform_segment

from conftest import tone

RATE = 16000


def _buf(x: np.ndarray) -> AudioBuffer:
    return AudioBuffer(np.asarray(x, dtype=np.float32), RATE)


def test_silence_gives_no_regions():
    assert energy_vad(_buf(np.zeros(RATE))) == []


def test_constant_tone_is_one_full_region():
    regions = energy_vad(tone(440.0, 3.0, amp=0.9))
    assert len(regions) == 1
    assert regions[0].onset_s == pytest.approx(0.0, abs=0.05)
    assert regions[0].offset_s == pytest.approx(3.0, abs=0.05)


def test_tone_silence_tone_gives_two_regions():
    rng = np.random.default_rng(5)
    quiet = 0.5e-3 * rng.standard_normal(RATE)  # -60 dB re the tone
    x = np.concatenate([tone(440.0, 1.0).samples, quiet, tone(440.0, 1.0).samples])
    regions = energy_vad(_buf(x))
    assert len(regions) == 2
    assert regions[0].onset_s == pytest.approx(0.0, abs=0.05)
    assert regions[0].offset_s == pytest.approx(1.0, abs=0.05)
    assert regions[1].onset_s == pytest.approx(2.0, abs=0.05)
    assert regions[1].offset_s == pytest.approx(3.0, abs=0.05)


def test_scale_invariance():
    rng = np.random.default_rng(11)
    x = np.concatenate(
        [
            0.5e-3 * rng.standard_normal(RATE // 2),
            tone(300.0, 1.0).samples,
            0.5e-3 * rng.standard_normal(RATE // 2),
        ]
    )
    base = energy_vad(_buf(x))
    assert base == energy_vad(_buf(1000.0 * x))
    assert base == energy_vad(_buf(1e-4 * x))


def test_dc_offset_does_not_change_regions():
    rng = np.random.default_rng(12)
    x = np.concatenate(
        [0.5e-3 * rng.standard_normal(RATE), tone(250.0, 1.0).samples]
    )
    assert energy_vad(_buf(x)) == energy_vad(_buf(x + 0.1))


def test_hangover_closes_short_gap():
    rng = np.random.default_rng(13)
    gap = 0.5e-3 * rng.standard_normal(int(0.15 * RATE))  # 150 ms < 200 ms
    lead = 0.5e-3 * rng.standard_normal(RATE)
    x = np.concatenate(
        [lead, tone(440.0, 1.0).samples, gap, tone(440.0, 1.0).samples]
    )
    regions = energy_vad(_buf(x))
    assert len(regions) == 1
    assert regions[0].onset_s == pytest.approx(1.0, abs=0.05)
    assert regions[0].offset_s == pytest.approx(3.15, abs=0.05)


def test_short_burst_is_dropped():
    rng = np.random.default_rng(14)
    x = 0.5e-3 * rng.standard_normal(3 * RATE)
    mid = len(x) // 2
    burst = tone(440.0, 0.05).samples  # 50 ms < the 100 ms minimum
    x[mid : mid + len(burst)] += burst
    assert energy_vad(_buf(x)) == []


def test_noise_only_gives_no_regions():
    rng = np.random.default_rng(15)
    x = 0.1 * rng.standard_normal(5 * RATE)  # -20 dBFS white noise
    assert energy_vad(_buf(x)) == []


def test_too_short_buffer_raises():
    with pytest.raises(TooShort):
        energy_vad(_buf(np.ones(100)))


def test_region_validation():
    with pytest.raises(ValueError):
        SpeechRegion(1.0, 1.0)
    with pytest.raises(ValueError):
        SpeechRegion(-0.1, 1.0)


# --- uniform_segment ---


def test_empty_regions_give_no_segments():
    assert uniform_segment([]) == []


def test_exact_fit_region_gives_one_segment():
    segs = uniform_segment([SpeechRegion(0.0, 1.5)])
    assert len(segs) == 1
    assert segs[0].onset_s == 0.0
    assert segs[0].offset_s == 1.5
    assert segs[0].index == 0


def test_three_second_region_enumeration():
    # Hand enumeration: onsets 0, 0.75, 1.5; the tail window [1.5, 3.0]
    # duplicates the last full window and must not be emitted again.
    segs = uniform_segment([SpeechRegion(0.0, 3.0)])
    assert [(s.onset_s, s.offset_s) for s in segs] == [
        (0.0, 1.5),
        (0.75, 2.25),
        (1.5, 3.0),
    ]
    assert [s.index for s in segs] == [0, 1, 2]


def test_tail_window_extends_coverage():
    # Hand enumeration for [0, 3.2]: full windows at 0, 0.75, 1.5 then a
    # tail [1.7, 3.2] to reach the region offset.
    segs = uniform_segment([SpeechRegion(0.0, 3.2)])
    onsets = [s.onset_s for s in segs]
    assert onsets == pytest.approx([0.0, 0.75, 1.5, 1.7])
    assert segs[-1].offset_s == pytest.approx(3.2)


def test_short_region_becomes_single_short_segment():
    segs = uniform_segment([SpeechRegion(0.0, 0.8)])
    assert [(s.onset_s, s.offset_s) for s in segs] == [(0.0, 0.8)]


def test_region_below_minimum_tail_is_skipped():
    assert uniform_segment([SpeechRegion(0.0, 0.4)]) == []


def _union_length(spans):
    total = 0.0
    last_end = None
    for on, off in sorted(spans):
        if last_end is None or on > last_end:
            total += off - on
            last_end = off
        elif off > last_end:
            total += off - last_end
            last_end = off
    return total


def test_segments_stay_inside_regions_property():
    rng = np.random.default_rng(21)
    for _ in range(50):
        regions = []
        t = 0.0
        for _ in range(rng.integers(1, 6)):
            t += float(rng.uniform(0.05, 2.0))
            dur = float(rng.uniform(0.2, 5.0))
            regions.append(SpeechRegion(t, t + dur))
            t += dur
        segs = uniform_segment(regions)
        for s in segs:
            assert any(
                r.onset_s - 1e-9 <= s.onset_s and s.offset_s <= r.offset_s + 1e-9
                for r in regions
            )
            assert 0.0 < s.duration_s <= 1.5 + 1e-9
        assert [s.index for s in segs] == list(range(len(segs)))
        assert sorted(s.onset_s for s in segs) == [s.onset_s for s in segs]
        seg_union = _union_length([(s.onset_s, s.offset_s) for s in segs])
        region_total = sum(r.duration_s for r in regions)
        assert seg_union <= region_total + 1e-9


def test_segment_validation():
    with pytest.raises(ValueError):
        Segment("f", 0.0, 0.0, 0)
    with pytest.raises(ValueError):
        Segment("f", 0.0, 1.0, -1)
