"""Synthetic corpus generation: voices, mixtures, and the dataset tree."""

import numpy as np
import pytest

from diarkit.audio_io import parse_rttm, read_wav
from diarkit.cluster import cosine_distance
from diarkit.corpus import (
    CorpusManifest,
    SpeakerProfile,
    default_profile_pool,
    generate_dataset,
    generate_mixture,
    split_counts,
    synth_utterance,
)
from diarkit.embed import MfccEmbedder
from diarkit.errors import BadSpeakerCount, BadSplit, IoError, TooShort
from diarkit.vad import Segment


def _profile(i=0):
    return default_profile_pool()[i]


class TestSpeakerProfile:
    def test_pool_has_24_valid_distinct_voices(self):
        pool = default_profile_pool()
        assert len(pool) == 24
        assert len({p.f0_hz for p in pool}) == 24
        for p in pool:
            centers = [f for f, _ in p.formants]
            assert centers == sorted(centers)

    def test_validation(self):
        good = _profile()
        with pytest.raises(ValueError):
            SpeakerProfile(50.0, good.formants, -6.0, 1)
        with pytest.raises(ValueError):
            SpeakerProfile(120.0, tuple(reversed(good.formants)), -6.0, 1)
        with pytest.raises(ValueError):
            SpeakerProfile(120.0, ((300.0, 0.0), (1200.0, 100.0), (2600.0, 200.0)), -6.0, 1)


class TestSynthUtterance:
    def test_two_seconds_is_exactly_32000_samples(self):
        buf = synth_utterance(_profile(), 2.0, seed=0)
        assert len(buf) == 32000
        assert buf.sample_rate_hz == 16000

    def test_too_short_rejected(self):
        with pytest.raises(TooShort):
            synth_utterance(_profile(), 0.1, seed=0)

    def test_deterministic_per_seed(self):
        a = synth_utterance(_profile(3), 1.5, seed=9)
        b = synth_utterance(_profile(3), 1.5, seed=9)
        c = synth_utterance(_profile(3), 1.5, seed=10)
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)

    def test_pool_separability_within_vs_between(self):
        # Same-voice embedding distance must sit well under the
        # different-voice distance, or clustering has nothing to work with.
        pool = default_profile_pool()
        embedder = MfccEmbedder()
        embs = []
        for p in pool:
            pair = []
            for seed in (0, 1):
                buf = synth_utterance(p, 2.0, seed=seed)
                seg = Segment(file_id="t", onset_s=0.0, offset_s=2.0, index=0)
                pair.append(embedder.embed(buf, seg))
            embs.append(pair)
        within = [cosine_distance(a, b) for a, b in embs]
        between = [
            cosine_distance(embs[i][0], embs[j][0])
            for i in range(len(pool))
            for j in range(i + 1, len(pool))
        ]
        assert np.mean(between) >= 2.0 * np.mean(within)


class TestGenerateMixture:
    def test_zero_speakers_is_quiet_noise(self):
        buf, turns = generate_mixture(0, 8.0, seed=3)
        assert turns == []
        assert len(buf) == 8 * 16000
        level_db = 20.0 * np.log10(np.sqrt(np.mean(buf.samples.astype(np.float64) ** 2)))
        assert -42.0 < level_db < -28.0

    def test_two_speakers_both_talk_enough(self):
        buf, turns = generate_mixture(2, 20.0, seed=1)
        per_speaker = {}
        for t in turns:
            per_speaker.setdefault(t.speaker_id, 0.0)
            per_speaker[t.speaker_id] += t.duration_s
        assert len(per_speaker) == 2
        assert all(total >= 2.0 for total in per_speaker.values())

    def test_every_speaker_appears_across_configs(self):
        for n in (1, 2, 3, 4):
            for duration in (4.0, 6.0, 12.0, 30.0):
                for seed in range(5):
                    _, turns = generate_mixture(n, duration, seed=seed)
                    assert len({t.speaker_id for t in turns}) == n
                    for t in turns:
                        assert 0.0 <= t.onset_s and t.offset_s <= duration + 1e-9
                        assert abs(t.onset_s * 1000 - round(t.onset_s * 1000)) < 1e-6

    def test_zero_overlap_fraction_means_disjoint_turns(self):
        for seed in range(5):
            _, turns = generate_mixture(3, 25.0, overlap_fraction=0.0, seed=seed)
            ordered = sorted(turns, key=lambda t: t.onset_s)
            for a, b in zip(ordered, ordered[1:]):
                assert b.onset_s >= a.offset_s - 1e-9

    def test_high_overlap_fraction_produces_overlap(self):
        overlapped = 0
        for seed in range(5):
            _, turns = generate_mixture(3, 30.0, overlap_fraction=0.3, seed=seed)
            ordered = sorted(turns, key=lambda t: t.onset_s)
            overlapped += sum(
                1 for a, b in zip(ordered, ordered[1:]) if b.onset_s < a.offset_s - 1e-9
            )
        assert overlapped > 0

    def test_speech_sum_bounded_by_stacked_duration(self):
        _, turns = generate_mixture(4, 15.0, seed=2)
        assert sum(t.duration_s for t in turns) <= 15.0 * 4

    def test_rttm_round_trip_is_exact(self):
        from diarkit.audio_io import emit_rttm

        _, turns = generate_mixture(2, 12.0, seed=5, file_id="f0")
        back = parse_rttm(emit_rttm(turns))
        original = [(t.file_id, t.speaker_id, t.onset_s, t.duration_s) for t in turns]
        parsed = [(t.file_id, t.speaker_id, t.onset_s, t.duration_s) for t in back]
        assert parsed == original

    def test_bad_inputs(self):
        with pytest.raises(BadSpeakerCount):
            generate_mixture(5, 20.0)
        with pytest.raises(TooShort):
            generate_mixture(1, 3.0)
        with pytest.raises(ValueError):
            generate_mixture(2, 20.0, overlap_fraction=0.5)


class TestSplitCounts:
    def test_known_apportionments(self):
        assert split_counts(58) == (41, 11, 6)
        assert split_counts(60) == (42, 12, 6)
        assert split_counts(10) == (7, 2, 1)
        assert split_counts(1) == (1, 0, 0)

    def test_always_sums_to_total(self):
        for n in range(0, 200):
            assert sum(split_counts(n)) == n


class TestGenerateDataset:
    LAYOUT = {0: 2, 1: 3, 2: 2}

    def test_tree_matches_manifest(self, tmp_path):
        manifest = generate_dataset(tmp_path, layout=self.LAYOUT, seed=11)
        assert manifest.folder_counts() == self.LAYOUT
        assert (tmp_path / "manifest.json").exists()
        for e in manifest.entries:
            wav = tmp_path / e.path
            rttm = tmp_path / e.rttm_path
            assert wav.exists() and rttm.exists()
            buf = read_wav(wav)
            assert buf.sample_rate_hz == 16000
            assert 15.0 <= len(buf) / 16000 <= 45.0
            turns = parse_rttm(rttm.read_text())
            assert len({t.speaker_id for t in turns}) == e.folder
            assert set(t.speaker_id for t in turns) == set(e.speaker_ids)
            for t in turns:
                assert t.offset_s <= e.duration_s + 1e-6

    def test_split_assignment_per_folder(self, tmp_path):
        manifest = generate_dataset(tmp_path, layout=self.LAYOUT, seed=11)
        by_folder = {}
        for e in manifest.entries:
            by_folder.setdefault(e.folder, []).append(e.split)
        for folder, splits in by_folder.items():
            want = split_counts(self.LAYOUT[folder])
            got = (splits.count("train"), splits.count("val"), splits.count("test"))
            assert got == want

    def test_same_seed_twice_byte_identical(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        ma = generate_dataset(a_dir, layout={0: 1, 2: 2}, seed=7)
        generate_dataset(b_dir, layout={0: 1, 2: 2}, seed=7)
        for e in ma.entries:
            assert (a_dir / e.path).read_bytes() == (b_dir / e.path).read_bytes()
            assert (a_dir / e.rttm_path).read_bytes() == (b_dir / e.rttm_path).read_bytes()
        assert (a_dir / "manifest.json").read_bytes() == (b_dir / "manifest.json").read_bytes()

    def test_manifest_round_trip(self, tmp_path):
        manifest = generate_dataset(tmp_path, layout={1: 2}, seed=3)
        back = CorpusManifest.load(tmp_path / "manifest.json")
        assert back == manifest

    def test_bad_configs(self, tmp_path):
        with pytest.raises(BadSplit):
            generate_dataset(tmp_path, layout={1: 1}, split=(0.5, 0.5, 0.5))
        with pytest.raises(BadSpeakerCount):
            generate_dataset(tmp_path, layout={5: 1})

    def test_unwritable_target_raises_io_error(self, tmp_path):
        blocker = tmp_path / "occupied"
        blocker.write_text("file, not a directory")
        with pytest.raises(IoError):
            generate_dataset(blocker / "tree", layout={1: 1}, seed=0)
