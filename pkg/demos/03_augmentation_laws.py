"""Check the augmentation operators against their physical laws.

Pitch shifting by s semitones multiplies frequencies by 2^(s/12) at
constant duration; speed change by a factor f divides the duration by f
and multiplies frequencies by f; additive noise at intensity a lands at
an SNR of -20*log10(a) dB. All three are measured here on a pure tone.

Usage: python3 demos/03_augmentation_laws.py
"""

import numpy as np

from diarkit import AudioBuffer, AugmentSpec, augment_file, estimate_snr_db


def tone(freq_hz: float, duration_s: float = 1.0, rate: int = 16_000) -> AudioBuffer:
    t = np.arange(int(duration_s * rate)) / rate
    return AudioBuffer(0.5 * np.sin(2 * np.pi * freq_hz * t), rate)


def peak_hz(buf: AudioBuffer) -> float:
    mag = np.abs(np.fft.rfft(buf.samples * np.hanning(len(buf))))
    return float(np.argmax(mag) * buf.sample_rate_hz / len(buf))


src = tone(440.0)
print(f"source: 440 Hz tone, {src.duration_s:.2f} s\n")

for st in (-5, -2, 2, 5):
    shifted = augment_file(src, AugmentSpec(noise_intensity=0.0, pitch_semitones=st))
    want = 440.0 * 2 ** (st / 12)
    print(
        f"pitch {st:+d} st: peak {peak_hz(shifted):7.1f} Hz (law {want:7.1f}), "
        f"duration {shifted.duration_s:.2f} s"
    )

print()
for factor in (0.9, 1.0, 1.1):
    fast = augment_file(src, AugmentSpec(noise_intensity=0.0, speed_factor=factor))
    print(
        f"speed {factor:.1f}x: duration {fast.duration_s:.3f} s "
        f"(law {src.duration_s / factor:.3f}), peak {peak_hz(fast):5.1f} Hz "
        f"(law {440.0 * factor:5.1f})"
    )

print()
for intensity in (0.05, 0.1, 0.2):
    noisy = augment_file(src, AugmentSpec(noise_intensity=intensity, rng_seed=4))
    want = -20.0 * np.log10(intensity)
    print(
        f"noise {intensity:4.2f}: snr {estimate_snr_db(noisy, src):5.2f} dB "
        f"(law {want:5.2f})"
    )
