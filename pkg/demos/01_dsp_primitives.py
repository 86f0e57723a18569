"""
Signal primitives behind the reaction detector
==============================================

A quick tour of the low-level pieces everything else is built from:
movement level, calibrated sound level, low-pass filtering, the log-mel
patch fed to the sound classifier, and chroma sequences compared with
dynamic time warping.
"""

import numpy as np

from musereact import dsp

rng = np.random.default_rng(0)

# Movement level is the standard deviation of the accelerometer magnitude
# over one second, in g.  A perfectly still earbud reads the 1 g gravity
# vector with no spread; humming adds a gentle wobble.
still = np.tile([0.0, 0.0, 1.0], (70, 1))
humming = still + rng.normal(0.0, 0.02, still.shape)
print(f"movement level, still:   {dsp.movement_level(still):.4f} g")
print(f"movement level, humming: {dsp.movement_level(humming):.4f} g")

# Sound level uses a 94 dB calibration offset, so a full-scale square wave
# lands exactly on the calibration point and silence falls far below it.
square = np.where(np.arange(16000) % 2 == 0, 1.0, -1.0)
print(f"sound level, full-scale square: {dsp.sound_level_db(square):.2f} dB")
print(f"sound level, silence:           {dsp.sound_level_db(np.zeros(16000)):.2f} dB")

# The first-order low-pass keeps the band the classifier cares about and
# knocks down everything above it.  A 500 Hz tone sails through while an
# 8 kHz tone loses most of its energy.
fs = 16000
t = np.arange(fs) / fs
for freq in (500.0, 8000.0):
    tone = np.sin(2 * np.pi * freq * t)
    out = dsp.lowpass_first_order(tone, fs, 2000.0)
    ratio = np.sqrt(np.mean(out[fs // 2:] ** 2)) / np.sqrt(np.mean(tone ** 2))
    print(f"lowpass gain at {freq:6.0f} Hz: {ratio:.3f}")

# One second of audio becomes a 96x64 log-mel patch: 96 STFT frames by
# 64 mel bands.  For a pure tone the energy concentrates in one band.
tone = 0.5 * np.sin(2 * np.pi * 1000.0 * t)
patch = dsp.log_mel_patch(tone)
print(f"log-mel patch shape: {patch.shape}, "
      f"loudest band: {int(np.argmax(patch.mean(axis=0)))}")

# Pitch becomes a chroma class (0..11, C..B); octaves collapse onto the
# same class, which is what lets a hummed melody match the song's notes.
for f0 in (220.0, 440.0, 880.0):
    print(f"chroma of {f0:5.0f} Hz: {dsp.hz_to_chroma(f0, confidence=1.0)}")

# DTW compares chroma sequences while tolerating tempo differences.  A
# stretched copy of a phrase stays close; a different phrase does not.
phrase = np.array([0, 0, 4, 4, 7, 7, 4, 4])
stretched = np.repeat(phrase, 2)
other = np.array([1, 3, 6, 8, 10, 1, 3, 6])
print(f"dtw, phrase vs stretched copy: {dsp.dtw_distance(phrase, stretched):.1f}")
print(f"dtw, phrase vs other phrase:   {dsp.dtw_distance(phrase, other):.1f}")
