"""Signal primitives shared by the detection pipelines.

Everything here is a pure function of numpy arrays: movement/sound level
estimates used by the early-exit prefilters, the audio front end for the
sound-event classifier (resample, first-order low-pass, 96x64 log-mel
patch), pitch-to-chroma conversion, and dynamic time warping over chroma
sequences with an explicit unvoiced symbol.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.signal

from .core import InsufficientDataError, ParameterError

#: Chroma symbol for frames whose pitch confidence fell below threshold.
UNVOICED = -1

#: Substitution cost between a voiced and an unvoiced frame (half the
#: worst-case circular pitch-class distance of 6 applies twice, see below).
UNVOICED_COST = 6.0

# Log-mel front-end geometry (16 kHz input, one-second patches).
STFT_WINDOW = 400
STFT_HOP = 160
STFT_NFFT = 512
MEL_BANDS = 64
MEL_MIN_HZ = 125.0
MEL_MAX_HZ = 7500.0
MEL_LOG_OFFSET = 0.001
PATCH_FRAMES = 96


# ---------------------------------------------------------------------------
# prefilter levels
# ---------------------------------------------------------------------------

def movement_level(accel: np.ndarray) -> float:
    """Population standard deviation of the acceleration magnitude, in g.

    Gravity contributes a constant offset to the magnitude, so the spread of
    the magnitude series is a cheap orientation-free activity measure.
    Requires at least two samples.
    """
    accel = np.asarray(accel, dtype=float)
    if accel.ndim != 2 or accel.shape[1] != 3:
        raise ParameterError(f"accel must be (n, 3), got {accel.shape}")
    if accel.shape[0] < 2:
        raise InsufficientDataError("movement level needs at least 2 samples")
    magnitude = np.linalg.norm(accel, axis=1)
    return float(np.std(magnitude))


def sound_level_db(audio: np.ndarray, calibration_db: float = 94.0) -> float:
    """RMS level of an audio window mapped to an absolute dB SPL estimate.

    ``calibration_db`` is the SPL a full-scale RMS of 1.0 corresponds to on
    the capture chain.  An all-zero window bottoms out around -146 dB rather
    than diverging.
    """
    audio = np.asarray(audio, dtype=float)
    if audio.size == 0:
        raise InsufficientDataError("sound level needs a non-empty window")
    rms = math.sqrt(float(np.mean(np.square(audio))))
    return 20.0 * math.log10(rms + 1e-12) + calibration_db


# ---------------------------------------------------------------------------
# filters and resampling
# ---------------------------------------------------------------------------

def lowpass_first_order(
    signal: np.ndarray, sample_rate_hz: float, cutoff_hz: float
) -> np.ndarray:
    """Causal first-order Butterworth low-pass (bilinear transform).

    The pre-warped design keeps the -3 dB point exactly at ``cutoff_hz`` and
    unity gain at DC.  2-D inputs are filtered column-wise.
    """
    if not 0 < cutoff_hz < sample_rate_hz / 2:
        raise ParameterError(
            f"cutoff {cutoff_hz} Hz must lie in (0, {sample_rate_hz / 2}) Hz"
        )
    signal = np.asarray(signal, dtype=float)
    if signal.size == 0:
        raise ParameterError("cannot filter an empty signal")
    b, a = scipy.signal.butter(1, cutoff_hz, btype="low", fs=sample_rate_hz)
    return scipy.signal.lfilter(b, a, signal, axis=0)


def resample(audio: np.ndarray, from_hz: int, to_hz: int) -> np.ndarray:
    """Polyphase resampling with the output length pinned to
    ``round(n * to_hz / from_hz)`` samples."""
    if from_hz <= 0 or to_hz <= 0:
        raise ParameterError("sample rates must be positive")
    audio = np.asarray(audio, dtype=float)
    if audio.ndim != 1 or audio.size == 0:
        raise ParameterError("audio must be a non-empty 1-D array")
    if from_hz == to_hz:
        return audio.copy()
    g = math.gcd(from_hz, to_hz)
    out = scipy.signal.resample_poly(audio, to_hz // g, from_hz // g)
    target = int(round(len(audio) * to_hz / from_hz))
    if len(out) > target:
        out = out[:target]
    elif len(out) < target:
        out = np.concatenate([out, np.zeros(target - len(out))])
    return out


# ---------------------------------------------------------------------------
# log-mel patches
# ---------------------------------------------------------------------------

def _hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=float) / 700.0)


def mel_filterbank(
    num_bands: int = MEL_BANDS,
    min_hz: float = MEL_MIN_HZ,
    max_hz: float = MEL_MAX_HZ,
    sample_rate_hz: int = 16000,
    nfft: int = STFT_NFFT,
) -> np.ndarray:
    """Triangular mel filterbank, shape ``(nfft // 2 + 1, num_bands)``.

    Band edges are spaced uniformly on the mel scale between ``min_hz`` and
    ``max_hz`` and the triangles are evaluated in mel space, so each filter
    peaks at its own center and tapers to zero at its neighbours' centers.
    """
    if num_bands < 1 or not 0 <= min_hz < max_hz <= sample_rate_hz / 2:
        raise ParameterError("invalid filterbank geometry")
    bin_mel = _hz_to_mel(np.fft.rfftfreq(nfft, 1.0 / sample_rate_hz))
    edges = np.linspace(_hz_to_mel(min_hz), _hz_to_mel(max_hz), num_bands + 2)
    lower, center, upper = edges[:-2], edges[1:-1], edges[2:]
    rising = (bin_mel[:, None] - lower[None, :]) / (center - lower)[None, :]
    falling = (upper[None, :] - bin_mel[:, None]) / (upper - center)[None, :]
    return np.maximum(0.0, np.minimum(rising, falling))


def log_mel_patch(audio_16k: np.ndarray) -> np.ndarray:
    """Log-mel spectrogram patch for the sound-event classifier.

    Frames one second of 16 kHz audio with a 400-sample periodic Hann window
    and 160-sample hop, takes the magnitude spectrum (512-point FFT), applies
    the 64-band 125-7500 Hz mel filterbank, and returns
    ``log(mel + 0.001)`` cropped to the first :data:`PATCH_FRAMES` frames.

    Returns an array of shape ``(96, 64)``.
    """
    audio_16k = np.asarray(audio_16k, dtype=float)
    if audio_16k.ndim != 1:
        raise ParameterError("audio must be 1-D")
    min_len = STFT_WINDOW + (PATCH_FRAMES - 1) * STFT_HOP
    if len(audio_16k) < min_len:
        raise InsufficientDataError(
            f"need >= {min_len} samples for a {PATCH_FRAMES}-frame patch, "
            f"got {len(audio_16k)}"
        )
    num_frames = (len(audio_16k) - STFT_WINDOW) // STFT_HOP + 1
    idx = np.arange(num_frames)[:, None] * STFT_HOP + np.arange(STFT_WINDOW)[None, :]
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(STFT_WINDOW) / STFT_WINDOW)
    frames = audio_16k[idx] * window
    magnitude = np.abs(np.fft.rfft(frames, n=STFT_NFFT, axis=1))
    mel = magnitude @ mel_filterbank(sample_rate_hz=16000)
    return np.log(mel + MEL_LOG_OFFSET)[:PATCH_FRAMES]


# ---------------------------------------------------------------------------
# chroma
# ---------------------------------------------------------------------------

def hz_to_chroma(
    f0_hz: float, confidence: float, conf_threshold: float = 0.5
) -> int:
    """Map a pitch estimate to a pitch class 0..11, or :data:`UNVOICED`.

    Frames whose confidence falls below ``conf_threshold`` are unvoiced and
    their ``f0_hz`` is ignored.  Voiced frames are converted through the
    nearest equal-tempered note (A4 = 440 Hz = note 69) and folded mod 12,
    which makes the result octave invariant.
    """
    if not confidence >= conf_threshold:  # also catches NaN confidence
        return UNVOICED
    if not (math.isfinite(f0_hz) and f0_hz > 0):
        raise ParameterError(f"voiced frame needs f0 > 0, got {f0_hz!r}")
    note = round(12.0 * math.log2(f0_hz / 440.0)) + 69
    return int(note % 12)


def chroma_sequence(
    f0s: np.ndarray, confidences: np.ndarray, conf_threshold: float = 0.5
) -> np.ndarray:
    """Vector form of :func:`hz_to_chroma` over parallel f0/confidence arrays."""
    f0s = np.asarray(f0s, dtype=float)
    confidences = np.asarray(confidences, dtype=float)
    if f0s.shape != confidences.shape or f0s.ndim != 1:
        raise ParameterError("f0s and confidences must be equal-length 1-D arrays")
    return np.array(
        [hz_to_chroma(f, c, conf_threshold) for f, c in zip(f0s, confidences)],
        dtype=int,
    )


def chroma_cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise local cost between two chroma sequences.

    Voiced-voiced pairs cost the circular pitch-class distance
    ``min(|x - y|, 12 - |x - y|)`` (0..6); a voiced-unvoiced mismatch costs
    :data:`UNVOICED_COST`; two unvoiced frames cost 0.
    """
    a = _as_chroma(a, "a")
    b = _as_chroma(b, "b")
    diff = np.abs(a[:, None] - b[None, :])
    circular = np.minimum(diff, 12 - diff)
    voiced_a = (a != UNVOICED)[:, None]
    voiced_b = (b != UNVOICED)[None, :]
    cost = np.where(voiced_a & voiced_b, circular.astype(float), 0.0)
    cost[voiced_a ^ voiced_b] = UNVOICED_COST
    return cost


def _as_chroma(seq, name):
    arr = np.asarray(seq)
    if arr.ndim != 1 or arr.size == 0:
        raise ParameterError(f"{name} must be a non-empty 1-D sequence")
    arr = arr.astype(int)
    if not np.all((arr == UNVOICED) | ((arr >= 0) & (arr <= 11))):
        raise ParameterError(f"{name} must hold values 0..11 or {UNVOICED}")
    return arr


def dtw_from_cost(cost: np.ndarray) -> float:
    """Unnormalized DTW distance given a precomputed local-cost matrix.

    Standard dynamic program with step set {(1,1), (1,0), (0,1)}; the
    alignment is anchored at both ends and the accumulated cost of the best
    path is returned without length normalization.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.size == 0:
        raise ParameterError("cost matrix must be 2-D and non-empty")
    n, m = cost.shape
    prev = np.empty(m)
    prev[0] = cost[0, 0]
    for j in range(1, m):
        prev[j] = prev[j - 1] + cost[0, j]
    cur = np.empty(m)
    for i in range(1, n):
        cur[0] = prev[0] + cost[i, 0]
        for j in range(1, m):
            cur[j] = cost[i, j] + min(prev[j], prev[j - 1], cur[j - 1])
        prev, cur = cur, prev
    return float(prev[-1])


def dtw_distance(a: np.ndarray, b: np.ndarray) -> float:
    """DTW distance between two chroma sequences (see
    :func:`chroma_cost_matrix` for the local costs)."""
    return dtw_from_cost(chroma_cost_matrix(a, b))
