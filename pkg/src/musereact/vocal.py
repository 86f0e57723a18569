"""Vocal-reaction detection: singing/humming and whistling, second by second.

The pipeline runs a cascade per one-second segment, cheapest stage first:

1. movement prefilter  -- wearers who sing or whistle also move a little;
   an acceleration-magnitude spread outside [0.0104, 0.12] g settles the
   segment as ``non_reaction`` without touching the audio.
2. sound prefilter     -- segments quieter than 49 dB cannot contain an
   audible vocal reaction.
3. sound-event classifier on a 96x64 log-mel patch (any
   :class:`SoundEventClassifier`; deployments replay per-segment score
   files, tests plug in synthetic classifiers).
4. label mapping with rank relaxation -- confident top-1 classes map
   directly; low-margin results are scanned down to rank 5 for anything
   vocal-like and deferred as *uncertain*.
5. music-aware correction -- deferred segments are accepted only if the
   wearer's pitch contour warps onto the reference melody around the
   current song position (DTW over chroma, threshold 130).
6. HMM smoothing -- a Viterbi decode over the trailing six observations
   removes isolated flips.

``run_vocal_pipeline`` wires the stages together and reports per-stage
filtering statistics; each stage is also exposed on its own.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConfigError,
    Error,
    InsufficientDataError,
    LabelKind,
    ParameterError,
    ParseError,
    PipelineConfig,
    PipelineLabel,
    ReactionEvent,
    ReactionLabel,
    Session,
    VOCAL_STATES,
    merge_labels_to_events,
    segment_session,
)
from . import dsp
from .musicinfo import MusicInfoStore, NoteTrack, note_window


# ---------------------------------------------------------------------------
# classifier scores
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Class names with a probability distribution over them."""

    class_names: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        names = tuple(self.class_names)
        scores = np.asarray(self.scores, dtype=float)
        if len(names) != len(scores) or scores.ndim != 1:
            raise ParameterError("class_names and scores must be parallel 1-D")
        if len(names) < 2:
            raise ParameterError("a score vector needs at least two classes")
        if len(set(names)) != len(names):
            raise ParameterError("class names must be unique")
        if not np.isfinite(scores).all() or (scores < -1e-9).any():
            raise ParameterError("scores must be finite and non-negative")
        if abs(float(scores.sum()) - 1.0) > 1e-6:
            raise ParameterError(f"scores must sum to 1, got {scores.sum():.8f}")
        object.__setattr__(self, "class_names", names)
        object.__setattr__(self, "scores", scores)

    def ranked(self) -> np.ndarray:
        """Class indices by descending score; ties keep file order."""
        return np.argsort(-self.scores, kind="stable")

    def margin(self) -> float:
        """Difference between the top two scores (the *least margin*)."""
        order = self.ranked()
        return float(self.scores[order[0]] - self.scores[order[1]])

    def top(self, k: int = 1) -> list[tuple[str, float]]:
        order = self.ranked()[:k]
        return [(self.class_names[i], float(self.scores[i])) for i in order]


class SoundEventClassifier:
    """Interface for per-segment sound-event classification.

    ``classify`` must be deterministic for identical input.  Classifiers
    that replay recorded scores set ``needs_patch = False`` so the pipeline
    can skip the log-mel front end entirely.
    """

    needs_patch: bool = True

    def classify(self, patch: np.ndarray | None, index: int) -> ScoreVector:
        raise NotImplementedError


class ScoreFileClassifier(SoundEventClassifier):
    """Replays per-segment scores recorded in a ``scores.jsonl`` file.

    Each line is ``{"index": i, "classes": [...], "scores": [...]}`` with at
    least five entries.  Scores are renormalized on load so that truncated
    top-k dumps are accepted.
    """

    needs_patch = False

    def __init__(self, scores_by_index: dict[int, ScoreVector]):
        self._scores = dict(scores_by_index)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "ScoreFileClassifier":
        return cls(load_score_file(path))

    def classify(self, patch, index: int) -> ScoreVector:
        try:
            return self._scores[index]
        except KeyError:
            raise InsufficientDataError(f"no recorded scores for segment {index}") from None


def load_score_file(path: str | os.PathLike) -> dict[int, ScoreVector]:
    try:
        fh = open(path, "r", encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"{path}: file not found") from None
    out: dict[int, ScoreVector] = {}
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                index = int(obj["index"])
                names = [str(n) for n in obj["classes"]]
                raw = np.asarray(obj["scores"], dtype=float)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            if len(names) < 5 or len(raw) != len(names):
                raise ParseError(
                    f"{path}: line {lineno}: need >= 5 parallel class/score entries"
                )
            if not np.isfinite(raw).all() or (raw < 0).any() or raw.sum() <= 0:
                raise ParseError(f"{path}: line {lineno}: scores must be >= 0, sum > 0")
            if index in out:
                raise ParseError(f"{path}: line {lineno}: duplicate index {index}")
            out[index] = ScoreVector(tuple(names), raw / raw.sum())
    return out


def save_score_file(path: str | os.PathLike, scores_by_index: dict[int, ScoreVector]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for index in sorted(scores_by_index):
            vector = scores_by_index[index]
            fh.write(json.dumps(
                {"index": index,
                 "classes": list(vector.class_names),
                 "scores": [float(s) for s in vector.scores]},
                sort_keys=True,
            ) + "\n")


# ---------------------------------------------------------------------------
# pitch tracking
# ---------------------------------------------------------------------------

PITCH_HOP_S = 0.1
PITCH_FRAMES_PER_SEGMENT = 10


class PitchTracker:
    """Estimates (f0, confidence) at 0.1 s steps across a one-second segment."""

    def track(
        self, audio: np.ndarray | None, sample_rate: int, t_start: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """Return parallel ``(f0s, confidences)`` arrays of length 10 covering
        ``[t_start, t_start + 1)`` in session time."""
        raise NotImplementedError


class FilePitchTracker(PitchTracker):
    """Replays a recorded ``pitch.csv`` (``t,f0,confidence`` on a 0.1 s grid)."""

    def __init__(self, t0: float, f0s: np.ndarray, confidences: np.ndarray):
        self._t0 = float(t0)
        self._f0s = np.asarray(f0s, dtype=float)
        self._confs = np.asarray(confidences, dtype=float)
        if self._f0s.shape != self._confs.shape or self._f0s.ndim != 1:
            raise ParameterError("f0 and confidence arrays must be parallel 1-D")

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "FilePitchTracker":
        try:
            fh = open(path, "r", encoding="utf-8", newline="")
        except FileNotFoundError:
            raise ParseError(f"{path}: file not found") from None
        times, f0s, confs = [], [], []
        with fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError(f"{path}: line 1: empty file") from None
            if [h.strip() for h in header] != ["t", "f0", "confidence"]:
                raise ParseError(f"{path}: line 1: expected header t,f0,confidence")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 3:
                    raise ParseError(f"{path}: line {lineno}: expected 3 fields")
                try:
                    times.append(float(row[0]))
                    f0s.append(float(row[1]))
                    confs.append(float(row[2]))
                except ValueError:
                    raise ParseError(f"{path}: line {lineno}: non-numeric field") from None
        if not times:
            raise ParseError(f"{path}: no pitch rows")
        t0 = times[0]
        for lineno_offset, t in enumerate(times):
            if abs(t - (t0 + lineno_offset * PITCH_HOP_S)) > 1e-6:
                raise ParseError(
                    f"{path}: line {lineno_offset + 2}: time {t:g} breaks the 0.1 s grid"
                )
        return cls(t0, np.array(f0s), np.array(confs))

    def track(self, audio, sample_rate, t_start: float):
        first = int(round((t_start - self._t0) / PITCH_HOP_S))
        last = first + PITCH_FRAMES_PER_SEGMENT
        if first < 0 or last > len(self._f0s):
            raise InsufficientDataError(
                f"recorded pitch does not cover [{t_start:g}, {t_start + 1:g}) s"
            )
        return self._f0s[first:last].copy(), self._confs[first:last].copy()


class AutocorrelationPitchTracker(PitchTracker):
    """Reference tracker: FFT autocorrelation peak per 0.1 s frame.

    Confidence is the normalized autocorrelation at the best lag, which is
    near 1 for clean periodic signals and near 0 for noise or silence.
    """

    def __init__(self, min_hz: float = 80.0, max_hz: float = 1000.0):
        if not 0 < min_hz < max_hz:
            raise ParameterError("need 0 < min_hz < max_hz")
        self.min_hz = min_hz
        self.max_hz = max_hz

    def track(self, audio, sample_rate, t_start: float = 0.0):
        if audio is None:
            raise InsufficientDataError("pitch tracking needs segment audio")
        audio = np.asarray(audio, dtype=float)
        frame = int(round(PITCH_HOP_S * sample_rate))
        if len(audio) < frame * PITCH_FRAMES_PER_SEGMENT:
            raise InsufficientDataError(
                f"need {frame * PITCH_FRAMES_PER_SEGMENT} samples, got {len(audio)}"
            )
        lag_min = max(1, int(round(sample_rate / self.max_hz)))
        lag_max = min(frame - 1, int(round(sample_rate / self.min_hz)))
        if lag_min >= lag_max:
            raise ParameterError("pitch range too narrow for this sample rate")
        f0s = np.zeros(PITCH_FRAMES_PER_SEGMENT)
        confs = np.zeros(PITCH_FRAMES_PER_SEGMENT)
        for k in range(PITCH_FRAMES_PER_SEGMENT):
            x = audio[k * frame:(k + 1) * frame]
            x = x - x.mean()
            spectrum = np.fft.rfft(x, n=2 * frame)
            r = np.fft.irfft(spectrum * np.conj(spectrum))[:lag_max + 1]
            if r[0] <= 0:
                continue  # silent frame: f0 0, confidence 0
            lag = lag_min + int(np.argmax(r[lag_min:lag_max + 1]))
            f0s[k] = sample_rate / lag
            confs[k] = max(0.0, float(r[lag] / r[0]))
        return f0s, confs


# ---------------------------------------------------------------------------
# prefilters
# ---------------------------------------------------------------------------

def vocal_motion_prefilter(
    accel: np.ndarray, low_g: float = 0.0104, high_g: float = 0.12
) -> bool:
    """True when the movement level rules out a vocal reaction.

    Passing (False) requires the level to sit inside ``[low_g, high_g]``,
    boundaries included: too still means no one is singing, too violent
    means exercise-scale motion.
    """
    level = dsp.movement_level(accel)
    return not low_g <= level <= high_g


def vocal_sound_prefilter(
    audio: np.ndarray,
    threshold_db: float = 49.0,
    calibration_db: float = 94.0,
) -> bool:
    """True when the segment is too quiet to contain an audible reaction."""
    if audio is None:
        raise InsufficientDataError("sound prefilter needs segment audio")
    return dsp.sound_level_db(audio, calibration_db) < threshold_db


# ---------------------------------------------------------------------------
# label mapping and rank relaxation
# ---------------------------------------------------------------------------

def _name_sets(config: PipelineConfig):
    return (
        frozenset(n.lower() for n in config.singing_classes),
        frozenset(n.lower() for n in config.whistling_classes),
        frozenset(n.lower() for n in config.ambiguous_classes),
    )


def map_labels(scores: ScoreVector, config: PipelineConfig = PipelineConfig()) -> PipelineLabel:
    """Map the top-1 class to a pipeline label.

    Singing-type names decide ``singing_humming``, whistling-type names
    decide ``whistling``, speech/music defer as *ambiguous* (the wearer may
    be singing along -- or somebody nearby is talking), anything else is
    ``non_reaction``.  Matching is case-insensitive.
    """
    singing, whistling, ambiguous = _name_sets(config)
    name = scores.class_names[scores.ranked()[0]].lower()
    if name in singing:
        return PipelineLabel.final(ReactionLabel.SINGING_HUMMING)
    if name in whistling:
        return PipelineLabel.final(ReactionLabel.WHISTLING)
    if name in ambiguous:
        return PipelineLabel.ambiguous()
    return PipelineLabel.final(ReactionLabel.NON_REACTION)


def relax_rank(scores: ScoreVector, config: PipelineConfig = PipelineConfig()) -> PipelineLabel:
    """Label mapping that rescues low-margin classifications.

    When the top-1 score leads its runner-up by at least
    ``config.margin_threshold`` the plain mapping applies.  Otherwise the
    ranks 1..k are scanned for the first vocal-like class, which is deferred
    as *uncertain* with the matching candidate; if none appears the segment
    is ``non_reaction``.
    """
    if scores.margin() >= config.margin_threshold:
        return map_labels(scores, config)
    singing, whistling, ambiguous = _name_sets(config)
    for idx in scores.ranked()[:config.relax_top_k]:
        name = scores.class_names[idx].lower()
        if name in whistling:
            return PipelineLabel.uncertain(ReactionLabel.WHISTLING)
        if name in singing or name in ambiguous:
            return PipelineLabel.uncertain(ReactionLabel.SINGING_HUMMING)
    return PipelineLabel.final(ReactionLabel.NON_REACTION)


# ---------------------------------------------------------------------------
# music-aware correction
# ---------------------------------------------------------------------------

def correct_with_music(
    label: PipelineLabel,
    audio: np.ndarray | None,
    sample_rate: int,
    note_track: NoteTrack,
    pitch_tracker: PitchTracker,
    t_start_session: float,
    t_start_song: float,
    dtw_threshold: float = 130.0,
    margin_s: float = 0.5,
    conf_threshold: float = 0.5,
) -> ReactionLabel:
    """Settle a deferred label by comparing the wearer's pitch to the melody.

    The tracker's chroma contour for the segment is DTW-aligned against the
    reference melody around the song position ``[t_start_song,
    t_start_song + 1)`` (widened by ``margin_s``).  A distance above
    ``dtw_threshold`` rejects the segment as ``non_reaction``; otherwise an
    ambiguous label becomes ``singing_humming`` and an uncertain label
    becomes its candidate.
    """
    if label.kind is LabelKind.FINAL:
        raise ParameterError("correction applies to ambiguous/uncertain labels only")
    f0s, confs = pitch_tracker.track(audio, sample_rate, t_start_session)
    observed = dsp.chroma_sequence(f0s, confs, conf_threshold)
    reference = note_window(note_track, t_start_song, t_start_song + 1.0, margin_s)
    distance = dsp.dtw_distance(observed, reference)
    if distance > dtw_threshold:
        return ReactionLabel.NON_REACTION
    if label.kind is LabelKind.AMBIGUOUS:
        return ReactionLabel.SINGING_HUMMING
    return label.candidate


# ---------------------------------------------------------------------------
# HMM smoothing
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HmmParams:
    """Discrete HMM over the vocal labels (observations share the alphabet)."""

    states: tuple[ReactionLabel, ...]
    initial: np.ndarray      # (S,)
    transition: np.ndarray   # (S, S) row: from-state
    emission: np.ndarray     # (S, S) row: true state, column: observed label

    def __post_init__(self):
        states = tuple(ReactionLabel(s) for s in self.states)
        initial = np.asarray(self.initial, dtype=float)
        transition = np.asarray(self.transition, dtype=float)
        emission = np.asarray(self.emission, dtype=float)
        s = len(states)
        if s < 2 or len(set(states)) != s:
            raise ParameterError("need >= 2 distinct states")
        if initial.shape != (s,) or transition.shape != (s, s) or emission.shape != (s, s):
            raise ParameterError("parameter shapes must match the state count")
        for name, rows in (("initial", initial[None, :]),
                           ("transition", transition), ("emission", emission)):
            if not np.isfinite(rows).all() or (rows < 0).any():
                raise ParameterError(f"{name} must be finite and non-negative")
            if np.abs(rows.sum(axis=1) - 1.0).max() > 1e-9:
                raise ParameterError(f"{name} rows must sum to 1")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "emission", emission)

    def state_index(self, label: ReactionLabel) -> int:
        try:
            return self.states.index(label)
        except ValueError:
            raise ParameterError(f"label {label} is not an HMM state") from None

    def to_json(self) -> str:
        return json.dumps({
            "states": [s.value for s in self.states],
            "initial": self.initial.tolist(),
            "transition": self.transition.tolist(),
            "emission": self.emission.tolist(),
        }, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "HmmParams":
        try:
            obj = json.loads(text)
            return cls(
                states=tuple(ReactionLabel(s) for s in obj["states"]),
                initial=np.asarray(obj["initial"], dtype=float),
                transition=np.asarray(obj["transition"], dtype=float),
                emission=np.asarray(obj["emission"], dtype=float),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad HMM document: {exc}") from None

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "HmmParams":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def train_hmm(
    sequences: list[tuple[list[ReactionLabel], list[ReactionLabel]]],
    laplace: float = 1.0,
    states: tuple[ReactionLabel, ...] = VOCAL_STATES,
) -> HmmParams:
    """Count-based supervised HMM estimation with add-``laplace`` smoothing.

    ``sequences`` holds ``(true_labels, observed_labels)`` pairs of equal
    length.  Initial probabilities come from first true labels, transitions
    from consecutive true-label pairs, and emissions from (true, observed)
    co-occurrence; every count table gets ``laplace`` added before row
    normalization so unseen events keep non-zero probability.
    """
    if not sequences:
        raise ParameterError("need at least one training sequence")
    if laplace <= 0:
        raise ParameterError("laplace must be > 0")
    index = {label: i for i, label in enumerate(states)}
    s = len(states)
    init = np.zeros(s)
    trans = np.zeros((s, s))
    emis = np.zeros((s, s))
    for true_seq, obs_seq in sequences:
        if len(true_seq) != len(obs_seq) or not true_seq:
            raise ParameterError("each pair needs equal-length non-empty sequences")
        try:
            t_idx = [index[label] for label in true_seq]
            o_idx = [index[label] for label in obs_seq]
        except KeyError as exc:
            raise ParameterError(f"label {exc.args[0]} is not an HMM state") from None
        init[t_idx[0]] += 1
        for a, b in zip(t_idx, t_idx[1:]):
            trans[a, b] += 1
        for a, o in zip(t_idx, o_idx):
            emis[a, o] += 1
    init += laplace
    trans += laplace
    emis += laplace
    return HmmParams(
        states=tuple(states),
        initial=init / init.sum(),
        transition=trans / trans.sum(axis=1, keepdims=True),
        emission=emis / emis.sum(axis=1, keepdims=True),
    )


def viterbi_path(
    hmm: HmmParams, observed: list[ReactionLabel]
) -> tuple[list[ReactionLabel], float]:
    """Most likely state path for an observed label window (log domain).

    Returns the path and its joint log probability.  Probability ties pick
    the earlier state in ``hmm.states`` order at every step.
    """
    if not observed:
        raise ParameterError("need at least one observation")
    obs = [hmm.state_index(label) for label in observed]
    with np.errstate(divide="ignore"):
        log_init = np.log(hmm.initial)
        log_trans = np.log(hmm.transition)
        log_emis = np.log(hmm.emission)
    n, s = len(obs), len(hmm.states)
    delta = log_init + log_emis[:, obs[0]]
    pointers = np.zeros((n, s), dtype=int)
    for t in range(1, n):
        candidates = delta[:, None] + log_trans       # (from, to)
        best_from = np.argmax(candidates, axis=0)     # first max = lowest index
        delta = candidates[best_from, np.arange(s)] + log_emis[:, obs[t]]
        pointers[t] = best_from
    last = int(np.argmax(delta))
    logprob = float(delta[last])
    path_idx = [last]
    for t in range(n - 1, 0, -1):
        path_idx.append(int(pointers[t, path_idx[-1]]))
    path_idx.reverse()
    return [hmm.states[i] for i in path_idx], logprob


def smooth(window: list[ReactionLabel], hmm: HmmParams) -> ReactionLabel:
    """Smoothed label for the newest second, given the trailing observations.

    Decodes the window with Viterbi and returns the state at the final
    position, so a single flip surrounded by agreeing neighbours is pulled
    back to its context.
    """
    path, _ = viterbi_path(hmm, window)
    return path[-1]


# ---------------------------------------------------------------------------
# the assembled pipeline
# ---------------------------------------------------------------------------

STAGE_MOTION_FILTER = "motion_filter"
STAGE_SOUND_FILTER = "sound_filter"
STAGE_CLASSIFIER = "classifier"
STAGE_ERROR = "error"


@dataclass
class FilteringStats:
    """Where each segment left the cascade (the energy story of the system)."""

    total_segments: int = 0
    motion_filtered: int = 0
    sound_filtered: int = 0
    classified: int = 0
    corrected: int = 0
    errors: int = 0
    stages: list[str] = field(default_factory=list)

    @property
    def filtering_ratio(self) -> float:
        """Fraction of segments settled before the classifier ran."""
        if self.total_segments == 0:
            return 0.0
        return (self.motion_filtered + self.sound_filtered) / self.total_segments


@dataclass
class VocalResult:
    """Per-second output of the vocal pipeline plus processing diagnostics."""

    labels: list[ReactionLabel]           # final (post-smoothing) labels
    observed: list[ReactionLabel]         # pre-smoothing labels
    events: list[ReactionEvent]
    stats: FilteringStats
    diagnostics: list[str]


def run_vocal_pipeline(
    session: Session,
    classifier: SoundEventClassifier,
    pitch_tracker: PitchTracker | None = None,
    note_store: MusicInfoStore | None = None,
    hmm: HmmParams | None = None,
    config: PipelineConfig = PipelineConfig(),
) -> VocalResult:
    """Run the full vocal cascade over a session, one label per second.

    Correction (stage 5) needs both a pitch tracker and a note track for
    ``session.song_id``; enabling it without either raises
    :class:`ConfigError` up front.  Smoothing runs only when a trained
    ``hmm`` is supplied.  A stage error inside one segment downgrades that
    segment to ``non_reaction`` and is reported in ``diagnostics`` instead
    of aborting the session.
    """
    config.validate()
    if config.enable_correction:
        if pitch_tracker is None:
            raise ConfigError("correction is enabled but no pitch tracker was given")
        if note_store is None:
            raise ConfigError("correction is enabled but no note store was given")
        note_track = note_store.get(session.song_id)  # ConfigError when missing
    else:
        note_track = None

    stats = FilteringStats()
    diagnostics: list[str] = []
    observed: list[ReactionLabel] = []
    final: list[ReactionLabel] = []

    for segment in segment_session(session):
        stats.total_segments += 1
        try:
            label, stage = _classify_segment(
                segment, session, classifier, pitch_tracker, note_track, config, stats
            )
        except Error as exc:
            label, stage = ReactionLabel.NON_REACTION, STAGE_ERROR
            stats.errors += 1
            diagnostics.append(f"segment {segment.index}: {exc}")
        stats.stages.append(stage)
        if stage == STAGE_MOTION_FILTER:
            stats.motion_filtered += 1
        elif stage == STAGE_SOUND_FILTER:
            stats.sound_filtered += 1
        elif stage == STAGE_CLASSIFIER:
            stats.classified += 1
        observed.append(label)

        if config.enable_smoothing and hmm is not None:
            window = observed[-config.smoothing_window:]
            final.append(smooth(window, hmm))
        else:
            final.append(label)

    return VocalResult(
        labels=final,
        observed=observed,
        events=merge_labels_to_events(final),
        stats=stats,
        diagnostics=diagnostics,
    )


def _classify_segment(segment, session, classifier, pitch_tracker, note_track,
                      config, stats):
    """One segment through stages 1-5; returns (label, stage that settled it)."""
    if config.enable_motion_filter and vocal_motion_prefilter(
        segment.accel, config.vocal_movement_low_g, config.vocal_movement_high_g
    ):
        return ReactionLabel.NON_REACTION, STAGE_MOTION_FILTER

    if (config.enable_sound_filter and segment.audio is not None
            and vocal_sound_prefilter(
                segment.audio, config.sound_db_threshold, config.db_calibration)):
        return ReactionLabel.NON_REACTION, STAGE_SOUND_FILTER

    patch = None
    if classifier.needs_patch:
        if segment.audio is None:
            raise InsufficientDataError("classifier needs audio but session has none")
        prepared = preprocess_segment_audio(segment.audio, segment.audio_rate, config)
        patch = dsp.log_mel_patch(prepared)
    scores = classifier.classify(patch, segment.index)

    if config.enable_relaxation:
        label = relax_rank(scores, config)
    else:
        label = map_labels(scores, config)

    if label.kind is LabelKind.FINAL:
        return label.label, STAGE_CLASSIFIER

    if config.enable_correction:
        stats.corrected += 1
        settled = correct_with_music(
            label, segment.audio, segment.audio_rate, note_track, pitch_tracker,
            t_start_session=segment.t_start,
            t_start_song=session.start_offset_in_song + segment.t_start,
            dtw_threshold=config.dtw_threshold,
            margin_s=config.note_window_margin_s,
            conf_threshold=config.pitch_conf_threshold,
        )
        return settled, STAGE_CLASSIFIER

    # Correction disabled: resolve deferred labels by their best guess.
    if label.kind is LabelKind.AMBIGUOUS:
        return ReactionLabel.SINGING_HUMMING, STAGE_CLASSIFIER
    return label.candidate, STAGE_CLASSIFIER


def preprocess_segment_audio(
    audio: np.ndarray, sample_rate: int, config: PipelineConfig = PipelineConfig()
) -> np.ndarray:
    """Audio front end for the classifier: resample to 16 kHz, then a
    first-order 2 kHz low-pass to match the band the vocal classes live in."""
    x = dsp.resample(audio, sample_rate, config.classifier_sample_rate)
    return dsp.lowpass_first_order(
        x, config.classifier_sample_rate, config.audio_lowpass_hz
    )
