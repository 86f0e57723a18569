"""Shared data model for earbud music-reaction sensing.

A recording *session* bundles the two streams an earbud provides while a
person listens to music: a 6-axis IMU stream (3-axis accelerometer in g,
3-axis gyroscope in deg/s) sampled at a nominal 70 Hz, and an optional mono
audio stream at 44.1 kHz.  Detection pipelines consume the session as a
series of one-second :class:`SensorSegment` windows and emit one
:class:`ReactionLabel` per second, which callers usually coalesce into
:class:`ReactionEvent` spans.

This module also defines the exception hierarchy, the single
:class:`PipelineConfig` object that carries every tunable threshold, and the
on-disk session-directory layout shared by the CLI and the synthetic-data
tools::

    <session>/
        meta.json     session/subject/song/place identifiers
        imu.csv       t,ax,ay,az,gx,gy,gz   (accel in g, gyro in deg/s)
        audio.wav     mono 16-bit PCM, 44.1 kHz (optional)
        scores.jsonl  per-second classifier scores (optional, see vocal)
        pitch.csv     t,f0,confidence at 0.1 s steps (optional, see vocal)
        labels.csv    t_start,t_end,label ground truth (optional)
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.io.wavfile

IMU_RATE_HZ = 70.0
AUDIO_RATE_HZ = 44100
SEGMENT_SECONDS = 1.0

#: Allowed deviation of the IMU rate from nominal before a session is rejected.
IMU_RATE_TOLERANCE_HZ = 5.0

#: Maximum tolerated disagreement between the IMU span and the audio span.
STREAM_ALIGNMENT_TOLERANCE_S = 1.0


class Error(Exception):
    """Base class for all package errors."""


class ParameterError(Error, ValueError):
    """An argument violates a documented precondition."""


class InsufficientDataError(ParameterError):
    """Not enough samples to compute the requested quantity."""


class EmptyWindowError(ParameterError):
    """A requested time window selects no data at all."""


class AlignmentError(Error):
    """Session streams disagree in time by more than the tolerance."""


class ParseError(Error):
    """A file could not be parsed; the message names the offending line."""


class ConfigError(Error):
    """Configuration is inconsistent or refers to missing resources."""


class ReactionLabel(str, enum.Enum):
    """Per-second reaction classes emitted by the detection pipelines."""

    NON_REACTION = "non_reaction"
    SINGING_HUMMING = "singing_humming"
    WHISTLING = "whistling"
    HEAD_MOTION = "head_motion"

    def __str__(self) -> str:  # so f-strings produce the wire value
        return self.value


#: Canonical state order for the vocal pipeline (index = tie-break priority).
VOCAL_STATES = (
    ReactionLabel.NON_REACTION,
    ReactionLabel.SINGING_HUMMING,
    ReactionLabel.WHISTLING,
)

#: Labels the vocal pipeline may emit; the motion pipeline emits the rest.
VOCAL_LABELS = frozenset(VOCAL_STATES)
MOTION_LABELS = frozenset({ReactionLabel.NON_REACTION, ReactionLabel.HEAD_MOTION})


def parse_label(text: str) -> ReactionLabel:
    try:
        return ReactionLabel(text.strip())
    except ValueError:
        raise ParameterError(f"unknown reaction label {text!r}") from None


class LabelKind(str, enum.Enum):
    """Decidedness of an intermediate vocal-pipeline label."""

    FINAL = "final"
    AMBIGUOUS = "ambiguous"
    UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class PipelineLabel:
    """Intermediate vocal label: decided, or deferred to music correction.

    ``final(label)`` is a settled decision.  ``ambiguous()`` means the
    classifier heard speech/music and the pipeline must decide later whether
    the wearer was actually singing along.  ``uncertain(candidate)`` carries
    the reaction class a low-margin classification hinted at.
    """

    kind: LabelKind
    label: ReactionLabel | None = None
    candidate: ReactionLabel | None = None

    def __post_init__(self):
        if self.kind is LabelKind.FINAL:
            if self.label is None or self.candidate is not None:
                raise ParameterError("final label requires label= only")
        elif self.kind is LabelKind.AMBIGUOUS:
            if self.label is not None or self.candidate is not None:
                raise ParameterError("ambiguous label carries no payload")
        else:
            if self.candidate is None or self.label is not None:
                raise ParameterError("uncertain label requires candidate= only")
            if self.candidate not in (
                ReactionLabel.SINGING_HUMMING,
                ReactionLabel.WHISTLING,
            ):
                raise ParameterError(
                    f"uncertain candidate must be a vocal reaction, got {self.candidate}"
                )

    @classmethod
    def final(cls, label: ReactionLabel) -> "PipelineLabel":
        return cls(LabelKind.FINAL, label=label)

    @classmethod
    def ambiguous(cls) -> "PipelineLabel":
        return cls(LabelKind.AMBIGUOUS)

    @classmethod
    def uncertain(cls, candidate: ReactionLabel) -> "PipelineLabel":
        return cls(LabelKind.UNCERTAIN, candidate=candidate)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable threshold of the detection pipelines, with defaults.

    The defaults reproduce the published operating point; a JSON round trip
    is provided so deployments can ship a single config document.
    """

    # --- vocal pipeline: prefilters -------------------------------------
    vocal_movement_low_g: float = 0.0104
    vocal_movement_high_g: float = 0.12
    sound_db_threshold: float = 49.0
    db_calibration: float = 94.0

    # --- vocal pipeline: audio front end --------------------------------
    audio_lowpass_hz: float = 2000.0
    classifier_sample_rate: int = 16000

    # --- vocal pipeline: classification ---------------------------------
    margin_threshold: float = 0.9
    relax_top_k: int = 5
    singing_classes: tuple[str, ...] = ("singing", "humming")
    whistling_classes: tuple[str, ...] = ("whistling", "whistle")
    ambiguous_classes: tuple[str, ...] = ("speech", "music")

    # --- vocal pipeline: music-information correction -------------------
    dtw_threshold: float = 130.0
    note_window_margin_s: float = 0.5
    pitch_conf_threshold: float = 0.5

    # --- vocal pipeline: temporal smoothing -----------------------------
    smoothing_window: int = 6

    # --- motion pipeline ------------------------------------------------
    motion_movement_low_g: float = 0.0092
    motion_movement_high_g: float = 0.114
    imu_lowpass_hz: float = 5.0
    imu_rate_hz: float = IMU_RATE_HZ
    motion_window_s: float = 7.0
    motion_decision_threshold: float = 0.5

    # --- stage toggles (ablations) --------------------------------------
    enable_motion_filter: bool = True
    enable_sound_filter: bool = True
    enable_relaxation: bool = True
    enable_correction: bool = True
    enable_smoothing: bool = True

    _TUPLE_FIELDS = ("singing_classes", "whistling_classes", "ambiguous_classes")

    def validate(self) -> None:
        """Raise :class:`ConfigError` if any value is out of range."""
        numeric = {
            f.name: getattr(self, f.name)
            for f in dataclasses.fields(self)
            if f.type in ("float", "int")
        }
        for name, value in numeric.items():
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite, got {value!r}")
        for low, high in (
            ("vocal_movement_low_g", "vocal_movement_high_g"),
            ("motion_movement_low_g", "motion_movement_high_g"),
        ):
            if not 0 <= getattr(self, low) < getattr(self, high):
                raise ConfigError(f"need 0 <= {low} < {high}")
        if self.classifier_sample_rate <= 0 or self.imu_rate_hz <= 0:
            raise ConfigError("sample rates must be positive")
        if not 0 < self.audio_lowpass_hz < self.classifier_sample_rate / 2:
            raise ConfigError("audio_lowpass_hz must sit below Nyquist")
        if not 0 < self.imu_lowpass_hz < self.imu_rate_hz / 2:
            raise ConfigError("imu_lowpass_hz must sit below Nyquist")
        if self.relax_top_k < 1:
            raise ConfigError("relax_top_k must be >= 1")
        if self.smoothing_window < 1:
            raise ConfigError("smoothing_window must be >= 1")
        if self.motion_window_s <= 0 or self.dtw_threshold < 0:
            raise ConfigError("motion_window_s must be > 0 and dtw_threshold >= 0")
        if not 0 <= self.motion_decision_threshold <= 1:
            raise ConfigError("motion_decision_threshold must lie in [0, 1]")
        for name in self._TUPLE_FIELDS:
            values = getattr(self, name)
            if not values or any(not isinstance(v, str) or not v for v in values):
                raise ConfigError(f"{name} must be a non-empty tuple of names")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config document must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for name in cls._TUPLE_FIELDS:
            if name in raw:
                raw[name] = tuple(raw[name])
        config = cls(**raw)
        config.validate()
        return config

    @classmethod
    def load(cls, path: str | os.PathLike) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


# ---------------------------------------------------------------------------
# sessions and segmentation
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Session:
    """One earbud recording: IMU stream plus optional synchronized audio.

    Timestamps are seconds from session start.  ``start_offset_in_song``
    places second 0 of the session on the song's own timeline, which the
    music-information correction stage needs.
    """

    session_id: str
    subject_id: str
    song_id: str
    place: str
    imu_t: np.ndarray          # (n,) seconds, strictly increasing
    accel: np.ndarray          # (n, 3) in g
    gyro: np.ndarray           # (n, 3) in deg/s
    audio: np.ndarray | None = None   # mono float samples in [-1, 1]
    audio_rate: int = AUDIO_RATE_HZ
    start_offset_in_song: float = 0.0

    def __post_init__(self):
        self.imu_t = np.asarray(self.imu_t, dtype=float)
        self.accel = np.asarray(self.accel, dtype=float)
        self.gyro = np.asarray(self.gyro, dtype=float)
        if self.audio is not None:
            self.audio = np.asarray(self.audio, dtype=float)

    def validate(self) -> None:
        n = self.imu_t.shape[0]
        if self.imu_t.ndim != 1 or n < 2:
            raise InsufficientDataError("IMU stream needs at least two samples")
        if self.accel.shape != (n, 3) or self.gyro.shape != (n, 3):
            raise ParameterError("accel and gyro must both be (n, 3)")
        if not (np.isfinite(self.imu_t).all() and np.isfinite(self.accel).all()
                and np.isfinite(self.gyro).all()):
            raise ParameterError("IMU stream contains non-finite values")
        dt = np.diff(self.imu_t)
        if (dt <= 0).any():
            raise ParameterError("IMU timestamps must be strictly increasing")
        if self.imu_t[0] < 0:
            raise ParameterError("IMU timestamps must start at or after 0")
        rate = 1.0 / float(np.median(dt))
        if abs(rate - IMU_RATE_HZ) > IMU_RATE_TOLERANCE_HZ:
            raise ParameterError(
                f"IMU rate {rate:.1f} Hz outside nominal {IMU_RATE_HZ:.0f} "
                f"+/- {IMU_RATE_TOLERANCE_HZ:.0f} Hz"
            )
        if self.audio is not None:
            if self.audio.ndim != 1:
                raise ParameterError("audio must be a mono 1-D array")
            if not np.isfinite(self.audio).all():
                raise ParameterError("audio contains non-finite values")
            if self.audio_rate <= 0:
                raise ParameterError("audio_rate must be positive")
            skew = abs(self.audio_span() - self.imu_span())
            if skew > STREAM_ALIGNMENT_TOLERANCE_S:
                raise AlignmentError(
                    f"audio and IMU spans disagree by {skew:.2f} s "
                    f"(> {STREAM_ALIGNMENT_TOLERANCE_S:.0f} s)"
                )

    def imu_span(self) -> float:
        dt = np.diff(self.imu_t)
        return float(self.imu_t[-1] - self.imu_t[0] + np.median(dt))

    def audio_span(self) -> float:
        if self.audio is None:
            raise InsufficientDataError("session has no audio stream")
        return len(self.audio) / self.audio_rate

    @property
    def duration_s(self) -> float:
        """Session length in seconds (audio span when audio is present)."""
        return self.audio_span() if self.audio is not None else self.imu_span()


@dataclass(eq=False)
class SensorSegment:
    """One second of aligned sensor data, cut from a session."""

    index: int
    t_start: float
    t_end: float
    imu_t: np.ndarray
    accel: np.ndarray
    gyro: np.ndarray
    audio: np.ndarray | None
    audio_rate: int


def segment_session(session: Session) -> list[SensorSegment]:
    """Cut a session into consecutive non-overlapping one-second segments.

    Segment ``i`` covers ``[i, i+1)`` seconds: IMU samples are selected by
    timestamp, audio by exact sample index.  Any trailing partial second is
    dropped, so concatenating the slices reproduces the first
    ``floor(duration)`` seconds of the input exactly.
    """
    session.validate()
    count = int(math.floor(session.duration_s + 1e-9))
    segments = []
    for i in range(count):
        t0, t1 = float(i), float(i + 1)
        mask = (session.imu_t >= t0) & (session.imu_t < t1)
        audio = None
        if session.audio is not None:
            audio = session.audio[i * session.audio_rate:(i + 1) * session.audio_rate]
        segments.append(SensorSegment(
            index=i, t_start=t0, t_end=t1,
            imu_t=session.imu_t[mask],
            accel=session.accel[mask],
            gyro=session.gyro[mask],
            audio=audio,
            audio_rate=session.audio_rate,
        ))
    return segments


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReactionEvent:
    """A maximal span of consecutive seconds sharing one label."""

    label: ReactionLabel
    t_start: float
    t_end: float

    def __post_init__(self):
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise ParameterError("event bounds must be finite")
        if self.t_end <= self.t_start:
            raise ParameterError(
                f"event must have positive length, got [{self.t_start}, {self.t_end})"
            )

    @property
    def duration_s(self) -> float:
        return self.t_end - self.t_start


def merge_labels_to_events(
    labels: list[ReactionLabel], start: float = 0.0, step: float = SEGMENT_SECONDS
) -> list[ReactionEvent]:
    """Coalesce a per-second label sequence into maximal constant-label events.

    The returned events tile ``[start, start + len(labels) * step)`` exactly;
    an empty sequence yields no events.
    """
    events = []
    run_start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[run_start]:
            events.append(ReactionEvent(
                label=labels[run_start],
                t_start=start + run_start * step,
                t_end=start + i * step,
            ))
            run_start = i
    return events


def expand_events_to_labels(
    events: list[ReactionEvent],
    duration_s: float | None = None,
    fill: ReactionLabel = ReactionLabel.NON_REACTION,
    step: float = SEGMENT_SECONDS,
) -> list[ReactionLabel]:
    """Sample an event list back to one label per second.

    Each second is labeled by the event covering its midpoint; seconds no
    event covers get ``fill``.  Events must not overlap.
    """
    ordered = sorted(events, key=lambda e: (e.t_start, e.t_end))
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.t_start < prev.t_end - 1e-9:
            raise ParameterError(
                f"events overlap near t={cur.t_start:g} ({prev.label} vs {cur.label})"
            )
    if duration_s is None:
        duration_s = max((e.t_end for e in ordered), default=0.0)
    count = int(math.floor(duration_s + 1e-9))
    labels = [fill] * count
    for event in ordered:
        first = int(math.ceil(event.t_start - 0.5 - 1e-9))
        last = int(math.floor(event.t_end - 0.5 + 1e-9))
        for i in range(max(first, 0), min(last, count - 1) + 1):
            if event.t_start - 1e-9 <= i + 0.5 <= event.t_end + 1e-9:
                labels[i] = event.label
    return labels


# ---------------------------------------------------------------------------
# on-disk session directories
# ---------------------------------------------------------------------------

_IMU_HEADER = ["t", "ax", "ay", "az", "gx", "gy", "gz"]
_LABEL_HEADER = ["t_start", "t_end", "label"]


def _fmt(value: float) -> str:
    return f"{value:.10g}"


def save_session_dir(path: str | os.PathLike, session: Session) -> None:
    """Write ``meta.json``, ``imu.csv`` and (if present) ``audio.wav``."""
    os.makedirs(path, exist_ok=True)
    meta = {
        "session_id": session.session_id,
        "subject_id": session.subject_id,
        "song_id": session.song_id,
        "place": session.place,
        "audio_rate": session.audio_rate,
        "start_offset_in_song": session.start_offset_in_song,
    }
    with open(os.path.join(path, "meta.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    with open(os.path.join(path, "imu.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(_IMU_HEADER) + "\n")
        for i in range(len(session.imu_t)):
            row = [session.imu_t[i], *session.accel[i], *session.gyro[i]]
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    if session.audio is not None:
        pcm = np.round(np.clip(session.audio, -1.0, 1.0) * 32767.0).astype(np.int16)
        scipy.io.wavfile.write(
            os.path.join(path, "audio.wav"), session.audio_rate, pcm
        )


def load_session_dir(path: str | os.PathLike) -> Session:
    """Read a session directory back into a validated :class:`Session`."""
    meta_path = os.path.join(path, "meta.json")
    try:
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise ParseError(f"{meta_path}: missing meta.json") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{meta_path}: line {exc.lineno}: {exc.msg}") from None

    imu_path = os.path.join(path, "imu.csv")
    rows = _read_csv_rows(imu_path, _IMU_HEADER)
    data = np.empty((len(rows), 7), dtype=float)
    for i, (lineno, row) in enumerate(rows):
        try:
            data[i] = [float(v) for v in row]
        except ValueError:
            raise ParseError(f"{imu_path}: line {lineno}: non-numeric field") from None

    audio = None
    audio_rate = int(meta.get("audio_rate", AUDIO_RATE_HZ))
    wav_path = os.path.join(path, "audio.wav")
    if os.path.exists(wav_path):
        audio_rate, pcm = scipy.io.wavfile.read(wav_path)
        if pcm.ndim != 1:
            raise ParseError(f"{wav_path}: expected mono audio")
        if pcm.dtype != np.int16:
            raise ParseError(f"{wav_path}: expected 16-bit PCM, got {pcm.dtype}")
        audio = pcm.astype(float) / 32767.0

    session = Session(
        session_id=str(meta.get("session_id", os.path.basename(os.path.normpath(path)))),
        subject_id=str(meta.get("subject_id", "")),
        song_id=str(meta.get("song_id", "")),
        place=str(meta.get("place", "")),
        imu_t=data[:, 0], accel=data[:, 1:4], gyro=data[:, 4:7],
        audio=audio, audio_rate=audio_rate,
        start_offset_in_song=float(meta.get("start_offset_in_song", 0.0)),
    )
    session.validate()
    return session


def _read_csv_rows(path, expected_header):
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise ParseError(f"{path}: file not found") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: line 1: empty file") from None
        if [h.strip() for h in header] != expected_header:
            raise ParseError(
                f"{path}: line 1: expected header {','.join(expected_header)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise ParseError(
                    f"{path}: line {lineno}: expected {len(expected_header)} fields"
                )
            rows.append((lineno, row))
    return rows


def save_labels(path: str | os.PathLike, events: list[ReactionEvent]) -> None:
    """Write ground-truth events as ``t_start,t_end,label`` CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(_LABEL_HEADER) + "\n")
        for event in events:
            fh.write(f"{_fmt(event.t_start)},{_fmt(event.t_end)},{event.label.value}\n")


def load_labels(path: str | os.PathLike) -> list[ReactionEvent]:
    events = []
    for lineno, row in _read_csv_rows(path, _LABEL_HEADER):
        try:
            t0, t1 = float(row[0]), float(row[1])
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-numeric time bound") from None
        try:
            events.append(ReactionEvent(parse_label(row[2]), t0, t1))
        except ParameterError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from None
    return events


def save_events_jsonl(path: str | os.PathLike, events: list[ReactionEvent]) -> None:
    """Write detected events as JSON lines ``{label, t_start, t_end}``."""
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(json.dumps(
                {"label": event.label.value,
                 "t_start": event.t_start, "t_end": event.t_end},
                sort_keys=True,
            ) + "\n")


def load_events_jsonl(path: str | os.PathLike) -> list[ReactionEvent]:
    events = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"{path}: file not found") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                events.append(ReactionEvent(
                    parse_label(obj["label"]),
                    float(obj["t_start"]), float(obj["t_end"]),
                ))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
    return events


def list_session_dirs(root: str | os.PathLike) -> list[str]:
    """Find session directories (those holding ``meta.json``) under ``root``."""
    found = []
    for name in sorted(os.listdir(root)):
        candidate = os.path.join(root, name)
        if os.path.isdir(candidate) and os.path.exists(os.path.join(candidate, "meta.json")):
            found.append(candidate)
    return found
