"""Reference melodies (note tracks) used by the music-aware correction stage.

A note track is the melody of a song down-sampled to one chroma symbol per
0.1 s: a pitch class 0..11, or the unvoiced marker for rests.  Tracks are
stored one song per CSV file (``t,chroma`` with ``U`` for unvoiced) and the
round trip through :func:`save_note_track` / :func:`load_note_track` is
byte-identical for canonical files.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, EmptyWindowError, ParameterError, ParseError
from .dsp import UNVOICED

NOTE_HOP_S = 0.1


@dataclass(frozen=True, eq=False)
class NoteTrack:
    """Chroma-per-0.1 s melody of one song."""

    song_id: str
    symbols: np.ndarray  # int array of pitch classes 0..11 or UNVOICED

    def __post_init__(self):
        symbols = np.asarray(self.symbols, dtype=int)
        if symbols.ndim != 1 or symbols.size == 0:
            raise ParameterError("note track needs a non-empty 1-D symbol array")
        if not np.all((symbols == UNVOICED) | ((symbols >= 0) & (symbols <= 11))):
            raise ParameterError("note symbols must be 0..11 or unvoiced")
        object.__setattr__(self, "symbols", symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def duration_s(self) -> float:
        return len(self.symbols) * NOTE_HOP_S


def note_window(
    track: NoteTrack, t0: float, t1: float, margin_s: float = 0.5
) -> np.ndarray:
    """Slice of the reference melody around the song interval ``[t0, t1)``.

    The window is widened by ``margin_s`` on each side to absorb tempo and
    alignment slack, then clipped to the track.  A window that misses the
    track entirely raises :class:`EmptyWindowError`.
    """
    if not t1 > t0:
        raise ParameterError(f"need t1 > t0, got [{t0}, {t1})")
    if margin_s < 0:
        raise ParameterError("margin_s must be >= 0")
    first = int(round((t0 - margin_s) / NOTE_HOP_S))
    last = int(round((t1 + margin_s) / NOTE_HOP_S))
    first_clipped = max(first, 0)
    last_clipped = min(last, len(track))
    if first_clipped >= last_clipped:
        raise EmptyWindowError(
            f"window [{t0}, {t1}) +/- {margin_s} s lies outside the "
            f"{track.duration_s:.1f} s track {track.song_id!r}"
        )
    return track.symbols[first_clipped:last_clipped].copy()


def save_note_track(path: str | os.PathLike, track: NoteTrack) -> None:
    """Write the canonical ``t,chroma`` CSV (times at one decimal, ``U`` rests)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,chroma\n")
        for i, sym in enumerate(track.symbols):
            text = "U" if sym == UNVOICED else str(int(sym))
            fh.write(f"{i * NOTE_HOP_S:.1f},{text}\n")


def load_note_track(path: str | os.PathLike, song_id: str | None = None) -> NoteTrack:
    """Parse a note-track CSV; ``song_id`` defaults to the file stem."""
    if song_id is None:
        song_id = os.path.splitext(os.path.basename(path))[0]
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise ParseError(f"{path}: file not found") from None
    symbols = []
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: line 1: empty file") from None
        if [h.strip() for h in header] != ["t", "chroma"]:
            raise ParseError(f"{path}: line 1: expected header t,chroma")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"{path}: line {lineno}: expected 2 fields")
            expected_t = (lineno - 2) * NOTE_HOP_S
            try:
                t = float(row[0])
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: bad time {row[0]!r}") from None
            if abs(t - expected_t) > 1e-6:
                raise ParseError(
                    f"{path}: line {lineno}: time {t:g} breaks the 0.1 s grid"
                )
            text = row[1].strip()
            if text == "U":
                symbols.append(UNVOICED)
            else:
                try:
                    value = int(text)
                except ValueError:
                    raise ParseError(
                        f"{path}: line {lineno}: bad chroma {text!r}"
                    ) from None
                if not 0 <= value <= 11:
                    raise ParseError(
                        f"{path}: line {lineno}: chroma {value} outside 0..11"
                    )
                symbols.append(value)
    if not symbols:
        raise ParseError(f"{path}: track holds no symbols")
    return NoteTrack(song_id=song_id, symbols=np.array(symbols, dtype=int))


class MusicInfoStore:
    """Lookup table from song id to :class:`NoteTrack`."""

    def __init__(self, tracks: dict[str, NoteTrack] | None = None):
        self._tracks: dict[str, NoteTrack] = dict(tracks or {})

    @classmethod
    def from_dir(cls, path: str | os.PathLike) -> "MusicInfoStore":
        """Load every ``*.csv`` note track under ``path`` (song id = stem)."""
        store = cls()
        try:
            names = sorted(os.listdir(path))
        except FileNotFoundError:
            raise ConfigError(f"note-track directory {path!r} does not exist") from None
        for name in names:
            if name.endswith(".csv"):
                track = load_note_track(os.path.join(path, name))
                store.add(track)
        return store

    def add(self, track: NoteTrack) -> None:
        self._tracks[track.song_id] = track

    def get(self, song_id: str) -> NoteTrack:
        try:
            return self._tracks[song_id]
        except KeyError:
            raise ConfigError(f"no note track for song {song_id!r}") from None

    def __contains__(self, song_id: str) -> bool:
        return song_id in self._tracks

    def __len__(self) -> int:
        return len(self._tracks)

    def song_ids(self) -> list[str]:
        return sorted(self._tracks)
