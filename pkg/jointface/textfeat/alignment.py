"""
JointFace — Word Alignment

Start/end timestamps (seconds) for every transcript word, as exported by a
forced aligner. Two JSON shapes are accepted:

    [{"word": "hi", "start": 0.0, "end": 0.12}, ...]            plain array
    {"words": [{"word": "hi", "start": 0.0, "end": 0.12,        Gentle export;
                "case": "success"}, ...], "transcript": "..."}  unaligned words skipped

Entries are sorted by start time; intervals are half-open [start, end) and
must not overlap (touching is fine).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Tuple

from jointface.errors import AlignmentValidationError, FormatError


@dataclass(frozen=True)
class WordEntry:
    word: str
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class WordAlignment:
    entries: Tuple[WordEntry, ...] = ()

    def __post_init__(self):
        entries = tuple(self.entries)
        for i, e in enumerate(entries):
            _check_interval(i, e)
        for i in range(1, len(entries)):
            if entries[i].start < entries[i - 1].start:
                raise AlignmentValidationError(i, entries[i].word, "entries are not sorted by start time")
            if entries[i].start < entries[i - 1].end:
                raise AlignmentValidationError(
                    i, entries[i].word, f"overlaps previous word {entries[i - 1].word!r}"
                )
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def words(self) -> list[str]:
        return [e.word for e in self.entries]

    def word_at(self, time: float) -> int:
        """Index of the word whose interval contains `time`, or -1 during a pause."""
        for i, e in enumerate(self.entries):
            if e.start <= time < e.end:
                return i
        return -1

    def to_json(self) -> list[dict]:
        return [{"word": e.word, "start": e.start, "end": e.end} for e in self.entries]


def _check_interval(index: int, e: WordEntry) -> None:
    if not isinstance(e.word, str) or not e.word:
        raise AlignmentValidationError(index, str(e.word), "word must be a non-empty string")
    if not (math.isfinite(e.start) and math.isfinite(e.end)):
        raise AlignmentValidationError(index, e.word, "timestamps must be finite")
    if e.start < 0:
        raise AlignmentValidationError(index, e.word, f"negative start time {e.start}")
    if e.end <= e.start:
        raise AlignmentValidationError(index, e.word, f"end {e.end} is not after start {e.start}")


def _parse_entries(raw) -> Iterable[WordEntry]:
    if isinstance(raw, dict) and isinstance(raw.get("words"), list):
        for i, w in enumerate(raw["words"]):
            if not isinstance(w, dict):
                raise FormatError(f"Gentle word {i} must be an object, got {type(w).__name__}")
        raw = [w for w in raw["words"] if w.get("case", "success") == "success" and "start" in w]
    if not isinstance(raw, list):
        raise FormatError("Alignment must be a JSON array of {word, start, end} objects")
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or not {"word", "start", "end"} <= set(item):
            raise FormatError(f"Alignment entry {i} must have word, start and end")
        try:
            yield WordEntry(str(item["word"]), float(item["start"]), float(item["end"]))
        except (TypeError, ValueError) as e:
            raise AlignmentValidationError(i, str(item.get("word")), f"bad timestamp: {e}") from e


def load_alignment(source: IO) -> WordAlignment:
    try:
        raw = json.load(source)
    except json.JSONDecodeError as e:
        raise FormatError(f"Alignment is not valid JSON: {e.msg}", offset=e.pos) from e

    entries = list(_parse_entries(raw))
    for i, e in enumerate(entries):
        _check_interval(i, e)
    # Sort by start, reporting violations against the caller's original indices.
    order = sorted(range(len(entries)), key=lambda i: (entries[i].start, i))
    for prev, cur in zip(order, order[1:]):
        if entries[cur].start < entries[prev].end:
            raise AlignmentValidationError(
                cur, entries[cur].word, f"overlaps entry {prev} ({entries[prev].word!r})"
            )
    return WordAlignment(tuple(entries[i] for i in order))


def dump_alignment(alignment: WordAlignment, sink: IO) -> None:
    json.dump(alignment.to_json(), sink, indent=1)
