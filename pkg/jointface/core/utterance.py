"""JointFace — one recorded sentence: audio, word alignment, optional ground-truth meshes."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from jointface.errors import ConfigurationError, InputError


@dataclass(frozen=True)
class Utterance:
    id: str
    audio: Path
    alignment: Path
    speaker_index: int
    meshes: Optional[Path] = None   # ground truth, training only
    split: str = "train"

    def validate(self, speaker_count: int, require_meshes: bool = False) -> None:
        """Check the speaker index and that every referenced file exists."""
        if not 0 <= self.speaker_index < speaker_count:
            raise ConfigurationError(
                f"Utterance {self.id!r}: speaker index {self.speaker_index} not in [0, {speaker_count})"
            )
        paths = [("audio", self.audio), ("alignment", self.alignment)]
        if self.meshes is not None or require_meshes:
            if self.meshes is None:
                raise InputError(f"Utterance {self.id!r} has no ground-truth mesh file")
            paths.append(("meshes", self.meshes))
        for label, path in paths:
            if not Path(path).is_file():
                raise InputError(f"Utterance {self.id!r}: {label} file not found: {path}")
