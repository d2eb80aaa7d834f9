"""
JointFace — Error Types

Every failure the library raises is a JointFaceError. The CLI maps them to
exit code 1; argument errors stay with argparse (exit code 2).
"""
from typing import Optional


class JointFaceError(Exception):
    pass


class FormatError(JointFaceError):
    """A file or stream does not match its declared format."""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class DimensionError(JointFaceError):
    pass


class InputError(JointFaceError):
    pass


class ConfigurationError(JointFaceError):
    pass


class CheckpointError(JointFaceError):
    pass


class AlignmentValidationError(JointFaceError):
    def __init__(self, index: int, word: str, reason: str):
        self.index = index
        self.word = word
        self.reason = reason
        super().__init__(f"Alignment entry {index} ({word!r}): {reason}")


class EmbeddingLookupError(JointFaceError):
    def __init__(self, utterance_id: str, word_index: int):
        self.utterance_id = utterance_id
        self.word_index = word_index
        super().__init__(f"No embedding for utterance {utterance_id!r}, word index {word_index}")


class SequenceLengthError(JointFaceError):
    def __init__(self, audio_frames: int, text_frames: int):
        self.audio_frames = audio_frames
        self.text_frames = text_frames
        super().__init__(f"Modality lengths differ: audio has {audio_frames} frames, text has {text_frames}")


class TrainingAborted(JointFaceError):
    def __init__(self, reason: str, utterance_id: Optional[str] = None, parameter: Optional[str] = None):
        self.utterance_id = utterance_id
        self.parameter = parameter
        detail = reason
        if utterance_id is not None:
            detail += f" [utterance={utterance_id}]"
        if parameter is not None:
            detail += f" [parameter={parameter}]"
        super().__init__(detail)
