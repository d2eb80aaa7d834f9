"""
JointFace — Joint Audio–Text Network

    mel (T×128) ─▶ (x − mel_shift) / mel_scale        default (x + 40) / 40
                 ─▶ 4 × [x + LeakyReLU(dilated conv_l(x))], l = 1, 2, 4, 8
                 ─▶ concat speaker one-hot (T×(128+S)) ─▶ audio_fc ─▶ H^a (T×128)

    text (T×768) ─▶ text_fc1 ─▶ LeakyReLU ─▶ text_fc2 ─▶ LSTM(64) ─▶ H^l (T×64)

    H^a, H^l ─▶ fusion ─▶ dec_fc1 (128) ─▶ 2-layer BLSTM (2×128) ─▶ dec_fc2 (3V)
             ─▶ reshape V×3 ─▶ + template

Fusion modes:
    tensor      [h_a;1] ⊗ [h_l;1]     (d_a+1)(d_l+1) wide, 8385 at full size
    concat      [h_a; h_l]            d_a + d_l
    audio_only  [h_a; 1]              text encoder not built
    text_only   [h_l; 1]              audio encoder not built

The audio stack is non-causal: with kernel 3 it reaches 1+2+4+8 = 15 frames
each way. The text LSTM is causal; the decoder BLSTM is not.

Parameter names follow the layer names above (audio_conv.0.weight, dec_fc2.bias, ...).
Inputs are unbatched (T × features); training runs one utterance at a time.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from jointface.config import FULL_SPEAKERS, FULL_VERTEX_COUNT, MEL_CHANNELS, TEXT_DIM
from jointface.core.mesh import MeshSequence, TemplateMesh
from jointface.errors import DimensionError, InputError, SequenceLengthError
from jointface.model.layers import (
    DILATIONS,
    LEAKY_SLOPE,
    DilatedConvSpec,
    augment,
    concat_fuse,
    dilated_conv1d,
    tensor_fuse,
)

# default input map: the −80..0 dB range onto −1..1; shift 0 and scale 1 feed raw dB
MEL_SHIFT = -40.0
MEL_SCALE = 40.0


class FusionMode(str, Enum):
    TENSOR = "tensor"
    CONCAT = "concat"
    AUDIO_ONLY = "audio_only"
    TEXT_ONLY = "text_only"

    @property
    def uses_audio(self) -> bool:
        return self != FusionMode.TEXT_ONLY

    @property
    def uses_text(self) -> bool:
        return self != FusionMode.AUDIO_ONLY

    @classmethod
    def parse(cls, value: Union[str, "FusionMode"]) -> "FusionMode":
        """Accepts enum values and the CLI short forms 'audio' / 'text'."""
        if isinstance(value, FusionMode):
            return value
        aliases = {"audio": cls.AUDIO_ONLY, "text": cls.TEXT_ONLY}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise InputError(f"Unknown fusion mode {value!r}") from None


@dataclass(frozen=True)
class ModelDims:
    vertices: int = FULL_VERTEX_COUNT
    speakers: int = FULL_SPEAKERS
    mel_channels: int = MEL_CHANNELS   # conv width; residual adds keep it constant
    audio_dim: int = 128               # d_a
    text_in: int = TEXT_DIM
    text_hidden: int = 128
    text_dim: int = 64                 # d_l
    dec_hidden: int = 128
    blstm_hidden: int = 128
    kernel_size: int = 3
    dilations: Tuple[int, ...] = DILATIONS
    mel_shift: float = MEL_SHIFT         # x ← (mel − shift) / scale before the first conv
    mel_scale: float = MEL_SCALE

    def __post_init__(self):
        for name, value in asdict(self).items():
            if name not in ("dilations", "mel_shift", "mel_scale") and value < 1:
                raise InputError(f"Model dimension {name} must be ≥ 1, got {value}")
        if not (math.isfinite(self.mel_shift) and math.isfinite(self.mel_scale) and self.mel_scale > 0):
            raise InputError(f"Mel input map needs a finite shift and a positive scale, got {self.mel_shift}, {self.mel_scale}")
        object.__setattr__(self, "dilations", tuple(self.dilations))

    def fused_width(self, mode: FusionMode) -> int:
        return {
            FusionMode.TENSOR: (self.audio_dim + 1) * (self.text_dim + 1),
            FusionMode.CONCAT: self.audio_dim + self.text_dim,
            FusionMode.AUDIO_ONLY: self.audio_dim + 1,
            FusionMode.TEXT_ONLY: self.text_dim + 1,
        }[mode]

    @property
    def receptive_radius(self) -> int:
        return (self.kernel_size // 2) * sum(self.dilations)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dilations"] = list(self.dilations)
        return d


@dataclass
class EncoderOutputs:
    audio: Optional[torch.Tensor]   # H^a, T × d_a
    text: Optional[torch.Tensor]    # H^l, T × d_l

    @property
    def frame_count(self) -> int:
        return (self.audio if self.audio is not None else self.text).shape[0]


@dataclass
class FusedFrames:
    values: torch.Tensor            # H^m, T × fused width
    mode: FusionMode = FusionMode.TENSOR


def _unwrap(x):
    """MelFrames / TextFrames carry their array in .values; tensors and arrays pass through."""
    if isinstance(x, (torch.Tensor, np.ndarray)):
        return x
    return getattr(x, "values", x)


def one_hot(index: int, speakers: int) -> torch.Tensor:
    if not 0 <= index < speakers:
        raise InputError(f"Speaker index {index} not in [0, {speakers})")
    v = torch.zeros(speakers)
    v[index] = 1.0
    return v


class JointFaceNet(nn.Module):
    """All learnable weights of the encoders and decoder (the model parameters)."""

    def __init__(self, dims: ModelDims, fusion_mode: Union[str, FusionMode] = FusionMode.TENSOR,
                 seed: Optional[int] = 0):
        super().__init__()
        self.dims = dims
        self.fusion_mode = FusionMode.parse(fusion_mode)
        mode = self.fusion_mode

        if mode.uses_audio:
            self.audio_conv = nn.ModuleList([
                nn.Conv1d(dims.mel_channels, dims.mel_channels, dims.kernel_size,
                          dilation=l, padding=(dims.kernel_size // 2) * l)
                for l in dims.dilations
            ])
            self.audio_fc = nn.Linear(dims.mel_channels + dims.speakers, dims.audio_dim)
        if mode.uses_text:
            self.text_fc1 = nn.Linear(dims.text_in, dims.text_hidden)
            self.text_fc2 = nn.Linear(dims.text_hidden, dims.text_dim)
            self.text_lstm = nn.LSTM(dims.text_dim, dims.text_dim)
        self.dec_fc1 = nn.Linear(dims.fused_width(mode), dims.dec_hidden)
        self.dec_blstm = nn.LSTM(dims.dec_hidden, dims.blstm_hidden, num_layers=2, bidirectional=True)
        self.dec_fc2 = nn.Linear(2 * dims.blstm_hidden, 3 * dims.vertices)

        if seed is not None:
            self.reset_parameters(seed)

    # ── Initialisation ────────────────────────────

    def reset_parameters(self, seed: int) -> None:
        """Uniform in ±sqrt(1/fan_in) per tensor; a bias shares its weight's fan-in."""
        gen = torch.Generator().manual_seed(int(seed))
        params = dict(self.named_parameters())
        with torch.no_grad():
            for name, p in params.items():
                if p.dim() > 1:
                    fan_in = math.prod(p.shape[1:])
                else:
                    weight = params[name.replace("bias", "weight")]
                    fan_in = math.prod(weight.shape[1:])
                bound = math.sqrt(1.0 / fan_in)
                p.copy_(torch.rand(p.shape, generator=gen, dtype=p.dtype) * (2 * bound) - bound)

    # ── Input plumbing ────────────────────────────

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def _as_tensor(self, x, what: str) -> torch.Tensor:
        x = _unwrap(x)
        t = torch.as_tensor(np.asarray(x) if not isinstance(x, torch.Tensor) else x, dtype=self.dtype)
        if t.dim() != 2:
            raise DimensionError(f"{what} must be T × features, got shape {tuple(t.shape)}")
        return t

    def _speaker(self, speaker) -> torch.Tensor:
        if isinstance(speaker, (int, np.integer)):
            return one_hot(int(speaker), self.dims.speakers).to(self.dtype)
        s = torch.as_tensor(np.asarray(speaker) if not isinstance(speaker, torch.Tensor) else speaker,
                            dtype=self.dtype)
        if s.shape != (self.dims.speakers,):
            raise InputError(f"Speaker one-hot must have length {self.dims.speakers}, got {tuple(s.shape)}")
        if not bool(((s == 0) | (s == 1)).all()) or float(s.sum()) != 1.0:
            raise InputError("Speaker vector must contain a single 1 and zeros elsewhere")
        return s

    # ── Encoders ──────────────────────────────────

    def audio_encode(self, mel, speaker) -> torch.Tensor:
        if not self.fusion_mode.uses_audio:
            raise InputError(f"Fusion mode {self.fusion_mode.value} has no audio encoder")
        x = self._as_tensor(mel, "Mel input")
        if x.shape[1] != self.dims.mel_channels:
            raise DimensionError(f"Mel input has {x.shape[1]} channels, expected {self.dims.mel_channels}")
        x = (x - self.dims.mel_shift) / self.dims.mel_scale
        s = self._speaker(speaker)
        for conv, l in zip(self.audio_conv, self.dims.dilations):
            spec = DilatedConvSpec(self.dims.mel_channels, self.dims.kernel_size, l)
            x = x + F.leaky_relu(dilated_conv1d(x, spec, conv.weight, conv.bias), LEAKY_SLOPE)
        x = torch.cat([x, s.expand(x.shape[0], -1)], dim=1)
        return self.audio_fc(x)

    def text_encode(self, text) -> torch.Tensor:
        if not self.fusion_mode.uses_text:
            raise InputError(f"Fusion mode {self.fusion_mode.value} has no text encoder")
        x = self._as_tensor(text, "Text input")
        if x.shape[1] != self.dims.text_in:
            raise DimensionError(f"Text input has dimension {x.shape[1]}, expected {self.dims.text_in}")
        x = self.text_fc2(F.leaky_relu(self.text_fc1(x), LEAKY_SLOPE))
        out, _ = self.text_lstm(x)
        return out

    def encode(self, mel, text, speaker) -> EncoderOutputs:
        mode = self.fusion_mode
        h_a = self.audio_encode(mel, speaker) if mode.uses_audio else None
        h_l = self.text_encode(text) if mode.uses_text else None
        if h_a is not None and h_l is not None and h_a.shape[0] != h_l.shape[0]:
            raise SequenceLengthError(h_a.shape[0], h_l.shape[0])
        return EncoderOutputs(h_a, h_l)

    # ── Fusion & decoder ──────────────────────────

    def fuse(self, enc: EncoderOutputs) -> FusedFrames:
        mode = self.fusion_mode
        if mode == FusionMode.TENSOR:
            values = tensor_fuse(enc.audio, enc.text)
        elif mode == FusionMode.CONCAT:
            values = concat_fuse(enc.audio, enc.text)
        elif mode == FusionMode.AUDIO_ONLY:
            values = augment(enc.audio)
        else:
            values = augment(enc.text)
        return FusedFrames(values, mode)

    def decode_offsets(self, fused: torch.Tensor) -> torch.Tensor:
        """T × fused width → T × V × 3 offsets."""
        if fused.dim() != 2 or fused.shape[1] != self.dec_fc1.in_features:
            raise DimensionError(
                f"Fused frames have width {fused.shape[-1]}, decoder expects {self.dec_fc1.in_features}"
            )
        h, _ = self.dec_blstm(self.dec_fc1(fused))
        return self.dec_fc2(h).view(fused.shape[0], self.dims.vertices, 3)

    def forward(self, mel, text, speaker) -> torch.Tensor:
        """Predicted offsets, T × V × 3."""
        self._check_lengths(mel, text)
        return self.decode_offsets(self.fuse(self.encode(mel, text, speaker)).values)

    def _check_lengths(self, mel, text) -> None:
        if mel is None or text is None:
            return
        t_a, t_l = len(_unwrap(mel)), len(_unwrap(text))
        if t_a != t_l:
            raise SequenceLengthError(t_a, t_l)

    def template_tensor(self, template: TemplateMesh) -> torch.Tensor:
        if template.vertex_count != self.dims.vertices:
            raise DimensionError(
                f"Template has {template.vertex_count} vertices, model predicts {self.dims.vertices}"
            )
        return torch.as_tensor(template.vertices, dtype=self.dtype)

    def predict_vertices(self, mel, text, speaker, template: TemplateMesh) -> torch.Tensor:
        """Template plus predicted offsets, T × V × 3, differentiable."""
        return self(mel, text, speaker) + self.template_tensor(template)


# ── Functional entry points ───────────────────────

def _to_mesh(vertices: torch.Tensor, frame_rate: int) -> MeshSequence:
    return MeshSequence(vertices.detach().cpu().numpy(), frame_rate)


def audio_encode(mel, speaker, params: JointFaceNet) -> torch.Tensor:
    return params.audio_encode(mel, speaker)


def text_encode(text, params: JointFaceNet) -> torch.Tensor:
    return params.text_encode(text)


def decode(fused: Union[FusedFrames, torch.Tensor], template: TemplateMesh, params: JointFaceNet,
           frame_rate: int = 25) -> MeshSequence:
    values = fused.values if isinstance(fused, FusedFrames) else fused
    with torch.no_grad():
        offsets = params.decode_offsets(values.to(params.dtype))
        return _to_mesh(offsets + params.template_tensor(template), frame_rate)


def forward(mel, text, speaker, template: TemplateMesh, params: JointFaceNet,
            fusion_mode: Union[str, FusionMode, None] = None, frame_rate: int = 25) -> MeshSequence:
    if fusion_mode is not None and FusionMode.parse(fusion_mode) != params.fusion_mode:
        raise InputError(
            f"Model was built for fusion mode {params.fusion_mode.value}, got {FusionMode.parse(fusion_mode).value}"
        )
    with torch.no_grad():
        return _to_mesh(params.predict_vertices(mel, text, speaker, template), frame_rate)
