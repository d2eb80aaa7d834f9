"""
JointFace — Model Package
Re-exports for convenience.
"""
from jointface.model.checkpoint import Checkpoint, load_checkpoint, manifest_hash, save_checkpoint
from jointface.model.grads import finite_difference_check, gradients
from jointface.model.inference import infer, infer_all_speakers
from jointface.model.layers import DilatedConvSpec, concat_fuse, dilated_conv1d, tensor_fuse
from jointface.model.network import (
    EncoderOutputs,
    FusedFrames,
    FusionMode,
    JointFaceNet,
    ModelDims,
    audio_encode,
    decode,
    forward,
    one_hot,
    text_encode,
)

# The full set of learnable weights; gradient slots live on each parameter's .grad.
ModelParams = JointFaceNet
