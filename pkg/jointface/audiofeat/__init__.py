"""
JointFace — Audio Features Package
Re-exports for convenience.
"""
from jointface.audiofeat.cache import FeatureCache, read_mel_frames, write_mel_frames
from jointface.audiofeat.mel import DB_FLOOR, MelFrames, hop_length, mel_features
from jointface.audiofeat.wav import AudioClip, load_audio, resample_linear, write_audio
