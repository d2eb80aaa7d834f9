"""
JointFace — speech-driven 3D facial animation from audio and transcript.

    audiofeat   WAV → 128-channel dB mel frames at the video rate
    textfeat    word alignment + contextual word vectors → per-frame text features
    model       dilated-conv audio encoder, LSTM text encoder, tensor fusion, BLSTM decoder
    train       corpus manifests, vertex MSE, Adam, the epoch loop
    eval        region errors, modality correlation, embedding export, ablation
    synth       synthetic corpus with planted audio/text coupling
    cli         `python -m jointface <command>`
"""
__version__ = "0.1.0"
