"""
JointFace — Synthetic Corpus Package
Re-exports for convenience.
"""
from jointface.synth.generator import GeneratedCorpus, SynthSpec, generate_corpus, grid_regions, grid_template
