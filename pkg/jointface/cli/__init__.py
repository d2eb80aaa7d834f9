"""JointFace — command-line entry points."""
from jointface.cli.main import build_parser, main
