"""
JointFace — Core Package
Re-exports for convenience.
"""
from jointface.core.mesh import MeshSequence, OffsetSequence, TemplateMesh, from_offsets, to_offsets
from jointface.core.msq import (
    load_mesh_sequence,
    load_template,
    read_mesh_sequence,
    save_mesh_sequence,
    save_template,
    write_mesh_sequence,
)
from jointface.core.regions import RegionMask, load_region_mask, write_region_mask
from jointface.core.utterance import Utterance
