"""Procedural clips standing in for real videos, tracklets and backbone features."""
from .generate import (
    ClipRecord,
    DatasetConfig,
    Dims,
    EventAnnotation,
    ObjectScript,
    generate_dataset,
    sample_clip_objects,
)
from .io import EVGFError, read_dataset, read_evgf, write_dataset, write_evgf
from .ontology import ROLES, VerbOntology, default_ontology
from .render import GridFeaturePack, render_grid_features

__all__ = [
    "ClipRecord", "DatasetConfig", "Dims", "EVGFError", "EventAnnotation", "GridFeaturePack",
    "ObjectScript", "ROLES", "VerbOntology", "default_ontology", "generate_dataset",
    "read_dataset", "read_evgf", "render_grid_features", "sample_clip_objects",
    "write_dataset", "write_evgf",
]
