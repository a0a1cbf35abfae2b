"""Stereo 3D SELD toolkit: acoustic features, synthetic-data transforms,
inference of a cross-modal Conformer model, visual post-processing,
ensembling, and DCASE-style evaluation."""

__version__ = "0.1.0"
