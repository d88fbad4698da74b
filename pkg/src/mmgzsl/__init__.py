"""Multimodal generalized zero-shot classification over precomputed feature vectors.

Modules: :mod:`nn` (MLP substrate), :mod:`dataio`, :mod:`transform` (cycle
translation between modalities), :mod:`synth` (regressor-guided CVAE),
:mod:`evaluate`, :mod:`config`, :mod:`checkpoint`, :mod:`plotting` and :mod:`cli`.
"""

__version__ = "0.1.0"
