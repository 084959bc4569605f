"""
fzzlab - closed forms, simulations and identity checks around the FZZ formula
"""

from .core import (
    Branch,
    ConeGeometry,
    Cosmology,
    InsertionSpec,
    LcftParams,
    Window,
    cone_geometry,
    insertion_spec,
    make_cosmology,
    make_params,
    s_cosine_factor,
)
from .dist import InverseGammaParams, stream
from .report import VerificationReport
from .errors import *

__all__ = [
    'Branch',
    'ConeGeometry',
    'Cosmology',
    'InsertionSpec',
    'InverseGammaParams',
    'LcftParams',
    'VerificationReport',
    'Window',
    'cone_geometry',
    'insertion_spec',
    'make_cosmology',
    'make_params',
    's_cosine_factor',
    'stream',
]
