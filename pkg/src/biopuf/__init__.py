"""biopuf: simulation and analysis toolkit for optical unclonable tokens."""

from .optics import (Challenge, JitterParams, OpticsConfig, SpecklePattern,
                     SurfaceParams, VirtualPuf, make_challenge, mint_puf,
                     remeasure, render_speckle)
from .hashing import BinaryKey, GaborHasher, GaborKernel, binarize, gabor_filter, hash_speckle
from .metrics import (axis_entropy, correlation, dof, fit_threshold,
                      fractional_hd, inter_stats, intra_stats)
from .auth import AuthDecision, CrpRecord, CrpStore, binom_cdf, far_frr, verify
from .crypto import (Ciphertext, OneTimePad, PublicDictionary,
                     build_dictionary, decrypt, encrypt)
from .pipeline import RunConfig, run_fleet

__version__ = "0.1.0"

__all__ = [
    "Challenge", "JitterParams", "OpticsConfig", "SpecklePattern",
    "SurfaceParams", "VirtualPuf", "make_challenge", "mint_puf", "remeasure",
    "render_speckle", "BinaryKey", "GaborHasher", "GaborKernel", "binarize",
    "gabor_filter", "hash_speckle", "axis_entropy", "correlation", "dof",
    "fit_threshold", "fractional_hd", "inter_stats", "intra_stats",
    "AuthDecision", "CrpRecord", "CrpStore", "binom_cdf", "far_frr", "verify",
    "Ciphertext", "OneTimePad", "PublicDictionary", "build_dictionary",
    "decrypt", "encrypt", "RunConfig", "run_fleet",
]
