"""Linearized inverse problem for the real drift in a structural credit model.

Forward map, Tikhonov inversion, FBI-transform diagnostics and the symbol
estimates behind the uniqueness argument.
"""

from .model import Field, Grid, ModelParams, ParameterError, TransformedParams, derive_transformed

__all__ = ["Field", "Grid", "ModelParams", "ParameterError", "TransformedParams", "derive_transformed"]
__version__ = "0.1.0"
