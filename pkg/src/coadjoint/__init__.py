"""Numerical coadjoint-orbit geometry for the compact classical groups."""
from .lie_core import (
    AlgebraElement,
    CartanSpec,
    Family,
    GroupFamily,
    adjoint_action,
    build_cartan,
    killing_pairing,
    sample_group_element,
)

__version__ = "0.1.0"
