"""
Multi-component scenarios: indistinguishable emission and dispersive readout.
"""

from .emission import (
    DETERMINISTIC_NAMES,
    EmissionCoords,
    emission_model,
    emission_coords,
    emission_deterministic_vars,
    emission_closed_form,
    emission_record_vars,
)
from .dispersive import (
    DispersiveBlockState,
    EffectiveQnd,
    dispersive_model,
    dispersive_filter_nodrive,
    effective_qnd,
    level_frequencies,
    offdiagonal_params,
    offdiagonal_riccati_residual,
    reduced_qudit,
    stationary_amplitudes,
)

__all__ = [
    "DETERMINISTIC_NAMES",
    "EmissionCoords",
    "emission_model",
    "emission_coords",
    "emission_deterministic_vars",
    "emission_closed_form",
    "emission_record_vars",
    "DispersiveBlockState",
    "EffectiveQnd",
    "dispersive_model",
    "dispersive_filter_nodrive",
    "effective_qnd",
    "level_frequencies",
    "offdiagonal_params",
    "offdiagonal_riccati_residual",
    "reduced_qudit",
    "stationary_amplitudes",
]
