"""Exact diagonalization toolkit for single- and multi-species PVBS spin models."""

from .errors import ConsistencyError, ConvergenceError, ValidationError
from .lattice import (
    DiamondRegion,
    LatticeRegion,
    enlarge,
    is_connected,
    load_sites,
    make_box,
    make_centered_box,
    make_diamond,
)
from .model import (
    ModelParams,
    SectorBasis,
    SparseOperator,
    assemble_full,
    assemble_multispecies,
    assemble_sector,
    bond_matrix,
    one_particle_matrix,
)
from .groundstate import kernel_basis, multispecies_ground_state, normalization_C, one_particle_ground_state
from .spectra import finite_gap, lowest_eigenpairs, one_particle_spectrum
from .bounds import (
    diamond_probe_energy,
    gap_bounds,
    martingale_lower_bound,
    rectangle_probe_energy,
    slab_condition3_bound,
)
from .thermo import RegionFamily, classify_scenario, ltqo_verify

__version__ = "0.1.0"

__all__ = [
    "ConsistencyError",
    "ConvergenceError",
    "ValidationError",
    "DiamondRegion",
    "LatticeRegion",
    "enlarge",
    "is_connected",
    "load_sites",
    "make_box",
    "make_centered_box",
    "make_diamond",
    "ModelParams",
    "SectorBasis",
    "SparseOperator",
    "assemble_full",
    "assemble_multispecies",
    "assemble_sector",
    "bond_matrix",
    "one_particle_matrix",
    "kernel_basis",
    "multispecies_ground_state",
    "normalization_C",
    "one_particle_ground_state",
    "finite_gap",
    "lowest_eigenpairs",
    "one_particle_spectrum",
    "diamond_probe_energy",
    "gap_bounds",
    "martingale_lower_bound",
    "rectangle_probe_energy",
    "slab_condition3_bound",
    "RegionFamily",
    "classify_scenario",
    "ltqo_verify",
]
