from .energy import (INSIDE, OUTSIDE, EnergyInstance, LabelAssignment, beta_weight,
                     beta_weights, boundary_facets, build_energy, camera_cells_of,
                     direct_threshold, energy_of, min_cut_solve)
from .labatut import labatut_unaries
from .maxflow import NonSubmodular, potts_cut

__all__ = ["INSIDE", "OUTSIDE", "EnergyInstance", "LabelAssignment", "NonSubmodular",
           "beta_weight", "beta_weights", "boundary_facets", "build_energy", "camera_cells_of",
           "direct_threshold", "energy_of", "labatut_unaries", "min_cut_solve", "potts_cut"]
