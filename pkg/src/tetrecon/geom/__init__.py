from .predicates import PredicateContractError, in_sphere, orient3d
from .delaunay import (INF, DegenerateInput, Tetrahedralization, build_delaunay, cell_contains,
                       empty_sphere_violations, facet_incidence, locate, locate_many,
                       neighbor_symmetry_failures, orientation_failures)
from .morphology import CellMorphology, InfiniteCell, cell_morphology, morphology_arrays
