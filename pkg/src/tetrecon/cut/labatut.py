"""Handcrafted visibility unaries used as the non-learned baseline."""

import numpy as np

from ..raycast import labatut_evidence

SIGMA_FLOOR = 1e-3
ALPHA_VIS = 32.0
LAMBDA = 5.0


def labatut_unaries(tri, cameras, point_refs, sigma, alpha_vis=ALPHA_VIS):
    """(i_t, o_t) evidence: lines of sight vote outside, the two ray cells behind p vote inside.

    Each vote weighs alpha_vis (1 - exp(-len^2 / 2 sigma^2)) with len the
    cell's distance value for that sighting; sigma is floored at 1e-3.
    """
    sigma = max(float(sigma), SIGMA_FLOOR)
    inside, outside = labatut_evidence(tri, cameras, point_refs, sigma, alpha_vis)
    return np.stack([inside, outside], axis=1)
