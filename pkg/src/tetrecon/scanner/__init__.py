from .shapes import SHAPE_KINDS, InvalidParams, generate_shape, prescale
from .scan import PRESETS, EmptyScan, Scan, ScanConfig, add_outliers, preset, scan
from .inside import PointInMesh, occupancy_ground_truth, point_in_mesh
