from .ply import ParseError, PlyData, UnsupportedElement, read_mesh, read_ply, write_mesh, write_ply
from .bundle import (IndexOutOfRange, MissingSidecar, ScanBundle, bundle_from_scan,
                     read_scan_bundle, write_scan_bundle)
from .config import DEFAULTS, SchemaError, read_config, scan_config, validate_config
from .model_io import load_model, save_model
from .dataset import load_scene, read_manifest, write_manifest, write_scene
