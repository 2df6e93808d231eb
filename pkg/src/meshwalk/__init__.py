"""meshwalk: mesh classification and segmentation with random vertex walks.

A mesh is turned into many short random walks over its vertices; a recurrent
network reads each walk's step displacements and predicts either a class for
the whole mesh (final step) or a label per visited vertex (later steps).
Includes quadric-error mesh simplification, a synthetic dataset generator,
training/evaluation pipelines and a CLI (``meshwalk --help``).
"""

from .errors import ConfigError, DataError, NumericalError
from .mesh import (Mesh, MeshError, connected_components, is_closed_manifold,
                   load_mesh, normalize_unit_sphere, parse_obj, parse_off,
                   random_rotation, rotation_matrix, save_off)
from .simplify import SimplifyResult, simplify_to_face_count
from .walker import (Walk, default_walk_length, features_from_positions,
                     generate_walk, walk_features)
from .model import ModelConfig, Network, load_model, save_model, second_half_start
from .dataset import Dataset, DatasetEntry, load_dataset
from .pipeline import (TrainConfig, TrainResult, classify_mesh, edge_accuracy,
                       evaluate_classification, evaluate_segmentation,
                       segment_mesh, train)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "NumericalError",
    "Mesh", "MeshError", "connected_components", "is_closed_manifold",
    "load_mesh", "normalize_unit_sphere", "parse_obj", "parse_off",
    "random_rotation", "rotation_matrix", "save_off",
    "SimplifyResult", "simplify_to_face_count",
    "Walk", "default_walk_length", "features_from_positions",
    "generate_walk", "walk_features",
    "ModelConfig", "Network", "load_model", "save_model",
    "second_half_start",
    "Dataset", "DatasetEntry", "load_dataset",
    "TrainConfig", "TrainResult", "classify_mesh", "edge_accuracy",
    "evaluate_classification", "evaluate_segmentation", "segment_mesh",
    "train",
    "__version__",
]
