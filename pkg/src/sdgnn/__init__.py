"""Node embeddings for signed directed graphs."""

from sdgnn.graph import Relation, SignedDigraph, load_edge_list, save_edge_list, split_edges
from sdgnn.kernels import backend
from sdgnn.model import ModelConfig, encode_all, init_parameters
from sdgnn.trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "ModelConfig",
    "Relation",
    "SignedDigraph",
    "TrainConfig",
    "backend",
    "encode_all",
    "init_parameters",
    "load_edge_list",
    "save_edge_list",
    "split_edges",
    "train",
]
