from .checkpoint import Checkpoint, CheckpointError, FingerprintError, load_checkpoint, save_checkpoint
from .config import ModelConfig, TrainConfig, toy_profile
from .frozen import FrozenEmbeddingTable, read_frozen, write_frozen
from .model import init_params, model_forward, sentence_loss
from .train import NumericError, make_instances, predict, train

__all__ = [
    "Checkpoint", "CheckpointError", "FingerprintError", "FrozenEmbeddingTable", "ModelConfig",
    "NumericError", "TrainConfig", "init_params", "load_checkpoint", "make_instances",
    "model_forward", "predict", "read_frozen", "save_checkpoint", "sentence_loss", "toy_profile",
    "train", "write_frozen",
]
