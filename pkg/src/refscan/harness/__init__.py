from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .evaluation import aggregate_report, evaluate, predict_records, write_report
from .fixtures import GenConfig, generate_fixtures, synth_samples
from .formats import FixtureDataset, SampleRecord, load_annotations, read_tensor, save_annotations, write_tensor
from .training import Adam, TrainResult, lr_at_step, train, write_loss_curve

__all__ = [
    "Adam",
    "Checkpoint",
    "FixtureDataset",
    "GenConfig",
    "SampleRecord",
    "TrainResult",
    "aggregate_report",
    "evaluate",
    "generate_fixtures",
    "load_annotations",
    "load_checkpoint",
    "lr_at_step",
    "predict_records",
    "read_tensor",
    "save_annotations",
    "save_checkpoint",
    "synth_samples",
    "train",
    "write_loss_curve",
    "write_tensor",
    "write_report",
]
