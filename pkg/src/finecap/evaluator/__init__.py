from .losses import (TotalLoss, TrainingBatch, TrivialNegatives, contrastive_loss,
                     contrastive_terms, matching_loss, matching_pairs, sample_trivial_negatives,
                     total_loss)
from .model import (DegenerateError, EvaluatorModel, pool_moment_embedding, score, score_pooled,
                    sigmoid, similarity)
from .selection import best_candidate, score_candidates, select_and_filter
from .training import (EpochStats, TrainerConfig, TrainResult, TrainingDiverged, load_checkpoint,
                       save_checkpoint, train, write_trace)

__all__ = [
    "DegenerateError", "EpochStats", "EvaluatorModel", "TotalLoss", "TrainResult", "TrainerConfig",
    "TrainingBatch", "TrainingDiverged", "TrivialNegatives", "best_candidate", "contrastive_loss",
    "contrastive_terms", "load_checkpoint", "matching_loss", "matching_pairs",
    "pool_moment_embedding", "sample_trivial_negatives", "save_checkpoint", "score",
    "score_candidates", "score_pooled", "select_and_filter", "sigmoid", "similarity",
    "total_loss", "train", "write_trace",
]
