# estimators/fsl: prototypical few-shot predictor, episodes, training, evaluation
from estimators.fsl.core import (
    PrototypeSet,
    ProtoPredictor,
    compute_prototypes,
    embed,
    proto_predict,
    proto_probabilities,
)
from estimators.fsl.episodes import Episode, sample_episode, write_episode
from estimators.fsl.evaluate import EpisodicResult, episodic_eval
from estimators.fsl.train import EpisodicConfig, episodic_train

__all__ = [
    "Episode",
    "EpisodicConfig",
    "EpisodicResult",
    "PrototypeSet",
    "ProtoPredictor",
    "compute_prototypes",
    "embed",
    "episodic_eval",
    "episodic_train",
    "proto_predict",
    "proto_probabilities",
    "sample_episode",
    "write_episode",
]
