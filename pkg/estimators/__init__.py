# estimators: the four uncertainty predictors
from estimators.base import PredictorBase
from estimators.baseline import BaselinePredictor, baseline_predict
from estimators.ensemble import EnsembleModel, EnsemblePredictor, ensemble_predict, ensemble_train
from estimators.mc_dropout import McDropoutConfig, McDropoutPredictor, mc_dropout_predict

__all__ = [
    "BaselinePredictor",
    "EnsembleModel",
    "EnsemblePredictor",
    "McDropoutConfig",
    "McDropoutPredictor",
    "PredictorBase",
    "baseline_predict",
    "ensemble_predict",
    "ensemble_train",
    "mc_dropout_predict",
]
