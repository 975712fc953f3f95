from ..distribution import OutcomeDistribution
from .base import PROB_FLOOR, BaseModel, TrainedModel, base_model
from .forest import RandomForestModel, RFConfig, rf_predict, rf_train
from .neural import NeuralNetModel, NNConfig, nn_predict, nn_train

__all__ = [
    "OutcomeDistribution",
    "PROB_FLOOR",
    "BaseModel",
    "TrainedModel",
    "base_model",
    "RandomForestModel",
    "RFConfig",
    "rf_predict",
    "rf_train",
    "NeuralNetModel",
    "NNConfig",
    "nn_predict",
    "nn_train",
]
