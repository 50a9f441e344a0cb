from .encoders import ConvEncoder, MlpEncoder
from .fusion import POS_INDEX, FusionModel, ModelConfig, TransformerLayer, predict_beam, predict_beams

__all__ = [
    "ConvEncoder",
    "MlpEncoder",
    "FusionModel",
    "ModelConfig",
    "TransformerLayer",
    "POS_INDEX",
    "predict_beam",
    "predict_beams",
]
