from .layers import BatchNorm1d, Conv1d, GlobalMaxPool, L2Normalize, Linear, Param, ReLU
from .optim import Adam
from .resnet import Bottleneck, EncoderConfig, ResNet1d

__all__ = [
    "Adam",
    "BatchNorm1d",
    "Bottleneck",
    "Conv1d",
    "EncoderConfig",
    "GlobalMaxPool",
    "L2Normalize",
    "Linear",
    "Param",
    "ReLU",
    "ResNet1d",
]
