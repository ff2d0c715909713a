"""SeaNet saliency network for aerial and satellite imagery, with its losses, metrics and tooling."""

from .decoder import SaliencyOutputs
from .losses import LossBundle, SeaNetLoss
from .model import Ablation, SeaNet, build_model

__all__ = ["Ablation", "LossBundle", "SaliencyOutputs", "SeaNet", "SeaNetLoss", "build_model"]
__version__ = "0.1.0"
