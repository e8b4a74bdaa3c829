"""Desk-scale CNN: layers, training, Grad-CAM, checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .gradcam import Heatmap, grad_cam, overlay
from .layers import cross_entropy, softmax
from .model import ToyCnn, TrainConfig
from .train import gradient_check, image_to_input, load_split, predict_frames, train

__all__ = [
    "Heatmap",
    "ToyCnn",
    "TrainConfig",
    "cross_entropy",
    "grad_cam",
    "gradient_check",
    "image_to_input",
    "load_checkpoint",
    "load_split",
    "overlay",
    "predict_frames",
    "save_checkpoint",
    "softmax",
    "train",
]
