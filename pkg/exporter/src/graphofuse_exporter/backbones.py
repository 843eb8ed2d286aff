"""Feature-extraction backbones.

``efficientnet-b7`` is the production extractor: torchvision's pretrained
network with its classifier head dropped, yielding the 2560-wide global
average pool. Weights come from a local file when given, otherwise from the
torchvision download cache; if neither works, MissingWeights is raised.

``debug-tiny`` is a small fixed-seed CNN for pipeline dry-runs and tests; it
needs no weights file and stays deterministic across runs.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .errors import MissingWeights

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class Backbone:
    """Wraps a torch feature extractor with its preprocessing convention."""

    def __init__(self, name: str, module: nn.Module, resolution: int,
                 mean: tuple[float, ...], std: tuple[float, ...], device: str):
        self.name = name
        self.resolution = resolution
        self.mean = mean
        self.std = std
        self.device = device
        self._module = module.to(device).eval()

    def describe(self) -> str:
        return (f"backbone={self.name} resolution={self.resolution} "
                f"preprocessing=grayscale->rgb,resize-bilinear,normalize(mean={self.mean},std={self.std})")

    @torch.no_grad()
    def embed(self, batch: np.ndarray) -> np.ndarray:
        """batch: float32 (B, 3, H, W) already normalized; returns (B, D)."""
        tensor = torch.from_numpy(batch).to(self.device)
        out = self._module(tensor)
        return out.cpu().numpy().astype(np.float64)


class _Pooled(nn.Module):
    """features -> global average pool -> flat vector."""

    def __init__(self, features: nn.Module):
        super().__init__()
        self.features = features
        self.pool = nn.AdaptiveAvgPool2d(1)

    def forward(self, x):
        return torch.flatten(self.pool(self.features(x)), 1)


def _efficientnet_b7(device: str, weights_path: str | None) -> Backbone:
    from torchvision.models import efficientnet_b7

    if weights_path:
        model = efficientnet_b7(weights=None)
        try:
            state = torch.load(weights_path, map_location="cpu", weights_only=True)
        except (OSError, RuntimeError, ValueError) as exc:
            raise MissingWeights(f"cannot load weights from {weights_path}: {exc}") from exc
        model.load_state_dict(state)
    else:
        try:
            from torchvision.models import EfficientNet_B7_Weights

            model = efficientnet_b7(weights=EfficientNet_B7_Weights.IMAGENET1K_V1)
        except Exception as exc:  # download failure, missing cache, ...
            raise MissingWeights(
                f"pretrained EfficientNet-B7 weights unavailable ({exc}); pass --weights <file>"
            ) from exc
    return Backbone("efficientnet-b7", _Pooled(model.features), 600, IMAGENET_MEAN, IMAGENET_STD, device)


def _debug_tiny(device: str) -> Backbone:
    torch.manual_seed(0)  # fixed weights: runs are reproducible without files
    features = nn.Sequential(
        nn.Conv2d(3, 8, kernel_size=5, stride=4), nn.ReLU(),
        nn.Conv2d(8, 16, kernel_size=5, stride=4), nn.ReLU(),
    )
    return Backbone("debug-tiny", _Pooled(features), 64, (0.5, 0.5, 0.5), (0.25, 0.25, 0.25), device)


def build_backbone(name: str, device: str = "cpu", weights_path: str | None = None) -> Backbone:
    if name == "efficientnet-b7":
        return _efficientnet_b7(device, weights_path)
    if name == "debug-tiny":
        return _debug_tiny(device)
    raise ValueError(f"unknown backbone {name!r}")
