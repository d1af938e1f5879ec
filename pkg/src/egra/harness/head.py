"""Classification head: masked mean pooling over frames, then an MLP."""

import torch
from torch import nn


class ClassifierHead(nn.Module):
    """Pools encoder frames over time and maps to class logits.

    Padding frames are excluded from the mean via the frame mask, so
    batched and single-item inference agree.
    """

    def __init__(self, frame_dim: int, n_classes: int, hidden: tuple[int, ...] = (128, 64)):
        super().__init__()
        layers: list[nn.Module] = []
        width = frame_dim
        for h in hidden:
            layers.append(nn.Linear(width, h))
            layers.append(nn.GELU())
            width = h
        layers.append(nn.Linear(width, n_classes))
        self.mlp = nn.Sequential(*layers)
        self.frame_dim = frame_dim
        self.n_classes = n_classes

    def forward(self, frames: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
        """frames: (batch, time, frame_dim); mask: (batch, time) bool. Returns logits."""
        if mask is None:
            pooled = frames.mean(dim=1)
        else:
            weights = mask.to(frames.dtype).unsqueeze(-1)
            denom = weights.sum(dim=1).clamp_min(1.0)
            pooled = (frames * weights).sum(dim=1) / denom
        return self.mlp(pooled)

    def probabilities(self, frames: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
        return torch.softmax(self.forward(frames, mask), dim=-1)
