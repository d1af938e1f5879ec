"""Speech encoders: the built-in tiny spectral encoder and adapters for
pretrained transformer backbones loaded by checkpoint identifier.
"""

import logging
from typing import Protocol, runtime_checkable

import torch
from torch import nn

from ..corpus import CANONICAL_RATE_HZ

logger = logging.getLogger(__name__)


@runtime_checkable
class SpeechEncoder(Protocol):
    """Maps batched waveforms to per-frame embeddings.

    Implementations are nn.Modules; in eval mode the output is
    deterministic for a fixed input.
    """

    id: str
    frame_dim: int
    min_samples: int

    def forward(self, waves: torch.Tensor, lengths: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """waves: (batch, samples) padded; lengths: (batch,) valid sample counts.

        Returns (frames, mask): (batch, time, frame_dim) and (batch, time) bool.
        """
        ...


class TinyEncoder(nn.Module):
    """Small trainable encoder for desk-scale runs: a fixed short-time
    magnitude-spectrum frontend followed by two trainable linear layers.
    """

    def __init__(self, frame_dim: int = 32, window: int = 400, hop: int = 160, seed: int = 0):
        super().__init__()
        self.id = f"tiny:{frame_dim}"
        self.frame_dim = frame_dim
        self.window = window
        self.hop = hop
        self.min_samples = window
        n_bins = window // 2 + 1
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            self.proj = nn.Linear(n_bins, frame_dim)
            self.mix = nn.Linear(frame_dim, frame_dim)
        self.register_buffer("taper", torch.hann_window(window, periodic=False))

    def forward(self, waves: torch.Tensor, lengths: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if waves.shape[-1] < self.window:
            raise ValueError(
                f"waveform shorter than encoder receptive field "
                f"({waves.shape[-1]} < {self.window} samples)"
            )
        frames = waves.unfold(-1, self.window, self.hop)  # (batch, time, window)
        mags = torch.abs(torch.fft.rfft(frames * self.taper, dim=-1))
        x = torch.log1p(mags)
        x = torch.tanh(self.proj(x))
        x = self.mix(x)
        n_frames = frames.shape[1]
        frame_idx = torch.arange(n_frames, device=waves.device)
        frame_end = frame_idx * self.hop + self.window
        mask = frame_end.unsqueeze(0) <= lengths.unsqueeze(1)
        # At least the first frame is valid (lengths >= window is enforced above
        # for the longest item; shorter items keep their covered frames).
        mask[:, 0] = True
        return x, mask


class TransformerBackbone(nn.Module):
    """Adapter exposing a Hugging Face speech model as a SpeechEncoder.

    Supports the wav2vec 2.0 / HuBERT families (raw waveform input) and
    the Whisper family, from which only the encoder is used; inputs are
    converted to the model's log-mel features first.
    """

    def __init__(self, checkpoint_id: str, model: nn.Module, family: str, feature_extractor=None):
        super().__init__()
        self.id = checkpoint_id
        self.family = family
        self.model = model
        self.feature_extractor = feature_extractor
        self.frame_dim = int(model.config.hidden_size if family != "whisper" else model.config.d_model)
        self.min_samples = 400  # one 25 ms frontend window

    def forward(self, waves: torch.Tensor, lengths: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if waves.shape[-1] < self.min_samples:
            raise ValueError(
                f"waveform shorter than encoder receptive field "
                f"({waves.shape[-1]} < {self.min_samples} samples)"
            )
        if self.family == "whisper":
            feats = self.feature_extractor(
                [w[:n].cpu().numpy() for w, n in zip(waves, lengths)],
                sampling_rate=CANONICAL_RATE_HZ,
                return_tensors="pt",
            ).input_features.to(waves.device)
            hidden = self.model(feats).last_hidden_state
            mask = torch.ones(hidden.shape[:2], dtype=torch.bool, device=waves.device)
            return hidden, mask
        attention = (
            torch.arange(waves.shape[-1], device=waves.device).unsqueeze(0) < lengths.unsqueeze(1)
        ).long()
        out = self.model(waves, attention_mask=attention)
        hidden = out.last_hidden_state
        frame_lengths = self.model._get_feat_extract_output_lengths(lengths)
        mask = (
            torch.arange(hidden.shape[1], device=waves.device).unsqueeze(0)
            < frame_lengths.unsqueeze(1)
        )
        return hidden, mask


def load_encoder(checkpoint_id: str, seed: int = 0) -> nn.Module:
    """Build an encoder from a checkpoint identifier.

    "tiny" (optionally "tiny:<frame_dim>") is the built-in random-init
    encoder; anything else is resolved through transformers by name.
    """
    if checkpoint_id == "tiny" or checkpoint_id.startswith("tiny:"):
        frame_dim = int(checkpoint_id.split(":", 1)[1]) if ":" in checkpoint_id else 32
        return TinyEncoder(frame_dim=frame_dim, seed=seed)

    try:
        import transformers
    except ImportError as exc:
        raise RuntimeError(
            f"loading {checkpoint_id!r} requires the transformers package"
        ) from exc

    lowered = checkpoint_id.lower()
    if "whisper" in lowered:
        model = transformers.WhisperModel.from_pretrained(checkpoint_id).encoder
        extractor = transformers.WhisperFeatureExtractor.from_pretrained(checkpoint_id)
        return TransformerBackbone(checkpoint_id, model, "whisper", extractor)
    if "hubert" in lowered:
        model = transformers.HubertModel.from_pretrained(checkpoint_id)
        return TransformerBackbone(checkpoint_id, model, "hubert")
    # wav2vec 2.0 and compatible CTC-pretrained checkpoints
    model = transformers.Wav2Vec2Model.from_pretrained(checkpoint_id)
    return TransformerBackbone(checkpoint_id, model, "wav2vec2")
