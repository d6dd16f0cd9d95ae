"""Neural building blocks on top of :mod:`fcsl.ad`."""

from .attention import MultiHeadAttention
from .layers import BatchNorm, Block, FeedForward, LayerNorm, Linear
from .mamba import MambaBlock, MambaLayer
from .sab import SAB, SpatialAttentionLayer
from .tffl import TFFL

__all__ = ["Block", "Linear", "LayerNorm", "BatchNorm", "FeedForward", "MultiHeadAttention",
           "TFFL", "SpatialAttentionLayer", "SAB", "MambaLayer", "MambaBlock"]
