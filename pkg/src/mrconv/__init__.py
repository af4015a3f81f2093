"""Multi-resolution causal convolutions with exact branch merging."""

from . import conv, kernels, layer, nn, ops, optim, spectral, ssm
from .autodiff import Parameter, Tape, Var
from .conv import ConvEngine, bidirectional_conv, causal_conv_direct, causal_conv_fft
from .kernels import (DenseKernel, DilatedKernel, FourierKernel, RescaledPairKernel,
                      SparseKernel, init_kernel, sample_sparse_positions)
from .layer import (BatchNorm, MergedConv, MultiResConv, bn_fold, branch_lengths,
                    grouped_conv, multi_head_expand, num_resolutions)
from .nn import Block, Model
from .optim import AdamW, lr_schedule
from .spectral import fft, ifft, irfft, next_pow2, rfft, zero_pad

__version__ = "0.1.0"

__all__ = [
    "AdamW", "BatchNorm", "Block", "ConvEngine", "DenseKernel", "DilatedKernel",
    "FourierKernel", "MergedConv", "Model", "MultiResConv", "Parameter",
    "RescaledPairKernel", "SparseKernel", "Tape", "Var", "bidirectional_conv",
    "bn_fold", "branch_lengths", "causal_conv_direct", "causal_conv_fft", "fft",
    "grouped_conv", "ifft", "init_kernel", "irfft", "lr_schedule",
    "multi_head_expand", "next_pow2", "num_resolutions", "rfft",
    "sample_sparse_positions", "zero_pad",
]
