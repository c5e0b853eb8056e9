"""
Dense networks in 64-bit floats with explicitly seeded initialization and dropout masks.
"""
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

DTYPE = torch.float64


class DenseNet(nn.Module):
    """
    Rectified hidden layers, optional tanh output and optional dropout after each hidden layer.
    Dropout masks come from the generator passed to forward, so a fixed seed gives a fixed mask.
    """

    def __init__(
        self,
        dims: Sequence[int],
        squash: bool = False,
        dropout: float = 0.0,
        generator: Optional[torch.Generator] = None,
        zero_last: bool = False,
    ):
        super().__init__()
        if len(dims) < 2:
            raise ValueError("a network needs at least input and output widths")
        self.dims = list(dims)
        self.squash = squash
        self.dropout = dropout
        self.layers = nn.ModuleList(nn.Linear(a, b, dtype=DTYPE) for a, b in zip(dims, dims[1:]))
        with torch.no_grad():
            for layer in self.layers:
                bound = 1.0 / np.sqrt(layer.in_features)
                layer.weight.copy_((torch.rand(layer.weight.shape, generator=generator, dtype=DTYPE) * 2 - 1) * bound)
                layer.bias.copy_((torch.rand(layer.bias.shape, generator=generator, dtype=DTYPE) * 2 - 1) * bound)
            if zero_last:
                self.layers[-1].weight.zero_()
                self.layers[-1].bias.zero_()

    def forward(self, x: torch.Tensor, generator: Optional[torch.Generator] = None) -> torch.Tensor:
        for layer in self.layers[:-1]:
            x = torch.relu(layer(x))
            if self.training and self.dropout > 0:
                keep = torch.rand(x.shape, generator=generator, dtype=DTYPE) >= self.dropout
                x = x * keep / (1.0 - self.dropout)
        x = self.layers[-1](x)
        return torch.tanh(x) if self.squash else x


def as_tensor(x) -> torch.Tensor:
    return torch.as_tensor(np.asarray(x, dtype=np.float64), dtype=DTYPE)


def net_forward_backward(
    net: DenseNet,
    inputs,
    upstream,
    seed: Optional[int] = None,
) -> Tuple[np.ndarray, Dict[str, np.ndarray], np.ndarray]:
    """
    Forward pass plus the vector-Jacobian product with an upstream gradient.

    Args:
        net: Network to differentiate
        inputs: (batch, in) inputs
        upstream: (batch, out) gradient of the loss with respect to the output
        seed: Dropout mask seed; None uses the global generator

    Returns:
        Output, gradient of every parameter and gradient of the input
    """
    generator = torch.Generator().manual_seed(seed) if seed is not None else None
    x = as_tensor(inputs).requires_grad_(True)
    net.zero_grad(set_to_none=True)
    out = net(x, generator)
    out.backward(as_tensor(upstream))
    grads = {name: p.grad.detach().numpy().copy() for name, p in net.named_parameters()}
    net.zero_grad(set_to_none=True)
    return out.detach().numpy(), grads, x.grad.detach().numpy()


def polyak(target: nn.Module, online: nn.Module, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target."""
    with torch.no_grad():
        for t, o in zip(target.parameters(), online.parameters()):
            if tau == 1.0:
                t.copy_(o)
            else:
                t.mul_(1.0 - tau).add_(o, alpha=tau)
