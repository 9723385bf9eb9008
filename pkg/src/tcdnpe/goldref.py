"""Golden fixed-point MLP model: exact wide dot products and the shared activation policy."""

from dataclasses import dataclass, field

import numpy as np

from .fixed import ACC_WIDTH, DEFAULT_FRAC_BITS, WORD_MAX, WORD_MIN, quantize_relu, wrap_signed


def exact_dot(pairs, acc_width=ACC_WIDTH):
    """Signed sum of products with Python integers, wrapped to ``acc_width`` bits."""
    return wrap_signed(sum(a * b for a, b in pairs), acc_width)


@dataclass
class MlpModel:
    """Layer sizes plus one ``(inputs, neurons)`` int16-range weight matrix per layer."""

    layer_sizes: list
    weights: list = field(default_factory=list)

    def __post_init__(self):
        self.layer_sizes = [int(n) for n in self.layer_sizes]
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError("an MLP needs at least two positive layer sizes")
        self.weights = [np.asarray(w, dtype=np.int64) for w in self.weights]
        if len(self.weights) != len(self.layer_sizes) - 1:
            raise ValueError("need one weight matrix per consecutive layer pair")
        for l, w in enumerate(self.weights):
            shape = (self.layer_sizes[l], self.layer_sizes[l + 1])
            if w.shape != shape:
                raise ValueError(f"layer {l} weights have shape {w.shape}, expected {shape}")
            if w.size and (w.min() < WORD_MIN or w.max() > WORD_MAX):
                raise ValueError(f"layer {l} weights exceed the 16-bit range")

    @classmethod
    def random(cls, layer_sizes, rng, low=-256, high=255):
        """Seeded uniform weights in ``[low, high]`` (small Q8.8 magnitudes)."""
        sizes = [int(n) for n in layer_sizes]
        weights = [rng.integers(low, high + 1, size=(sizes[l], sizes[l + 1]))
                   for l in range(len(sizes) - 1)]
        return cls(sizes, weights)


def layer_forward(features, weights, shift=DEFAULT_FRAC_BITS, acc_width=ACC_WIDTH):
    """One fully connected layer for a single input vector."""
    features = [int(x) for x in features]
    out = []
    for u in range(weights.shape[1]):
        column = [int(w) for w in weights[:, u]]
        out.append(quantize_relu(exact_dot(zip(features, column), acc_width), shift))
    return out


def mlp_forward(model, inputs, shift=DEFAULT_FRAC_BITS, acc_width=ACC_WIDTH):
    """Forward pass of every sample in ``inputs``.

    Returns a list over layers (hidden and output) of ``(B, neurons)``
    integer arrays. Every layer, the output layer included, goes through
    ReLU and quantisation, mirroring the engine's activation unit.
    """
    batch = np.asarray(inputs, dtype=np.int64)
    if batch.ndim == 1:
        batch = batch[None, :]
    if batch.shape[1] != model.layer_sizes[0]:
        raise ValueError(f"input length {batch.shape[1]} != model input size {model.layer_sizes[0]}")
    if batch.size and (batch.min() < WORD_MIN or batch.max() > WORD_MAX):
        raise ValueError("input features exceed the 16-bit range")
    outputs = []
    current = [list(row) for row in batch]
    for w in model.weights:
        current = [layer_forward(x, w, shift, acc_width) for x in current]
        outputs.append(np.array(current, dtype=np.int64).reshape(len(current), w.shape[1]))
    return outputs
