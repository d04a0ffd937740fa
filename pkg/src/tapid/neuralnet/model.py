"""CNN architectures, forward/backward passes and embedding extraction."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import InvalidInputError
from . import layers as L

DEPTH_REPEATS = {6: 1, 9: 2, 12: 3}


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description.

    ``depth_variant`` 6/9/12 repeats every entry of the filter ladder 1/2/3
    times, with one 2x2 max-pool after the last conv of each ladder step.
    Two hidden fc layers of ``embedding_width`` units follow, then the
    classification layer.
    """

    depth_variant: int = 6
    embedding_width: int = 256
    num_classes: int = 50
    dropout_rate: float = 0.4
    filters: tuple[int, ...] = (32, 64, 128)
    input_shape: tuple[int, int] = (25, 150)

    def __post_init__(self):
        if self.depth_variant not in DEPTH_REPEATS:
            raise InvalidInputError(f"depth_variant must be one of 6, 9, 12, got {self.depth_variant}")
        if self.embedding_width < 1 or self.num_classes < 1:
            raise InvalidInputError("embedding_width and num_classes must be positive")
        if not 0 <= self.dropout_rate < 1:
            raise InvalidInputError("dropout_rate must lie in [0, 1)")
        object.__setattr__(self, "filters", tuple(int(f) for f in self.filters))
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))

    @property
    def conv_filters(self) -> list[int]:
        reps = DEPTH_REPEATS[self.depth_variant]
        return [f for f in self.filters for _ in range(reps)]

    @property
    def pool_after(self) -> list[int]:
        """1-based indices of the conv layers followed by a pool."""
        reps = DEPTH_REPEATS[self.depth_variant]
        return [reps * (i + 1) for i in range(len(self.filters))]

    def spatial_chain(self) -> list[tuple[int, int]]:
        h, w = self.input_shape
        chain = [(h, w)]
        for _ in self.filters:
            h, w = h // 2, w // 2
            chain.append((h, w))
        return chain

    @property
    def flat_size(self) -> int:
        h, w = self.spatial_chain()[-1]
        return h * w * self.filters[-1]

    def to_dict(self) -> dict:
        return {
            "depth_variant": self.depth_variant,
            "embedding_width": self.embedding_width,
            "num_classes": self.num_classes,
            "dropout_rate": self.dropout_rate,
            "filters": list(self.filters),
            "input_shape": list(self.input_shape),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            depth_variant=int(d["depth_variant"]),
            embedding_width=int(d["embedding_width"]),
            num_classes=int(d["num_classes"]),
            dropout_rate=float(d["dropout_rate"]),
            filters=tuple(d["filters"]),
            input_shape=tuple(d["input_shape"]),
        )


@dataclass
class Checkpoint:
    spec: NetworkSpec
    weights: dict[str, np.ndarray]
    training_log: list[dict] = field(default_factory=list)

    def param_count(self) -> int:
        return sum(w.size for w in self.weights.values())

    def with_weights(self, weights) -> "Checkpoint":
        return replace(self, weights=dict(weights))


def weight_shapes(spec: NetworkSpec) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    cin = 1
    for i, cout in enumerate(spec.conv_filters, start=1):
        shapes[f"conv{i}.weight"] = (cout, cin, 3, 3)
        shapes[f"conv{i}.bias"] = (cout,)
        cin = cout
    e = spec.embedding_width
    shapes["fc1.weight"] = (spec.flat_size, e)
    shapes["fc1.bias"] = (e,)
    shapes["fc2.weight"] = (e, e)
    shapes["fc2.bias"] = (e,)
    shapes["out.weight"] = (e, spec.num_classes)
    shapes["out.bias"] = (spec.num_classes,)
    return shapes


def build_network(spec: NetworkSpec, seed: int = 0, dtype=np.float32) -> Checkpoint:
    """He-normal weights (std sqrt(2/fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    weights = {}
    for name, shape in weight_shapes(spec).items():
        if name.endswith(".bias"):
            weights[name] = np.zeros(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
            weights[name] = (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)
    return Checkpoint(spec=spec, weights=weights)


def images_to_batch(images, dtype=np.float32) -> np.ndarray:
    """Stack uint8 images (or SignalImage objects) into a [B,1,H,W] batch in [0,1]."""
    arrs = [getattr(im, "pixels", im) for im in images]
    stacked = np.stack([np.asarray(a) for a in arrs]).astype(dtype)
    return (stacked / dtype(255.0))[:, None, :, :]


@dataclass
class ForwardResult:
    logits: np.ndarray
    probabilities: np.ndarray
    activations: dict[str, np.ndarray]
    caches: list = field(default_factory=list, repr=False)


def forward(ckpt: Checkpoint, batch, train_mode: bool = False, seed=None, rng=None) -> ForwardResult:
    """Run the network on a [B,1,H,W] batch.

    In ``train_mode`` inverted dropout is applied after both hidden fc layers,
    drawing masks from ``rng`` (or a generator seeded with ``seed``).
    ``activations`` holds the post-ReLU outputs of every named layer.
    """
    spec, w = ckpt.spec, ckpt.weights
    x = np.asarray(batch)
    expected = (1, *spec.input_shape)
    if x.ndim != 4 or x.shape[1:] != expected:
        raise InvalidInputError(f"batch must have shape [B, {expected[0]}, {expected[1]}, {expected[2]}], got {x.shape}")
    if train_mode and rng is None:
        rng = np.random.default_rng(seed)
    drop_rng = rng if train_mode else None

    caches = []
    acts = {}
    pools = set(spec.pool_after)
    for i in range(1, len(spec.conv_filters) + 1):
        x, c = L.conv3x3_forward(x, w[f"conv{i}.weight"], w[f"conv{i}.bias"])
        caches.append(("conv", f"conv{i}", c))
        x, c = L.relu_forward(x)
        caches.append(("relu", None, c))
        acts[f"conv{i}"] = x
        if i in pools:
            x, c = L.maxpool2x2_forward(x)
            caches.append(("pool", None, c))
    caches.append(("flatten", None, x.shape))
    x = x.reshape(x.shape[0], -1)
    for name in ("fc1", "fc2"):
        x, c = L.dense_forward(x, w[f"{name}.weight"], w[f"{name}.bias"])
        caches.append(("dense", name, c))
        x, c = L.relu_forward(x)
        caches.append(("relu", None, c))
        acts[name] = x
        x, c = L.dropout_forward(x, spec.dropout_rate, drop_rng)
        caches.append(("dropout", None, c))
    logits, c = L.dense_forward(x, w["out.weight"], w["out.bias"])
    caches.append(("dense", "out", c))
    return ForwardResult(logits, L.softmax(logits), acts, caches)


def backward(ckpt: Checkpoint, batch, labels, train_mode: bool = False, seed=None, rng=None):
    """Gradients of the mean cross-entropy w.r.t. every weight array.

    Returns ``(gradients, loss, probabilities)``; gradients share the names of
    ``ckpt.weights``.
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != np.shape(batch)[0]:
        raise InvalidInputError("labels must be a 1-D array with one entry per sample")
    if labels.size and (labels.min() < 0 or labels.max() >= ckpt.spec.num_classes):
        raise InvalidInputError(f"labels must lie in 0..{ckpt.spec.num_classes - 1}")
    res = forward(ckpt, batch, train_mode=train_mode, seed=seed, rng=rng)
    loss, d = L.cross_entropy(res.probabilities, labels.astype(np.int64))
    grads = {}
    for kind, name, cache in reversed(res.caches):
        if kind == "dense":
            d, gw, gb = L.dense_backward(d, cache)
            grads[f"{name}.weight"], grads[f"{name}.bias"] = gw, gb
        elif kind == "conv":
            d, gw, gb = L.conv3x3_backward(d, cache)
            grads[f"{name}.weight"], grads[f"{name}.bias"] = gw, gb
        elif kind == "relu":
            d = L.relu_backward(d, cache)
        elif kind == "dropout":
            d = L.dropout_backward(d, cache)
        elif kind == "pool":
            d = L.maxpool2x2_backward(d, cache)
        elif kind == "flatten":
            d = d.reshape(cache)
    return {k: grads[k] for k in ckpt.weights}, loss, res.probabilities


def extract_embeddings(ckpt: Checkpoint, images, batch_size: int = 64) -> np.ndarray:
    """Post-ReLU fc2 activations (inference mode) for a sequence of images."""
    images = list(images)
    out = np.empty((len(images), ckpt.spec.embedding_width), dtype=np.float32)
    for start in range(0, len(images), batch_size):
        chunk = images_to_batch(images[start : start + batch_size])
        out[start : start + len(chunk)] = forward(ckpt, chunk).activations["fc2"]
    return out


def extract_embedding(ckpt: Checkpoint, image) -> np.ndarray:
    return extract_embeddings(ckpt, [image])[0]


def predict(ckpt: Checkpoint, images, batch_size: int = 64) -> np.ndarray:
    images = list(images)
    preds = []
    for start in range(0, len(images), batch_size):
        res = forward(ckpt, images_to_batch(images[start : start + batch_size]))
        preds.append(res.probabilities.argmax(axis=1))
    return np.concatenate(preds) if preds else np.empty(0, dtype=np.int64)
