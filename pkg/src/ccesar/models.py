"""Classifier and U-Net segmenter: architectures, forward passes, weight I/O.

Torch supplies the conv/autodiff kernels; the architectures, the numpy-facing
contracts, and the weight file format are defined here.  Batches are numpy
arrays shaped (b, h, w, c); per-pixel outputs come back as (b, h, w, 1).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .errors import ModelError, ShapeError, WriteError

WEIGHTS_MAGIC = b"CCESAR-W1"


class ConvBlock(nn.Module):
    """Two 3x3 convs, each followed by batch norm and ReLU."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.bn1 = nn.BatchNorm2d(out_ch, momentum=0.1)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.bn2 = nn.BatchNorm2d(out_ch, momentum=0.1)

    def forward(self, x):
        x = F.relu(self.bn1(self.conv1(x)))
        return F.relu(self.bn2(self.conv2(x)))


class ClassifierNet(nn.Module):
    """CNN coastline-type classifier: conv blocks with doubling filter counts,
    global average pooling, a 512-unit dense layer, dropout, sigmoid output."""

    def __init__(self, in_channels: int = 1, filters=(32, 64, 128, 256),
                 dense_units: int = 512, dropout_rate: float = 0.5):
        super().__init__()
        self.in_channels = in_channels
        self.filters = list(filters)
        self.dense_units = dense_units
        self.dropout_rate = dropout_rate
        blocks = []
        ch = in_channels
        for f in self.filters:
            blocks.append(ConvBlock(ch, f))
            ch = f
        self.blocks = nn.ModuleList(blocks)
        self.fc1 = nn.Linear(ch, dense_units)
        self.dropout = nn.Dropout(dropout_rate)
        self.fc2 = nn.Linear(dense_units, 1)

    @property
    def min_input_size(self) -> int:
        return 2 ** len(self.filters)

    def forward(self, x):
        for block in self.blocks:
            x = F.max_pool2d(block(x), 2)
        x = x.mean(dim=(2, 3))  # global average pooling
        x = self.dropout(F.relu(self.fc1(x)))
        return torch.sigmoid(self.fc2(x))

    def descriptor(self) -> dict:
        return {
            "kind": "classifier",
            "in_channels": self.in_channels,
            "filters": self.filters,
            "dense_units": self.dense_units,
            "dropout_rate": self.dropout_rate,
        }


def _init_relu_conv(conv: nn.Conv2d) -> nn.Conv2d:
    # He init keeps activation scale near 1 through the unnormalized conv
    # stack; the torch default shrinks signals layer by layer, which stalls
    # training at small learning rates
    nn.init.kaiming_normal_(conv.weight, nonlinearity="relu")
    nn.init.zeros_(conv.bias)
    return conv


class DoubleConv(nn.Module):
    """Two 3x3 conv + ReLU (no batch norm on the segmentation path)."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.conv1 = _init_relu_conv(nn.Conv2d(in_ch, out_ch, 3, padding=1))
        self.conv2 = _init_relu_conv(nn.Conv2d(out_ch, out_ch, 3, padding=1))

    def forward(self, x):
        return F.relu(self.conv2(F.relu(self.conv1(x))))


class UNet(nn.Module):
    """Encoder-decoder segmenter with skip connections and sigmoid output.

    The decoder upsamples then convolves (rather than transposed convolution)
    to avoid checkerboard artifacts on thin coastline features.
    """

    def __init__(self, in_channels: int = 1, depth: int = 4, base_filters: int = 32):
        super().__init__()
        self.in_channels = in_channels
        self.depth = depth
        self.base_filters = base_filters
        enc, up, dec = [], [], []
        ch = in_channels
        for level in range(depth):
            f = base_filters * 2 ** level
            enc.append(DoubleConv(ch, f))
            ch = f
        self.bottleneck = DoubleConv(ch, ch * 2)
        ch *= 2
        for level in reversed(range(depth)):
            f = base_filters * 2 ** level
            up.append(_init_relu_conv(nn.Conv2d(ch, f, 3, padding=1)))
            dec.append(DoubleConv(2 * f, f))
            ch = f
        self.encoders = nn.ModuleList(enc)
        self.upconvs = nn.ModuleList(up)
        self.decoders = nn.ModuleList(dec)
        self.head = _init_relu_conv(nn.Conv2d(base_filters, 1, 1))

    def forward(self, x):
        skips = []
        for encoder in self.encoders:
            x = encoder(x)
            skips.append(x)
            x = F.max_pool2d(x, 2)
        x = self.bottleneck(x)
        for upconv, decoder, skip in zip(self.upconvs, self.decoders, reversed(skips)):
            x = F.relu(upconv(F.interpolate(x, scale_factor=2, mode="nearest")))
            x = decoder(torch.cat([skip, x], dim=1))
        return torch.sigmoid(self.head(x))

    def descriptor(self) -> dict:
        return {
            "kind": "unet",
            "in_channels": self.in_channels,
            "depth": self.depth,
            "base_filters": self.base_filters,
        }


def build_model(descriptor: dict) -> nn.Module:
    kind = descriptor.get("kind")
    if kind == "classifier":
        return ClassifierNet(
            in_channels=descriptor["in_channels"],
            filters=descriptor["filters"],
            dense_units=descriptor["dense_units"],
            dropout_rate=descriptor["dropout_rate"],
        )
    if kind == "unet":
        return UNet(
            in_channels=descriptor["in_channels"],
            depth=descriptor["depth"],
            base_filters=descriptor["base_filters"],
        )
    raise ModelError(f"unknown architecture kind {kind!r}")


def _to_torch(batch: np.ndarray, model: nn.Module) -> torch.Tensor:
    arr = np.asarray(batch)
    if arr.ndim != 4:
        raise ShapeError(f"expected (b, h, w, c) batch, got shape {arr.shape}")
    dtype = next(model.parameters()).dtype
    return torch.from_numpy(np.ascontiguousarray(arr)).permute(0, 3, 1, 2).to(dtype)


def classifier_forward(model: ClassifierNet, batch: np.ndarray,
                       train_mode: bool = False) -> np.ndarray:
    """Class probabilities, shape (b, 1).  Dropout and batch statistics are
    active only in train mode."""
    x = _to_torch(batch, model)
    if x.shape[2] < model.min_input_size or x.shape[3] < model.min_input_size:
        raise ShapeError(
            f"spatial size {tuple(x.shape[2:])} too small for "
            f"{len(model.filters)} pooling stages (needs >= {model.min_input_size})"
        )
    if x.shape[1] != model.in_channels:
        raise ShapeError(f"expected {model.in_channels} channels, got {x.shape[1]}")
    model.train(train_mode)
    with torch.no_grad():
        out = model(x)
    model.eval()
    return out.numpy().astype(np.float32)


def _pad_to_multiple(x: torch.Tensor, multiple: int):
    h, w = x.shape[2], x.shape[3]
    pad_h = (-h) % multiple
    pad_w = (-w) % multiple
    if pad_h or pad_w:
        x = F.pad(x, (0, pad_w, 0, pad_h), mode="reflect")
    return x, h, w


def unet_forward(model: UNet, batch: np.ndarray) -> np.ndarray:
    """Per-pixel probabilities, shape (b, h, w, 1); arbitrary input sizes are
    reflect-padded to a multiple of 2^depth and cropped back."""
    x = _to_torch(batch, model)
    if x.shape[1] != model.in_channels:
        raise ShapeError(f"expected {model.in_channels} channels, got {x.shape[1]}")
    x, h, w = _pad_to_multiple(x, 2 ** model.depth)
    model.eval()
    with torch.no_grad():
        out = model(x)[:, :, :h, :w]
    return out.permute(0, 2, 3, 1).numpy().astype(np.float32)


def _model_predict(model: nn.Module, batch: torch.Tensor) -> torch.Tensor:
    if isinstance(model, UNet):
        x, h, w = _pad_to_multiple(batch, 2 ** model.depth)
        return model(x)[:, :, :h, :w]
    return model(batch)


def _model_loss(model: nn.Module, batch: torch.Tensor, targets: torch.Tensor,
                loss_id: str) -> torch.Tensor:
    if loss_id != "bce":
        raise ModelError(f"unknown loss {loss_id!r}")
    pred = _model_predict(model, batch).clamp(1e-7, 1.0 - 1e-7)
    target = targets.reshape(pred.shape).to(pred.dtype)
    return -(target * pred.log() + (1 - target) * (1 - pred).log()).mean()


def gradients(model: nn.Module, batch: np.ndarray, targets: np.ndarray,
              loss_id: str = "bce", train_mode: bool = False) -> Dict[str, np.ndarray]:
    """Loss gradient for every trainable parameter, keyed by parameter name."""
    x = _to_torch(batch, model)
    dtype = next(model.parameters()).dtype
    t = torch.as_tensor(np.asarray(targets), dtype=dtype)
    model.train(train_mode)
    model.zero_grad(set_to_none=True)
    loss = _model_loss(model, x, t, loss_id)
    loss.backward()
    model.eval()
    out = {}
    for name, param in model.named_parameters():
        grad = param.grad
        out[name] = (np.zeros(param.shape, dtype=np.float32) if grad is None
                     else grad.detach().numpy().copy())
    model.zero_grad(set_to_none=True)
    return out


# ---------------------------------------------------------------------------
# Weight persistence

@dataclass
class ModelWeights:
    """Named parameter tensors plus architecture descriptor and training metadata."""

    descriptor: dict
    params: Dict[str, np.ndarray]
    class_tag: str = "mixed"         # natural | built | mixed
    epochs: int = 0
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.class_tag not in ("natural", "built", "mixed"):
            raise ModelError(f"unknown class tag {self.class_tag!r}")


def weights_from_model(model: nn.Module, class_tag: str = "mixed",
                       epochs: int = 0, seed: int = 0) -> ModelWeights:
    params = {}
    for name, tensor in list(model.named_parameters()) + list(model.named_buffers()):
        params[name] = tensor.detach().numpy().astype(np.float32).copy()
    return ModelWeights(descriptor=model.descriptor(), params=params,
                        class_tag=class_tag, epochs=epochs, seed=seed)


def apply_weights(model: nn.Module, weights: ModelWeights) -> nn.Module:
    if model.descriptor() != weights.descriptor:
        raise ModelError(
            f"weights for {weights.descriptor} cannot load into {model.descriptor()}"
        )
    state = {}
    for name, tensor in list(model.named_parameters()) + list(model.named_buffers()):
        if name not in weights.params:
            raise ModelError(f"missing parameter {name!r} in weight set")
        state[name] = torch.from_numpy(weights.params[name].copy()).to(tensor.dtype)
    model.load_state_dict(state)
    model.eval()
    return model


def model_from_weights(weights: ModelWeights) -> nn.Module:
    return apply_weights(build_model(weights.descriptor), weights)


def save_weights(weights: ModelWeights, path) -> None:
    """Binary layout: magic, JSON header (descriptor + metadata + parameter
    order), then per-parameter name, shape, raw little-endian float32 data."""
    order: List[str] = list(weights.params.keys())
    header = json.dumps(
        {
            "descriptor": weights.descriptor,
            "class_tag": weights.class_tag,
            "epochs": weights.epochs,
            "seed": weights.seed,
            "extra": weights.extra,
            "param_order": order,
        },
        sort_keys=True,
    ).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(WEIGHTS_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            for name in order:
                arr = np.ascontiguousarray(weights.params[name], dtype="<f4")
                encoded = name.encode("utf-8")
                fh.write(struct.pack("<H", len(encoded)))
                fh.write(encoded)
                fh.write(struct.pack("<B", arr.ndim))
                fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
                fh.write(arr.tobytes())
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc}") from exc


def load_weights(path) -> ModelWeights:
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc}") from exc
    if not buf.startswith(WEIGHTS_MAGIC):
        raise ModelError(f"{path} is not a CCESAR weight file")
    off = len(WEIGHTS_MAGIC)
    (header_len,) = struct.unpack_from("<I", buf, off)
    off += 4
    meta = json.loads(buf[off : off + header_len].decode("utf-8"))
    off += header_len
    params: Dict[str, np.ndarray] = {}
    for expected_name in meta["param_order"]:
        (name_len,) = struct.unpack_from("<H", buf, off)
        off += 2
        name = buf[off : off + name_len].decode("utf-8")
        off += name_len
        if name != expected_name:
            raise ModelError(f"parameter order mismatch at {name!r}")
        (ndim,) = struct.unpack_from("<B", buf, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", buf, off)
        off += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(buf, dtype="<f4", count=count, offset=off).reshape(shape)
        off += 4 * count
        params[name] = arr.astype(np.float32).copy()
    return ModelWeights(
        descriptor=meta["descriptor"],
        params=params,
        class_tag=meta["class_tag"],
        epochs=meta["epochs"],
        seed=meta["seed"],
        extra=meta.get("extra", {}),
    )
