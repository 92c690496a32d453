"""Multi-modal Siamese network for gesture-conditioned re-identification.

One shared sub-network encodes a (recurrence-plot image, physiological
segment) pair into a fused embedding: a small CNN handles the image, a
stacked LSTM handles the segment, and their projections are concatenated
(physiological coordinates first). Training combines a contrastive loss
over embedding pairs with a softmax identification loss on each fused
embedding, weighted and optimized by plain mini-batch SGD so runs are
bit-reproducible on one platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np
import torch
from torch import nn

from .errors import ConfigError


@dataclass(frozen=True)
class ModelConfig:
    num_identities: int
    physio_len: int = 128
    image_side: int = 64
    d_img: int = 64
    d_phys: int = 64
    conv_channels: tuple = (16, 32, 64)
    lstm_hidden: int = 64
    lstm_layers: int = 2
    dtype: str = "float32"

    def __post_init__(self):
        if self.num_identities < 2:
            raise ConfigError("num_identities must be >= 2")
        if min(self.physio_len, self.image_side, self.d_img, self.d_phys,
               self.lstm_hidden, self.lstm_layers) < 1:
            raise ConfigError("model dimensions must be positive")
        if self.image_side < 2 ** len(self.conv_channels):
            raise ConfigError("image_side too small for the conv stack's downsampling")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"unsupported dtype {self.dtype!r}")

    @property
    def embedding_dim(self) -> int:
        return self.d_img + self.d_phys

    @property
    def torch_dtype(self):
        return torch.float64 if self.dtype == "float64" else torch.float32


@dataclass(frozen=True)
class LossWeights:
    lambda_ver: float = 1.0
    lambda_id: float = 1.0
    margin: float = 1.0

    def __post_init__(self):
        if self.lambda_ver < 0 or self.lambda_id < 0:
            raise ConfigError("loss weights must be nonnegative")
        if self.lambda_ver == 0 and self.lambda_id == 0:
            raise ConfigError("at least one loss weight must be positive")
        if self.margin <= 0:
            raise ConfigError("margin must be positive")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    lr: float = 1e-3
    batch_size: int = 32
    momentum: float = 0.0
    seed: int = 0


@dataclass
class ModalInput:
    """One sample: recurrence-plot image (side, side, 3) in [0, 1] plus a
    fixed-length physiological segment, z-scored with train-set stats."""

    image: np.ndarray
    physio: np.ndarray

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=float)
        self.physio = np.asarray(self.physio, dtype=float)
        if not (np.isfinite(self.image).all() and np.isfinite(self.physio).all()):
            raise ValueError("ModalInput requires finite values")


class _TwinNet(nn.Module):
    """The shared sub-network; both Siamese branches are this one module."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        convs = []
        in_ch = 3
        for out_ch in cfg.conv_channels:
            convs.append(nn.Conv2d(in_ch, out_ch, kernel_size=3, stride=2, padding=1))
            convs.append(nn.ReLU())
            in_ch = out_ch
        self.conv = nn.Sequential(*convs)
        spatial = cfg.image_side
        for _ in cfg.conv_channels:
            spatial = (spatial + 1) // 2
        self.fc_img = nn.Linear(in_ch * spatial * spatial, cfg.d_img)
        self.lstm = nn.LSTM(input_size=1, hidden_size=cfg.lstm_hidden,
                            num_layers=cfg.lstm_layers, batch_first=True)
        self.fc_phys = nn.Linear(cfg.lstm_hidden, cfg.d_phys)
        self.head = nn.Linear(cfg.d_img + cfg.d_phys, cfg.num_identities, bias=False)

    def encode(self, physio: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
        """physio (B, L), image (B, 3, S, S) -> embedding (B, d_phys + d_img)."""
        _, (h_n, _) = self.lstm(physio.unsqueeze(-1))
        e_phys = self.fc_phys(h_n[-1])
        e_img = self.fc_img(self.conv(image).flatten(1))
        return torch.cat([e_phys, e_img], dim=1)

    def logits(self, eta: torch.Tensor) -> torch.Tensor:
        return self.head(eta)


@dataclass
class MmsnnModel:
    """Trained parameters plus the identity index map and data-prep stats."""

    net: _TwinNet
    config: ModelConfig
    identities: list[str]
    metadata: dict = field(default_factory=dict)

    def identity_index(self, label: str) -> int:
        try:
            return self.identities.index(label)
        except ValueError:
            raise ValueError(f"identity {label!r} is not enrolled") from None


def init_model(config: ModelConfig, seed: int,
               identities: list[str] | None = None) -> MmsnnModel:
    """Deterministically initialized model; identities default to id0..idN."""
    if identities is None:
        identities = [f"id{i}" for i in range(config.num_identities)]
    if len(identities) != config.num_identities:
        raise ConfigError(f"{len(identities)} identities supplied for "
                          f"num_identities={config.num_identities}")
    torch.manual_seed(seed)
    net = _TwinNet(config).to(config.torch_dtype)
    return MmsnnModel(net=net, config=config, identities=list(identities))


def _image_tensor(model: MmsnnModel, image: np.ndarray) -> torch.Tensor:
    img = np.asarray(image, dtype=float)
    side = model.config.image_side
    if img.shape != (side, side, 3):
        raise ValueError(f"image shape {img.shape} does not match model side {side}")
    return torch.as_tensor(img, dtype=model.config.torch_dtype).permute(2, 0, 1)

def _physio_tensor(model: MmsnnModel, physio: np.ndarray) -> torch.Tensor:
    phys = np.asarray(physio, dtype=float)
    if phys.shape != (model.config.physio_len,):
        raise ValueError(f"physio shape {phys.shape} does not match "
                         f"model length {model.config.physio_len}")
    return torch.as_tensor(phys, dtype=model.config.torch_dtype)


def encode(model: MmsnnModel, sample: ModalInput) -> np.ndarray:
    """Fused embedding of one input (physio coordinates first)."""
    with torch.no_grad():
        eta = model.net.encode(_physio_tensor(model, sample.physio)[None, :],
                               _image_tensor(model, sample.image)[None, ...])
    return eta[0].numpy().astype(float)


def _batch_distances(eta1: torch.Tensor, eta2: torch.Tensor) -> torch.Tensor:
    # epsilon keeps the sqrt differentiable at coincident embeddings
    return torch.sqrt(((eta1 - eta2) ** 2).sum(dim=1) + 1e-12)


def _contrastive(eta1: torch.Tensor, eta2: torch.Tensor, y: torch.Tensor,
                 margin: float) -> torch.Tensor:
    sq = ((eta1 - eta2) ** 2).sum(dim=1)
    dist = _batch_distances(eta1, eta2)
    hinge = torch.clamp(margin - dist, min=0.0)
    return y * sq + (1.0 - y) * hinge ** 2


def contrastive_loss(eta1, eta2, y: int, margin: float) -> float:
    """y=1 pulls embeddings together (squared distance), y=0 pushes them
    beyond the margin (squared hinge); nonnegative, zero exactly when
    satisfied."""
    e1 = torch.as_tensor(np.asarray(eta1, dtype=float))[None, :]
    e2 = torch.as_tensor(np.asarray(eta2, dtype=float))[None, :]
    if e1.shape != e2.shape:
        raise ValueError("embeddings must have equal dimension")
    yt = torch.tensor([float(y)], dtype=e1.dtype)
    return float(_contrastive(e1, e2, yt, margin)[0])


def softmax_probs(logits: np.ndarray) -> np.ndarray:
    """Numerically stabilized softmax in float64."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def identification_prob(model: MmsnnModel, eta: np.ndarray) -> np.ndarray:
    """Probability over enrolled identities for a fused embedding."""
    eta = np.asarray(eta, dtype=np.float64)
    W = model.net.head.weight.detach().numpy().astype(np.float64)
    if eta.shape != (W.shape[1],):
        raise ValueError(f"embedding dim {eta.shape} does not match W {W.shape}")
    return softmax_probs(W @ eta)


def _pair_tensors(model: MmsnnModel, pairs) -> dict:
    cfg = model.config
    n = len(pairs)
    img_a = torch.empty((n, 3, cfg.image_side, cfg.image_side), dtype=cfg.torch_dtype)
    img_b = torch.empty_like(img_a)
    phys_a = torch.empty((n, cfg.physio_len), dtype=cfg.torch_dtype)
    phys_b = torch.empty_like(phys_a)
    y = torch.empty(n, dtype=cfg.torch_dtype)
    id_a = torch.empty(n, dtype=torch.long)
    id_b = torch.empty(n, dtype=torch.long)
    for i, pair in enumerate(pairs):
        img_a[i] = _image_tensor(model, pair.a.image)
        img_b[i] = _image_tensor(model, pair.b.image)
        phys_a[i] = _physio_tensor(model, pair.a.physio)
        phys_b[i] = _physio_tensor(model, pair.b.physio)
        y[i] = float(pair.y)
        id_a[i] = model.identity_index(pair.id_a)
        id_b[i] = model.identity_index(pair.id_b)
    return {"img_a": img_a, "img_b": img_b, "phys_a": phys_a, "phys_b": phys_b,
            "y": y, "id_a": id_a, "id_b": id_b}


def _batch_loss(model: MmsnnModel, batch: dict, weights: LossWeights) -> torch.Tensor:
    """Mean over pairs of lambda_ver * contrastive + lambda_id * (CE_a + CE_b).

    Both branch evaluations run through the single shared network, which
    is the Siamese weight-sharing constraint.
    """
    net = model.net
    eta_a = net.encode(batch["phys_a"], batch["img_a"])
    eta_b = net.encode(batch["phys_b"], batch["img_b"])
    loss = torch.zeros((), dtype=eta_a.dtype)
    if weights.lambda_ver > 0:
        loss = loss + weights.lambda_ver * _contrastive(
            eta_a, eta_b, batch["y"], weights.margin).mean()
    if weights.lambda_id > 0:
        ce = nn.functional.cross_entropy
        loss = loss + weights.lambda_id * (
            ce(net.logits(eta_a), batch["id_a"], reduction="mean")
            + ce(net.logits(eta_b), batch["id_b"], reduction="mean"))
    return loss


def joint_loss(model: MmsnnModel, pair, weights: LossWeights,
               with_grads: bool = True):
    """Joint loss of one pair; optionally with gradients per parameter name."""
    batch = _pair_tensors(model, [pair])
    if not with_grads:
        with torch.no_grad():
            return float(_batch_loss(model, batch, weights)), None
    model.net.zero_grad(set_to_none=True)
    loss = _batch_loss(model, batch, weights)
    loss.backward()
    grads = {name: (p.grad.detach().clone().numpy() if p.grad is not None
                    else np.zeros(p.shape))
             for name, p in model.net.named_parameters()}
    model.net.zero_grad(set_to_none=True)
    return float(loss.detach()), grads


def train(model: MmsnnModel, pairs, hyper: TrainConfig,
          weights: LossWeights = LossWeights()) -> tuple[MmsnnModel, list[float]]:
    """Mini-batch SGD over the pair set; returns the model and the mean
    loss per epoch. Single-threaded and seeded, so identical runs are
    bit-identical on one platform."""
    if not pairs:
        raise ValueError("training requires a non-empty pair set")
    ys = [int(p.y) for p in pairs]
    if weights.lambda_ver > 0 and (all(y == 1 for y in ys) or all(y == 0 for y in ys)):
        raise ValueError("training requires at least one similar and one dissimilar pair")
    torch.set_num_threads(1)
    tensors = _pair_tensors(model, pairs)
    n = len(pairs)
    rng = np.random.default_rng(hyper.seed)
    opt = torch.optim.SGD(model.net.parameters(), lr=hyper.lr, momentum=hyper.momentum)
    history = []
    for _ in range(hyper.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, hyper.batch_size):
            idx = torch.as_tensor(perm[lo: lo + hyper.batch_size])
            batch = {k: v[idx] for k, v in tensors.items()}
            opt.zero_grad(set_to_none=True)
            loss = _batch_loss(model, batch, weights)
            loss.backward()
            opt.step()
            total += float(loss.detach()) * idx.numel()
        history.append(total / n)
    return model, history


def predict_identity(model: MmsnnModel, sample: ModalInput) -> tuple[str, np.ndarray]:
    """Most probable enrolled identity (ties break to the lowest index)."""
    probs = identification_prob(model, encode(model, sample))
    return model.identities[int(np.argmax(probs))], probs


def verify_pair(model: MmsnnModel, a: ModalInput, b: ModalInput,
                threshold: float) -> tuple[bool, float]:
    """Similar iff the embedding distance does not exceed the threshold."""
    d = float(np.linalg.norm(encode(model, a) - encode(model, b)))
    return d <= threshold, d


# ---------------------------------------------------------------------------
# Checkpointing: npz of weight arrays plus a JSON header
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_model(model: MmsnnModel, path) -> None:
    header = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "identities": model.identities,
        "metadata": model.metadata,
    }
    arrays = {f"param::{name}": p.detach().numpy()
              for name, p in model.net.named_parameters()}
    np.savez(path, header=np.frombuffer(json.dumps(header, sort_keys=True).encode(),
                                        dtype=np.uint8), **arrays)


def load_model(path) -> MmsnnModel:
    data = np.load(path)
    header = json.loads(bytes(data["header"]).decode())
    if header["format_version"] != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header['format_version']}")
    raw = dict(header["config"])
    raw["conv_channels"] = tuple(raw["conv_channels"])
    config = ModelConfig(**raw)
    model = init_model(config, seed=0, identities=header["identities"])
    state = {name.removeprefix("param::"): torch.as_tensor(data[name])
             for name in data.files if name.startswith("param::")}
    model.net.load_state_dict(state)
    model.metadata = header["metadata"]
    return model
