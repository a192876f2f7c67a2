"""Two-layer mapping network trained with a center-pulling L1 loss.

The network maps repository vectors into a lower-dimensional space
where normal features cluster tightly. Training minimizes the L1
distance of every mapped vector to the batch mean of the mapped
vectors. Driven to convergence this collapses everything to one point,
so training stops early: at the first epoch whose mean loss drops to
``eta`` times the loss after epoch one.

Everything runs in float64 numpy; gradients are backpropagated
analytically and checked against finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError
from .seeding import stream_rng
from .selector import Repository

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

DEFAULT_HIDDEN = 1024
DEFAULT_OUT = 512


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros_like(cls, param: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(param), v=np.zeros_like(param))


@dataclass
class MlpParams:
    w1: np.ndarray  # (hidden, c_in)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (c_out, hidden)
    b2: np.ndarray  # (c_out,)
    adam: dict[str, AdamState] = field(default_factory=dict)

    @property
    def c_in(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def c_out(self) -> int:
        return self.w2.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    eta: float = 0.8
    batch_size: int = 256
    max_epochs: int = 200
    seed: int = 0
    hidden: int = DEFAULT_HIDDEN
    c_out: int = DEFAULT_OUT
    detach_center: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be positive")


@dataclass
class TrainHistory:
    epoch_losses: list[float]
    stopped_epoch: int
    stop_reason: str  # "condition_met" | "max_epochs"

    @property
    def l_start(self) -> float:
        return self.epoch_losses[0]


@dataclass
class MappedRepository:
    rows: np.ndarray  # (M, c_out) float64
    provenance: list[tuple[str, int, int]]

    def __len__(self) -> int:
        return self.rows.shape[0]


def init_mlp(c_in: int, hidden: int, c_out: int, rng: np.random.Generator) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, zero Adam state."""
    if min(c_in, hidden, c_out) < 1:
        raise ValueError("all layer dims must be positive")
    bound1 = 1.0 / np.sqrt(c_in)
    bound2 = 1.0 / np.sqrt(hidden)
    params = MlpParams(
        w1=rng.uniform(-bound1, bound1, size=(hidden, c_in)),
        b1=np.zeros(hidden),
        w2=rng.uniform(-bound2, bound2, size=(c_out, hidden)),
        b2=np.zeros(c_out),
    )
    params.adam = {name: AdamState.zeros_like(t) for name, t in params.tensors().items()}
    return params


def forward(params: MlpParams, batch: np.ndarray) -> np.ndarray:
    """relu hidden layer, linear output: W2 @ relu(W1 @ v + b1) + b2, row-wise."""
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if batch.shape[1] != params.c_in:
        raise ValueError(f"batch has {batch.shape[1]} columns, params expect {params.c_in}")
    hidden = np.maximum(batch @ params.w1.T + params.b1, 0.0)
    return hidden @ params.w2.T + params.b2


def center_loss(mapped: np.ndarray, detach_center: bool = False) -> tuple[float, np.ndarray]:
    """Sum over rows of the L1 distance to the row mean, plus its gradient.

    The mean is a function of the rows, and by default the gradient flows
    through both its occurrence and the row itself. With ``detach_center``
    the mean is treated as a constant. The sign of |x| at 0 is taken as 0.
    """
    mapped = np.atleast_2d(np.asarray(mapped, dtype=np.float64))
    # Anchored mean: row0 + mean(rows - row0). Same quantity, but exact when
    # all rows coincide, which is what makes the collapsed-repository loss
    # land on 0.0 and trip the early-stop guard.
    center = mapped[0] + (mapped - mapped[0]).mean(axis=0)
    delta = center[None, :] - mapped
    loss = float(np.abs(delta).sum())
    sign = np.sign(delta)
    if detach_center:
        grad = -sign
    else:
        grad = sign.mean(axis=0)[None, :] - sign
    return loss, grad


def adam_update(param: np.ndarray, grad: np.ndarray, state: AdamState, lr: float) -> None:
    """One bias-corrected Adam step, in place."""
    state.step += 1
    state.m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grad
    state.v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * grad * grad
    m_hat = state.m / (1.0 - ADAM_BETA1**state.step)
    v_hat = state.v / (1.0 - ADAM_BETA2**state.step)
    param -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def loss_and_grads(
    params: MlpParams, batch: np.ndarray, detach_center: bool = False
) -> tuple[float, dict[str, np.ndarray]]:
    """Center loss of the mapped batch and analytic gradients for every tensor."""
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    z1 = batch @ params.w1.T + params.b1
    hidden = np.maximum(z1, 0.0)
    out = hidden @ params.w2.T + params.b2

    loss, d_out = center_loss(out, detach_center=detach_center)
    d_hidden = d_out @ params.w2
    d_z1 = d_hidden * (z1 > 0)
    grads = {
        "w2": d_out.T @ hidden,
        "b2": d_out.sum(axis=0),
        "w1": d_z1.T @ batch,
        "b1": d_z1.sum(axis=0),
    }
    return loss, grads


def train_step(params: MlpParams, batch: np.ndarray, config: TrainConfig) -> float:
    """One Adam update on the batch; mutates ``params`` and returns the batch loss."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    loss, grads = loss_and_grads(params, batch, detach_center=config.detach_center)
    if not np.isfinite(loss):
        raise TrainingError(
            f"non-finite loss at adam step {params.adam['w1'].step + 1}: {loss}"
        )
    for name, tensor in params.tensors().items():
        adam_update(tensor, grads[name], params.adam[name], config.learning_rate)
    return loss


def stop_after_epoch(epoch_losses: list[float], eta: float) -> bool:
    """Early-stop rule, applied to the losses recorded so far.

    Stops at the first epoch e >= 2 whose loss is <= eta * loss(epoch 1).
    A zero loss after epoch 1 means the mapping is already fully collapsed
    on this data, so training stops immediately.
    """
    l_start = epoch_losses[0]
    if l_start == 0.0:
        return True
    return len(epoch_losses) >= 2 and epoch_losses[-1] <= eta * l_start


def train(repo: Repository | np.ndarray, config: TrainConfig) -> tuple[MlpParams, TrainHistory]:
    """Train the mapping network on the repository rows.

    Epochs iterate over seeded-shuffled mini-batches; the epoch loss is
    the mean per-batch loss. Raises TrainingError if the loss diverges.
    """
    rows = repo.rows if isinstance(repo, Repository) else repo
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ValueError("repository must hold at least one row")

    params = init_mlp(rows.shape[1], config.hidden, config.c_out, stream_rng(config.seed, "init"))
    shuffle_rng = stream_rng(config.seed, "shuffle")

    epoch_losses: list[float] = []
    stop_reason = "max_epochs"
    for _ in range(config.max_epochs):
        order = shuffle_rng.permutation(rows.shape[0])
        batch_losses = [
            train_step(params, rows[order[start : start + config.batch_size]], config)
            for start in range(0, rows.shape[0], config.batch_size)
        ]
        epoch_losses.append(float(np.mean(batch_losses)))
        if stop_after_epoch(epoch_losses, config.eta):
            stop_reason = "condition_met"
            break
    return params, TrainHistory(epoch_losses, stopped_epoch=len(epoch_losses), stop_reason=stop_reason)


def apply_mapping(params: MlpParams | None, batch: np.ndarray) -> np.ndarray:
    """Map a batch of vectors; ``params=None`` is the identity (ablation mode)."""
    if params is None:
        return np.atleast_2d(np.asarray(batch, dtype=np.float64))
    return forward(params, batch)


def map_repository(params: MlpParams | None, repo: Repository) -> MappedRepository:
    """Push every repository row through the mapping, keeping order and provenance.

    Rows are mapped one at a time: BLAS kernels round differently for
    different batch shapes, and the mapped rows are pinned to the
    single-row forward outputs bit for bit.
    """
    if params is None:
        mapped = np.asarray(repo.rows, dtype=np.float64).copy()
    else:
        mapped = np.vstack([forward(params, repo.rows[i : i + 1]) for i in range(len(repo))])
    return MappedRepository(rows=mapped, provenance=list(repo.provenance))
