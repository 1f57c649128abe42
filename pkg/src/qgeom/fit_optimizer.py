"""Direct Adam optimization of point positions against a target mesh.

Stands in for network training: the points themselves are the parameters,
so the loss functions are exercised without an encoder/decoder. One
"epoch" of a learning-rate schedule corresponds to one optimizer step.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonFiniteLoss
from .losses import LOSS_NAMES, LossWeights, combined_loss
from .mesh_core import PointCloud
from .spatial_index import correspondences

INIT_MODES = ("jittered_vertices", "uniform_sphere", "given")
TRACE_COLUMNS = ("step", "lr", "total") + LOSS_NAMES

# learning rates and decay schedule used for all presets
BASE_LR = 1e-3
QUADRIC_LR = 1e-4
LR_DECAY_FACTOR = 0.8
LR_DECAY_EVERY = 100


class Adam:
    """Adam on a single float array, updated in place."""

    def __init__(self, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params, grad, lr):
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * (grad * grad)
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        params -= lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


@dataclass(frozen=True)
class FitConfig:
    weights: LossWeights
    steps: int = 1000
    learning_rate: float = BASE_LR
    lr_decay_factor: float = LR_DECAY_FACTOR
    lr_decay_every: int = LR_DECAY_EVERY
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    init: str = "jittered_vertices"
    jitter_sigma: float = 0.05
    seed: int = 42
    num_points: int = 2500
    initial_points: np.ndarray = field(default=None, repr=False, compare=False)
    refresh_correspondences: bool = True
    log_all_components: bool = True

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.lr_decay_factor <= 1:
            raise ValueError("lr_decay_factor must lie in (0, 1]")
        if self.lr_decay_every < 1:
            raise ValueError("lr_decay_every must be >= 1")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}")
        if self.init == "given" and self.initial_points is None:
            raise ValueError("init='given' requires initial_points")
        if self.init != "given" and self.num_points < 1:
            raise ValueError("num_points must be positive")

    def lr_at(self, step):
        return self.learning_rate * self.lr_decay_factor ** (step // self.lr_decay_every)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k not in ("weights", "initial_points")}
        d["weights"] = self.weights.as_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["weights"] = LossWeights(**d["weights"])
        return cls(**d)


def default_config(loss_kind="chamfer", **overrides):
    """Config for a preset name (``"chamfer+quadric"``) or a :class:`LossWeights`.

    The learning rate drops to 1e-4 whenever the quadric term is active.
    """
    weights = loss_kind if isinstance(loss_kind, LossWeights) else LossWeights.from_preset(loss_kind)
    lr = QUADRIC_LR if weights.quadric > 0 else BASE_LR
    cfg = FitConfig(weights=weights, learning_rate=lr)
    return replace(cfg, **overrides) if overrides else cfg


@dataclass
class FitTrace:
    step: np.ndarray
    lr: np.ndarray
    total: np.ndarray
    components: dict
    final: PointCloud
    final_components: dict = field(default_factory=dict)
    initial: PointCloud = None

    def __len__(self):
        return len(self.step)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        nan = np.full(len(self.step), np.nan)
        cols = [self.components.get(n, nan) for n in LOSS_NAMES]
        for i in range(len(self.step)):
            row = [int(self.step[i]), repr(float(self.lr[i])), repr(float(self.total[i]))]
            row += ["" if np.isnan(c[i]) else repr(float(c[i])) for c in cols]
            writer.writerow(row)
        return buf.getvalue()


def initial_points(bundle, config):
    rng = np.random.default_rng(config.seed)
    if config.init == "given":
        pts = np.array(config.initial_points, dtype=float).reshape(-1, 3)
        return pts
    n = config.num_points
    if config.init == "uniform_sphere":
        d = rng.normal(size=(n, 3))
        return d / np.linalg.norm(d, axis=1, keepdims=True)
    verts = bundle.vertices
    nv = len(verts)
    if n == nv:
        idx = np.arange(nv)
    elif n < nv:
        idx = np.sort(rng.choice(nv, n, replace=False))
    else:
        idx = np.concatenate([np.arange(nv), np.sort(rng.choice(nv, n - nv, replace=True))])
    return verts[idx] + rng.normal(0.0, config.jitter_sigma, size=(n, 3))


def _build_trace(records, points, initial, final_components=None):
    steps = np.array([r[0] for r in records], dtype=np.int64)
    lrs = np.array([r[1] for r in records])
    totals = np.array([r[2] for r in records])
    comps = {}
    for name in LOSS_NAMES:
        if any(name in r[3] for r in records):
            comps[name] = np.array([r[3].get(name, np.nan) for r in records])
    final = PointCloud(points) if np.all(np.isfinite(points)) else None
    return FitTrace(steps, lrs, totals, comps, final, final_components or {}, PointCloud(initial))


def fit_points(bundle, config):
    """Run Adam on point coordinates under ``config.weights``.

    Correspondences are recomputed from the current points before every
    gradient evaluation unless ``config.refresh_correspondences`` is off.
    Raises :class:`NonFiniteLoss` (carrying the partial trace) on NaN/Inf.
    """
    points = initial_points(bundle, config)
    start = points.copy()
    adam = Adam(config.adam_beta1, config.adam_beta2, config.adam_epsilon)
    fixed = None
    if not config.refresh_correspondences:
        fixed = correspondences(points, bundle.vertices, bundle.index)
    records = []
    for step in range(config.steps):
        lr = config.lr_at(step)
        with np.errstate(over="ignore", invalid="ignore"):
            value = combined_loss(points, bundle, config.weights, corr=fixed,
                                  diagnostics=config.log_all_components)
        bad = [n for n, v in value.components.items() if not np.isfinite(v)]
        if bad or not np.isfinite(value.scalar) or not np.all(np.isfinite(value.gradient)):
            partial = _build_trace(records, points, start) if records else None
            raise NonFiniteLoss(step, bad[0] if bad else "total", partial)
        records.append((step, lr, value.scalar, value.components))
        adam.step(points, value.gradient, lr)
    final = combined_loss(points, bundle, config.weights, corr=fixed, diagnostics=True)
    return _build_trace(records, points, start, final.components)
