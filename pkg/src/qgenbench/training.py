"""Training loops: QCBM (CMA-ES on KL), QGAN (parameter-shift generator), classical GAN."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import circuits, datasets, metrics, transforms
from .circuits import CircuitTemplate, Kind
from .cmaes import CmaEs, cmaes_minimize  # noqa: F401  (re-exported)
from .statevector import sample_from_probs
from .neural import (
    Adam,
    Mlp,
    bce_losses,
    discriminator_logit_grads,
    generator_logit_grad,
)

log = logging.getLogger(__name__)

MODELS = ("qcbm", "qgan", "classical")
ARCHITECTURES = ("continuous", "standard", "copula")
DEFAULT_EPOCHS = {"qcbm": 400, "qgan": 2000, "classical": 2000}
NOISE_DIM = 8
DEFAULT_BATCH = 1000
STOCKS_BATCH = 104
SHIFT = np.pi / 2


class ConfigError(ValueError):
    pass


class TrainingAborted(RuntimeError):
    def __init__(self, message: str, trace: "TrainTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass
class TrainConfig:
    model: str = "qcbm"
    architecture: str = "copula"
    transform: str = "pit"
    dataset: dict = field(default_factory=lambda: {"name": "x", "dim": 2})
    r: int = 4
    n_blocks: int = 1
    epochs: int | None = None
    batch_size: int | None = None
    seed: int = 0
    # QCBM / CMA-ES
    sigma0: float = 0.1
    popsize: int | None = None
    kl_tol: float = 1e-5
    kl_patience: int = 20
    # adversarial training
    lr_d: float = 1e-3
    lr_g: float = 1e-3
    beta1: float = 0.5
    steps_per_epoch: int | None = None
    init_scale: float = 0.0
    disc_hidden: list | None = None
    hidden_width: int = 32
    hidden_layers: int | None = None
    collapse_epochs: int = 50
    # evaluation; kl_samples=None draws as many samples as there are training points
    kl_every: int = 1
    kl_samples: int | None = None
    epsilon: float = metrics.DEFAULT_EPSILON

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        cfg = cls(**{k: v for k, v in data.items() if k in known})
        problems = [f"unknown field {k!r}" for k in unknown] + cfg.problems()
        if problems:
            raise ConfigError("invalid config: " + "; ".join(problems))
        return cfg

    def problems(self) -> list[str]:
        out = []
        if self.model not in MODELS:
            out.append(f"model must be one of {MODELS}")
        if self.model != "classical" and self.architecture not in ARCHITECTURES:
            out.append(f"architecture must be one of {ARCHITECTURES}")
        if self.transform not in transforms.KINDS:
            out.append(f"transform must be one of {transforms.KINDS}")
        if not isinstance(self.dataset, dict) or "name" not in self.dataset:
            out.append("dataset must be an object with a 'name'")
        for name in ("r", "n_blocks", "kl_every", "kl_patience", "collapse_epochs"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                out.append(f"{name} must be a positive integer")
        for name in ("epochs", "batch_size", "popsize", "steps_per_epoch", "kl_samples", "hidden_layers"):
            value = getattr(self, name)
            if value is not None and (not isinstance(value, int) or value < 1):
                out.append(f"{name} must be a positive integer or null")
        if self.architecture != "continuous" and self.model != "classical" and self.r < 2:
            out.append("r must be >= 2 for discrete architectures")
        for name in ("sigma0", "lr_d", "lr_g"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be > 0")
        if not 0 <= self.beta1 < 1:
            out.append("beta1 must be in [0, 1)")
        if self.epsilon < 0 or self.init_scale < 0:
            out.append("epsilon and init_scale must be >= 0")
        return out

    def resolved(self) -> "TrainConfig":
        """Copy with every ``None`` default materialised."""
        data = asdict(self)
        if data["epochs"] is None:
            data["epochs"] = DEFAULT_EPOCHS[self.model]
        if data["batch_size"] is None:
            data["batch_size"] = STOCKS_BATCH if self.dataset.get("name") == "stocks" else DEFAULT_BATCH
        if data["hidden_layers"] is None:
            data["hidden_layers"] = 2 if self.dataset.get("name") in ("mg", "stocks") else 4
        if data["disc_hidden"] is None:
            dim = self.dataset.get("dim", 2)
            if self.architecture == "continuous":
                data["disc_hidden"] = [32, 32]
            else:
                data["disc_hidden"] = [16] if dim == 2 else [32]
        return TrainConfig(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainTrace:
    config: dict
    records: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    best_params: list | None = None
    best_kl: float = float("inf")
    best_epoch: int = -1
    block_starts: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    n_params: int = 0

    def record(self, epoch: int, kl: float, params=None, started: float | None = None, **extra) -> None:
        rec = {"epoch": epoch, "kl": float(kl)}
        rec.update({k: float(v) if isinstance(v, (float, np.floating)) else v for k, v in extra.items()})
        self.records.append(rec)
        self.wall_times.append(time.perf_counter() - started if started is not None else 0.0)
        if kl < self.best_kl:
            self.best_kl = float(kl)
            self.best_epoch = epoch
            if params is not None:
                self.best_params = np.asarray(params, dtype=float).ravel().tolist()

    def flag(self, name: str) -> None:
        if name not in self.flags:
            self.flags.append(name)

    def summary(self) -> dict:
        return {
            "best_kl": self.best_kl,
            "best_epoch": self.best_epoch,
            "n_epochs": len(self.records),
            "n_params": self.n_params,
            "flags": self.flags,
            "block_starts": self.block_starts,
            "config": self.config,
        }

    def write(self, directory, stem: str = "trace") -> None:
        """``<stem>.jsonl`` (one record per epoch) and ``<stem>_summary.json``.

        Wall-clock times go to a separate ``<stem>_timing.json`` so the trace
        files stay byte-identical across reruns.
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        atomic_write(directory / f"{stem}.jsonl", "".join(json.dumps(r) + "\n" for r in self.records))
        summary = dict(self.summary(), best_params=self.best_params)
        atomic_write(directory / f"{stem}_summary.json", json.dumps(summary, indent=1))
        atomic_write(directory / f"{stem}_timing.json", json.dumps(self.wall_times))


def atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


# -- data ----------------------------------------------------------------------

def load_dataset(spec: dict) -> datasets.RawDataset:
    name = spec["name"].lower()
    if name == "stocks":
        paths = spec.get("csv")
        if not paths:
            paths = datasets.bundled_stock_csvs()[: spec.get("dim", 2)]
        return datasets.load_stocks(paths)
    return datasets.generate(name, spec.get("dim", 2), spec.get("n"), spec.get("seed", 0))


@dataclass
class PreparedData:
    raw: datasets.RawDataset
    model: transforms.TransformModel
    points: np.ndarray
    target: metrics.Histogram


def prepare_data(config: TrainConfig) -> PreparedData:
    raw = load_dataset(config.dataset)
    model = transforms.fit(config.transform, raw)
    pts = transforms.forward(model, raw.points)
    return PreparedData(raw, model, pts, metrics.histogram(pts, config.r))


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, *stream])


def _check_finite(value: float, trace: TrainTrace, what: str) -> None:
    if not np.isfinite(value):
        trace.flag(f"nonfinite_{what}")
        raise TrainingAborted(f"non-finite {what} at epoch {len(trace.records)}", trace)


def sample_kl(template: CircuitTemplate, params, rng, n: int, target: metrics.Histogram, r: int, epsilon: float) -> float:
    pts = circuits.sample(template, params, rng, n)
    return metrics.kl_divergence(target, metrics.histogram(pts, r), epsilon)


# -- QCBM ----------------------------------------------------------------------

def _qcbm_losses(template, population, data: PreparedData, config, rng) -> np.ndarray:
    population = np.atleast_2d(population)
    if template.kind.discrete:
        probs = circuits.model_probabilities(template, population)
        return np.array([metrics.kl_divergence(data.target, p, config.epsilon) for p in probs])
    out = []
    for theta in population:
        pts = circuits.sample_continuous(template, theta, rng, config.batch_size)
        out.append(metrics.kl_divergence(data.target, metrics.histogram(pts, config.r), config.epsilon))
    return np.array(out)


def train_qcbm(config: TrainConfig, data: PreparedData | None = None) -> TrainTrace:
    """Block-wise CMA-ES on the KL divergence; each new block starts at zero."""
    config = config.resolved()
    if config.model != "qcbm":
        raise ConfigError("train_qcbm needs model='qcbm'")
    data = data or prepare_data(config)
    d = data.points.shape[1]
    trace = TrainTrace(config.to_dict())
    started = time.perf_counter()

    template = circuits.build(config.architecture, d, config.r, 1)
    params = np.zeros(template.n_params)
    epoch = 0
    for block in range(config.n_blocks):
        rng = _rng(config.seed, 1, block)
        if block > 0:
            template, params = circuits.append_block(template, params)
        start_loss = float(_qcbm_losses(template, params, data, config, rng)[0])
        trace.block_starts.append({"block": block + 1, "epoch": epoch, "loss": start_loss})
        es = CmaEs(params, config.sigma0, rng, config.popsize)
        prev, still = None, 0
        for _ in range(config.epochs):
            pop = es.ask()
            losses = _qcbm_losses(template, pop, data, config, rng)
            i = int(np.argmin(losses))
            _check_finite(losses[i], trace, "loss")
            trace.record(epoch, losses[i], pop[i], started, block=block + 1, sigma=es.sigma)
            es.tell(pop, losses)
            epoch += 1
            if prev is not None and abs(losses[i] - prev) < config.kl_tol:
                still += 1
                if still >= config.kl_patience:
                    break
            else:
                still = 0
            prev = losses[i]
        params = np.asarray(trace.best_params)
    trace.n_params = template.n_params
    return trace


# -- parameter shift -----------------------------------------------------------

def _shifted(params: np.ndarray) -> np.ndarray:
    n = params.size
    eye = np.eye(n) * SHIFT
    return np.concatenate([params + eye, params - eye])


def psr_gradient(template: CircuitTemplate, params, observable, noise=None) -> np.ndarray:
    """Exact gradient by the two-term parameter-shift rule.

    Discrete circuits: ``observable`` gives f(x) per basis index (array of
    length 2^n, or a callable on an index array); the differentiated quantity
    is ``sum_x P_theta(x) f(x)``.

    Continuous circuits: ``observable`` holds weights ``w`` of shape ``(d,)``
    or ``(m, d)`` paired with noise rows ``(m, d)``; the differentiated
    quantity is ``sum_l w_l . s(theta, z_l)``. Passing a discriminator's input
    gradient as ``w`` chain-rules a batch loss through the circuit.
    """
    params = np.asarray(params, dtype=float)
    n_p = template.n_params
    if n_p == 0:
        return np.zeros(0)
    shifted = _shifted(params)
    if template.kind.discrete:
        f = observable
        if callable(f):
            f = f(np.arange(2**template.n_qubits))
        f = np.asarray(f, dtype=float)
        expect = circuits.model_probabilities(template, shifted) @ f
        return (expect[:n_p] - expect[n_p:]) / 2.0
    jac = continuous_jacobian(template, params, noise)
    w = np.asarray(observable, dtype=float)
    if w.ndim == 1:
        w = np.broadcast_to(w, jac.shape[:2])
    return np.einsum("lk,lkp->p", w, jac)


def continuous_jacobian(template: CircuitTemplate, params, noise) -> np.ndarray:
    """d s_k(theta, z_l) / d theta_p by parameter shift; shape ``(m, d, n_params)``."""
    noise = np.atleast_2d(np.asarray(noise, dtype=float))
    m, n_p = len(noise), template.n_params
    shifted = _shifted(np.asarray(params, dtype=float))
    theta = np.repeat(shifted, m, axis=0)
    z = np.tile(noise, (2 * n_p, 1))
    out = circuits.continuous_outputs(template, theta, z).reshape(2 * n_p, m, -1)
    return np.moveaxis((out[:n_p] - out[n_p:]) / 2.0, 0, -1)


def finite_difference_gradient(fn, params, h: float = 1e-5) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    grad = np.empty_like(params)
    for k in range(params.size):
        e = np.zeros_like(params)
        e[k] = h
        grad[k] = (fn(params + e) - fn(params - e)) / (2 * h)
    return grad


# -- QGAN ----------------------------------------------------------------------

def bit_table(n_qubits: int) -> np.ndarray:
    """Row x holds the n-bit string of basis index x (qubit 0 first) as floats."""
    idx = np.arange(2**n_qubits)
    return ((idx[:, None] >> (n_qubits - 1 - np.arange(n_qubits))) & 1).astype(float)


def make_discriminator(config: TrainConfig, d: int, rng) -> Mlp:
    if config.architecture == "continuous":
        return Mlp([d, *config.disc_hidden, 1], "relu", rng)
    return Mlp([config.r * d, *config.disc_hidden, 1], "leaky_relu", rng)


def _disc_step(disc: Mlp, adam: Adam, real, fake, trace: TrainTrace) -> float:
    d_real = disc.forward(real)
    g_real, _ = disc.backward(discriminator_logit_grads(d_real, d_real)[0], of="logit")
    d_fake = disc.forward(fake)
    g_fake, _ = disc.backward(discriminator_logit_grads(d_fake, d_fake)[1], of="logit")
    loss_d, _ = bce_losses(d_real, d_fake)
    if not adam.step(disc.params, [a + b for a, b in zip(g_real, g_fake)]):
        trace.flag("nonfinite_gradient")
    return loss_d


def train_qgan(config: TrainConfig, data: PreparedData | None = None, discriminator: Mlp | None = None) -> TrainTrace:
    """Alternating discriminator / generator updates, generator gradients by parameter shift."""
    config = config.resolved()
    if config.model != "qgan":
        raise ConfigError("train_qgan needs model='qgan'")
    data = data or prepare_data(config)
    n_data, d = data.points.shape
    if config.batch_size > n_data:
        raise ConfigError("batch_size exceeds dataset size")
    trace = TrainTrace(config.to_dict())
    started = time.perf_counter()
    rng = _rng(config.seed, 2)
    eval_rng = _rng(config.seed, 3)

    template = circuits.build(config.architecture, d, config.r, config.n_blocks)
    theta = rng.normal(0.0, config.init_scale, template.n_params) if config.init_scale else np.zeros(template.n_params)
    trace.n_params = template.n_params
    disc = discriminator if discriminator is not None else make_discriminator(config, d, rng)
    adam_d = Adam(lr=config.lr_d, beta1=config.beta1)
    adam_g = Adam(lr=config.lr_g, beta1=config.beta1)
    steps = config.steps_per_epoch or max(1, n_data // config.batch_size)
    m = config.batch_size

    discrete = template.kind.discrete
    if discrete:
        bits = bit_table(template.n_qubits)
        real_bits = bits[metrics.cell_indices(data.points, config.r)]

    collapsed = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n_data)
        losses_d, losses_g = [], []
        for step in range(steps):
            batch = order[(step * m) % n_data:][:m]
            if len(batch) < m:
                batch = np.concatenate([batch, order[: m - len(batch)]])
            if discrete:
                probs = circuits.model_probabilities(template, theta)
                fake_idx = sample_from_probs(probs, rng, m)
                losses_d.append(_disc_step(disc, adam_d, real_bits[batch], bits[fake_idx], trace))
                d_all = disc.forward(bits)[:, 0]
                neg_log_d = -np.log(np.clip(d_all, 1e-12, 1.0))
                losses_g.append(float(probs @ neg_log_d))
                grad = psr_gradient(template, theta, neg_log_d)
            else:
                z = circuits.draw_noise(template, rng, m)
                fake = circuits.continuous_outputs(template, theta, z)
                losses_d.append(_disc_step(disc, adam_d, data.points[batch], fake, trace))
                d_fake = disc.forward(fake)
                losses_g.append(bce_losses(d_fake, d_fake)[1])
                _, w = disc.backward(generator_logit_grad(d_fake), of="logit")
                grad = psr_gradient(template, theta, w, noise=z)
            if not adam_g.step([theta], [grad]):
                trace.flag("nonfinite_gradient")
        loss_d, loss_g = float(np.mean(losses_d)), float(np.mean(losses_g))
        _check_finite(loss_d + loss_g, trace, "loss")
        collapsed = collapsed + 1 if loss_d < 1e-6 else 0
        if collapsed >= config.collapse_epochs:
            trace.flag("discriminator_collapse")
        if epoch % config.kl_every == 0 or epoch == config.epochs - 1:
            kl = sample_kl(template, theta, eval_rng, config.kl_samples or n_data, data.target, config.r, config.epsilon)
            trace.record(epoch, kl, theta, started, loss_d=loss_d, loss_g=loss_g)
    return trace


# -- classical GAN -------------------------------------------------------------

def make_classical_pair(config: TrainConfig, d: int, rng) -> tuple[Mlp, Mlp]:
    hidden = [config.hidden_width] * config.hidden_layers
    gen = Mlp([NOISE_DIM, *hidden, d], "leaky_relu", rng)
    disc = Mlp([d, *hidden, 1], "leaky_relu", rng)
    return gen, disc


def train_classical_gan(config: TrainConfig, data: PreparedData | None = None) -> TrainTrace:
    config = config.resolved()
    if config.model != "classical":
        raise ConfigError("train_classical_gan needs model='classical'")
    data = data or prepare_data(config)
    n_data, d = data.points.shape
    if config.batch_size > n_data:
        raise ConfigError("batch_size exceeds dataset size")
    trace = TrainTrace(config.to_dict())
    started = time.perf_counter()
    rng = _rng(config.seed, 4)
    eval_rng = _rng(config.seed, 5)
    gen, disc = make_classical_pair(config, d, rng)
    trace.n_params = gen.n_params
    adam_d = Adam(lr=config.lr_d, beta1=config.beta1)
    adam_g = Adam(lr=config.lr_g, beta1=config.beta1)
    steps = config.steps_per_epoch or max(1, n_data // config.batch_size)
    m = config.batch_size

    collapsed = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n_data)
        losses_d, losses_g = [], []
        for step in range(steps):
            batch = order[(step * m) % n_data:][:m]
            if len(batch) < m:
                batch = np.concatenate([batch, order[: m - len(batch)]])
            z = rng.standard_normal((m, NOISE_DIM))
            fake = gen.forward(z)
            losses_d.append(_disc_step(disc, adam_d, data.points[batch], fake, trace))
            fake = gen.forward(z)
            d_fake = disc.forward(fake)
            losses_g.append(bce_losses(d_fake, d_fake)[1])
            _, g_out = disc.backward(generator_logit_grad(d_fake), of="logit")
            g_params, _ = gen.backward(g_out, of="output")
            if not adam_g.step(gen.params, g_params):
                trace.flag("nonfinite_gradient")
        loss_d, loss_g = float(np.mean(losses_d)), float(np.mean(losses_g))
        _check_finite(loss_d + loss_g, trace, "loss")
        collapsed = collapsed + 1 if loss_d < 1e-6 else 0
        if collapsed >= config.collapse_epochs:
            trace.flag("discriminator_collapse")
        if epoch % config.kl_every == 0 or epoch == config.epochs - 1:
            pts = gen.forward(eval_rng.standard_normal((config.kl_samples or n_data, NOISE_DIM)))
            kl = metrics.kl_divergence(data.target, metrics.histogram(pts, config.r), config.epsilon)
            trace.record(epoch, kl, gen.get_flat(), started, loss_d=loss_d, loss_g=loss_g)
    return trace


def train(config: TrainConfig, data: PreparedData | None = None) -> TrainTrace:
    fn = {"qcbm": train_qcbm, "qgan": train_qgan, "classical": train_classical_gan}[config.model]
    return fn(config, data)


def generate_samples(config: TrainConfig, trace: TrainTrace, n: int, seed: int) -> np.ndarray:
    """Samples in [0,1]^d from the best parameters recorded in ``trace``."""
    config = config.resolved()
    rng = _rng(seed, 6)
    d = config.dataset.get("dim", 2)
    params = np.asarray(trace.best_params)
    if config.model == "classical":
        gen, _ = make_classical_pair(config, d, rng)
        gen.set_flat(params)
        return gen.forward(rng.standard_normal((n, NOISE_DIM)))
    blocks = config.n_blocks
    template = circuits.build(config.architecture, d, config.r, blocks)
    return circuits.sample(template, params, rng, n)
