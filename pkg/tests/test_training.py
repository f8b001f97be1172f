import json

import numpy as np
import pytest

from qgenbench import circuits, metrics, training
from qgenbench.neural import Mlp
from qgenbench.statevector import AngleSource, GateOp
from qgenbench.training import ConfigError, PreparedData, TrainConfig, TrainingAborted


def small(**kw):
    base = dict(dataset={"name": "x", "dim": 2, "n": 2000, "seed": 0}, batch_size=200)
    base.update(kw)
    return TrainConfig(**base)


def test_config_defaults_resolve():
    cfg = TrainConfig(model="qgan", dataset={"name": "stocks", "dim": 2}).resolved()
    assert cfg.batch_size == 104 and cfg.epochs == 2000 and cfg.disc_hidden == [16]
    cfg = TrainConfig(model="classical", dataset={"name": "o", "dim": 3}).resolved()
    assert cfg.hidden_layers == 4 and cfg.batch_size == 1000
    assert TrainConfig(model="qcbm").resolved().epochs == 400
    assert TrainConfig(model="qgan", architecture="continuous").resolved().disc_hidden == [32, 32]


def test_config_errors_listed_together():
    with pytest.raises(ConfigError) as err:
        TrainConfig.from_dict({"model": "vae", "r": 0, "lr_g": -1, "beta1": 1.0, "colour": 3})
    msg = str(err.value)
    for part in ("colour", "model", "r must", "lr_g", "beta1"):
        assert part in msg


# -- parameter shift -----------------------------------------------------------

def test_psr_single_rx():
    t = circuits.from_gates(1, [GateOp("RX", (0,), AngleSource.PARAM, 0)])
    g = training.psr_gradient(t, np.array([np.pi / 3]), np.array([1.0, -1.0]))
    assert g[0] == pytest.approx(-np.sin(np.pi / 3), abs=1e-12)


@pytest.mark.parametrize("kind,d,r", [("standard", 2, 3), ("copula", 2, 3), ("continuous", 3, 1)])
def test_psr_constant_observable_is_zero(kind, d, r):
    t = circuits.build(kind, d, r, 2)
    theta = np.random.default_rng(0).normal(size=t.n_params)
    if t.kind.discrete:
        g = training.psr_gradient(t, theta, lambda idx: np.full(idx.shape, 3.0))
    else:
        g = training.psr_gradient(t, theta, np.zeros(d), noise=circuits.draw_noise(t, 1, 4))
    assert np.max(np.abs(g)) <= 1e-12


def random_generic(rng, n, count):
    gates, slot = [], 0
    for _ in range(count):
        kind = rng.choice(["H", "CNOT", "RX", "RY", "RZ", "RZZ"])
        if kind in ("CNOT", "RZZ"):
            targets = tuple(int(q) for q in rng.choice(n, 2, replace=False))
        else:
            targets = (int(rng.integers(n)),)
        if kind in ("H", "CNOT"):
            gates.append(GateOp(kind, targets))
        else:
            gates.append(GateOp(kind, targets, AngleSource.PARAM, slot))
            slot += 1
    return circuits.from_gates(n, gates)


def test_psr_random_six_qubit_circuit():
    rng = np.random.default_rng(4)
    t = random_generic(rng, 6, 40)
    theta = rng.uniform(-np.pi, np.pi, t.n_params)
    f = rng.normal(size=64)
    g = training.psr_gradient(t, theta, f)
    fd = training.finite_difference_gradient(lambda p: circuits.model_probabilities(t, p) @ f, theta)
    np.testing.assert_allclose(g, fd, atol=1e-6 * max(1.0, np.abs(fd).max()))


def test_psr_continuous_chain_rule():
    rng = np.random.default_rng(5)
    t = circuits.build("continuous", 2, 1, 2)
    theta = rng.normal(size=t.n_params)
    z = circuits.draw_noise(t, rng, 6)
    w = rng.normal(size=(6, 2))

    def fn(p):
        return float(np.sum(w * circuits.continuous_outputs(t, np.tile(p, (6, 1)), z)))

    fd = training.finite_difference_gradient(fn, theta)
    np.testing.assert_allclose(training.psr_gradient(t, theta, w, noise=z), fd, atol=1e-8)


# -- QCBM ----------------------------------------------------------------------

def point_mass_data(d, r):
    probs = np.zeros(2 ** (r * d))
    probs[0] = 1.0
    pts = np.full((10, d), 0.01)
    return PreparedData(None, None, pts, metrics.Histogram(d, 2**r, probs, 10))


def test_qcbm_stays_at_optimal_start():
    cfg = TrainConfig(model="qcbm", architecture="standard", epochs=50, dataset={"name": "x", "dim": 2})
    trace = training.train_qcbm(cfg, point_mass_data(2, 4))
    assert trace.best_kl <= 1e-3


def test_qcbm_block_warm_start():
    cfg = small(model="qcbm", architecture="copula", r=3, epochs=40, n_blocks=1)
    data = training.prepare_data(cfg.resolved())
    one = training.train_qcbm(cfg, data)
    two = training.train_qcbm(small(model="qcbm", architecture="copula", r=3, epochs=40, n_blocks=2), data)
    assert two.best_kl <= one.best_kl + 1e-9
    # block 1 is identical in both runs, and block 2 starts from its incumbent
    assert two.records[: len(one.records)] == one.records
    assert two.block_starts[1]["loss"] == pytest.approx(one.best_kl, abs=1e-12)


def test_qcbm_continuous_runs_and_trace_integrity():
    trace = training.train_qcbm(small(model="qcbm", architecture="continuous", epochs=15))
    kls = [r["kl"] for r in trace.records]
    assert trace.best_kl == min(kls)
    assert [r["epoch"] for r in trace.records] == list(range(len(kls)))
    assert np.all(np.isfinite(kls))


def test_qcbm_nonfinite_loss_aborts():
    # unsmoothed KL of a sampled continuous histogram is infinite once a data cell is empty
    with pytest.raises(TrainingAborted) as err:
        training.train_qcbm(small(model="qcbm", architecture="continuous", epochs=5, epsilon=0.0))
    assert "nonfinite_loss" in err.value.trace.flags


def test_qcbm_stopping_rule():
    cfg = TrainConfig(model="qcbm", architecture="standard", epochs=400, dataset={"name": "x", "dim": 2})
    trace = training.train_qcbm(cfg, point_mass_data(2, 4))
    assert len(trace.records) < 400


# -- QGAN ----------------------------------------------------------------------

def test_qgan_frozen_half_discriminator_gives_zero_gradient():
    disc = Mlp([8, 16, 1], "leaky_relu", seed=0)
    disc.set_flat(np.zeros(disc.n_params))
    bits = training.bit_table(8)
    f = -np.log(disc.forward(bits)[:, 0])
    t = circuits.build("copula", 2, 4, 1)
    g = training.psr_gradient(t, np.random.default_rng(1).normal(size=t.n_params), f)
    assert np.max(np.abs(g)) <= 1e-10


def test_bit_table_convention():
    assert training.bit_table(3)[0b110].tolist() == [1.0, 1.0, 0.0]


def test_qgan_symmetric_start_losses():
    cfg = small(model="qgan", architecture="copula", r=3, epochs=1, steps_per_epoch=1, lr_d=1e-9)
    disc = Mlp([6, 16, 1], "leaky_relu", seed=0)
    disc.set_flat(np.zeros(disc.n_params))
    trace = training.train_qgan(cfg, discriminator=disc)
    rec = trace.records[0]
    assert rec["loss_d"] == pytest.approx(2 * np.log(2), abs=1e-6)
    assert rec["loss_g"] == pytest.approx(np.log(2), abs=1e-6)


@pytest.mark.parametrize("arch", ["copula", "standard", "continuous"])
def test_qgan_runs_deterministically(arch):
    cfg = small(model="qgan", architecture=arch, r=3, epochs=3, steps_per_epoch=2, init_scale=0.3)
    a, b = training.train_qgan(cfg), training.train_qgan(cfg)
    assert a.records == b.records and a.best_params == b.best_params
    assert a.best_kl == min(r["kl"] for r in a.records)
    assert {"loss_d", "loss_g"} <= set(a.records[0])


def test_batch_larger_than_data_rejected():
    with pytest.raises(ConfigError):
        training.train_qgan(small(model="qgan", batch_size=5000, epochs=1))


# -- classical -----------------------------------------------------------------

def test_classical_gan_deterministic_and_learns_something():
    cfg = small(model="classical", dataset={"name": "mg", "dim": 2, "n": 4000}, epochs=30, hidden_width=16)
    a, b = training.train_classical_gan(cfg), training.train_classical_gan(cfg)
    assert a.records == b.records
    assert a.best_kl < a.records[0]["kl"]


def test_generate_samples_from_trace():
    cfg = small(model="classical", epochs=2)
    trace = training.train(cfg)
    pts = training.generate_samples(cfg, trace, 50, seed=0)
    assert pts.shape == (50, 2) and np.all((pts >= 0) & (pts <= 1))
    cfg = small(model="qcbm", architecture="copula", r=3, epochs=3)
    trace = training.train(cfg)
    assert training.generate_samples(cfg, trace, 20, seed=0).shape == (20, 2)


def test_trace_files(tmp_path):
    cfg = small(model="qcbm", architecture="copula", r=3, epochs=5)
    trace = training.train(cfg)
    trace.write(tmp_path)
    lines = (tmp_path / "trace.jsonl").read_text().splitlines()
    assert len(lines) == len(trace.records)
    summary = json.loads((tmp_path / "trace_summary.json").read_text())
    assert summary["best_kl"] == trace.best_kl and summary["config"]["r"] == 3
    assert len(json.loads((tmp_path / "trace_timing.json").read_text())) == len(lines)
