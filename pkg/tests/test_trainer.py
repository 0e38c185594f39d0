"""
Unit tests for the training loop of relgan/trainer/trainer.py
"""

import json
import os
import unittest as ut
from copy import deepcopy
from dataclasses import replace

import pytest
import torch

from relgan.data.batcher import Batcher
from relgan.errors import CheckpointError, LossTermError
from relgan.nn.quartet import DISCRIMINATOR_NAMES
from relgan.trainer.checkpoint import load_checkpoint
from relgan.trainer.losses import LossWeights
from relgan.trainer.train_options import OptimOptions, cyclegan_baseline
from relgan.trainer.trainer import (
    check_resumable,
    discriminator_step,
    fit,
    generator_step,
    init_run_state,
    load_task_data,
    phase_signal,
    train_step,
)
from relgan.utils.hashing import tensor_checksum
from tests.conftest import tiny_config

EPS = 1e-7


def checksums(quartet):
    return {
        name: tensor_checksum(quartet.network(name).parameters()) for name in quartet.owned_network_names()
    }


class ReferenceAdam:
    """Textbook Adam over a list of parameters, keyed by identity."""

    def __init__(self, lr=2e-4, beta1=0.5, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state = {}

    @torch.no_grad()
    def step(self, params):
        for p in params:
            if p.grad is None:
                continue
            m, v, t = self.state.get(id(p), (torch.zeros_like(p), torch.zeros_like(p), 0))
            t += 1
            m.mul_(self.beta1).add_(p.grad, alpha=1.0 - self.beta1)
            v.mul_(self.beta2).addcmul_(p.grad, p.grad, value=1.0 - self.beta2)
            denom = (v / (1.0 - self.beta2**t)).sqrt_().add_(self.eps)
            p.addcdiv_(m, denom, value=-self.lr / (1.0 - self.beta1**t))
            self.state[id(p)] = (m, v, t)


def reference_cyclegan_step(q, adam, a, b, lambda_cyc=10.0):
    r"""
    One step of a plain two-generator CycleGAN, written with torch primitives:
    discriminators on detached fakes, then both generators on the
    non-saturating adversarial terms plus the weighted L1 cycle terms.
    """
    clamp = lambda p: p.clamp(EPS, 1.0 - EPS)

    def d_loss(d, real, fake):
        p_real = d(real)
        p_fake = clamp(d(fake.detach()))
        return torch.log(clamp(p_real)).mean() * -1.0 - torch.log(clamp(1.0 - p_fake)).mean()

    d_params = list(q.d_a.parameters()) + list(q.d_b.parameters())
    with torch.no_grad():
        fake_b, fake_a = q.g_ab(a), q.g_ba(b)
    for p in d_params:
        p.grad = None
    (d_loss(q.d_a, a, fake_a) + d_loss(q.d_b, b, fake_b)).backward()
    adam.step(d_params)

    g_params = list(q.g_ab.parameters()) + list(q.g_ba.parameters())
    for p in d_params:
        p.requires_grad_(False)
    for p in g_params:
        p.grad = None
    fake_b, fake_a = q.g_ab(a), q.g_ba(b)
    rec_a, rec_b = q.g_ba(fake_b), q.g_ab(fake_a)
    cyc_a = (a - rec_a).abs().mean()
    cyc_b = (b - rec_b).abs().mean()
    gan_ab = torch.log(clamp(q.d_b(fake_b))).mean() * -1.0
    gan_ba = torch.log(clamp(q.d_a(fake_a))).mean() * -1.0
    total = 1.0 * (gan_ab + gan_ba) + lambda_cyc * (cyc_a + cyc_b)
    total.backward()
    adam.step(g_params)
    for p in d_params:
        p.requires_grad_(True)


class test_TrainStep(ut.TestCase):
    def test_tied_baseline_is_bit_identical_to_cyclegan(self):
        cfg = cyclegan_baseline(tiny_config(total_steps=10))
        state = init_run_state(cfg)
        reference = deepcopy(state.quartet)
        adam = ReferenceAdam()
        train_set, _ = load_task_data(cfg)
        batcher = Batcher(train_set, cfg.batch_size, cfg.seed, cfg.paired)

        for step in range(10):
            batch = batcher.at_step(step)
            state, _ = train_step(state, batch.a, batch.b, cfg)
            reference_cyclegan_step(reference, adam, batch.a, batch.b)
        self.assertEqual(checksums(state.quartet), checksums(reference))

    def test_updates_touch_only_their_networks(self):
        cfg = tiny_config()
        state = init_run_state(cfg)
        train_set, _ = load_task_data(cfg)
        a, b = train_set.images_a[:2], train_set.images_b[:2]

        before = checksums(state.quartet)
        discriminator_step(state, a, b, cfg)
        after_d = checksums(state.quartet)
        for name in state.quartet.owned_network_names():
            changed = before[name] != after_d[name]
            self.assertEqual(changed, name in DISCRIMINATOR_NAMES, name)

        generator_step(state, a, b, cfg)
        after_g = checksums(state.quartet)
        for name in state.quartet.owned_network_names():
            changed = after_d[name] != after_g[name]
            self.assertEqual(changed, name not in DISCRIMINATOR_NAMES, name)
        # the discriminators are trainable again after the generator step
        self.assertTrue(all(p.requires_grad for p in state.quartet.discriminator_parameters()))

    def test_primed_generators_keep_their_own_weights(self):
        cfg = tiny_config()
        state = init_run_state(cfg)
        train_set, _ = load_task_data(cfg)
        for _ in range(3):
            state, _ = train_step(state, train_set.images_a[:2], train_set.images_b[:2], cfg)
        sums = checksums(state.quartet)
        self.assertNotEqual(sums["g_ab"], sums["g_ab_prime"])
        self.assertNotEqual(sums["g_ba"], sums["g_ba_prime"])
        self.assertEqual(state.step, 3)
        self.assertEqual(state.phase.step, 3)

    def test_runs_are_reproducible(self):
        def run(seed):
            cfg = tiny_config(seed=seed)
            state = init_run_state(cfg)
            train_set, _ = load_task_data(cfg)
            batcher = Batcher(train_set, cfg.batch_size, cfg.seed, cfg.paired)
            for step in range(3):
                batch = batcher.at_step(step)
                state, _ = train_step(state, batch.a, batch.b, cfg)
            return checksums(state.quartet)

        self.assertEqual(run(0), run(0))
        self.assertNotEqual(run(0)["g_ab"], run(1)["g_ab"])

    def test_cycle_term_decreases_without_adversary(self):
        weights = LossWeights(lambda_adv=0.0, lambda_tl=10.0, lambda_rel1=0.0, lambda_rel2=0.0)
        cfg = tiny_config(weights=weights, optim=OptimOptions(lr=1e-3))
        state = init_run_state(cfg)
        train_set, _ = load_task_data(cfg)
        a, b = train_set.images_a[:2], train_set.images_b[:2]
        tl = []
        for _ in range(50):
            state, report = train_step(state, a, b, cfg)
            values = report.as_floats()
            tl.append(values["tl_a"] + values["tl_b"])
        self.assertLess(sum(tl[-5:]), sum(tl[:5]))

    def test_phase_signal(self):
        cfg = tiny_config()
        state = init_run_state(cfg)
        train_set, _ = load_task_data(cfg)
        _, report = train_step(state, train_set.images_a[:2], train_set.images_b[:2], cfg)
        values = report.as_floats()
        # unpaired batches with ReL₁ off: the phase machine observes TL
        self.assertEqual(phase_signal(report, cfg), values["tl_a"] + values["tl_b"])
        paired = replace(cfg, paired=True)
        self.assertEqual(phase_signal(report, paired), values["rel1_a"] + values["rel1_b"])

    def test_nan_weights_name_the_term(self):
        cfg = tiny_config()
        state = init_run_state(cfg)
        with torch.no_grad():
            next(state.quartet.g_ab.parameters()).fill_(float("nan"))
        train_set, _ = load_task_data(cfg)
        with self.assertRaises(LossTermError) as ctx:
            train_step(state, train_set.images_a[:2], train_set.images_b[:2], cfg)
        self.assertTrue(ctx.exception.term.startswith("adv"))


def _lines(path):
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


def test_single_step_run(tmp_path):
    state = fit(tiny_config(total_steps=1), tmp_path)
    assert state.step == 1
    lines = _lines(tmp_path / "metrics.jsonl")
    assert len(lines) == 1
    assert lines[0]["step"] == 1
    assert (tmp_path / "checkpoints" / "last.relg").exists()
    config = json.loads((tmp_path / "config.json").read_text())
    assert config["config"]["total_steps"] == 1
    report = json.loads((tmp_path / "eval_report.json").read_text())
    assert set(report) == {"AB", "BA"}
    assert report["AB"]["n_samples"] == 4


def test_resume_is_bit_identical(tmp_path):
    cfg = tiny_config(total_steps=6, checkpoint_every=3)
    full, resumed = tmp_path / "full", tmp_path / "resumed"
    fit(cfg, full)
    fit(cfg, resumed, resume=full / "checkpoints" / "step_00003.relg")

    last_full = (full / "checkpoints" / "last.relg").read_bytes()
    assert last_full == (resumed / "checkpoints" / "last.relg").read_bytes()
    tail = [line for line in _lines(full / "metrics.jsonl") if line["step"] > 3]
    assert _lines(resumed / "metrics.jsonl") == tail


def test_resume_in_place_cuts_the_log(tmp_path):
    cfg = tiny_config(total_steps=4, checkpoint_every=2)
    fit(cfg, tmp_path)
    fit(cfg, tmp_path, resume=tmp_path / "checkpoints" / "step_00002.relg")
    steps = [line["step"] for line in _lines(tmp_path / "metrics.jsonl") if "event" not in line]
    assert steps == [1, 2, 3, 4]


def test_resume_refuses_another_model(tmp_path):
    cfg = tiny_config(total_steps=2)
    fit(cfg, tmp_path)
    checkpoint = load_checkpoint(tmp_path / "checkpoints" / "last.relg")
    check_resumable(checkpoint, cfg)
    with pytest.raises(CheckpointError):
        check_resumable(checkpoint, replace(cfg, tied=True))
    with pytest.raises(CheckpointError):
        check_resumable(checkpoint, replace(cfg, total_steps=1))


def test_periodic_checkpoints_and_evaluations(tmp_path):
    fit(tiny_config(total_steps=4, checkpoint_every=2, eval_every=2), tmp_path)
    names = sorted(os.listdir(tmp_path / "checkpoints"))
    assert names == ["last.relg", "step_00002.relg", "step_00004.relg"]
    assert sorted(os.listdir(tmp_path / "eval")) == ["step_00002.json", "step_00004.json"]


@pytest.mark.slow
def test_long_run_stays_finite(tmp_path):
    cfg = tiny_config(total_steps=500, precision="single", rule=replace(tiny_config().rule, window=50))
    state = fit(cfg, tmp_path)
    assert state.step == 500
    for line in _lines(tmp_path / "metrics.jsonl"):
        if "event" not in line:
            assert all(v == v and abs(v) != float("inf") for k, v in line.items() if k != "step")


if __name__ == "__main__":
    ut.main()
