"""
Unit tests for the loss algebra of relgan/trainer/losses.py
"""

import math
import unittest as ut

import pytest
import torch

from relgan.autodiff.precision import precision
from relgan.errors import LossTermError, NonFiniteLossError, PairingError, ShapeError
from relgan.nn.architectures import ArchConfig, init_parameters
from relgan.nn.quartet import build_quartet
from relgan.trainer.losses import (
    LossNorms,
    LossReport,
    LossWeights,
    ObjectiveOptions,
    adversarial_losses,
    cycle_loss,
    discriminator_loss,
    generator_adversarial_loss,
    rel1_loss,
    rel1_pairing_mode,
    rel2_loss,
    total_objective,
)
from relgan.trainer.schedule import Phase, PhaseState
from relgan.trainer.verification import build_fixture, fixture_arch

EPS = 1e-7
BEFORE = PhaseState(phase=Phase.TL_REL1)
AFTER = PhaseState(phase=Phase.TL_REL1_REL2)


def _t(values):
    return torch.tensor(values, dtype=torch.float64)


def _half(x):
    return torch.full((x.shape[0], 1, 2, 2), 0.5, dtype=x.dtype)


def identity_quartet(tied=False):
    r"""Pass-through generators and zero-weight discriminators, so that D ≡ 0.5."""
    arch = ArchConfig(channels=3, base_channels=2, image_size=8, generator="identity", disc_layers=1)
    with precision("double"):
        quartet = build_quartet(arch, tied=tied, seed=0)
    for d in quartet.discriminators():
        init_parameters(d, seed=0, std=0.0)
    return quartet


def reference_report(q, a, b, weights, include_rel1=True, include_rel2=True):
    """Straight-line recomputation of every term with torch primitives."""
    clamp = lambda p: p.clamp(EPS, 1 - EPS)
    l1 = lambda x, y: (x - y).abs().mean()
    fb, fa = q.g_ab(a), q.g_ba(b)
    ra, rb = q.g_ba_prime(fb), q.g_ab_prime(fa)
    values = {
        "tl_a": l1(a, ra),
        "tl_b": l1(b, rb),
        "rel1_b": l1(b, fb),
        "rel1_a": l1(a, fa),
        "rel2_b": l1(rb, fb),
        "rel2_a": l1(ra, fa),
        "adv_d_b": -torch.log(clamp(q.d_b(b))).mean() - torch.log(clamp(1 - clamp(q.d_b(fb)))).mean(),
        "adv_d_a": -torch.log(clamp(q.d_a(a))).mean() - torch.log(clamp(1 - clamp(q.d_a(fa)))).mean(),
        "adv_g_ab": -torch.log(clamp(q.d_b(fb))).mean(),
        "adv_g_ba": -torch.log(clamp(q.d_a(fa))).mean(),
    }
    values = {k: float(v) for k, v in values.items()}
    total_g = weights.lambda_adv * (values["adv_g_ab"] + values["adv_g_ba"])
    total_g += weights.lambda_tl * (values["tl_a"] + values["tl_b"])
    if include_rel1:
        total_g += weights.lambda_rel1 * (values["rel1_b"] + values["rel1_a"])
    if include_rel2:
        total_g += weights.lambda_rel2 * (values["rel2_b"] + values["rel2_a"])
    values["total_g"] = total_g
    values["total_d"] = values["adv_d_a"] + values["adv_d_b"]
    return values


class test_DistanceTerms(ut.TestCase):
    def test_cycle_loss(self):
        a = _t([[[[0.3, -0.2], [0.9, 0.0]]]])
        self.assertEqual(cycle_loss(a, lambda x: x, lambda x: x).item(), 0.0)
        one = _t([[[[2.0]]]])
        self.assertEqual(cycle_loss(one, lambda x: 3 * x, lambda x: 0.5 * x).item(), 1.0)

    def test_cycle_loss_is_invariant_to_batch_order(self):
        gen = torch.Generator().manual_seed(0)
        a = torch.randn(5, 1, 2, 2, generator=gen, dtype=torch.float64)
        g_fwd, g_back = torch.tanh, lambda x: 0.7 * x
        perm = torch.tensor([3, 0, 4, 1, 2])
        torch.testing.assert_close(cycle_loss(a, g_fwd, g_back), cycle_loss(a[perm], g_fwd, g_back))

    def test_cycle_loss_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            cycle_loss(_t([[1.0, 2.0]]), lambda x: x, lambda x: x[:, :1])

    def test_rel1_loss(self):
        b = _t([1.0, 2.0])
        self.assertEqual(rel1_loss(b, b.clone()).item(), 0.0)
        self.assertEqual(rel1_loss(b, _t([0.0, 0.0])).item(), 1.5)
        x, y = _t([0.3, -1.0, 2.0]), _t([1.0, 1.0, -0.5])
        self.assertEqual(rel1_loss(x, y).item(), rel1_loss(y, x).item())
        self.assertEqual(rel1_loss(b, _t([0.0, 0.0]), pairing="minibatch").item(), 1.5)
        self.assertAlmostEqual(rel1_loss(b, _t([0.0, 0.0]), norm="mean_square").item(), 2.5)

    def test_rel1_loss_refuses_unpaired(self):
        with self.assertRaises(PairingError):
            rel1_loss(_t([1.0]), _t([0.0]), pairing="off")
        self.assertEqual(rel1_pairing_mode(True, "off"), "paired")
        self.assertEqual(rel1_pairing_mode(False, "off"), "off")
        self.assertEqual(rel1_pairing_mode(False, "minibatch"), "minibatch")
        with self.assertRaises(ValueError):
            rel1_pairing_mode(False, "nearest")

    def test_rel2_loss(self):
        x = _t([0.5, -0.5])
        self.assertEqual(rel2_loss(x, x.clone()).item(), 0.0)
        self.assertEqual(rel2_loss(_t([1.0, 1.0]), _t([0.0, 2.0])).item(), 1.0)
        with self.assertRaises(ShapeError):
            rel2_loss(_t([1.0, 1.0]), _t([1.0]))
        with self.assertRaises(ValueError):
            rel2_loss(x, x, norm="max")


class test_AdversarialTerms(ut.TestCase):
    def test_half_discriminator(self):
        x = torch.zeros(2, 3, 4, 4, dtype=torch.float64)
        d_loss, g_loss = adversarial_losses(_half, x, x)
        self.assertAlmostEqual(d_loss.item(), 1.386294, places=6)
        self.assertAlmostEqual(g_loss.item(), 0.693147, places=6)
        minimax = generator_adversarial_loss(_half, x, mode="minimax")
        self.assertAlmostEqual(minimax.item(), -0.693147, places=6)

    def test_perfect_discriminator(self):
        real, fake = torch.ones(1, 1, 2, 2, dtype=torch.float64), -torch.ones(1, 1, 2, 2, dtype=torch.float64)
        d = lambda x: (x > 0).to(x.dtype)
        d_loss = discriminator_loss(d, real, fake)
        self.assertGreaterEqual(d_loss.item(), 0.0)
        self.assertLess(d_loss.item(), 1e-6)
        # saturated, but still finite thanks to the clamp
        self.assertTrue(math.isfinite(generator_adversarial_loss(d, fake).item()))

    def test_discriminator_loss_detaches_fakes(self):
        fake = torch.full((1, 1, 2, 2), 0.3, dtype=torch.float64, requires_grad=True)
        d = lambda x: torch.sigmoid(x)
        self.assertFalse(discriminator_loss(d, fake.detach(), fake).requires_grad)
        g_loss = generator_adversarial_loss(d, fake)
        g_loss.backward()
        self.assertIsNotNone(fake.grad)

    def test_nan_probabilities_are_reported(self):
        nan_d = lambda x: torch.full_like(x, float("nan"))
        with self.assertRaises(LossTermError) as ctx:
            discriminator_loss(nan_d, torch.zeros(1, 1, 2, 2), torch.zeros(1, 1, 2, 2))
        self.assertEqual(ctx.exception.term, "adv_d")

    def test_unknown_mode(self):
        with self.assertRaises(ValueError):
            generator_adversarial_loss(_half, torch.zeros(1, 1, 2, 2), mode="hinge")
        with self.assertRaises(ValueError):
            ObjectiveOptions(adversarial_mode="wasserstein")


class test_TotalObjective(ut.TestCase):
    def test_closed_form_spot_values(self):
        q = identity_quartet()
        a = torch.rand(2, 3, 8, 8, dtype=torch.float64) * 2 - 1
        report = total_objective(q, a, a.clone(), LossWeights(), BEFORE, ObjectiveOptions(paired=True))
        values = report.as_floats()
        for name in ("tl_a", "tl_b", "rel1_a", "rel1_b", "rel2_a", "rel2_b"):
            self.assertEqual(values[name], 0.0, name)
        for name in ("adv_d_a", "adv_d_b"):
            self.assertAlmostEqual(values[name], 1.386294, places=6)
        for name in ("adv_g_ab", "adv_g_ba"):
            self.assertAlmostEqual(values[name], 0.693147, places=6)
        self.assertAlmostEqual(values["total_d"], 2.772589, places=6)
        self.assertAlmostEqual(values["total_g"], 2 * 0.693147, places=6)

    def test_matches_straight_line_recomputation(self):
        weights = LossWeights()
        for seed in range(20):
            fixture = build_fixture(seed=seed)
            q, a, b = fixture.quartet, fixture.a, fixture.b
            report = total_objective(q, a, b, weights, AFTER, ObjectiveOptions(paired=True)).as_floats()
            expected = reference_report(q, a, b, weights)
            for name in LossReport.field_names():
                self.assertAlmostEqual(report[name], expected[name], delta=1e-6, msg=f"seed {seed}, {name}")

    def test_terms_are_nonnegative(self):
        fixture = build_fixture(seed=4)
        report = total_objective(fixture.quartet, fixture.a, fixture.b, LossWeights(), AFTER)
        for name, value in report.as_floats().items():
            self.assertGreaterEqual(value, 0.0, name)

    def test_rel2_is_gated_by_the_phase(self):
        fixture = build_fixture(seed=1)
        q, a, b = fixture.quartet, fixture.a, fixture.b
        options = ObjectiveOptions(paired=True)
        before = total_objective(q, a, b, LossWeights(), BEFORE, options).as_floats()
        after = total_objective(q, a, b, LossWeights(), AFTER, options).as_floats()
        self.assertGreater(before["rel2_b"], 0.0)
        self.assertEqual(before["rel2_b"], after["rel2_b"])
        expected = reference_report(q, a, b, LossWeights(), include_rel2=False)["total_g"]
        self.assertAlmostEqual(before["total_g"], expected, delta=1e-9)
        added = after["total_g"] - before["total_g"]
        self.assertAlmostEqual(added, before["rel2_a"] + before["rel2_b"], delta=1e-9)

    def test_total_is_linear_in_the_weights(self):
        fixture = build_fixture(seed=2)
        q, a, b = fixture.quartet, fixture.a, fixture.b
        base = total_objective(q, a, b, LossWeights(lambda_rel2=1.0), AFTER).total_g.item()
        doubled = total_objective(q, a, b, LossWeights(lambda_rel2=2.0), AFTER).total_g.item()
        zero = total_objective(q, a, b, LossWeights(lambda_rel2=0.0), AFTER).total_g.item()
        self.assertAlmostEqual(doubled - zero, 2 * (base - zero), delta=1e-9)

    def test_unavailable_rel1(self):
        fixture = build_fixture(seed=3)
        q, a, b = fixture.quartet, fixture.a, fixture.b
        unpaired = ObjectiveOptions(paired=False, rel1_pairing="off")
        report = total_objective(q, a, b, LossWeights(), AFTER, unpaired)
        values = report.as_floats()
        self.assertEqual(values["rel1_a"], 0.0)
        self.assertEqual(values["rel1_b"], 0.0)
        expected = reference_report(q, a, b, LossWeights(), include_rel1=False)["total_g"]
        self.assertAlmostEqual(values["total_g"], expected, delta=1e-9)

        minibatch = total_objective(
            q, a, b, LossWeights(), AFTER, ObjectiveOptions(paired=False, rel1_pairing="minibatch")
        ).as_floats()
        self.assertGreater(minibatch["rel1_b"], 0.0)
        expected = reference_report(q, a, b, LossWeights())["total_g"]
        self.assertAlmostEqual(minibatch["total_g"], expected, delta=1e-6)

    def test_drop_rel1_after_transition(self):
        fixture = build_fixture(seed=5)
        q, a, b = fixture.quartet, fixture.a, fixture.b
        options = ObjectiveOptions(paired=True, drop_rel1_after_transition=True)
        values = total_objective(q, a, b, LossWeights(), AFTER, options).as_floats()
        expected = reference_report(q, a, b, LossWeights(), include_rel1=False)["total_g"]
        self.assertAlmostEqual(values["total_g"], expected, delta=1e-9)

    def test_mean_square_norms(self):
        fixture = build_fixture(seed=6)
        q, a, b = fixture.quartet, fixture.a, fixture.b
        options = ObjectiveOptions(norms=LossNorms(tl="mean_square"), paired=True)
        report = total_objective(q, a, b, LossWeights(), AFTER, options)
        expected = ((a - q.g_ba_prime(q.g_ab(a))) ** 2).mean()
        torch.testing.assert_close(report.tl_a.detach(), expected.detach())

    def test_tied_cyclegan_is_bit_identical(self):
        fixture = build_fixture(seed=7)
        with precision("double"):
            q = build_quartet(fixture_arch(), tied=True, seed=7)
        a, b = fixture.a, fixture.b
        weights = LossWeights(lambda_adv=1.0, lambda_tl=1.0, lambda_rel1=0.0, lambda_rel2=0.0)
        report = total_objective(q, a, b, weights, AFTER, ObjectiveOptions(paired=True))

        fake_b, fake_a = q.g_ab(a), q.g_ba(b)
        rec_a, rec_b = q.g_ba(fake_b), q.g_ab(fake_a)
        tl_a = (a - rec_a).abs().mean()
        tl_b = (b - rec_b).abs().mean()
        adv_g_ab = torch.log(q.d_b(fake_b).clamp(EPS, 1 - EPS)).mean() * -1.0
        adv_g_ba = torch.log(q.d_a(fake_a).clamp(EPS, 1 - EPS)).mean() * -1.0
        cyclegan = 1.0 * (adv_g_ab + adv_g_ba) + 1.0 * (tl_a + tl_b)
        self.assertTrue(torch.equal(report.total_g.detach(), cyclegan.detach()))

    def test_shape_mismatch_and_failing_terms(self):
        fixture = build_fixture(seed=0)
        q = fixture.quartet
        with self.assertRaises(ShapeError):
            total_objective(q, fixture.a, torch.zeros(2, 1, 4, 4, dtype=torch.float64), LossWeights(), BEFORE)
        with torch.no_grad():
            q.d_b.layers[0].conv.weight.fill_(float("nan"))
        with self.assertRaises(LossTermError) as ctx:
            total_objective(q, fixture.a, fixture.b, LossWeights(), BEFORE)
        self.assertEqual(ctx.exception.term, "adv_d")

    def test_report_serialization(self):
        fixture = build_fixture(seed=0)
        report = total_objective(fixture.quartet, fixture.a, fixture.b, LossWeights(), BEFORE)
        self.assertEqual(len(LossReport.field_names()), 12)
        self.assertListEqual(sorted(report.as_floats()), sorted(LossReport.field_names()))
        self.assertIn('"total_g"', report.to_json())
        report.check_finite()
        report.tl_a = torch.tensor(float("inf"))
        with self.assertRaises(NonFiniteLossError) as ctx:
            report.check_finite()
        self.assertEqual(ctx.exception.term, "tl_a")


def _grad_map(quartet, names):
    return {name: [p.grad for p in quartet.network(name).parameters()] for name in names}


def test_rel2_gradient_routing():
    fixture = build_fixture(seed=0)
    q = fixture.quartet
    report = total_objective(q, fixture.a, fixture.b, LossWeights(), AFTER)
    for p in q.parameters():
        p.grad = None
    report.rel2_b.backward()
    grads = _grad_map(q, ("g_ab", "g_ba", "g_ab_prime", "g_ba_prime"))
    for name in ("g_ab", "g_ba", "g_ab_prime"):
        assert all(g is not None for g in grads[name]), name
        assert any(bool(g.abs().sum() > 0) for g in grads[name]), name
    assert all(g is None for g in grads["g_ba_prime"])


def test_gated_rel2_contributes_no_gradient():
    fixture = build_fixture(seed=1)
    q, a, b = fixture.quartet, fixture.a, fixture.b

    def grads(weights, phase):
        for p in q.parameters():
            p.grad = None
        total_objective(q, a, b, weights, phase, ObjectiveOptions(paired=True)).total_g.backward()
        return [p.grad.clone() for name in q.owned_generator_names() for p in q.network(name).parameters()]

    gated = grads(LossWeights(lambda_rel2=5.0), BEFORE)
    without = grads(LossWeights(lambda_rel2=0.0), BEFORE)
    assert all(torch.equal(x, y) for x, y in zip(gated, without))
    active = grads(LossWeights(lambda_rel2=5.0), AFTER)
    assert any(not torch.equal(x, y) for x, y in zip(active, without))


@pytest.mark.parametrize("mode", ["non_saturating", "minimax"])
def test_adversarial_modes_enter_the_total(mode):
    fixture = build_fixture(seed=8)
    q, a, b = fixture.quartet, fixture.a, fixture.b
    weights = LossWeights(lambda_tl=1.0, lambda_rel1=0.0, lambda_rel2=0.0)
    report = total_objective(q, a, b, weights, BEFORE, ObjectiveOptions(adversarial_mode=mode))
    values = report.as_floats()
    expected = values["adv_g_ab"] + values["adv_g_ba"] + values["tl_a"] + values["tl_b"]
    assert values["total_g"] == pytest.approx(expected)
    if mode == "minimax":
        assert values["adv_g_ab"] < 0


if __name__ == "__main__":
    ut.main()
