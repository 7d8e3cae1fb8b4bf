"""Optimizer tests: initialization, L-BFGS behavior, Adam fallback, grad checks."""

import numpy as np
import pytest

from stylegram import network as net
from stylegram import optimizer as opt
from stylegram.errors import ConfigurationError, NonFiniteError, ShapeMismatchError
from stylegram.objective import (
    ContentEntry,
    LayerPartition,
    StyleEntry,
    Term,
    build_objective,
)
from stylegram.style_synth import one_hot_gram


class Quadratic:
    """Convex test objective ||x - c||^2 with its exact gradient."""

    target_provider = None

    def __init__(self, center):
        self.center = np.asarray(center, dtype=np.float64)

    def eval(self, x):
        d = np.asarray(x, dtype=np.float64) - self.center
        return float(np.sum(d * d)), 2.0 * d, []


class ExplodingObjective:
    target_provider = None

    def eval(self, x):
        breakdown = [Term("style:conv1-1:global", "style", "conv1-1", "global",
                          float("nan"), 1.0, float("nan"))]
        return float("nan"), np.zeros_like(x), breakdown


@pytest.fixture(scope="module")
def tiny():
    config = net.preset_config("tinyvgg")
    weights = net.random_init(config, seed=200)
    return config, weights


class TestInitImage:
    def test_content_is_bitwise_copy(self):
        content = np.random.default_rng(0).standard_normal((3, 8, 8))
        out = opt.init_image("content", content)
        assert np.array_equal(out, content)
        assert out is not content

    def test_noise_reproducible(self):
        content = np.zeros((3, 8, 8))
        a = opt.init_image("noise", content, seed=7)
        b = opt.init_image("noise", content, seed=7)
        c = opt.init_image("noise", content, seed=8)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_noise_mean_near_range_midpoint(self):
        content = np.zeros((3, 64, 64))
        lo, hi = 10.0, 250.0
        span = hi - lo
        midpoint = (lo + hi) / 2.0
        for seed in range(10):
            out = opt.init_image("noise", content, seed=seed, noise_range=(lo, hi))
            assert out.min() >= lo and out.max() <= hi
            assert abs(out.mean() - midpoint) < 0.05 * span

    def test_style_requires_matching_image(self):
        content = np.zeros((3, 8, 8))
        style = np.random.default_rng(1).standard_normal((3, 8, 8))
        assert np.array_equal(opt.init_image("style", content, style), style)
        with pytest.raises(ConfigurationError):
            opt.init_image("style", content)
        with pytest.raises(ShapeMismatchError):
            opt.init_image("style", content, np.zeros((3, 9, 8)))

    def test_unknown_mode_rejected(self):
        with pytest.raises(ConfigurationError):
            opt.init_image("magic", np.zeros((3, 4, 4)))


class TestOptConfig:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            opt.OptConfig(method="newton")
        with pytest.raises(ConfigurationError):
            opt.OptConfig(memory=0)
        with pytest.raises(ConfigurationError):
            opt.OptConfig(c1=0.5, c2=0.1)
        with pytest.raises(ConfigurationError):
            opt.OptConfig(clamp=(1.0, -1.0))


class TestLbfgs:
    def test_quadratic_reaches_minimum(self):
        rng = np.random.default_rng(2)
        objective = Quadratic(rng.standard_normal((3, 6, 6)))
        init = rng.standard_normal((3, 6, 6)) * 5.0
        run = opt.minimize(objective, init, opt.OptConfig(max_iterations=30))
        assert run.trace[-1].loss < 1e-10
        assert run.iterations <= 30
        assert np.allclose(run.image, objective.center, atol=1e-6)

    def test_accepted_losses_strictly_decrease(self):
        rng = np.random.default_rng(3)
        objective = Quadratic(rng.standard_normal((2, 5, 5)))
        run = opt.minimize(objective, rng.standard_normal((2, 5, 5)),
                           opt.OptConfig(max_iterations=20))
        losses = [p.loss for p in run.trace]
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_start_at_minimum_terminates_immediately(self):
        center = np.random.default_rng(4).standard_normal((2, 4, 4))
        run = opt.minimize(Quadratic(center), center.copy(), opt.OptConfig(max_iterations=50))
        assert run.reason == "gradient_zero"
        assert run.evaluations <= 2
        assert run.trace[-1].loss == 0.0

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        center = rng.standard_normal((2, 4, 4))
        init = rng.standard_normal((2, 4, 4))
        cfg = opt.OptConfig(max_iterations=12)
        a = opt.minimize(Quadratic(center), init, cfg)
        b = opt.minimize(Quadratic(center), init, cfg)
        assert np.array_equal(a.image, b.image)
        assert [p.loss for p in a.trace] == [p.loss for p in b.trace]
        assert a.reason == b.reason

    def test_clamped_run_stays_in_box_and_decreases(self):
        rng = np.random.default_rng(6)
        center = np.full((2, 4, 4), 3.0)  # minimum outside the box
        init = rng.uniform(-0.5, 0.5, size=(2, 4, 4))
        run = opt.minimize(Quadratic(center), init,
                           opt.OptConfig(max_iterations=40, clamp=(-1.0, 1.0)))
        assert run.image.min() >= -1.0 and run.image.max() <= 1.0
        losses = [p.loss for p in run.trace]
        assert all(b <= a for a, b in zip(losses, losses[1:]))
        # best point in the box is the all-ones corner
        assert np.allclose(run.image, 1.0, atol=1e-8)

    def test_trace_every_thins_records(self):
        rng = np.random.default_rng(7)
        objective = Quadratic(rng.standard_normal((2, 4, 4)))
        run = opt.minimize(objective, rng.standard_normal((2, 4, 4)) * 4,
                           opt.OptConfig(max_iterations=9, tolerance=0.0, trace_every=3))
        iterations = [p.iteration for p in run.trace]
        assert iterations[0] == 0
        assert iterations[-1] == run.iterations
        assert all(i % 3 == 0 or i == run.iterations for i in iterations)

    def test_window_convergence_reason(self):
        rng = np.random.default_rng(8)
        objective = Quadratic(rng.standard_normal((2, 4, 4)))
        run = opt.minimize(objective, rng.standard_normal((2, 4, 4)),
                           opt.OptConfig(max_iterations=500, tolerance=1e-7))
        assert run.reason in ("converged", "gradient_zero")
        assert run.iterations < 500

    def test_rejects_target_provider(self, tiny):
        config, weights = tiny
        partition = LayerPartition(style=(StyleEntry("conv2-1", kind="global"),))
        objective = build_objective(
            config, weights, partition, style_targets={0: one_hot_gram(16, 0, 0, 10.0)},
            target_provider=lambda iteration: {0: one_hot_gram(16, iteration % 16, 0, 10.0)},
        )
        with pytest.raises(ConfigurationError):
            opt.minimize(objective, np.zeros((3, 16, 16)), opt.OptConfig(method="lbfgs"))

    def test_nonfinite_loss_names_entry(self):
        with pytest.raises(NonFiniteError, match="style:conv1-1:global"):
            opt.minimize(ExplodingObjective(), np.zeros((1, 2, 2)),
                         opt.OptConfig(max_iterations=5))

    def test_content_only_descent_from_noise(self, tiny):
        config, weights = tiny
        content = np.random.default_rng(9).uniform(-100, 100, size=(3, 16, 16))
        partition = LayerPartition(content=(ContentEntry("conv2-1"),))
        objective = build_objective(config, weights, partition, content_image=content)
        init = opt.init_image("noise", content, seed=1, noise_range=(-100.0, 100.0))
        run = opt.minimize(objective, init, opt.OptConfig(max_iterations=15))
        assert run.trace[-1].loss < run.trace[0].loss

    def test_texture_loss_descends(self, tiny):
        config, weights = tiny
        partition = LayerPartition(style=(StyleEntry("conv2-1", kind="global"),))
        objective = build_objective(config, weights, partition,
                                    style_targets={0: one_hot_gram(16, 2, 5, 50.0)})
        init = opt.init_image("noise", np.zeros((3, 24, 24)), seed=3,
                              noise_range=(-64.0, 64.0))
        run = opt.minimize(objective, init, opt.OptConfig(max_iterations=40))
        assert run.trace[-1].loss < 0.5 * run.trace[0].loss
        losses = [p.loss for p in run.trace]
        assert all(b <= a for a, b in zip(losses, losses[1:]))


class TestAdam:
    def test_quadratic_descends(self):
        rng = np.random.default_rng(10)
        objective = Quadratic(rng.standard_normal((2, 4, 4)))
        init = rng.standard_normal((2, 4, 4)) * 3.0
        run = opt.minimize(objective, init,
                           opt.OptConfig(method="adam", max_iterations=200, adam_step=0.1))
        assert run.trace[-1].loss < 0.05 * run.trace[0].loss

    def test_accepts_target_provider(self, tiny):
        config, weights = tiny

        def provider(iteration):
            rng = np.random.default_rng(1000 + iteration)
            i, j = rng.integers(0, 16, size=2)
            return {0: one_hot_gram(16, int(i), int(j), 25.0)}

        partition = LayerPartition(style=(StyleEntry("conv2-1", kind="global"),))
        objective = build_objective(config, weights, partition,
                                    style_targets={0: one_hot_gram(16, 0, 0, 25.0)},
                                    target_provider=provider)
        init = opt.init_image("noise", np.zeros((3, 16, 16)), seed=4,
                              noise_range=(-50.0, 50.0))
        run = opt.minimize(objective, init,
                           opt.OptConfig(method="adam", max_iterations=8, adam_step=1.0))
        assert run.iterations == 8
        assert len(run.trace) == 9

    def test_deterministic(self):
        rng = np.random.default_rng(11)
        center = rng.standard_normal((2, 3, 3))
        init = rng.standard_normal((2, 3, 3))
        cfg = opt.OptConfig(method="adam", max_iterations=25, adam_step=0.2)
        a = opt.minimize(Quadratic(center), init, cfg)
        b = opt.minimize(Quadratic(center), init, cfg)
        assert np.array_equal(a.image, b.image)


class TestGradCheck:
    def test_quadratic_is_nearly_exact(self):
        rng = np.random.default_rng(12)
        objective = Quadratic(rng.standard_normal((2, 5, 5)))
        err = opt.grad_check(objective, rng.standard_normal((2, 5, 5)), eps=1e-4, samples=20)
        assert err < 1e-8

    def test_tinyvgg_global_gram_objective(self, tiny):
        config, weights = tiny
        partition = LayerPartition(
            content=(ContentEntry("conv1-1"),),
            style=(StyleEntry("conv2-1", kind="global"),),
        )
        rng = np.random.default_rng(13)
        objective = build_objective(config, weights, partition,
                                    content_image=rng.uniform(-100, 100, (3, 16, 16)),
                                    style_image=rng.uniform(-100, 100, (3, 16, 16)))
        err = opt.grad_check(objective, rng.uniform(-100, 100, (3, 16, 16)),
                             eps=1e-4, samples=12, seed=0)
        assert err < 1e-5

    def test_tinyvgg_spatial_objective(self, tiny):
        config, weights = tiny
        partition = LayerPartition(style=(StyleEntry("conv2-1", kind="spatial"),))
        rng = np.random.default_rng(14)
        objective = build_objective(config, weights, partition,
                                    style_image=rng.uniform(-100, 100, (3, 16, 16)))
        err = opt.grad_check(objective, rng.uniform(-100, 100, (3, 16, 16)),
                             eps=1e-4, samples=12, seed=1)
        assert err < 1e-5

    def test_invalid_arguments_rejected(self):
        objective = Quadratic(np.zeros((1, 2, 2)))
        with pytest.raises(ConfigurationError):
            opt.grad_check(objective, np.zeros((1, 2, 2)), eps=0.0)
        with pytest.raises(ConfigurationError):
            opt.grad_check(objective, np.zeros((1, 2, 2)), samples=0)
