import math

import numpy as np
import pytest

from hpfd import HPScalar, hp_central_diff
from hypkernels import _gmath as gm
from hypkernels.diff import (
    DEFAULT_BLOCKS,
    OptimizerState,
    ParamVector,
    Var,
    grad,
    materialize,
    step,
)


def scalar_grad(f, x):
    v = Var(x)
    out = f(v)
    out.backward()
    return out.value, v.grad


class TestVar:
    @pytest.mark.parametrize("f,df,x", [
        (lambda v: v * v, lambda x: 2 * x, 0.7),
        (lambda v: v + 3.0, lambda x: 1.0, -1.2),
        (lambda v: 3.0 - v, lambda x: -1.0, 0.4),
        (lambda v: 2.0 / v, lambda x: -2.0 / x**2, 0.8),
        (lambda v: v**3, lambda x: 3 * x**2, 1.3),
        (lambda v: v.exp(), math.exp, 0.5),
        (lambda v: v.log(), lambda x: 1.0 / x, 2.0),
        (lambda v: v.tanh(), lambda x: 1.0 - math.tanh(x) ** 2, 0.3),
        (lambda v: v.sqrt(), lambda x: 0.5 / math.sqrt(x), 4.0),
        (lambda v: -v, lambda x: -1.0, 0.9),
    ])
    def test_primitives(self, f, df, x):
        _, g = scalar_grad(f, x)
        assert g == pytest.approx(df(x), rel=1e-12)

    def test_fan_out_accumulates(self):
        # y = x*x + x => dy/dx = 2x + 1.
        val, g = scalar_grad(lambda v: v * v + v, 1.5)
        assert val == pytest.approx(1.5 * 1.5 + 1.5)
        assert g == pytest.approx(4.0)

    def test_deep_chain_iterative(self):
        # 3000 sequential ops would overflow a recursive traversal.
        v = Var(1.0)
        out = v
        for _ in range(3000):
            out = out * 0.999 + 0.001
        out.backward()
        assert v.grad == pytest.approx(0.999**3000, rel=1e-10)

    def test_composite_matches_hp_fd(self):
        def f(v):
            return (v * v + 1.0).sqrt().tanh().exp() / (v + 2.0)

        x = 0.37
        _, g = scalar_grad(f, x)
        fd = hp_central_diff(f, x, h=1e-6)
        assert g == pytest.approx(fd, rel=1e-9)


class TestParamVector:
    def test_shapes_validated(self):
        with pytest.raises(ValueError):
            ParamVector(np.zeros((2, 2)), np.zeros(3), np.zeros(3))
        with pytest.raises(ValueError):
            ParamVector(np.zeros((2, 2)), np.zeros(2), np.zeros(1))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            ParamVector(np.full((1, 1), np.nan), np.zeros(1), np.zeros(2))

    def test_caller_array_not_mutated(self):
        raws = np.zeros((1, 2))
        ParamVector(raws, np.zeros(1), np.ones(2))
        raws[0, 0] = 5.0  # the vector stores a frozen copy

    def test_view_round_trip(self):
        p = ParamVector(np.ones((2, 3)), np.zeros(2), np.ones(4), fixed_c=2.0)
        v = p.view()
        assert v.pole_raws[1][2] == 1.0
        assert v.fixed_c == 2.0
        assert v.log_c is None


class TestMaterialize:
    def test_poles_inside_ball(self):
        p = ParamVector(100.0 * np.ones((2, 3)), np.zeros(2), np.ones(2))
        params, _, curvature = materialize(p)
        for pole in params.poles:
            assert np.sqrt(curvature.c) * pole.norm < 1.0

    def test_weights_on_simplex(self):
        p = ParamVector(np.zeros((3, 1)), np.array([1.0, 0.0, -1.0]), np.ones(2))
        params, _, _ = materialize(p)
        assert params.weights.sum() == pytest.approx(1.0)

    def test_alphas_nonnegative(self):
        p = ParamVector(np.zeros((1, 1)), np.zeros(1), np.array([-0.5, 2.0]))
        _, radial, _ = materialize(p)
        np.testing.assert_allclose(radial.alphas, [0.25, 4.0])

    def test_curvature_sources(self):
        p = ParamVector(np.zeros((1, 1)), np.zeros(1), np.ones(2),
                        log_c=math.log(2.0))
        assert materialize(p)[2].c == pytest.approx(2.0)
        q = ParamVector(np.zeros((1, 1)), np.zeros(1), np.ones(2), fixed_c=0.5)
        assert materialize(q)[2].c == 0.5

    def test_matches_generic_path(self):
        # The numpy constrained view and the generic scalar view must agree.
        rng = np.random.default_rng(0)
        p = ParamVector(rng.standard_normal((2, 3)), rng.standard_normal(2),
                        rng.standard_normal(4))
        params, radial, _ = materialize(p)
        leaves = gm.KernelLeaves.from_view(p.view(), "ahrad")
        np.testing.assert_allclose(params.weights, leaves.weights, rtol=1e-14)
        np.testing.assert_allclose(radial.alphas, leaves.alphas, rtol=1e-14)
        for pole, row in zip(params.poles, leaves.poles):
            np.testing.assert_allclose(pole.coords.real, row, rtol=1e-14)


class TestGrad:
    def test_quadratic_loss(self):
        p = ParamVector(np.array([[0.3, -0.2]]), np.array([0.1]),
                        np.array([0.5, 0.4]))

        def loss(view):
            total = 0.0
            for row in view.pole_raws:
                total = total + gm.norm_sq(row)
            return total + view.weight_logits[0] * view.radial_raws[1]

        g = grad(loss, p)
        np.testing.assert_allclose(g.pole_raws, [[0.6, -0.4]], rtol=1e-14)
        assert g.weight_logits[0] == pytest.approx(0.4)
        np.testing.assert_allclose(g.radial_raws, [0.0, 0.1], rtol=1e-14)

    def test_nonfinite_loss_raises(self):
        p = ParamVector(np.zeros((1, 1)), np.zeros(1), np.ones(2))
        with pytest.raises(ArithmeticError):
            grad(lambda view: view.radial_raws[0].log() - view.radial_raws[0].log()
                 + Var(float("nan")), p)

    def test_frozen_curvature_has_no_component(self):
        p = ParamVector(np.zeros((1, 1)), np.zeros(1), np.ones(2))
        g = grad(lambda view: gm.norm_sq(view.radial_raws), p)
        assert g.log_c is None

    def test_kernel_loss_matches_hp_fd(self):
        rng = np.random.default_rng(4)
        p = ParamVector(0.3 * rng.standard_normal((2, 2)),
                        rng.standard_normal(2), 0.5 + 0.2 * rng.standard_normal(3))
        z = [0.2, -0.3]
        w = [0.1, 0.4]

        def loss(view):
            leaves = gm.KernelLeaves.from_view(view, "ahrad")
            e_z = gm.embed(leaves, z)
            e_w = gm.embed(leaves, w)
            return gm.kernel(leaves, e_z, e_w)

        g = grad(loss, p)
        flat = p.radial_raws.copy()
        for idx in range(flat.size):
            def pinned(x, idx=idx):
                raws = [HPScalar(v) for v in flat]
                raws[idx] = x
                view = p.view()
                view.radial_raws = raws
                return loss(view)

            fd = hp_central_diff(pinned, flat[idx])
            assert g.radial_raws[idx] == pytest.approx(fd, rel=1e-8, abs=1e-12)


class TestOptimizer:
    def make(self):
        return ParamVector(np.ones((1, 2)), np.zeros(1), np.ones(3))

    def make_grad(self):
        from hypkernels.diff import Gradient

        return Gradient(np.full((1, 2), 0.5), np.array([1.0]), np.zeros(3))

    def test_sgd_step(self):
        p = self.make()
        state = OptimizerState(mode="sgd")
        state, q = step(state, p, self.make_grad(), lr=0.1)
        np.testing.assert_allclose(q.pole_raws, 1.0 - 0.05)
        np.testing.assert_allclose(q.weight_logits, [-0.1])
        np.testing.assert_allclose(q.radial_raws, p.radial_raws)

    def test_adam_first_step_is_signed_lr(self):
        p = self.make()
        state = OptimizerState(mode="adam")
        _, q = step(state, p, self.make_grad(), lr=0.01)
        # First bias-corrected update is lr * sign(g) up to eps.
        np.testing.assert_allclose(q.pole_raws, 1.0 - 0.01, rtol=1e-6)

    def test_block_selection(self):
        p = self.make()
        state = OptimizerState(mode="sgd")
        _, q = step(state, p, self.make_grad(), lr=0.1, blocks=("weights",))
        np.testing.assert_allclose(q.pole_raws, p.pole_raws)
        assert q.weight_logits[0] == pytest.approx(-0.1)

    def test_unknown_block(self):
        with pytest.raises(ValueError):
            step(OptimizerState(), self.make(), self.make_grad(), 0.1, ("spam",))

    def test_nonpositive_lr(self):
        with pytest.raises(ValueError):
            step(OptimizerState(), self.make(), self.make_grad(), 0.0)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            OptimizerState(mode="rmsprop")

    def test_state_accumulates(self):
        p = self.make()
        g = self.make_grad()
        state = OptimizerState(mode="adam")
        state, p = step(state, p, g, 0.01, DEFAULT_BLOCKS)
        assert state.t == 1
        state, p = step(state, p, g, 0.01, DEFAULT_BLOCKS)
        assert state.t == 2
        assert "poles" in state.m and "poles" in state.v
