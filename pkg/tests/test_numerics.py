from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refscan.errors import ConfigError, DimensionError
from refscan.numerics import ParamStore, Var, grad_check, linear, softmax, uniform_init
from refscan.numerics import tape


def test_linear_identity():
    out = linear([[1.0, 0.0]], np.eye(2), np.zeros(2))
    np.testing.assert_array_equal(out, [[1.0, 0.0]])


def test_linear_hand_case():
    out = linear([[1.0, 2.0]], [[1.0], [1.0]], [0.0])
    np.testing.assert_allclose(out, [[3.0]])


def test_linear_zero_input():
    out = linear(np.zeros((3, 4)), np.ones((4, 2)), np.zeros(2))
    np.testing.assert_array_equal(out, np.zeros((3, 2)))


def test_linear_shape_mismatch_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(1, 2\).*\(3, 1\)"):
        linear([[1.0, 2.0]], np.zeros((3, 1)), [0.0])


def test_linear_additivity():
    rng = np.random.default_rng(0)
    x1, x2 = rng.normal(size=(2, 5, 3))
    w = rng.normal(size=(3, 4))
    b = np.zeros(4)
    np.testing.assert_allclose(
        linear(x1 + x2, w, b), linear(x1, w, b) + linear(x2, w, b), atol=1e-12
    )


def test_softmax_symmetry():
    np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5], atol=1e-15)


def test_softmax_large_logits_no_overflow():
    np.testing.assert_allclose(softmax([1000.0, 1000.0]), [0.5, 0.5], atol=1e-15)


def test_softmax_closed_form():
    np.testing.assert_allclose(softmax([0.0, np.log(3.0)]), [0.25, 0.75], atol=1e-12)


def test_softmax_empty_rejected():
    with pytest.raises(DimensionError):
        softmax(np.array([]))


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.floats(-100, 100))
@settings(max_examples=200, deadline=None)
def test_softmax_sums_to_one_and_shift_invariant(logits, shift):
    v = np.asarray(logits)
    p = softmax(v)
    assert abs(p.sum() - 1.0) <= 1e-12
    assert np.all(p > 0)
    np.testing.assert_allclose(p, softmax(v + shift), atol=1e-12)


def test_uniform_init_bounds():
    rng = np.random.default_rng(1)
    w = uniform_init(rng, 64, (64, 8))
    assert np.all(np.abs(w) <= 1.0 / 8.0)


class TestGradCheck:
    def test_square_closed_form(self):
        params = ParamStore()
        params.add("w", np.array([[3.0]]))

        def loss_fn(pv):
            return tape.sum_all(tape.mul(pv["w"], pv["w"]))

        report = grad_check(loss_fn, params, eps=1e-5)
        row = report.rows[0]
        assert row.checked == 1
        # analytic 6 vs finite differences, which are exact for quadratics
        assert report.max_rel_err <= 1e-6

    def test_constant_function_zero_grads(self):
        params = ParamStore()
        params.add("w", np.array([1.0, -2.0]))

        def loss_fn(pv):
            return Var(np.asarray(4.2))

        report = grad_check(loss_fn, params, eps=1e-5)
        assert report.max_rel_err == 0.0

    def test_selection_flip_entries_are_skipped(self):
        params = ParamStore()
        params.add("w", np.array([0.5]))

        def loss_fn(pv):
            # signature depends on the sign, so any perturbation of an entry
            # sitting exactly at the boundary flips it
            sig = params["w"][0] > 0.5
            return tape.sum_all(pv["w"]), sig

        report = grad_check(loss_fn, params, eps=1e-5)
        assert report.rows[0].skipped == 1
        assert report.rows[0].checked == 0

    def test_nonfinite_loss_flags_and_aborts(self):
        params = ParamStore()
        params.add("bad", np.array([0.0]))
        params.add("good", np.array([1.0]))

        def loss_fn(pv):
            if params["bad"][0] != 0.0:
                return Var(np.asarray(np.inf))
            return tape.sum_all(pv["good"])

        report = grad_check(loss_fn, params, eps=1e-5)
        assert report.aborted
        assert report.flagged_param == "bad"

    def test_rejects_nonpositive_eps(self):
        params = ParamStore()
        params.add("w", np.array([1.0]))
        with pytest.raises(ConfigError):
            grad_check(lambda pv: tape.sum_all(pv["w"]), params, eps=0.0)


class TestTapeOps:
    """FD spot checks for each primitive against random inputs."""

    @pytest.mark.parametrize(
        "name",
        ["matmul", "add_rowvec", "mul", "relu", "sigmoid", "log", "softmax_rows",
         "mean_rows", "concat_rows", "take_row", "clip"],
    )
    def test_op_gradient(self, name):
        rng = np.random.default_rng(hash(name) % 2**32)
        params = ParamStore()
        base = rng.normal(size=(3, 4))
        params.add("a", np.abs(base) + 0.5 if name == "log" else base)
        if name == "matmul":
            params.add("b", rng.normal(size=(4, 2)))
        elif name == "add_rowvec":
            params.add("b", rng.normal(size=4))
        elif name in ("mul", "concat_rows"):
            params.add("b", rng.normal(size=(3, 4)))

        def loss_fn(pv):
            if name == "matmul":
                out = tape.matmul(pv["a"], pv["b"])
            elif name == "add_rowvec":
                out = tape.add_rowvec(pv["a"], pv["b"])
            elif name == "mul":
                out = tape.mul(pv["a"], pv["b"])
            elif name == "relu":
                out = tape.relu(pv["a"])
            elif name == "sigmoid":
                out = tape.sigmoid(pv["a"])
            elif name == "log":
                out = tape.log(pv["a"])
            elif name == "softmax_rows":
                out = tape.softmax_rows(pv["a"])
            elif name == "mean_rows":
                out = tape.mean_rows(pv["a"])
            elif name == "concat_rows":
                out = tape.concat_rows([pv["a"], pv["b"]])
            elif name == "take_row":
                out = tape.take_row(pv["a"], 1)
            elif name == "clip":
                out = tape.clip(pv["a"], -0.5, 0.5)
            # weighted sum makes every output entry matter differently
            w = Var(np.arange(1.0, out.value.size + 1).reshape(out.value.shape))
            return tape.sum_all(tape.mul(out, w))

        report = grad_check(loss_fn, params, eps=1e-6)
        assert report.max_rel_err <= 1e-7, report.format_table()

    def test_backward_accumulates_through_shared_nodes(self):
        x = Var(np.array([[2.0]]))
        y = tape.add(tape.mul(x, x), tape.mul(x, x))  # 2x^2, dy/dx = 4x = 8
        y.backward()
        np.testing.assert_allclose(x.grad, [[8.0]])


def test_param_store_shape_guard():
    params = ParamStore()
    params.add("w", np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        params["w"] = np.zeros(3)
    with pytest.raises(ConfigError):
        params.add("w", np.zeros(1))
