"""Tensor op forward values, tape semantics, gradients, and Adam.

Derived gradient values are checked against central finite differences
(step 1e-3) computed here, independently of the backward implementations.
"""

import numpy as np
import pytest

import topicsum.autodiff as ad
from conftest import assert_grads_match, check_gradients, numeric_grad


class TestTensorBasics:
    def test_dtype_defaults_to_float32(self):
        t = ad.Tensor([[1.0, 2.0]])
        assert t.data.dtype == np.float32

    def test_using_dtype_switches_new_tensors(self):
        with ad.using_dtype(np.float64):
            inner = ad.Tensor([[1.0]])
        outer = ad.Tensor([[1.0]])
        assert inner.data.dtype == np.float64
        assert outer.data.dtype == np.float32

    def test_item_rejects_non_scalar(self):
        with pytest.raises(ValueError):
            ad.Tensor([[1.0, 2.0]]).item()

    def test_grad_buffer_matches_shape(self):
        x = ad.Tensor(np.ones((2, 3)), requires_grad=True)
        with ad.tape() as t:
            t.backward(x.sum())
        assert x.grad.shape == (2, 3)
        np.testing.assert_allclose(x.grad, np.ones((2, 3)))


class TestForwardValues:
    def test_matmul_identity(self):
        x = ad.Tensor([[1.0, 2.0], [3.0, 4.0]])
        eye = ad.Tensor(np.eye(2))
        np.testing.assert_allclose(ad.matmul(x, eye).data, x.data)

    def test_matmul_row_times_column(self):
        # [[1,2]] @ [[3],[4]] = [[11]], by hand
        out = ad.matmul(ad.Tensor([[1.0, 2.0]]), ad.Tensor([[3.0], [4.0]]))
        np.testing.assert_allclose(out.data, [[11.0]])

    def test_matmul_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ValueError, match=r"\(1, 2\).*\(3, 1\)"):
            ad.matmul(ad.Tensor([[1.0, 2.0]]), ad.Tensor([[1.0], [2.0], [3.0]]))

    def test_tanh_and_sigmoid_at_zero(self):
        assert ad.tanh(ad.Tensor([[0.0]])).item() == 0.0
        assert ad.sigmoid(ad.Tensor([[0.0]])).item() == 0.5

    def test_sigmoid_saturates_exactly(self):
        assert ad.sigmoid(ad.Tensor([[-1e9]])).item() == 0.0
        assert ad.sigmoid(ad.Tensor([[1e9]])).item() == 1.0

    def test_softmax_equal_logits_is_uniform(self):
        out = ad.softmax(ad.Tensor([[2.0, 2.0, 2.0, 2.0]]), axis=1)
        np.testing.assert_allclose(out.data, np.full((1, 4), 0.25), rtol=1e-6)

    def test_softmax_log_ratio(self):
        # softmax([ln 1, ln 3]) = [0.25, 0.75]
        out = ad.softmax(ad.Tensor([[0.0, np.log(3.0)]]), axis=1)
        np.testing.assert_allclose(out.data, [[0.25, 0.75]], atol=1e-6)

    def test_softmax_large_inputs_stable(self):
        out = ad.softmax(ad.Tensor([[1000.0, 1000.0]]), axis=1)
        assert np.all(np.isfinite(out.data))
        np.testing.assert_allclose(out.data, [[0.5, 0.5]])

    def test_softmax_axis_zero(self):
        out = ad.softmax(ad.Tensor([[0.0], [np.log(3.0)]]), axis=0)
        np.testing.assert_allclose(out.data, [[0.25], [0.75]], atol=1e-6)

    def test_log_clamps_at_floor(self):
        out = ad.log(ad.Tensor([[0.0]]), floor=1e-12)
        np.testing.assert_allclose(out.item(), np.log(1e-12), rtol=1e-6)

    def test_embedding_lookup_gathers_rows(self):
        table = ad.Tensor(np.arange(12, dtype=np.float32).reshape(4, 3))
        out = ad.embedding_lookup(table, [0, 2])
        np.testing.assert_allclose(out.data, [[0, 1, 2], [6, 7, 8]])

    def test_embedding_lookup_empty_ids(self):
        table = ad.Tensor(np.ones((4, 3)))
        assert ad.embedding_lookup(table, []).data.shape == (0, 3)

    def test_embedding_lookup_rejects_bad_id(self):
        table = ad.Tensor(np.ones((4, 3)))
        with pytest.raises(IndexError, match="7"):
            ad.embedding_lookup(table, [1, 7])

    def test_scatter_sum_merges_collisions(self):
        out = ad.scatter_sum(ad.Tensor([[0.25, 0.75]]), [3, 3], 5)
        np.testing.assert_allclose(out.data, [[0, 0, 0, 1.0, 0]])

    def test_concat_both_axes(self):
        a = ad.Tensor([[1.0, 2.0]])
        b = ad.Tensor([[3.0, 4.0]])
        np.testing.assert_allclose(ad.concat([a, b], axis=0).data, [[1, 2], [3, 4]])
        np.testing.assert_allclose(ad.concat([a, b], axis=1).data, [[1, 2, 3, 4]])

    def test_rows_and_pick(self):
        x = ad.Tensor(np.arange(6, dtype=np.float32).reshape(3, 2))
        np.testing.assert_allclose(ad.rows(x, 1, 3).data, [[2, 3], [4, 5]])
        assert ad.pick(x, 2, 1).item() == 5.0
        with pytest.raises(IndexError):
            ad.rows(x, 2, 4)
        with pytest.raises(IndexError):
            ad.pick(x, 3, 0)

    def test_add_broadcasts_rows_and_scalars(self):
        x = ad.Tensor(np.ones((2, 3)))
        bias = ad.Tensor([[1.0, 2.0, 3.0]])
        np.testing.assert_allclose(ad.add(x, bias).data, [[2, 3, 4], [2, 3, 4]])
        np.testing.assert_allclose((x + 1.0).data, np.full((2, 3), 2.0))
        gate = ad.Tensor([[0.25]])
        np.testing.assert_allclose((x * gate).data, np.full((2, 3), 0.25))


class TestGradients:
    """Each op's backward against an in-test central-difference oracle."""

    def test_matmul_grad_hand_value(self):
        # d/dA sum(A @ B) at A=[[1,1]], B=[[2],[5]] is [[2, 5]]
        with ad.using_dtype(np.float64):
            a = ad.Tensor([[1.0, 1.0]], requires_grad=True)
            b = ad.Tensor([[2.0], [5.0]], requires_grad=True)
            with ad.tape() as t:
                t.backward(ad.matmul(a, b).sum())
            np.testing.assert_allclose(a.grad, [[2.0, 5.0]])
            _, numeric = numeric_grad(lambda: ad.matmul(a, b).sum().item(), a)
            assert_grads_match(a.grad.reshape(-1), numeric, label="matmul dA")

    def test_sigmoid_grad_at_zero(self):
        # derivative of sigmoid at 0 is 0.25
        with ad.using_dtype(np.float64):
            x = ad.Tensor([[0.0]], requires_grad=True)
            with ad.tape() as t:
                t.backward(ad.sigmoid(x).sum())
            np.testing.assert_allclose(x.grad, [[0.25]], rtol=1e-12)
            _, numeric = numeric_grad(lambda: ad.sigmoid(x).sum().item(), x)
            assert_grads_match(x.grad.reshape(-1), numeric, label="sigmoid")

    def test_square_grad_hand_value(self):
        with ad.using_dtype(np.float64):
            x = ad.Tensor([[3.0]], requires_grad=True)
            with ad.tape() as t:
                t.backward((x * x).sum())
            np.testing.assert_allclose(x.grad, [[6.0]], rtol=1e-12)

    def test_log_floor_zeroes_clamped_gradient(self):
        with ad.using_dtype(np.float64):
            x = ad.Tensor([[0.0, 0.5]], requires_grad=True)
            with ad.tape() as t:
                t.backward(ad.log(x, floor=1e-12).sum())
            assert x.grad[0, 0] == 0.0
            np.testing.assert_allclose(x.grad[0, 1], 2.0, rtol=1e-12)

    def test_embedding_backward_accumulates_repeats(self):
        # two lookups of row 2 must deposit twice the gradient there
        with ad.using_dtype(np.float64):
            table = ad.Tensor(np.zeros((4, 3)), requires_grad=True)
            with ad.tape() as t:
                t.backward(ad.embedding_lookup(table, [2, 2, 0]).sum())
            expected = np.zeros((4, 3))
            expected[2] = 2.0
            expected[0] = 1.0
            np.testing.assert_allclose(table.grad, expected)

    @pytest.mark.parametrize("case", [
        "add", "add_row_bias", "add_scalar_tensor", "mul", "mul_gate",
        "matmul", "affine", "tanh", "sigmoid", "softmax1", "softmax0",
        "log", "transpose", "concat0", "concat1", "rows", "pick",
        "embedding", "scatter", "sum", "mean",
    ])
    def test_each_op_matches_finite_differences(self, case):
        rng = np.random.default_rng(hash(case) % (2 ** 32))
        with ad.using_dtype(np.float64):
            x = ad.Tensor(rng.uniform(-1.0, 1.0, size=(3, 4)), requires_grad=True)
            y = ad.Tensor(rng.uniform(-1.0, 1.0, size=(3, 4)), requires_grad=True)
            w = ad.Tensor(rng.uniform(-1.0, 1.0, size=(4, 2)), requires_grad=True)
            b = ad.Tensor(rng.uniform(-1.0, 1.0, size=(1, 2)), requires_grad=True)
            bias_row = ad.Tensor(rng.uniform(-1.0, 1.0, size=(1, 4)), requires_grad=True)
            gate = ad.Tensor(rng.uniform(0.2, 0.8, size=(1, 1)), requires_grad=True)
            table = ad.Tensor(rng.uniform(-1.0, 1.0, size=(5, 3)), requires_grad=True)
            weights = ad.Tensor(rng.uniform(0.1, 0.9, size=(1, 4)), requires_grad=True)
            mixer = ad.Tensor(rng.uniform(-1.0, 1.0, size=(3, 4)))  # constant
            lookup_mixer = ad.Tensor(rng.uniform(-1.0, 1.0, size=(4, 3)))
            scatter_mixer = ad.Tensor(rng.uniform(-1.0, 1.0, size=(1, 6)))

            builders = {
                "add": lambda: ((ad.add(x, y) * mixer).sum(), {"x": x, "y": y}),
                "add_row_bias": lambda: ((ad.add(x, bias_row) * mixer).sum(),
                                         {"x": x, "bias_row": bias_row}),
                "add_scalar_tensor": lambda: ((ad.add(x, gate) * mixer).sum(),
                                              {"x": x, "gate": gate}),
                "mul": lambda: ((ad.mul(x, y) * mixer).sum(), {"x": x, "y": y}),
                "mul_gate": lambda: ((ad.mul(x, gate) * mixer).sum(), {"x": x, "gate": gate}),
                "matmul": lambda: ((ad.matmul(x, w) * ad.Tensor(mixer.data[:, :2])).sum(),
                                   {"x": x, "w": w}),
                "affine": lambda: ((ad.affine(x, w, b) * ad.Tensor(mixer.data[:, :2])).sum(),
                                   {"x": x, "w": w, "b": b}),
                "tanh": lambda: ((ad.tanh(x) * mixer).sum(), {"x": x}),
                "sigmoid": lambda: ((ad.sigmoid(x) * mixer).sum(), {"x": x}),
                "softmax1": lambda: ((ad.softmax(x, axis=1) * mixer).sum(), {"x": x}),
                "softmax0": lambda: ((ad.softmax(x, axis=0) * mixer).sum(), {"x": x}),
                "log": lambda: ((ad.log(ad.sigmoid(x), floor=1e-12) * mixer).sum(), {"x": x}),
                "transpose": lambda: ((ad.transpose(x) * ad.Tensor(mixer.data.T)).sum(), {"x": x}),
                "concat0": lambda: ((ad.concat([x, y], axis=0)
                                     * ad.Tensor(np.vstack([mixer.data, mixer.data]))).sum(),
                                    {"x": x, "y": y}),
                "concat1": lambda: ((ad.concat([x, y], axis=1)
                                     * ad.Tensor(np.hstack([mixer.data, mixer.data]))).sum(),
                                    {"x": x, "y": y}),
                "rows": lambda: ((ad.rows(x, 1, 3) * ad.Tensor(mixer.data[1:3])).sum(), {"x": x}),
                "pick": lambda: (ad.pick(x, 2, 1), {"x": x}),
                "embedding": lambda: ((ad.embedding_lookup(table, [4, 0, 4, 2])
                                       * lookup_mixer).sum(),
                                      {"table": table}),
                "scatter": lambda: ((ad.scatter_sum(weights, [0, 2, 2, 5], 6)
                                     * scatter_mixer).sum(),
                                    {"weights": weights}),
                "sum": lambda: (x.sum(), {"x": x}),
                "mean": lambda: (x.mean(), {"x": x}),
            }
            # freeze any randomness inside the builder so fn() re-runs identically
            loss_tensor, params = builders[case]()
            del loss_tensor
            build = builders[case]
            check_gradients(lambda: build()[0], params)

    def test_full_chain_matches_finite_differences(self):
        # a small tanh-affine-softmax-log chain exercising op composition
        rng = np.random.default_rng(7)
        with ad.using_dtype(np.float64):
            x = ad.Tensor(rng.uniform(-1, 1, (1, 5)), requires_grad=True)
            w1 = ad.Tensor(rng.uniform(-1, 1, (5, 4)), requires_grad=True)
            b1 = ad.Tensor(rng.uniform(-1, 1, (1, 4)), requires_grad=True)
            w2 = ad.Tensor(rng.uniform(-1, 1, (4, 3)), requires_grad=True)
            b2 = ad.Tensor(rng.uniform(-1, 1, (1, 3)), requires_grad=True)

            def loss():
                hidden = ad.tanh(ad.affine(x, w1, b1))
                probs = ad.softmax(ad.affine(hidden, w2, b2), axis=1)
                return ad.mul(ad.log(ad.pick(probs, 0, 1), floor=1e-12), -1.0)

            check_gradients(loss, {"x": x, "w1": w1, "b1": b1, "w2": w2, "b2": b2})


class TestTapeSemantics:
    def test_ops_record_only_under_tape(self):
        x = ad.Tensor([[1.0]], requires_grad=True)
        out = ad.tanh(x)
        assert out.requires_grad is False  # tape-free inference records nothing
        with ad.tape() as t:
            tracked = ad.tanh(x)
            assert tracked.requires_grad is True
            assert len(t) == 1

    def test_constant_subgraphs_are_not_recorded(self):
        with ad.tape() as t:
            ad.tanh(ad.Tensor([[1.0]]))
            assert len(t) == 0

    def test_clear_releases_records(self):
        x = ad.Tensor([[1.0]], requires_grad=True)
        with ad.tape() as t:
            ad.tanh(x)
            assert len(t) == 1
            t.clear()
            assert len(t) == 0

    def test_backward_rejects_non_scalar_root(self):
        x = ad.Tensor([[1.0, 2.0]], requires_grad=True)
        with ad.tape() as t:
            y = ad.tanh(x)
            with pytest.raises(ValueError, match="scalar"):
                t.backward(y)

    def test_backward_rejects_unrecorded_root(self):
        with ad.tape() as t:
            const = ad.Tensor([[1.0]])
            with pytest.raises(ValueError):
                t.backward(const)

    def test_repeated_backward_accumulates(self):
        # two sweeps double every gradient
        x = ad.Tensor([[3.0]], requires_grad=True)
        with ad.tape() as t:
            y = (x * x).sum()
            t.backward(y)
            first = x.grad.copy()
            t.backward(y)
        np.testing.assert_allclose(x.grad, 2.0 * first)

    def test_independent_subgraphs_add_independently(self):
        x = ad.Tensor([[1.0]], requires_grad=True)
        y = ad.Tensor([[2.0]], requires_grad=True)
        with ad.tape() as t:
            loss = (ad.tanh(x) + ad.sigmoid(y)).sum()
            t.backward(loss)
        got = (x.grad.copy(), y.grad.copy())
        x.grad = y.grad = None
        with ad.tape() as t:
            t.backward(ad.tanh(x).sum())
        with ad.tape() as t:
            t.backward(ad.sigmoid(y).sum())
        np.testing.assert_allclose(got[0], x.grad)
        np.testing.assert_allclose(got[1], y.grad)

    def test_tapes_do_not_nest(self):
        with ad.tape():
            with pytest.raises(RuntimeError):
                with ad.tape():
                    pass

    def test_reachable_tensors_get_grads(self):
        x = ad.Tensor([[0.3]], requires_grad=True)
        with ad.tape() as t:
            middle = ad.tanh(x)
            loss = ad.sigmoid(middle).sum()
            t.backward(loss)
        assert middle.grad is not None and x.grad is not None


class TestDeterminism:
    def test_same_seed_same_forward_and_grads(self):
        def run():
            rng = np.random.default_rng(11)
            w = ad.Tensor(rng.uniform(-0.1, 0.1, (4, 4)), requires_grad=True)
            x = ad.Tensor(rng.uniform(-1, 1, (1, 4)))
            with ad.tape() as t:
                loss = ad.softmax(ad.matmul(ad.tanh(ad.matmul(x, w)), w), axis=1).sum()
                t.backward(loss)
            return loss.item(), w.grad.copy()

        loss_a, grad_a = run()
        loss_b, grad_b = run()
        assert loss_a == loss_b  # bit-identical, not merely close
        assert np.array_equal(grad_a, grad_b)


class TestAdam:
    def test_first_step_moves_by_about_lr(self):
        # bias-corrected first step: -lr * 1/(1 + eps), about -0.1 at lr 0.1
        p = ad.Tensor([[1.0]], requires_grad=True)
        opt = ad.Adam({"p": p}, lr=0.1)
        p.grad = np.ones((1, 1), dtype=np.float32)
        opt.step()
        np.testing.assert_allclose(p.data, [[0.9]], atol=1e-6)
        assert opt.step_count == 1

    def test_zero_gradient_leaves_parameter_unchanged(self):
        p = ad.Tensor([[1.5]], requires_grad=True)
        opt = ad.Adam({"p": p}, lr=0.1)
        p.grad = np.zeros((1, 1), dtype=np.float32)
        opt.step()
        np.testing.assert_allclose(p.data, [[1.5]])

    def test_missing_gradient_names_parameter(self):
        p = ad.Tensor([[1.0]], requires_grad=True)
        opt = ad.Adam({"weird_name": p}, lr=0.1)
        with pytest.raises(ValueError, match="weird_name"):
            opt.step()

    def test_zero_grad_resets_buffers(self):
        p = ad.Tensor([[1.0]], requires_grad=True)
        opt = ad.Adam({"p": p})
        p.grad = np.ones((1, 1), dtype=np.float32)
        opt.zero_grad()
        assert p.grad is None

    def test_descends_convex_quadratic(self):
        # minimize (p - 3)^2; loss after 300 steps far below start
        target = 3.0
        p = ad.Tensor([[0.0]], requires_grad=True)
        opt = ad.Adam({"p": p}, lr=0.05)
        losses = []
        for _ in range(300):
            with ad.tape() as t:
                diff = p - target
                loss = (diff * diff).sum()
                t.backward(loss)
            losses.append(loss.item())
            opt.step()
            opt.zero_grad()
        assert losses[-1] < 1e-3 < losses[0]

    def test_lr_change_takes_effect(self):
        p = ad.Tensor([[1.0]], requires_grad=True)
        opt = ad.Adam({"p": p}, lr=0.0)
        p.grad = np.ones((1, 1), dtype=np.float32)
        opt.step()
        np.testing.assert_allclose(p.data, [[1.0]])  # lr 0: frozen
        opt.lr = 0.1
        p.grad = np.ones((1, 1), dtype=np.float32)
        opt.step()
        assert p.data[0, 0] < 1.0


class TestRandomizedProperties:
    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 30))
            logits = ad.Tensor(rng.normal(0, 5, size=(1, n)))
            total = ad.softmax(logits, axis=1).data.sum()
            assert abs(total - 1.0) <= 1e-6

    def test_mul_add_grads_random_shapes(self):
        rng = np.random.default_rng(5)
        for trial in range(5):
            rows_n = int(rng.integers(1, 4))
            cols = int(rng.integers(1, 5))
            with ad.using_dtype(np.float64):
                x = ad.Tensor(rng.uniform(-1, 1, (rows_n, cols)), requires_grad=True)
                y = ad.Tensor(rng.uniform(-1, 1, (rows_n, cols)), requires_grad=True)
                weights = ad.Tensor(rng.uniform(-1, 1, (rows_n, cols)))

                def loss():
                    return ((x + y) * ad.tanh(x * y) * weights).sum()

                check_gradients(loss, {"x": x, "y": y})
