import numpy as np
import pytest

from lingrasp import tensor as tt
from lingrasp.tensor import Tensor

from conftest import fd_gradcheck


def naive_conv2d(x, w, bias, stride, padding):
    """Six-loop reference convolution."""
    b, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((b, cout, ho, wo))
    for bi in range(b):
        for co in range(cout):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ci in range(cin):
                        for u in range(kh):
                            for v in range(kw):
                                acc += xp[bi, ci, i * stride + u, j * stride + v] * w[co, ci, u, v]
                    out[bi, co, i, j] = acc + (bias[co] if bias is not None else 0.0)
    return out


class TestConv2d:
    def test_identity_1x1(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.normal(size=(2, 3, 5, 5)))
        w = np.zeros((3, 3, 1, 1))
        for c in range(3):
            w[c, c, 0, 0] = 1.0
        out = tt.conv2d(x, Tensor(w))
        assert np.array_equal(out.data, x.data)

    def test_ones_3x3_constant_input(self):
        out = tt.conv2d(Tensor(np.ones((1, 1, 6, 6))), Tensor(np.ones((1, 1, 3, 3))), padding=1)
        assert out.data[0, 0, 2:4, 2:4].tolist() == [[9.0, 9.0], [9.0, 9.0]]

    @pytest.mark.parametrize("stride,padding,k", [(1, 1, 3), (2, 1, 3), (1, 0, 1)])
    def test_matches_naive_oracle(self, stride, padding, k):
        rng = np.random.default_rng(7 + stride + k)
        x = rng.normal(size=(2, 3, 6, 7))
        w = rng.normal(size=(4, 3, k, k))
        b = rng.normal(size=4)
        got = tt.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, padding=padding)
        want = naive_conv2d(x, w, b, stride, padding)
        assert np.abs(got.data - want).max() <= 1e-12

    def test_linearity(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(1, 2, 5, 5))
        y = rng.normal(size=(1, 2, 5, 5))
        w = Tensor(rng.normal(size=(3, 2, 3, 3)))
        a, b = 1.7, -0.4
        lhs = tt.conv2d(Tensor(a * x + b * y), w, padding=1).data
        rhs = a * tt.conv2d(Tensor(x), w, padding=1).data + b * tt.conv2d(Tensor(y), w, padding=1).data
        assert np.abs(lhs - rhs).max() <= 1e-10

    def test_channel_mismatch(self):
        with pytest.raises(ValueError, match="channel"):
            tt.conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))))

    def test_bad_stride(self):
        with pytest.raises(ValueError, match="stride"):
            tt.conv2d(Tensor(np.zeros((1, 1, 4, 4))), Tensor(np.zeros((1, 1, 3, 3))), stride=0)

    def test_bad_kernel_size(self):
        with pytest.raises(ValueError, match="kernel"):
            tt.conv2d(Tensor(np.zeros((1, 1, 8, 8))), Tensor(np.zeros((1, 1, 5, 5))))


class TestBilinearUpsample:
    def test_constant_fixed_point(self):
        out = tt.bilinear_upsample(Tensor(np.full((1, 2, 3, 4), 5.0)), 2)
        assert out.shape == (1, 2, 6, 8)
        assert np.allclose(out.data, 5.0)

    def test_scale_one_identity(self):
        x = Tensor(np.random.default_rng(1).normal(size=(1, 2, 3, 3)))
        assert np.array_equal(tt.bilinear_upsample(x, 1).data, x.data)

    def test_matches_scalar_oracle(self):
        x = np.array([[0.0, 1.0], [2.0, 3.0]])
        got = tt.bilinear_upsample(Tensor(x[None, None]), 2).data[0, 0]

        def sample(src, i):
            # independent per-pixel half-pixel-centers interpolation
            s = min(max((i + 0.5) / 2.0 - 0.5, 0.0), src.shape[0] - 1.0)
            lo = int(np.floor(s))
            hi = min(lo + 1, src.shape[0] - 1)
            return lo, hi, s - lo

        want = np.zeros((4, 4))
        for i in range(4):
            for j in range(4):
                r0, r1, fr = sample(x, i)
                c0, c1, fc = sample(x.T, j)
                top = x[r0, c0] * (1 - fc) + x[r0, c1] * fc
                bot = x[r1, c0] * (1 - fc) + x[r1, c1] * fc
                want[i, j] = top * (1 - fr) + bot * fr
        assert np.abs(got - want).max() <= 1e-12

    def test_bad_scale(self):
        with pytest.raises(ValueError, match="scale"):
            tt.bilinear_upsample(Tensor(np.zeros((1, 1, 2, 2))), 0)


class TestBackward:
    def test_sum_of_squares(self):
        x = Tensor(np.random.default_rng(0).normal(size=(3, 4)), requires_grad=True)
        (x * x).sum().backward()
        assert np.allclose(x.grad, 2.0 * x.data)

    def test_non_scalar_rejected(self):
        x = Tensor(np.zeros((2, 2)), requires_grad=True)
        with pytest.raises(ValueError, match="scalar"):
            (x * 2.0).backward()

    def test_disconnected_leaf_zero_grad(self):
        x = Tensor(np.ones(3), requires_grad=True)
        y = Tensor(np.ones(3), requires_grad=True)
        (y * y).sum().backward()
        assert np.array_equal(x.grad, np.zeros(3))

    def test_repeat_after_reset_identical(self):
        x = Tensor(np.random.default_rng(2).normal(size=(4,)), requires_grad=True)

        def go():
            x.zero_grad()
            (tt.silu(x) * x).mean().backward()
            return x.grad.copy()

        assert np.array_equal(go(), go())

    def test_grad_accumulates_without_reset(self):
        x = Tensor(np.ones(2), requires_grad=True)
        (x * 3.0).sum().backward()
        (x * 3.0).sum().backward()
        assert np.allclose(x.grad, 6.0)


class TestPurity:
    @pytest.mark.parametrize("op", ["conv", "upsample", "softmax", "scan_like"])
    def test_bit_identical_repeat(self, op):
        rng = np.random.default_rng(5)
        if op == "conv":
            x = Tensor(rng.normal(size=(1, 2, 6, 6)))
            w = Tensor(rng.normal(size=(2, 2, 3, 3)))
            run = lambda: tt.conv2d(x, w, padding=1).data
        elif op == "upsample":
            x = Tensor(rng.normal(size=(1, 2, 4, 4)))
            run = lambda: tt.bilinear_upsample(x, 2).data
        elif op == "softmax":
            x = Tensor(rng.normal(size=(5, 7)))
            run = lambda: tt.softmax(x).data
        else:
            x = Tensor(rng.normal(size=(3, 4)))
            run = lambda: tt.layer_norm(x, Tensor(np.ones(4)), Tensor(np.zeros(4))).data
        assert np.array_equal(run(), run())

    def test_inputs_not_mutated(self):
        x = Tensor(np.random.default_rng(6).normal(size=(2, 3)))
        before = x.data.copy()
        tt.silu(x)
        tt.softmax(x)
        x + x
        x * 2.0
        assert np.array_equal(x.data, before)


def _gradcheck_cases():
    rng = np.random.default_rng(100)
    mask23 = Tensor(rng.normal(size=(2, 3)))
    mask_conv = Tensor(rng.normal(size=(2, 4, 5, 5)))
    mask_up = Tensor(rng.normal(size=(1, 2, 6, 6)))

    def case_add(a, b):
        return ((a + b) * mask23).sum()

    def case_mul(a, b):
        return ((a * b) * mask23).sum()

    def case_matmul(a, b):
        return (tt.matmul(a, tt.transpose(b, (1, 0))) * 1.3).sum()

    def case_conv(a, b):
        return (tt.conv2d(a, b, stride=1, padding=1) * mask_conv).sum()

    def case_upsample(a, b):
        return ((tt.bilinear_upsample(a, 2) + 0.0 * b.sum()) * mask_up).sum()

    def case_mean(a, b):
        return (a * b).mean(axis=0).sum()

    def case_silu(a, b):
        return (tt.silu(a) * b).sum()

    def case_sigmoid(a, b):
        return (tt.sigmoid(a) * b).sum()

    def case_tanh(a, b):
        return (tt.tanh(a) * b).sum()

    def case_softmax(a, b):
        return (tt.softmax(a) * b).sum()

    def case_layernorm(a, b):
        return (tt.layer_norm(a, Tensor(np.ones(3)), Tensor(np.zeros(3))) * b).sum()

    def case_smooth_l1(a, b):
        return tt.smooth_l1(a, b).mean()

    def case_concat_narrow(a, b):
        return (tt.concat([tt.narrow(a, 1, 0, 1) * 2.0, tt.narrow(a, 1, 1, 2)], 1) * b).sum()

    def case_broadcast(a, b):
        row = tt.narrow(a, 0, 0, 1)
        return (tt.broadcast_to(row, (2, 3)) * b).sum()

    return {
        "add": ((2, 3), (2, 3), case_add),
        "mul": ((2, 3), (2, 3), case_mul),
        "matmul": ((2, 3), (2, 3), case_matmul),
        "conv2d": ((2, 3, 5, 5), (4, 3, 3, 3), case_conv),
        "bilinear_upsample": ((1, 2, 3, 3), (1,), case_upsample),
        "mean": ((2, 3), (2, 3), case_mean),
        "silu": ((2, 3), (2, 3), case_silu),
        "sigmoid": ((2, 3), (2, 3), case_sigmoid),
        "tanh": ((2, 3), (2, 3), case_tanh),
        "softmax": ((2, 3), (2, 3), case_softmax),
        "layer_norm": ((2, 3), (2, 3), case_layernorm),
        "smooth_l1": ((2, 3), (2, 3), case_smooth_l1),
        "concat_narrow": ((2, 3), (2, 3), case_concat_narrow),
        "broadcast_to": ((2, 3), (2, 3), case_broadcast),
    }


@pytest.mark.parametrize("name", sorted(_gradcheck_cases()))
def test_gradcheck_per_op(name):
    shape_a, shape_b, case = _gradcheck_cases()[name]
    for trial in range(10):
        rng = np.random.default_rng(1000 * trial + hash(name) % 1000)
        a = Tensor(rng.normal(size=shape_a), requires_grad=True)
        b = Tensor(rng.normal(size=shape_b), requires_grad=True)
        fd_gradcheck(lambda: case(a, b), [a, b], seed=trial)


def test_softmax_rows_sum_to_one():
    x = Tensor(np.random.default_rng(8).normal(size=(6, 9)) * 3)
    rows = tt.softmax(x).data.sum(axis=-1)
    assert np.abs(rows - 1.0).max() <= 1e-12
