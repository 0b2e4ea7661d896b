#!/usr/bin/env python3
"""A tour of the tape-based autodiff core.

Builds a few tensors, records a computation on the tape, backpropagates,
cross-checks one gradient against central finite differences, and then
fits a tiny least-squares problem with Adam.
"""

import numpy as np

import topicsum.autodiff as ad

rng = np.random.default_rng(0)

# ---------------------------------------------------------------------------
# 1. tensors and the tape

print("== recording a computation ==")
x = ad.Tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
w = ad.Tensor([[0.5], [-0.25]], requires_grad=True)

with ad.tape() as t:
    y = ad.tanh(ad.matmul(x, w))   # [2, 1]
    loss = y.sum()
    t.backward(loss)

print("y          =", y.data.ravel())
print("dloss/dx   =", x.grad.ravel())
print("dloss/dw   =", w.grad.ravel())

# outside a tape the same ops run forward-only; nothing is recorded
x.zero_grad()
w.zero_grad()
untaped = ad.tanh(ad.matmul(x, w)).sum()
print("forward-only value matches:", np.isclose(untaped.item(), loss.item()))

# ---------------------------------------------------------------------------
# 2. spot-checking a gradient numerically

print()
print("== central differences on one weight entry ==")
h = 1e-3
with ad.using_dtype(np.float64):
    x64 = ad.Tensor(rng.uniform(-1.0, 1.0, size=(4, 3)), requires_grad=True)
    w64 = ad.Tensor(rng.uniform(-1.0, 1.0, size=(3, 2)), requires_grad=True)
    mixer = ad.Tensor(rng.uniform(-1.0, 1.0, size=(4, 2)))  # fixed weights

    def forward():
        return (ad.softmax(ad.matmul(x64, w64), axis=1) * mixer).sum().item()

    with ad.tape() as t:
        t.backward((ad.softmax(ad.matmul(x64, w64), axis=1) * mixer).sum())
    analytic = w64.grad[1, 0]
    w64.data[1, 0] += h
    up = forward()
    w64.data[1, 0] -= 2 * h
    down = forward()
    w64.data[1, 0] += h
    numeric = (up - down) / (2 * h)

print(f"analytic  = {analytic:+.8f}")
print(f"numeric   = {numeric:+.8f}")
print(f"rel error = {abs(analytic - numeric) / max(abs(analytic), abs(numeric)):.2e}")

# ---------------------------------------------------------------------------
# 3. fitting a line with Adam

print()
print("== least squares with Adam ==")
true_w = np.array([[2.0], [-1.0]])
inputs = rng.normal(size=(64, 2))
targets = inputs @ true_w + 0.01 * rng.normal(size=(64, 1))

inputs_t = ad.Tensor(inputs)
targets_t = ad.Tensor(targets)
weights = ad.Tensor(np.zeros((2, 1)), requires_grad=True)
optimizer = ad.Adam({"weights": weights}, lr=0.1)

for step in range(1, 201):
    with ad.tape() as t:
        residual = ad.matmul(inputs_t, weights) - targets_t
        loss = (residual * residual).mean()
        t.backward(loss)
    optimizer.step()
    optimizer.zero_grad()
    if step % 50 == 0:
        print(f"step {step:3d}  loss = {loss.item():.6f}  "
              f"weights = {weights.data.ravel().round(3)}")

print("recovered:", weights.data.ravel().round(3), " true:", true_w.ravel())
