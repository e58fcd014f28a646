#!/usr/bin/env python3
"""Tour of the reverse-mode autodiff core.

Every forward op records onto a tape; backward walks the tape in reverse
and accumulates gradients into Parameters. Running backward for two losses
in sequence gives the same gradients as one backward of their sum, which is
exactly how the equal-weight multi-task objective is realized.
"""

import numpy as np

from sentact import autodiff as ad

rng = np.random.default_rng(0)

# a tiny logistic regression: loss = CE(sigmoid-free logits @ W + b, gold)
W = ad.Parameter("W", rng.normal(scale=0.5, size=(4, 3)))
b = ad.Parameter("b", np.zeros(3))
x = ad.Tensor(rng.normal(size=(1, 4)))

tape = ad.Tape()
logits = ad.add(tape, ad.matmul(tape, x, W.value), b.value)
loss = ad.softmax_cross_entropy(tape, logits, gold=2)
print(f"forward: loss = {loss.data.item():.4f} over {len(tape)} taped ops")

ad.backward(tape, loss)
print(f"dW norm {np.linalg.norm(W.grad):.4f}, db = {np.round(b.grad, 4)}")

# gradients check out against central finite differences
def f(tape):
    logits = ad.add(tape, ad.matmul(tape, x, W.value), b.value)
    return ad.softmax_cross_entropy(tape, logits, gold=2)

err, name, coord = ad.grad_check(f, [W, b], eps=1e-3)
print(f"grad check: worst relative error {err:.2e} at {name}[{coord}]")

# two backwards accumulate: equal-weight multi-task in one line
W.zero_grad(); b.zero_grad()
tape = ad.Tape()
l1 = ad.softmax_cross_entropy(tape, ad.add(tape, ad.matmul(tape, x, W.value), b.value), 0)
l2 = ad.softmax_cross_entropy(tape, ad.add(tape, ad.matmul(tape, x, W.value), b.value), 1)
ad.backward(tape, l1)
ad.backward(tape, l2)
two_losses = W.grad.copy()

W.zero_grad(); b.zero_grad()
tape = ad.Tape()
l1 = ad.softmax_cross_entropy(tape, ad.add(tape, ad.matmul(tape, x, W.value), b.value), 0)
l2 = ad.softmax_cross_entropy(tape, ad.add(tape, ad.matmul(tape, x, W.value), b.value), 1)
ad.backward(tape, ad.add(tape, l1, l2))
summed = W.grad.copy()
print(f"two backwards equal one backward of the sum: "
      f"max diff {np.abs(two_losses - summed).max():.2e}")

# a few SGD steps on the original loss
for step in range(5):
    W.zero_grad(); b.zero_grad()
    tape = ad.Tape()
    ad.backward(tape, f(tape))
    ad.sgd_step([W, b], lr=0.5)
    print(f"step {step + 1}: loss {f(None).data.item():.4f}")
