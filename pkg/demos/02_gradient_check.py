"""
Checking backpropagation through time
=====================================

Hand-written gradients are compared with central finite differences. The
differences are taken on an extended-precision copy of the loss so that
rounding does not swamp tiny gradient entries.
"""

from pvtgnn.gradients import backward, gradient_check, random_problem
from pvtgnn.model import ModelDims

dims = ModelDims(4, 1, 4, 6)

# a random problem: parameters with non-zero biases, a batch of windows
spec, params, batch, _ = random_problem(seed=5, dims=dims, window=6, batch_size=4)
loss, grads = backward(batch, spec, params)
print("loss", loss)
for name, g in grads.items():
    print(f"{name:6s} {str(g.shape):10s} |g|max = {abs(g).max():.3e}")

# the full check: every parameter coordinate, relative error with a 1e-8 floor
for seed in (1, 2):
    report = gradient_check(seed, dims, tol=1e-4, window=6, batch_size=4)
    print(report.to_dict())
