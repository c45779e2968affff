"""
Recording computations on a tape and pulling gradients back
===========================================================

The package trains its models with a small reverse-mode engine: float64
tensors, a handful of primitives, and a tape that records every operation
so a single backward pass can accumulate gradients for all inputs.
"""

import numpy as np

from smoothmil import Tape, Tensor, check_gradient
from smoothmil.autodiff import matmul, reduce_sum, sigmoid, tanh

# A Tensor wraps a float64 array. Operations outside a tape context run
# eagerly and record nothing, so inference costs no memory.
x = Tensor([1.0, 2.0, 3.0])
print("tanh(x) =", tanh(x).data)

# Inside a `with Tape()` block every primitive appends a pull function.
# backward() walks the entries in reverse and returns a gradient map.
w = Tensor([0.5, -1.0, 2.0])
with Tape() as tape:
    y = reduce_sum(x * w + tanh(x))
grads = tape.backward(y)
print("dy/dx =", grads.wrt(x))   # w + tanh'(x)
print("dy/dw =", grads.wrt(w))   # x

# The same machinery handles matrix work. Gradients of sum(A @ B) with
# respect to A are the row sums of B laid out along A's rows.
A = Tensor([[1.0, 1.0]])
B = Tensor([[2.0], [5.0]])
with Tape() as tape:
    z = reduce_sum(matmul(A, B))
print("d sum(A@B) / dA =", tape.backward(z).wrt(A))

# check_gradient compares taped gradients against central finite
# differences; it is the same gate the test suite runs on the full model.
def composite(t: Tensor) -> Tensor:
    return reduce_sum(sigmoid(matmul(A, B) * t) + t * t)

err = check_gradient(composite, Tensor(np.array(0.7)))
print(f"finite-difference agreement: max rel err {err:.2e}")
