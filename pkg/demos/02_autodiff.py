"""The tensor engine: taped forward passes, backward, gradient checking."""
import numpy as np

from pepco import autodiff as ad
from pepco.autodiff import Tape, Tensor

rng = np.random.default_rng(0)

# forward + backward through a small expression
w = Tensor(rng.normal(size=(3, 2)), requires_grad=True, name="w")
x = Tensor(rng.normal(size=(4, 3)))
with Tape() as tape:
    h = ad.leaky_relu(ad.matmul(x, w))
    loss = ad.mse_loss(ad.mean_pool(h, axis=1), Tensor(np.zeros(4)))
    tape.backward(loss)
print("loss:", float(loss.data))
print("dL/dw:\n", w.grad)

# the gradient checker compares backward against central differences
report = ad.grad_check(lambda t: ad.cross_entropy_loss(t, 1),
                       rng.normal(size=(5,)))
print(f"\ngrad_check on softmax cross entropy: max rel err "
      f"{report.max_rel_error:.2e} at index {report.worst_index}")

# replays are bit-identical
def run():
    p = Tensor(np.linspace(-1, 1, 6).reshape(2, 3), requires_grad=True)
    with Tape() as tp:
        out = ad.mean_pool(ad.mean_pool(ad.softmax(p, axis=-1), 0), 0)
        tp.backward(out)
    return p.grad.tobytes()

assert run() == run()
print("\nidentical inputs give bit-identical gradients")
