"""Central-difference gradient oracle shared by the gradient tests.

The checked function is re-evaluated from scratch for every probe, so the
oracle never touches the backward pass it is validating. Effective step
sizes are measured after float32 parameter rounding, which keeps the
comparison sharp even though parameters live on the float32 grid.
"""

import numpy as np

from crossplay.autodiff import Tensor


def fd_gradients(fn, tensors, step=1e-3):
    """Finite-difference d fn / d t for each tensor in `tensors`.

    `fn` takes no arguments, reads the tensors, and returns a float.
    """
    grads = []
    for t in tensors:
        g = np.zeros(t.data.shape, dtype=np.float64)
        for i in range(t.data.size):
            orig = t.data[i]
            t.data[i] = np.float32(float(orig) + step)
            hi_x = float(t.data[i])
            hi = fn()
            t.data[i] = np.float32(float(orig) - step)
            lo_x = float(t.data[i])
            lo = fn()
            t.data[i] = orig
            g[i] = (hi - lo) / (hi_x - lo_x)
        grads.append(g.reshape(t.shape))
    return grads


def max_rel_err(analytic, numeric, floor=1e-8):
    """Worst per-tensor relative gradient error, measured in L2 norm
    (the `scipy.optimize.check_grad` convention)."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        a = np.asarray(a, dtype=np.float64).reshape(-1)
        n = np.asarray(n, dtype=np.float64).reshape(-1)
        denom = max(np.linalg.norm(a), np.linalg.norm(n), floor)
        worst = max(worst, float(np.linalg.norm(a - n) / denom))
    return worst


def assert_gradients_match(fn, loss_fn, tensors, tol=1e-4, step=1e-3):
    """loss_fn builds a fresh graph, returns (graph, root). fn is the
    scalar evaluation used by the oracle (usually the same builder)."""
    g, root = loss_fn()
    g.backward(root)
    analytic = [g.grad(t) for t in tensors]
    numeric = fd_gradients(fn, tensors, step=step)
    err = max_rel_err(analytic, numeric)
    assert err < tol, f"gradient mismatch: max rel err {err:.3e} >= {tol}"
    return err
