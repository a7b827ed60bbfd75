"""Central finite-difference gradient oracle shared by the gradient tests."""

import numpy as np

from satformer import autodiff as ad


def fd_compare(f, tensors, h=1e-5, coords=None, rng=None, rel_tol=1e-4, abs_floor=1e-7, details=False):
    """Compare analytic gradients of scalar ``f()`` w.r.t. ``tensors`` against central differences.

    ``coords`` limits the check to that many randomly chosen entries per tensor.
    Returns the worst relative error seen, where the error is
    ``|a - n| / max(|a|, |n|, abs_floor)``, counted as zero when ``|a - n|``
    is below ``abs_floor``.  With ``details`` also returns the raw relative
    error over entries whose gradient magnitude exceeds ``abs_floor`` and how
    many such entries there were.
    """
    for t in tensors:
        t.grad = None
        t.requires_grad = True
    with ad.Tape() as tape:
        loss = f()
    tape.backward(loss)
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]
    worst = raw = 0.0
    significant = 0
    rng = rng or np.random.default_rng(0)
    for t, g in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size) if coords is None else rng.choice(flat.size, min(coords, flat.size), replace=False)
        for i in idx:
            old = flat[i]
            with ad.no_tape():
                flat[i] = old + h
                up = f().item()
                flat[i] = old - h
                down = f().item()
            flat[i] = old
            num = (up - down) / (2 * h)
            a = g.reshape(-1)[i]
            err = abs(a - num) / max(abs(a), abs(num), abs_floor)
            if max(abs(a), abs(num)) > abs_floor:
                significant += 1
                raw = max(raw, abs(a - num) / max(abs(a), abs(num)))
            if abs(a - num) < abs_floor:
                err = 0.0
            worst = max(worst, err)
    return (worst, raw, significant) if details else worst
