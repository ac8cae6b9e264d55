"""Central finite-difference checks for analytic gradients.

Used only by the test suite; kept in the package so the tolerances and the
perturbation scheme live next to the layers they validate.
"""

import numpy as np

STEP = 1e-5
TOL = 1e-4
# Absolute slack for entries whose gradient sits at the finite-difference
# noise floor; central differences cannot resolve below roughly
# eps * |loss| / step no matter how the step is chosen.
ATOL = 1e-6
# A step that straddles a ReLU or abs kink makes the central difference
# wrong even when the analytic gradient is exact. Retrying a failed entry
# with shrinking steps separates the two cases: kink error vanishes as the
# step drops below the kink distance, a real gradient bug stays put.
RETRY_STEPS = (1e-6, 1e-7)


def rel_error(a, b):
    denom = max(abs(a), abs(b)) + 1e-8
    return abs(a - b) / denom


def _fd_at(set_value, loss_fn, orig, step):
    set_value(orig + step)
    lp = loss_fn()
    set_value(orig - step)
    lm = loss_fn()
    set_value(orig)
    return (lp - lm) / (2.0 * step)


def _entry_ok(analytic, fd, tol):
    return abs(analytic - fd) <= ATOL + tol * max(abs(analytic), abs(fd))


def _check_entry(set_value, loss_fn, orig, analytic, step, tol):
    """Returns (ok, err, fd) for the accepted step, shrinking it on failure."""
    fd = _fd_at(set_value, loss_fn, orig, step)
    for retry in RETRY_STEPS:
        if _entry_ok(analytic, fd, tol):
            break
        fd = _fd_at(set_value, loss_fn, orig, retry)
    return _entry_ok(analytic, fd, tol), rel_error(analytic, fd), fd


def check_param_grads(module, loss_fn, max_entries=30, step=STEP, tol=TOL, rng=None):
    """Compare analytic parameter grads against central differences.

    loss_fn() runs a full forward+backward with grads accumulated into the
    module and returns the scalar loss. A subset of entries per parameter is
    probed when the tensor is large. Returns the worst relative error seen.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    module.zero_grad()
    loss_fn()
    analytic = {k: p.grad.copy() for k, p in module.named_params()}
    worst = 0.0
    for name, p in module.named_params():
        flat = p.value.reshape(-1)
        n = flat.size
        idx = np.arange(n) if n <= max_entries else rng.choice(n, size=max_entries, replace=False)
        for i in idx:
            orig = flat[i]

            def set_value(v, flat=flat, i=i):
                flat[i] = v
                module.zero_grad()

            ok, err, fd = _check_entry(set_value, loss_fn, orig,
                                       analytic[name].reshape(-1)[i], step, tol)
            if err > worst:
                worst = err
            if not ok:
                raise AssertionError(
                    f"grad mismatch at {name}[{i}]: analytic="
                    f"{analytic[name].reshape(-1)[i]:.10g} fd={fd:.10g} rel={err:.3g}"
                )
    module.zero_grad()
    return worst


def check_input_grad(forward_backward, x, max_entries=30, step=STEP, tol=TOL, rng=None):
    """Check dloss/dx for a callable returning (loss, dx) at the given x."""
    if rng is None:
        rng = np.random.default_rng(0)
    _, dx = forward_backward(x)
    dx = np.asarray(dx)
    flat = x.reshape(-1)
    n = flat.size
    idx = np.arange(n) if n <= max_entries else rng.choice(n, size=max_entries, replace=False)
    worst = 0.0
    for i in idx:
        orig = flat[i]

        def set_value(v, flat=flat, i=i):
            flat[i] = v

        def scalar_loss():
            loss, _ = forward_backward(x)
            return loss

        ok, err, fd = _check_entry(set_value, scalar_loss, orig,
                                   dx.reshape(-1)[i], step, tol)
        worst = max(worst, err)
        if not ok:
            raise AssertionError(
                f"input grad mismatch at flat index {i}: analytic="
                f"{dx.reshape(-1)[i]:.10g} fd={fd:.10g} rel={err:.3g}"
            )
    return worst
