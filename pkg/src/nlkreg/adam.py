"""Minibatch Adam with a post-step projection hook and a stagnation stop."""

from dataclasses import dataclass

import numpy as np

from .exceptions import DivergenceError


@dataclass(frozen=True)
class AdamParams:
    lr: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 100
    max_epochs: int = 500
    stagnation_rtol: float = 1e-4
    stagnation_window: int = 10


def adam_minimize(step_fn, x0, n_samples, params, rng, projection=None):
    """Run minibatch Adam and return (x, epoch_loss_trace).

    ``step_fn(x, idx)`` must return the batch loss and its gradient for the
    sample indices ``idx``. Samples are reshuffled each epoch with ``rng``.
    The projection hook is applied after every parameter update. Stops at
    ``max_epochs`` or once the running minimum of the epoch-mean loss has
    improved by less than ``stagnation_rtol`` (relative) over the last
    ``stagnation_window`` epochs; the running minimum makes the stop robust
    to the optimizer's transient upticks.

    Raises DivergenceError on a non-finite loss or gradient.
    """
    x = np.array(x0, dtype=float)
    mom = np.zeros_like(x)
    vel = np.zeros_like(x)
    t = 0
    trace = []
    best_outside_window = np.inf
    for epoch in range(params.max_epochs):
        order = rng.permutation(n_samples)
        epoch_loss = 0.0
        for lo in range(0, n_samples, params.batch_size):
            idx = order[lo:lo + params.batch_size]
            loss, grad = step_fn(x, idx)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise DivergenceError(
                    f"non-finite loss/gradient at epoch {epoch}, step {t}: "
                    f"loss={loss!r}")
            epoch_loss += loss * len(idx)
            t += 1
            mom = params.beta1 * mom + (1.0 - params.beta1) * grad
            vel = params.beta2 * vel + (1.0 - params.beta2) * grad * grad
            mhat = mom / (1.0 - params.beta1**t)
            vhat = vel / (1.0 - params.beta2**t)
            x = x - params.lr * mhat / (np.sqrt(vhat) + params.eps)
            if projection is not None:
                x = projection(x)
        trace.append(epoch_loss / n_samples)
        w = params.stagnation_window
        if len(trace) > w:
            best_outside_window = min(best_outside_window, trace[-1 - w])
            recent = min(trace[-w:])
            if (best_outside_window - recent
                    < params.stagnation_rtol * abs(best_outside_window)):
                break
    return x, trace
