"""Adam for the saddle-point problem: descent on weights, ascent on the mask."""

from dataclasses import dataclass

import numpy as np

from ..errors import NumericError, StructuralError
from ..loss import evaluate
from ..mask import GROUPS


@dataclass
class AdamState:
    """Moments for every trainable scalar plus the shared step count."""

    m_w: list
    v_w: list
    m_lam: dict
    v_lam: dict
    lr_w: float = 1e-3
    lr_lam: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_rate: float = 1.0
    decay_steps: int = 1000
    step: int = 0
    plain_mask: bool = False

    @classmethod
    def create(cls, net, mask=None, **hyper):
        m_w = [np.zeros_like(a) for a in net.arrays()]
        v_w = [np.zeros_like(a) for a in net.arrays()]
        m_lam, v_lam = {}, {}
        for g in GROUPS:
            n = len(mask.group(g)) if mask is not None else 0
            m_lam[g] = np.zeros(n)
            v_lam[g] = np.zeros(n)
        return cls(m_w, v_w, m_lam, v_lam, **hyper)

    def rate(self, base):
        """Learning rate at the current step, with optional exponential decay."""
        if self.decay_rate == 1.0:
            return base
        return base * self.decay_rate ** (self.step / self.decay_steps)

    def check(self, net, mask):
        shapes = [a.shape for a in net.arrays()]
        if shapes != [m.shape for m in self.m_w]:
            raise StructuralError("optimizer state does not match the network shapes")
        if mask is not None:
            for g in GROUPS:
                if self.m_lam[g].shape != mask.group(g).shape:
                    raise StructuralError(f"optimizer state does not match mask group {g}")


def _moment_update(param, grad, m, v, lr, state):
    """One in-place Adam update of ``param`` along ``-grad``."""
    b1, b2 = state.beta1, state.beta2
    m *= b1
    m += (1.0 - b1) * grad
    v *= b2
    v += (1.0 - b2) * (grad * grad)
    m_hat = m / (1.0 - b1**state.step)
    v_hat = v / (1.0 - b2**state.step)
    param -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


def _check_grads(param_grads, mask_grads, breakdown):
    for k, g in enumerate(param_grads):
        if not np.all(np.isfinite(g)):
            raise NumericError(
                f"non-finite gradient in parameter array {k}; loss {breakdown.as_dict()}"
            )
    for g, grad in (mask_grads or {}).items():
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite gradient in mask group {g}; loss {breakdown.as_dict()}")


def adam_step(net, mask, points, problem, state, mode="sa", c_weight=1.0, tape=None):
    """One full-batch step; updates ``net``, ``mask`` and ``state`` in place.

    Network weights follow Adam along the negative gradient. Trainable mask
    groups follow Adam along the positive gradient, implemented as descent
    on the sign-flipped gradient. With ``state.plain_mask`` the mask instead
    takes the raw step ``lambda += lr_lam * grad`` (no moments). Returns
    ``(net, mask, state, breakdown)`` where the breakdown is the loss
    before the update.
    """
    state.check(net, mask if mode == "sa" else None)
    train_mask = mode == "sa" and mask is not None and any(
        mask.trainable[g] and len(mask.group(g)) for g in GROUPS
    )
    ev = evaluate(net, mask, points, problem, mode, c_weight, params_grad=True,
                  mask_grad=train_mask, tape=tape)
    _check_grads(ev.param_grads, ev.mask_grads, ev.breakdown)

    state.step += 1
    lr_w = state.rate(state.lr_w)
    for param, grad, m, v in zip(net.arrays(), ev.param_grads, state.m_w, state.v_w):
        _moment_update(param, grad, m, v, lr_w, state)

    if train_mask:
        lr_lam = state.rate(state.lr_lam)
        for g in GROUPS:
            if not mask.trainable[g] or not len(mask.group(g)):
                continue
            lam = mask.group(g)
            grad = ev.mask_grads[g]
            if state.plain_mask:
                lam += lr_lam * grad
            else:
                _moment_update(lam, -grad, state.m_lam[g], state.v_lam[g], lr_lam, state)
    return net, mask, state, ev.breakdown
