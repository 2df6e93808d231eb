"""Adam updates and the triangular cyclic learning-rate schedule."""

from dataclasses import dataclass

import numpy as np


@dataclass
class CyclicSchedule:
    """Triangle wave between min_rate and max_rate with the given period.

    Iteration 0 sits at min_rate, cycle/2 at max_rate, and a full cycle
    returns to min_rate.
    """

    min_rate: float = 1e-6
    max_rate: float = 5e-4
    cycle: int = 20000

    def rate(self, iteration):
        return cyclic_rate(iteration, self.min_rate, self.max_rate, self.cycle)


def cyclic_rate(iteration, min_rate, max_rate, cycle):
    half = cycle / 2.0
    pos = iteration % cycle
    frac = pos / half if pos <= half else (cycle - pos) / half
    return min_rate + (max_rate - min_rate) * frac


def adam_step(value, grad, m, v, t, rate,
              beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, in place on value/m/v.  t is 1-based."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * np.square(grad)
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    value -= rate * mhat / (np.sqrt(vhat) + eps)


class Adam:
    """Adam over a fixed list of tensors with per-tensor moment slots."""

    def __init__(self, tensors, beta1=0.9, beta2=0.999, eps=1e-8):
        self.tensors = list(tensors)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.moments = [(np.zeros_like(p.value), np.zeros_like(p.value))
                        for p in self.tensors]

    def step(self, rate):
        self.t += 1
        for p, (m, v) in zip(self.tensors, self.moments):
            adam_step(p.value, p.grad, m, v, self.t, rate,
                      self.beta1, self.beta2, self.eps)

    def zero_grad(self):
        for p in self.tensors:
            p.zero_grad()
