"""Adaptive-moment (Adam) optimizer over Param objects."""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, named_params, lr=1e-5, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.named_params = list(named_params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.data, dtype=np.float64) for _, p in self.named_params]
        self.v = [np.zeros_like(p.data, dtype=np.float64) for _, p in self.named_params]

    def zero_grad(self):
        for _, p in self.named_params:
            p.grad[...] = 0

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for (name, p), m, v in zip(self.named_params, self.m, self.v):
            g = p.grad.astype(np.float64)
            if self.weight_decay:
                g = g + self.weight_decay * p.data.astype(np.float64)
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            update = self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.data -= update.astype(p.data.dtype)
