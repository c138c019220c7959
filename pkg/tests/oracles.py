"""Independent reference implementations used only by the tests.

Each oracle is written in the most literal way possible (explicit loops,
no shared helpers with the package) so that agreement is meaningful.
"""

from __future__ import annotations

import math

import numpy as np


def naive_conv2d(x, kernel, stride):
    """Cross-correlation with "same" zero padding, one output element at a time."""
    cin, h, w = x.shape
    cout, _, k, _ = kernel.shape
    ho = math.ceil(h / stride)
    wo = math.ceil(w / stride)
    pad_h = max((ho - 1) * stride + k - h, 0)
    pad_w = max((wo - 1) * stride + k - w, 0)
    top, left = pad_h // 2, pad_w // 2
    out = np.zeros((cout, ho, wo))
    for o in range(cout):
        for i in range(ho):
            for j in range(wo):
                acc = 0.0
                for c in range(cin):
                    for di in range(k):
                        r = i * stride + di - top
                        if r < 0 or r >= h:
                            continue
                        for dj in range(k):
                            q = j * stride + dj - left
                            if 0 <= q < w:
                                acc += x[c, r, q] * kernel[o, c, di, dj]
                out[o, i, j] = acc
    return out


def naive_resize(raw, size=64):
    h, w, c = raw.shape
    out = np.zeros((size, size, c))
    for i in range(size):
        for j in range(size):
            out[i, j] = raw[int(math.floor(i * h / size)), int(math.floor(j * w / size))]
    return out / 255.0


def naive_reservoir_step(w_in, w, state, u, alpha):
    d = len(state)
    new = [0.0] * d
    for i in range(d):
        a = 0.0
        for j in range(len(u)):
            a += w_in[i][j] * u[j]
        for j in range(d):
            a += w[i][j] * state[j]
        new[i] = (1.0 - alpha) * state[i] + alpha * math.tanh(a)
    return np.array(new)


class ReferenceESN:
    """Textbook leaky ESN with an independently seeded numpy Generator.

    Uses uniform weights, Bernoulli sparsity and a dense eigenvalue rescale,
    so it shares nothing with the package's reservoir except the equations.
    """

    def __init__(self, n_in, n_res, seed, rho=0.95, alpha=0.8, density=0.2, in_scale=0.5):
        rng = np.random.default_rng(seed)
        self.w_in = rng.uniform(-in_scale, in_scale, (n_res, n_in + 1))
        w = rng.uniform(-0.5, 0.5, (n_res, n_res))
        w[rng.random((n_res, n_res)) > density] = 0.0
        w *= rho / np.max(np.abs(np.linalg.eigvals(w)))
        self.w = w
        self.alpha = alpha
        self.x = np.zeros(n_res)

    def run(self, u):
        states = np.zeros((len(u), len(self.x)))
        for t, ut in enumerate(u):
            pre = self.w_in @ np.concatenate([np.atleast_1d(ut), [1.0]]) + self.w @ self.x
            self.x = (1 - self.alpha) * self.x + self.alpha * np.tanh(pre)
            states[t] = self.x
        return states


def lstsq_readout(states, inputs, targets, reg):
    """Ridge readout via scipy's least-squares on an augmented system."""
    import scipy.linalg

    z = np.hstack([states, inputs, np.ones((len(states), 1))])
    if reg > 0:
        z_aug = np.vstack([z, math.sqrt(reg) * np.eye(z.shape[1])])
        t_aug = np.vstack([targets, np.zeros((z.shape[1], targets.shape[1]))])
    else:
        z_aug, t_aug = z, targets
    sol, *_ = scipy.linalg.lstsq(z_aug, t_aug)
    return sol.T


def narma10_reference(u):
    """NARMA-10 recursion written out term by term."""
    y = np.zeros(len(u))
    for t in range(9, len(u) - 1):
        s = 0.0
        for i in range(10):
            s += y[t - i]
        y[t + 1] = 0.3 * y[t] + 0.05 * y[t] * s + 1.5 * u[t - 9] * u[t] + 0.1
    return y
