"""Reference computations that share no code with the package.

``jet`` pushes value, first and second input derivatives through a dense
network in forward mode with plain numpy, and ``oracle_loss`` rebuilds the
training loss from those jets with the formulas written out by hand. Both
are used as finite-difference targets for the tape.
"""

import math

import numpy as np


def jet(weights, biases, X, activation="tanh"):
    """Return u, u_a, u_aa for each input axis a, as (n,) arrays."""
    n = X.shape[0]
    h = X.T.copy()  # (d, n)
    d = X.shape[1]
    dh = [np.zeros_like(h) for _ in range(d)]
    ddh = [np.zeros_like(h) for _ in range(d)]
    for a in range(d):
        dh[a][a, :] = 1.0
    last = len(weights) - 1
    for k, (W, b) in enumerate(zip(weights, biases)):
        z = W @ h + b[:, None]
        dz = [W @ v for v in dh]
        ddz = [W @ v for v in ddh]
        if k == last:
            h, dh, ddh = z, dz, ddz
            break
        if activation == "tanh":
            s = np.tanh(z)
            s1 = 1.0 - s * s
            s2 = -2.0 * s * s1
        else:
            s = np.sin(z)
            s1 = np.cos(z)
            s2 = -s
        h = s
        dh = [s1 * v for v in dz]
        ddh = [s2 * v * v + s1 * w for v, w in zip(dz, ddz)]
    assert h.shape == (1, n)
    return h[0], [v[0] for v in dh], [v[0] for v in ddh]


def oracle_loss(kind, weights, biases, pts, lam, c_weight=1.0, activation="tanh"):
    """Total self-adaptive loss from hand-written formulas.

    ``pts`` maps r/b/0 to arrays; for the periodic case ``b`` is (n, 2, 2).
    ``lam`` maps r/b/0 to weight vectors.
    """
    total = 0.0
    u, d1, d2 = jet(weights, biases, pts["r"], activation)
    x, s = pts["r"][:, 0], pts["r"][:, 1]
    if kind == "allen-cahn":
        r = d1[1] - 1e-4 * d2[0] + 5.0 * u**3 - 5.0 * u
    elif kind == "burgers":
        r = d1[1] + u * d1[0] - (0.01 / math.pi) * d2[0]
    else:
        sx = np.sin(math.pi * x) * np.sin(4.0 * math.pi * s)
        q = -(math.pi**2) * sx - (4.0 * math.pi) ** 2 * sx + sx
        r = d2[0] + d2[1] + u - q
    total += np.mean((lam["r"] * r) ** 2)

    if kind == "allen-cahn":
        lo, _, _ = jet(weights, biases, pts["b"][:, 0, :], activation)
        hi, _, _ = jet(weights, biases, pts["b"][:, 1, :], activation)
        _, dlo, _ = jet(weights, biases, pts["b"][:, 0, :], activation)
        _, dhi, _ = jet(weights, biases, pts["b"][:, 1, :], activation)
        e2 = (hi - lo) ** 2 + (dhi[0] - dlo[0]) ** 2
        total += np.mean(lam["b"] ** 2 * e2)
    else:
        ub, _, _ = jet(weights, biases, pts["b"], activation)
        total += np.mean((lam["b"] * ub) ** 2)

    if kind != "helmholtz":
        u0, _, _ = jet(weights, biases, pts["0"], activation)
        x0 = pts["0"][:, 0]
        h = x0**2 * np.cos(math.pi * x0) if kind == "allen-cahn" else -np.sin(math.pi * x0)
        total += c_weight * np.mean((lam["0"] * (u0 - h)) ** 2)
    return total


def central_gradient(f, theta, step=1e-5):
    g = np.empty_like(theta)
    for i in range(theta.size):
        e = theta.copy()
        e[i] += step
        fp = f(e)
        e[i] -= 2 * step
        fm = f(e)
        g[i] = (fp - fm) / (2 * step)
    return g


def rel_err(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))


def unflatten(theta, sizes):
    weights, biases, k = [], [], 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        weights.append(theta[k : k + n_in * n_out].reshape(n_out, n_in))
        k += n_in * n_out
        biases.append(theta[k : k + n_out])
        k += n_out
    return weights, biases
