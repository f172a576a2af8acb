import numpy as np


def smooth_random(grid, rng, modes=6, scale=None):
    x = (grid.nodes - grid.domain.a) / grid.domain.diam
    k = np.arange(1, modes + 1)
    u = (rng.normal(size=modes) / k) @ np.sin(np.pi * np.outer(k, x))
    if scale is None:
        scale = 10 ** rng.uniform(-1, 1)
    return scale * u / np.abs(u).max()


def central_difference_gradient(fun, u, step):
    g = np.empty_like(u)
    for k in range(u.size):
        e = np.zeros_like(u)
        e[k] = step
        g[k] = (fun(u + e) - fun(u - e)) / (2 * step)
    return g


def fd_relative_error(grad, fd):
    """max_k |grad_k - fd_k| / max_k |grad_k|."""
    return float(np.max(np.abs(grad - fd)) / np.max(np.abs(grad)))


def assemble_p2_matrix(grid, s):
    """Hessian of the discrete p = 2 energy, written out from the quadrature rule.

    Far pairs (|i-j| >= 2) get weight 2 h^2 r^(-1-2s); each adjacent pair gets
    the band weight (h/(1-s)) ((3h/2)^(1-s)/h)^2; every cell gets its two
    exterior tails (h/s) d^(-2s) and boundary cells the outward half-cell band.
    """
    N, h = grid.N, grid.h
    x = grid.nodes
    a, b = grid.domain.a, grid.domain.b
    A = np.zeros((N, N))
    for i in range(N):
        for j in range(N):
            if abs(i - j) >= 2:
                w = 2 * h * h * abs(x[i] - x[j]) ** (-1 - 2 * s)
                A[i, j] -= w
                A[i, i] += w
    band = (h / (1 - s)) * ((1.5 * h) ** (1 - s) / h) ** 2
    for i in range(N - 1):
        A[i, i] += band
        A[i + 1, i + 1] += band
        A[i, i + 1] -= band
        A[i + 1, i] -= band
    for i in range(N):
        A[i, i] += (h / s) * ((x[i] - a) ** (-2 * s) + (b - x[i]) ** (-2 * s))
    half = (h / (2 * (1 - s))) * (h / 2) ** (-2 * s)
    A[0, 0] += half
    A[-1, -1] += half
    return A
