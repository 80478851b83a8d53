"""Independent reference solvers used only by the tests."""

import numpy as np


def isotonic_qp_oracle(points, y, iters=200_000, tol=1e-13):
    """Projection onto the monotone cone by accelerated projected gradient on the dual.

    With D the matrix of all comparable pairs (row e_i - e_j for x_i <= x_j),
    the projection is f = y - D^T lam where lam >= 0 minimizes
    0.5 * ||y - D^T lam||^2.
    """
    pts = np.asarray(points, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    pairs = [(i, j) for i in range(n) for j in range(n)
             if i != j and np.all(pts[i] <= pts[j]) and not np.all(pts[i] == pts[j])]
    # identical points must share a value; encode as two opposite constraints
    pairs += [(i, j) for i in range(n) for j in range(n) if i != j and np.all(pts[i] == pts[j])]
    if not pairs:
        return y.copy()
    D = np.zeros((len(pairs), n))
    for k, (i, j) in enumerate(pairs):
        D[k, i], D[k, j] = 1.0, -1.0
    L = np.linalg.norm(D, 2) ** 2
    lam = np.zeros(len(pairs))
    z, t = lam.copy(), 1.0
    f_prev = y.copy()
    for k in range(iters):
        f = y - D.T @ z
        new = np.maximum(0.0, z + (D @ f) / L)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = new + ((t - 1) / t_new) * (new - lam)
        lam, t = new, t_new
        if k % 200 == 199:
            # the dual need not be unique; stop once the primal iterate settles
            f = y - D.T @ lam
            if np.max(np.abs(f - f_prev)) < tol:
                break
            f_prev = f
    return y - D.T @ lam
