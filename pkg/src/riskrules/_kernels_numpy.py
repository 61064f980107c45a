"""Pure-numpy fallback kernels.

Same contract and traversal order as _kernels_numba; keep the two files in
lockstep. Scenario loops vectorize through numpy, so within this backend
the solver and the enumerator still share one leaf expression and agree
bit for bit. Cross-backend values may differ in the last ulp because
accumulation order differs; tests compare across backends with a
tolerance and within a backend exactly.
"""

import numpy as np


def path_objective(z, q, expd, path):
    """Objective of a complete path against one target's trajectories."""
    d = (z == np.asarray(path)[None, :]).sum(axis=1)
    return float(np.dot(q, expd[d]))


def greedy_path(nbr_indptr, nbr_indices, z1, q, T, C):
    """Dive that always takes the cell with the largest immediate
    expected detection; ties go to the lowest cell index."""
    path = np.zeros(T, np.int64)
    prev = -1
    for t in range(T):
        if t == 0:
            candidates = range(C)
        else:
            candidates = nbr_indices[nbr_indptr[prev] : nbr_indptr[prev + 1]]
        best_c = -1
        best_w = -1.0
        col = z1[:, t]
        for c in candidates:
            w = float(q[col == c].sum())
            if w > best_w:
                best_w = w
                best_c = int(c)
        path[t] = best_c
        prev = best_c
    return path


def bnb_search(
    nbr_indptr,
    nbr_indices,
    z1,
    z2,
    q,
    expd,
    T,
    C,
    tau,
    abs_tol,
    init_path,
    init_value,
):
    """Depth-first branch and bound over searcher paths.

    See the numba twin for the full contract. Returns
    (path, value, lower_bound, nodes, found).
    """
    I2 = z2.shape[0]
    d1 = np.zeros(z1.shape[0], np.int64)
    d2 = np.zeros(I2, np.int64)
    path = np.zeros(T, np.int64)
    best_path = np.zeros(T, np.int64)
    best = init_value
    have_best = bool(np.isfinite(init_value))
    if have_best:
        best_path[:] = init_path
    min_pruned = np.inf
    child_pos = np.zeros(T, np.int64)
    nodes = 0
    hit1 = [z1[:, t2] for t2 in range(T)]
    hit2 = [z2[:, t2] for t2 in range(T)]
    t = 0
    while t >= 0:
        if t == 0:
            base = 0
            n_children = C
        else:
            prev = path[t - 1]
            base = nbr_indptr[prev]
            n_children = nbr_indptr[prev + 1] - base
        if child_pos[t] >= n_children:
            t -= 1
            if t >= 0:
                c = path[t]
                d1 -= hit1[t] == c
                if I2 > 0:
                    d2 -= hit2[t] == c
            continue
        c = child_pos[0] if t == 0 else nbr_indices[base + child_pos[t]]
        child_pos[t] += 1
        path[t] = c
        d1 += hit1[t] == c
        if I2 > 0:
            d2 += hit2[t] == c
        nodes += 1
        rem = T - t - 1
        drop = False
        if I2 > 0:
            fb = float(np.dot(q, expd[d2 + rem]))
            if fb > tau:
                drop = True  # even all-detect completions violate the cap
        if not drop:
            ob = float(np.dot(q, expd[d1 + rem]))
            if rem == 0:
                if (not have_best) or ob < best:
                    best = ob
                    have_best = True
                    best_path[:] = path
                drop = True
            elif have_best and ob >= best - abs_tol:
                if ob < min_pruned:
                    min_pruned = ob
                drop = True
        if drop:
            d1 -= hit1[t] == c
            if I2 > 0:
                d2 -= hit2[t] == c
            continue
        t += 1
        child_pos[t] = 0
    if not have_best:
        return best_path, np.inf, np.inf, nodes, 0
    return best_path, best, min(best, min_pruned), nodes, 1


def enumerate_paths(nbr_indptr, nbr_indices, z1, z2, q, expd, T, C, tau):
    """Visit every structural path, no pruning of any kind.

    Returns (path, value, n_paths, found).
    """
    I2 = z2.shape[0]
    d1 = np.zeros(z1.shape[0], np.int64)
    d2 = np.zeros(I2, np.int64)
    path = np.zeros(T, np.int64)
    best_path = np.zeros(T, np.int64)
    best = np.inf
    have_best = False
    child_pos = np.zeros(T, np.int64)
    n_paths = 0
    hit1 = [z1[:, t2] for t2 in range(T)]
    hit2 = [z2[:, t2] for t2 in range(T)]
    t = 0
    while t >= 0:
        if t == 0:
            base = 0
            n_children = C
        else:
            prev = path[t - 1]
            base = nbr_indptr[prev]
            n_children = nbr_indptr[prev + 1] - base
        if child_pos[t] >= n_children:
            t -= 1
            if t >= 0:
                c = path[t]
                d1 -= hit1[t] == c
                if I2 > 0:
                    d2 -= hit2[t] == c
            continue
        c = child_pos[0] if t == 0 else nbr_indices[base + child_pos[t]]
        child_pos[t] += 1
        path[t] = c
        d1 += hit1[t] == c
        if I2 > 0:
            d2 += hit2[t] == c
        if t == T - 1:
            n_paths += 1
            ok = True
            if I2 > 0:
                if float(np.dot(q, expd[d2])) > tau:
                    ok = False
            if ok:
                val = float(np.dot(q, expd[d1]))
                if (not have_best) or val < best:
                    best = val
                    have_best = True
                    best_path[:] = path
            d1 -= hit1[t] == c
            if I2 > 0:
                d2 -= hit2[t] == c
            continue
        t += 1
        child_pos[t] = 0
    if not have_best:
        return best_path, np.inf, n_paths, 0
    return best_path, best, n_paths, 1
