"""numba-compiled search kernels.

Same contract as _kernels_numpy; keep the two files in lockstep. All
transcendentals arrive precomputed in expd (expd[j] = exp(-alpha*j)) so the
kernel body is pure float64 add/mul and stays bit-reproducible. Leaf values
accumulate sequentially over scenarios in ascending order; the enumerator
shares that expression, which is what makes solver-vs-oracle comparisons
exact instead of approximate.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def path_objective(z, q, expd, path):
    """Objective of a complete path against one target's trajectories."""
    I = z.shape[0]
    T = z.shape[1]
    total = 0.0
    for i in range(I):
        d = 0
        for t in range(T):
            if z[i, t] == path[t]:
                d += 1
        total += q[i] * expd[d]
    return total


@njit(cache=True, nogil=True)
def greedy_path(nbr_indptr, nbr_indices, z1, q, T, C):
    """Dive that always takes the cell with the largest immediate
    expected detection; ties go to the lowest cell index."""
    path = np.zeros(T, np.int64)
    I = z1.shape[0]
    prev = -1
    for t in range(T):
        best_c = -1
        best_w = -1.0
        if t == 0:
            for c in range(C):
                w = 0.0
                for i in range(I):
                    if z1[i, t] == c:
                        w += q[i]
                if w > best_w:
                    best_w = w
                    best_c = c
        else:
            for p in range(nbr_indptr[prev], nbr_indptr[prev + 1]):
                c = nbr_indices[p]
                w = 0.0
                for i in range(I):
                    if z1[i, t] == c:
                        w += q[i]
                if w > best_w:
                    best_w = w
                    best_c = c
        path[t] = best_c
        prev = best_c
    return path


@njit(cache=True, nogil=True)
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

    z2 empty (shape (0, T)) means no pursuit cap. The node bound assumes
    every remaining period detects, so counts grow by at most one per
    period and the bound never exceeds the subtree's best completion.
    Children expand in ascending cell index, incumbents update on strict
    improvement only; both together make values and node counts
    deterministic. Returns (path, value, lower_bound, nodes, found).
    """
    I = z1.shape[0]
    I2 = z2.shape[0]
    d1 = np.zeros(I, np.int64)
    d2 = np.zeros(I2, np.int64)
    path = np.zeros(T, np.int64)
    best_path = np.zeros(T, np.int64)
    best = init_value
    have_best = np.isfinite(init_value)
    if have_best:
        for t in range(T):
            best_path[t] = init_path[t]
    min_pruned = np.inf
    child_pos = np.zeros(T, np.int64)
    nodes = 0
    t = 0
    while t >= 0:
        if t == 0:
            base = 0
            n_children = C
        else:
            base = nbr_indptr[path[t - 1]]
            n_children = nbr_indptr[path[t - 1] + 1] - base
        if child_pos[t] >= n_children:
            t -= 1
            if t >= 0:
                c = path[t]
                for i in range(I):
                    if z1[i, t] == c:
                        d1[i] -= 1
                for i in range(I2):
                    if z2[i, t] == c:
                        d2[i] -= 1
            continue
        if t == 0:
            c = child_pos[0]
        else:
            c = nbr_indices[base + child_pos[t]]
        child_pos[t] += 1
        path[t] = c
        for i in range(I):
            if z1[i, t] == c:
                d1[i] += 1
        for i in range(I2):
            if z2[i, t] == c:
                d2[i] += 1
        nodes += 1
        rem = T - t - 1
        drop = False
        if I2 > 0:
            fb = 0.0
            for i in range(I2):
                fb += q[i] * expd[d2[i] + rem]
            if fb > tau:
                drop = True  # even all-detect completions violate the cap
        if not drop:
            ob = 0.0
            for i in range(I):
                ob += q[i] * expd[d1[i] + rem]
            if rem == 0:
                if (not have_best) or ob < best:
                    best = ob
                    have_best = True
                    for tt in range(T):
                        best_path[tt] = path[tt]
                drop = True
            elif have_best and ob >= best - abs_tol:
                if ob < min_pruned:
                    min_pruned = ob
                drop = True
        if drop:
            for i in range(I):
                if z1[i, t] == c:
                    d1[i] -= 1
            for i in range(I2):
                if z2[i, t] == c:
                    d2[i] -= 1
            continue
        t += 1
        child_pos[t] = 0
    if not have_best:
        return best_path, np.inf, np.inf, nodes, 0
    lower = best
    if min_pruned < lower:
        lower = min_pruned
    return best_path, best, lower, nodes, 1


@njit(cache=True, nogil=True)
def enumerate_paths(nbr_indptr, nbr_indices, z1, z2, q, expd, T, C, tau):
    """Visit every structural path, no pruning of any kind.

    Counts all paths, keeps the best that satisfies the cap. Shares the
    leaf expression with bnb_search so the two agree bit for bit.
    Returns (path, value, n_paths, found).
    """
    I = z1.shape[0]
    I2 = z2.shape[0]
    d1 = np.zeros(I, np.int64)
    d2 = np.zeros(I2, np.int64)
    path = np.zeros(T, np.int64)
    best_path = np.zeros(T, np.int64)
    best = np.inf
    have_best = False
    child_pos = np.zeros(T, np.int64)
    n_paths = 0
    t = 0
    while t >= 0:
        if t == 0:
            base = 0
            n_children = C
        else:
            base = nbr_indptr[path[t - 1]]
            n_children = nbr_indptr[path[t - 1] + 1] - base
        if child_pos[t] >= n_children:
            t -= 1
            if t >= 0:
                c = path[t]
                for i in range(I):
                    if z1[i, t] == c:
                        d1[i] -= 1
                for i in range(I2):
                    if z2[i, t] == c:
                        d2[i] -= 1
            continue
        if t == 0:
            c = child_pos[0]
        else:
            c = nbr_indices[base + child_pos[t]]
        child_pos[t] += 1
        path[t] = c
        for i in range(I):
            if z1[i, t] == c:
                d1[i] += 1
        for i in range(I2):
            if z2[i, t] == c:
                d2[i] += 1
        if t == T - 1:
            n_paths += 1
            ok = True
            if I2 > 0:
                nd2 = 0.0
                for i in range(I2):
                    nd2 += q[i] * expd[d2[i]]
                if nd2 > tau:
                    ok = False
            if ok:
                val = 0.0
                for i in range(I):
                    val += q[i] * expd[d1[i]]
                if (not have_best) or val < best:
                    best = val
                    have_best = True
                    for tt in range(T):
                        best_path[tt] = path[tt]
            for i in range(I):
                if z1[i, t] == c:
                    d1[i] -= 1
            for i in range(I2):
                if z2[i, t] == c:
                    d2[i] -= 1
            continue
        t += 1
        child_pos[t] = 0
    if not have_best:
        return best_path, np.inf, n_paths, 0
    return best_path, best, n_paths, 1
