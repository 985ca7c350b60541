"""Independent reference implementations used to cross-check the package.

These deliberately favor clarity over speed and never share code with the
implementations they verify.
"""

from collections import deque

import numpy as np


def dbscan_textbook(points, eps, min_pts):
    """O(n^2) density clustering straight from the definition.

    Neighborhoods come from a full pairwise predicate matrix; clusters are
    seeded and expanded in point-index order with a FIFO seed queue, and
    border points go to the first cluster that reaches them.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    dx = pts[None, :, 0] - pts[:, None, 0]
    dy = pts[None, :, 1] - pts[:, None, 1]
    within = dx * dx + dy * dy <= eps * eps

    labels = np.full(n, -2, dtype=np.int64)
    cid = 0
    for i in range(n):
        if labels[i] != -2:
            continue
        nb = np.nonzero(within[i])[0]
        if len(nb) < min_pts:
            labels[i] = -1
            continue
        labels[i] = cid
        queue = deque(int(j) for j in nb if j != i)
        while queue:
            j = queue.popleft()
            if labels[j] == -1:
                labels[j] = cid
            if labels[j] != -2:
                continue
            labels[j] = cid
            nb_j = np.nonzero(within[j])[0]
            if len(nb_j) >= min_pts:
                queue.extend(int(m) for m in nb_j)
        cid += 1
    return labels
