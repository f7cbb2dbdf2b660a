"""Slow, obviously-correct reference implementations used as test oracles."""
from collections import deque
from itertools import product

import numpy as np


def coords(shape):
    return np.indices(shape).reshape(3, -1).T


def sq_edt(mask):
    """Squared distance to nearest foreground by comparing all voxel pairs."""
    mask = np.asarray(mask, bool)
    pts = coords(mask.shape)
    fg = pts[mask.ravel()]
    if len(fg) == 0:
        return np.full(mask.shape, np.inf)
    d2 = ((pts[:, None, :] - fg[None, :, :]) ** 2).sum(-1).min(1)
    return d2.reshape(mask.shape).astype(float)


def dilate(mask, r, border_value=0):
    """Ball dilation; with border_value=1 every lattice point outside the window is foreground."""
    mask = np.asarray(mask, bool)
    out = sq_edt(mask) <= r * r + 1e-9
    if border_value:
        pts = coords(mask.shape)
        n = np.array(mask.shape)
        # nearest outside lattice point is straight through the closest face
        face = np.minimum(pts + 1, n - pts).min(1).reshape(mask.shape)
        out |= face <= r + 1e-9
    return out


NB26 = [d for d in product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]


def components26(mask):
    mask = np.asarray(mask, bool)
    lab = np.zeros(mask.shape, int)
    n = 0
    for start in zip(*np.nonzero(mask)):
        if lab[start]:
            continue
        n += 1
        lab[start] = n
        q = deque([start])
        while q:
            v = q.popleft()
            for d in NB26:
                w = (v[0] + d[0], v[1] + d[1], v[2] + d[2])
                if all(0 <= w[i] < mask.shape[i] for i in range(3)) and mask[w] and not lab[w]:
                    lab[w] = n
                    q.append(w)
    return lab, n


def connected_fraction(mask):
    mask = np.asarray(mask, bool)
    if not mask.any():
        return 0.0
    lab, _ = components26(mask)
    span = set(np.unique(lab[:, :, 0])) & set(np.unique(lab[:, :, -1]))
    span.discard(0)
    return float(np.isin(lab, list(span)).sum() / mask.sum())


def _reach(mask, dz):
    """Voxels reachable from the start face by moves with z-step 0 or dz."""
    nz = mask.shape[2]
    start_z = 0 if dz > 0 else nz - 1
    seen = np.zeros(mask.shape, bool)
    q = deque()
    for x, y in zip(*np.nonzero(mask[:, :, start_z])):
        seen[x, y, start_z] = True
        q.append((x, y, start_z))
    moves = [(a, b, c) for a, b, c in NB26 if c in (0, dz)]
    while q:
        v = q.popleft()
        for d in moves:
            w = (v[0] + d[0], v[1] + d[1], v[2] + d[2])
            if all(0 <= w[i] < mask.shape[i] for i in range(3)) and mask[w] and not seen[w]:
                seen[w] = True
                q.append(w)
    return seen


def monotone_set(mask):
    """Voxels on some bottom-to-top path whose z never decreases (graph search)."""
    mask = np.asarray(mask, bool)
    return _reach(mask, 1) & _reach(mask, -1)


def monotone_fraction(mask):
    mask = np.asarray(mask, bool)
    if not mask.any():
        return 0.0
    return float(monotone_set(mask).sum() / mask.sum())


def contact_edf(mask):
    """(sorted unique distances, cumulative fractions) over background voxels."""
    mask = np.asarray(mask, bool)
    d = np.sqrt(sq_edt(mask)[~mask])
    t = np.unique(d)
    F = np.array([(d <= ti).sum() for ti in t]) / d.size
    return t, F


def chords(line):
    """Interior maximal runs of ones in a 1D sequence."""
    runs, n, i = [], len(line), 0
    while i < n:
        if line[i]:
            j = i
            while j < n and line[j]:
                j += 1
            if i > 0 and j < n:
                runs.append(j - i)
            i = j
        else:
            i += 1
    return runs
