"""Monte Carlo kernels for ring-placement exposure, compiled with numba when available.

Each trial places ``m`` ring players (labels ``0..m-1``, the first
``n_malicious`` of them colluding with the master) at the positions given by
``argsort`` of one row of uniform floats.  A player is protected in an
occurrence when, under the chosen predicate, the sandwich on it is broken:

* ``group``: positions form pairs ``(0,1), (2,3), ...``; protected if the partner is honest.
* ``ring``: the master sits at both ends; protected if either neighbour is honest.

The kernels update, for every trial, the set of honest players protected so
far and the first occurrence (1-based) at which all honest players are
protected.  Setting ``RINGDOT_NO_NUMBA=1`` selects the pure numpy path; both
paths consume the same floats and return identical arrays.
"""

from __future__ import annotations

import os

import numpy as np

ENV_FLAG = "RINGDOT_NO_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


def update_numpy(floats: np.ndarray, n_malicious: int, ring: bool, covered: np.ndarray,
                 first_safe: np.ndarray, offset: int) -> None:
    """Vectorised update over ``floats`` of shape ``(trials, occurrences, m)``."""
    T, D, m = floats.shape
    perm = np.argsort(floats, axis=2, kind="mergesort")
    honest_pos = perm >= n_malicious
    if ring:
        left = np.concatenate([np.zeros((T, D, 1), bool), honest_pos[:, :, :-1]], axis=2)
        right = np.concatenate([honest_pos[:, :, 1:], np.zeros((T, D, 1), bool)], axis=2)
        safe_pos = honest_pos & (left | right)
    else:
        partner = np.arange(m) ^ 1
        safe_pos = honest_pos & honest_pos[:, :, partner]
    safe = np.zeros_like(safe_pos)
    np.put_along_axis(safe, perm, safe_pos, axis=2)
    cum = np.logical_or.accumulate(safe, axis=1) | covered[:, None, :]
    done = cum[:, :, n_malicious:].all(axis=2)
    hit = done.any(axis=1)
    stop = np.where(hit, done.argmax(axis=1), D - 1)
    pending = first_safe == 0
    first_safe[pending & hit] = stop[pending & hit] + offset + 1
    covered[pending] = cum[np.arange(T), stop][pending]


def _update_loops(floats, n_malicious, ring, covered, first_safe, offset):
    T, D, m = floats.shape
    for t in range(T):
        if first_safe[t] != 0:
            continue
        for o in range(D):
            perm = np.argsort(floats[t, o], kind="mergesort")
            for p in range(m):
                if perm[p] < n_malicious:
                    continue
                if ring:
                    ok = (p > 0 and perm[p - 1] >= n_malicious) or (p < m - 1 and perm[p + 1] >= n_malicious)
                else:
                    ok = perm[p ^ 1] >= n_malicious
                if ok:
                    covered[t, perm[p]] = True
            done = True
            for j in range(n_malicious, m):
                if not covered[t, j]:
                    done = False
                    break
            if done:
                first_safe[t] = offset + o + 1
                break


try:
    if not _numba_requested():
        raise ImportError
    from numba import njit

    update_numba = njit(cache=False)(_update_loops)
    BACKEND = "numba"
except ImportError:
    update_numba = None
    BACKEND = "numpy"


def update_loops(floats, n_malicious, ring, covered, first_safe, offset) -> None:
    """Per-trial loop version; compiled when numba is active."""
    fn = update_numba if update_numba is not None else _update_loops
    fn(floats, n_malicious, ring, covered, first_safe, offset)


def exposure_update(floats: np.ndarray, n_malicious: int, ring: bool, covered: np.ndarray,
                    first_safe: np.ndarray, offset: int) -> None:
    """Dispatch to the active backend."""
    if BACKEND == "numba":
        update_numba(floats, n_malicious, ring, covered, first_safe, offset)
    else:
        update_numpy(floats, n_malicious, ring, covered, first_safe, offset)
