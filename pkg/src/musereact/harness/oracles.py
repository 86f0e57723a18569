"""Deliberately naive reference implementations for the dynamic programs.

These exist to catch bugs in the fast implementations, so they avoid the
optimization under test: the DTW oracle enumerates every monotone alignment
path explicitly, and the Viterbi oracle scores every possible state
sequence.  Both are exponential and refuse inputs beyond small sizes.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from ..core import ParameterError, ReactionLabel
from ..vocal import HmmParams

MAX_ORACLE_LEN = 8
MAX_ORACLE_WINDOW = 6

_UNVOICED = -1


def _local_cost(x: int, y: int) -> float:
    if x == _UNVOICED and y == _UNVOICED:
        return 0.0
    if x == _UNVOICED or y == _UNVOICED:
        return 6.0
    d = abs(x - y)
    return float(min(d, 12 - d))


def dtw_oracle(a, b) -> float:
    """Minimum alignment cost by enumerating all monotone paths.

    Paths start at (0, 0), end at (n-1, m-1), and advance by (1, 1), (1, 0)
    or (0, 1).  Sequences longer than 8 are rejected (the path count grows
    exponentially).
    """
    a = [int(v) for v in np.asarray(a).ravel()]
    b = [int(v) for v in np.asarray(b).ravel()]
    if not a or not b:
        raise ParameterError("sequences must be non-empty")
    if len(a) > MAX_ORACLE_LEN or len(b) > MAX_ORACLE_LEN:
        raise ParameterError(f"oracle only handles sequences up to {MAX_ORACLE_LEN}")
    cost = [[_local_cost(x, y) for y in b] for x in a]
    n, m = len(a), len(b)
    best = math.inf

    # Depth-first walk over every path, carrying the running cost.
    stack = [(0, 0, cost[0][0])]
    while stack:
        i, j, acc = stack.pop()
        if acc >= best:
            continue
        if i == n - 1 and j == m - 1:
            best = acc
            continue
        if i + 1 < n and j + 1 < m:
            stack.append((i + 1, j + 1, acc + cost[i + 1][j + 1]))
        if i + 1 < n:
            stack.append((i + 1, j, acc + cost[i + 1][j]))
        if j + 1 < m:
            stack.append((i, j + 1, acc + cost[i][j + 1]))
    return best


def viterbi_oracle(
    hmm: HmmParams, observed: list[ReactionLabel]
) -> tuple[list[ReactionLabel], float]:
    """Best state sequence by scoring every candidate path.

    Enumerates all ``S**n`` state sequences in lexicographic state-index
    order and keeps the first maximum, which matches the documented
    tie-break (earlier states win).  Windows longer than 6 are rejected.
    """
    if not observed:
        raise ParameterError("need at least one observation")
    if len(observed) > MAX_ORACLE_WINDOW:
        raise ParameterError(f"oracle only handles windows up to {MAX_ORACLE_WINDOW}")
    obs = [hmm.state_index(label) for label in observed]
    s = len(hmm.states)

    def log(p: float) -> float:
        return math.log(p) if p > 0 else -math.inf

    best_path = None
    best_logprob = -math.inf
    for path in itertools.product(range(s), repeat=len(obs)):
        logprob = log(hmm.initial[path[0]]) + log(hmm.emission[path[0], obs[0]])
        for prev, cur, o in zip(path, path[1:], obs[1:]):
            logprob += log(hmm.transition[prev, cur]) + log(hmm.emission[cur, o])
        if logprob > best_logprob:
            best_logprob = logprob
            best_path = path
    return [hmm.states[i] for i in best_path], best_logprob
