"""Exact configuration counts for the two search strategies.

All values are plain Python integers, so they stay exact far beyond the
64-bit range the larger device counts would otherwise overflow.
"""
from __future__ import annotations

from functools import lru_cache
from math import comb, factorial


@lru_cache(maxsize=None)
def stirling2(n: int, k: int) -> int:
    """Partitions of an n-set into exactly k non-empty blocks.

    Computed with the recurrence S(n+1, k) = k*S(n, k) + S(n, k-1).
    """
    if n < 0 or k < 0:
        raise ValueError("stirling2 needs non-negative arguments")
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)


def count_configs_exhaustive(n: int) -> int:
    """Number of full cluster configurations visited by exhaustive search.

    For each leader count k up to n//2: choose the k leaders, partition the
    remaining n-k devices into k non-empty follower groups, and associate
    groups with leaders in k! ways.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return sum(
        factorial(k) * comb(n, k) * stirling2(n - k, k)
        for k in range(1, n // 2 + 1)
    )


def count_configs_distributed_bound(n: int, l: int) -> int:
    """Upper bound on configurations reachable by the two-phase protocol.

    With a candidate-leader set of size l fixed up front, only n-l devices
    are free followers; each of the l-k candidates that end up without
    followers joins one of the k final clusters, giving the k**(l-k) factor.
    """
    if not (0 <= l <= n):
        raise ValueError("need 0 <= l <= n")
    return sum(
        factorial(k) * comb(l, k) * stirling2(n - l, k) * k ** (l - k)
        for k in range(1, min(l, n // 2) + 1)
    )
