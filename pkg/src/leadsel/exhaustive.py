"""Exact solvers for the joint leader selection / follower association problem.

``solve_exhaustive`` walks leader-first-follower configurations: a leader
set, one designated first follower per leader (which secures the
at-least-one-follower constraint), and a greedy best-score completion for
everyone else. ``brute_force_oracle`` is a deliberately unrelated direct
enumeration over role vectors, kept slow and simple so the two can check
each other.

A UE may only follow a leader it scores strictly positive (a zero external
score is read as refusal); isolated UEs are allowed in relaxed mode and
contribute nothing to the utility.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import combinations, permutations, product
from typing import Mapping, Optional

from .model import (
    EDGE_SERVER_ID,
    Assignment,
    Instance,
    utility as assignment_utility,
)

DEFAULT_HARD_LIMIT = 14
ORACLE_LIMIT = 7

MODE_STRICT = "strict"
MODE_RELAXED = "relaxed"


class Infeasible(Exception):
    """No assignment satisfies the constraints (strict mode)."""


class LimitExceeded(Exception):
    """Instance too large for the requested exact method."""


@dataclass(frozen=True)
class OptimalSolution:
    assignment: Assignment
    utility: object  # int for integer instances
    configs_visited: int
    elapsed: float  # seconds

    def to_json_dict(self) -> dict:
        d = self.assignment.to_json_dict()
        d["utility"] = self.utility
        d["configs_visited"] = str(self.configs_visited)
        d["elapsed_us"] = int(self.elapsed * 1e6)
        return d


def _check_mode(mode: str) -> bool:
    if mode not in (MODE_STRICT, MODE_RELAXED):
        raise ValueError(f"unknown mode {mode!r}")
    return mode == MODE_STRICT


def solve_exhaustive(inst: Instance, rho, caps: Optional[Mapping] = None,
                     mode: str = MODE_RELAXED,
                     hard_limit: int = DEFAULT_HARD_LIMIT) -> OptimalSolution:
    """Optimal assignment by exhaustive leader-first-follower search.

    Ties are broken toward the smallest sorted leader tuple, then the
    smallest sorted follower map. With capacities the greedy completion is
    replaced by an exact slot-matching per leader set.
    """
    strict = _check_mode(mode)
    if inst.node_count > hard_limit:
        raise LimitExceeded(
            f"{inst.node_count} nodes exceeds the hard limit {hard_limit}")
    started = time.perf_counter()
    if caps is None:
        best, visited = _search_uncapacitated(inst, rho, strict)
    else:
        best, visited = _search_capacitated(inst, rho, caps, strict)
    elapsed = time.perf_counter() - started
    if best is None:
        if strict:
            raise Infeasible("no assignment satisfies C1-C3 in strict mode")
        return OptimalSolution(Assignment.all_isolated(inst), 0, visited, elapsed)
    util, assignment = best
    return OptimalSolution(assignment, util, visited, elapsed)


def _leader_candidates(inst: Instance, rho):
    return [n for n in inst.node_ids if inst.lii_of(n) > rho]


def _search_uncapacitated(inst: Instance, rho, strict: bool):
    eligible = _leader_candidates(inst, rho)
    kmax = inst.node_count // 2
    lii = {n: inst.lii_of(n) for n in inst.node_ids}
    lxi = {m: inst.lxi_row(m) for m in inst.node_ids}

    best_util = None
    best_assignment = None
    best_key = None
    visited = 0

    for k in range(1, kmax + 1):
        for leaders in combinations(eligible, k):
            lset = set(leaders)
            nonleaders = [m for m in inst.node_ids if m not in lset]
            if strict and any(
                    all(lxi[m][l] <= 0 for l in leaders)
                    for m in nonleaders if m != EDGE_SERVER_ID):
                continue  # someone could neither lead nor follow here
            base = sum(lii[l] for l in leaders)

            # One distinct first follower per leader secures C2; each
            # remaining UE then adds its best score toward this leader set
            # (zero if it scores every leader zero and stays isolated).
            for firsts in permutations(nonleaders, k):
                util = base
                ok = True
                for l, f in zip(leaders, firsts):
                    v = lxi[f][l]
                    if v <= 0:
                        ok = False
                        break
                    util += v
                if not ok:
                    continue
                visited += 1
                fset = set(firsts)
                for m in nonleaders:
                    if m in fset:
                        continue
                    row = lxi[m]
                    bv = 0
                    for l in leaders:
                        v = row[l]
                        if v > bv:
                            bv = v
                    util += bv
                if best_util is not None and util < best_util:
                    continue
                # ties break toward the smallest assignment sort key;
                # within the completion, the lowest leader id wins
                follows = dict(zip(firsts, leaders))
                for m in nonleaders:
                    if m in fset:
                        continue
                    row = lxi[m]
                    bv, bl = 0, None
                    for l in leaders:
                        v = row[l]
                        if v > bv:
                            bv, bl = v, l
                    if bl is not None:
                        follows[m] = bl
                isolated = [m for m in nonleaders if m not in follows]
                assignment = Assignment.build(leaders, follows, isolated)
                key = assignment.sort_key()
                if (best_util is None or util > best_util
                        or (util == best_util and key < best_key)):
                    best_util, best_assignment, best_key = util, assignment, key

    if best_assignment is None:
        return None, visited
    return (best_util, best_assignment), visited


def _search_capacitated(inst: Instance, rho, caps: Mapping, strict: bool):
    # Exact per-leader-set completion as a max-weight slot matching: one
    # mandatory slot per leader (C2 lower bound) plus cap-1 optional slots,
    # and free isolation slots in relaxed mode.
    import numpy as np
    from scipy.optimize import linear_sum_assignment

    eligible = [n for n in _leader_candidates(inst, rho)
                if caps.get(n, inst.node_count) >= 1]
    kmax = inst.node_count // 2
    lii = {n: inst.lii_of(n) for n in inst.node_ids}
    lxi = {m: inst.lxi_row(m) for m in inst.node_ids}
    big = sum(lii.values()) + sum(sum(r.values()) for r in lxi.values()) + 1

    best_util = None
    best_assignment = None
    best_key = None
    visited = 0

    for k in range(1, kmax + 1):
        for leaders in combinations(eligible, k):
            visited += 1
            lset = set(leaders)
            rows = [m for m in inst.node_ids
                    if m not in lset and m != EDGE_SERVER_ID]
            if len(rows) < k:
                continue
            cols = []  # (leader, mandatory) or (None, False) for isolation
            for l in leaders:
                cols.append((l, True))
                cols.extend((l, False) for _ in range(
                    min(caps.get(l, len(rows)), len(rows)) - 1))
            if not strict:
                cols.extend((None, False) for _ in rows)
            elif len(cols) < len(rows):
                continue
            cost = np.full((len(rows), len(cols)), np.inf)
            for i, m in enumerate(rows):
                row = lxi[m]
                for j, (l, mandatory) in enumerate(cols):
                    if l is None:
                        cost[i, j] = 0.0
                    elif row[l] > 0:
                        cost[i, j] = -(row[l] + (big if mandatory else 0))
            try:
                ri, ci = linear_sum_assignment(cost)
            except ValueError:
                continue  # no feasible placement of all UEs
            follows = {}
            mandatory_filled = 0
            for i, j in zip(ri, ci):
                l, mandatory = cols[j]
                if l is not None:
                    follows[rows[i]] = l
                    mandatory_filled += mandatory
            if mandatory_filled < k:
                continue  # some leader cannot receive any follower
            if strict and len(follows) < len(rows):
                continue
            util = sum(lii[l] for l in leaders)
            util += sum(lxi[m][l] for m, l in follows.items())
            isolated = [m for m in inst.node_ids
                        if m not in lset and m not in follows]
            assignment = Assignment.build(leaders, follows, isolated)
            key = assignment.sort_key()
            if (best_util is None or util > best_util
                    or (util == best_util and key < best_key)):
                best_util, best_assignment, best_key = util, assignment, key

    if best_assignment is None:
        return None, visited
    return (best_util, best_assignment), visited


def brute_force_oracle(inst: Instance, rho, caps: Optional[Mapping] = None,
                       mode: str = MODE_RELAXED) -> OptimalSolution:
    """Direct enumeration over leader subsets and per-UE leader choices.

    Shares nothing with :func:`solve_exhaustive` beyond the domain model;
    intended purely as a cross-check on small instances.
    """
    strict = _check_mode(mode)
    if inst.node_count > ORACLE_LIMIT:
        raise LimitExceeded(
            f"oracle is limited to {ORACLE_LIMIT} nodes, got {inst.node_count}")
    started = time.perf_counter()

    nodes = list(inst.node_ids)
    eligible = [n for n in nodes if inst.lii_of(n) > rho]
    best = None  # (utility, leaders, choices)
    visited = 0

    for k in range(0, len(eligible) + 1):
        for leaders in combinations(eligible, k):
            lset = set(leaders)
            nonleaders = [m for m in nodes if m not in lset]
            if k > 0 and len(nonleaders) < k:
                continue
            options = []
            doomed = False
            for m in nonleaders:
                opts = [(l, inst.lxi_of(m, l)) for l in leaders
                        if inst.lxi_of(m, l) > 0]
                if not strict or m == EDGE_SERVER_ID:
                    opts.append((None, 0))
                if not opts:
                    doomed = True
                    break
                options.append(opts)
            if doomed:
                continue
            base = sum(inst.lii_of(l) for l in leaders)
            for combo in product(*options):
                visited += 1
                chosen = [l for l, _ in combo if l is not None]
                if set(chosen) != lset:
                    continue  # some leader left without a follower
                if caps is not None:
                    over = False
                    for l in lset:
                        limit = caps.get(l)
                        if limit is not None and chosen.count(l) > limit:
                            over = True
                            break
                    if over:
                        continue
                util = base + sum(v for _, v in combo)
                if best is None or util > best[0]:
                    best = (util, leaders, combo)

    elapsed = time.perf_counter() - started
    if best is None:
        raise Infeasible("no assignment satisfies C1-C3 in strict mode")
    util, leaders, combo = best
    nonleaders = [m for m in nodes if m not in set(leaders)]
    follows = {m: l for m, (l, _) in zip(nonleaders, combo) if l is not None}
    isolated = [m for m in nonleaders if m not in follows]
    assignment = Assignment.build(leaders, follows, isolated)
    assert assignment_utility(inst, assignment) == util
    return OptimalSolution(assignment, util, visited, elapsed)
