"""Tree maximal operator, its linearization, and the weak-type deficit.

Everything here is exact finite arithmetic on step functions: node averages
are built bottom-up level by level, the maximal function is one root-to-leaf
prefix-max sweep, and the linearization recovers the partition of X by the
largest average-attaining ancestor of each leaf.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .tree import StepFunction, Tree, moment


def _level_averages(tree: Tree, leaf_values: np.ndarray) -> list[np.ndarray]:
    """Per-level node averages, ``levels[m]`` indexed like level m.

    Parent average is the plain mean of its children (children have equal
    measure on a uniform tree), so the root entry is the global mean.
    """
    levels = [np.asarray(leaf_values, dtype=np.float64)]
    for _ in range(tree.depth):
        levels.append(levels[-1].reshape(-1, tree.arity).mean(axis=1))
    levels.reverse()
    return levels


def averages(phi: StepFunction) -> np.ndarray:
    """Average of ``phi`` over every node, as a flat array indexed by node id."""
    levels = _level_averages(phi.tree, phi.leaf_values)
    return np.concatenate(levels)


@dataclass(frozen=True)
class MaximalResult:
    """Maximal function of a step function plus per-leaf attaining nodes.

    ``attaining_node[i]`` is the id of the largest (closest to the root)
    ancestor of leaf i whose average realizes the maximum; ties between an
    ancestor and any descendant resolve to the ancestor.
    """

    phi: StepFunction
    m_phi: StepFunction
    attaining_node: np.ndarray


def maximal_function(phi: StepFunction) -> MaximalResult:
    """Evaluate the tree maximal operator by a single prefix-max sweep."""
    tree = phi.tree
    levels = _level_averages(tree, phi.leaf_values)
    best = levels[0].copy()
    attain = np.zeros(1, dtype=np.int64)
    for m in range(1, tree.depth + 1):
        current = levels[m]
        best = np.repeat(best, tree.arity)
        attain = np.repeat(attain, tree.arity)
        ids = int(tree.offsets[m]) + np.arange(current.size, dtype=np.int64)
        deeper_wins = current > best
        best = np.where(deeper_wins, current, best)
        attain = np.where(deeper_wins, ids, attain)
    return MaximalResult(phi, StepFunction(tree, best), attain)


@dataclass(frozen=True)
class Linearization:
    """The average-attaining partition of X induced by a step function.

    ``s_phi`` always contains the root and is sorted by node id (level-major,
    so the root comes first). ``star`` maps every member except the root to
    the smallest member strictly containing it.
    """

    s_phi: np.ndarray
    a_mass: dict[int, float]
    y_avg: dict[int, float]
    star: dict[int, int]

    def to_dict(self) -> dict:
        """JSON-friendly dump: parallel lists over ``s_phi`` plus the star map."""
        ids = [int(i) for i in self.s_phi]
        return {
            "s_phi": ids,
            "a": [self.a_mass[i] for i in ids],
            "y": [self.y_avg[i] for i in ids],
            "star": {str(i): int(self.star[i]) for i in ids if i in self.star},
        }


def linearize(phi: StepFunction) -> Linearization:
    """Compute the attaining-node partition, its masses, and the star map.

    Any step function is admissible here: ancestor chains are finite, so the
    supremum defining the maximal function is attained at every leaf.
    """
    tree = phi.tree
    result = maximal_function(phi)
    node_avg = averages(phi)

    members, counts = np.unique(result.attaining_node, return_counts=True)
    mass = dict(zip(members.tolist(), (counts * tree.leaf_measure).tolist()))
    if 0 not in mass:
        # constant-on-top functions attain somewhere below the root only;
        # the root belongs to the family by definition, with zero mass.
        mass[0] = 0.0
    ids = np.array(sorted(mass), dtype=np.int64)

    member_set = set(mass)
    star: dict[int, int] = {}
    for node_id in ids.tolist():
        if node_id == 0:
            continue
        parent = tree.parent_of(node_id)
        while parent not in member_set:
            parent = tree.parent_of(parent)
        star[node_id] = parent

    y = {i: float(node_avg[i]) for i in ids.tolist()}
    return Linearization(s_phi=ids, a_mass=mass, y_avg=y, star=star)


def reconstruct_maximal(lin: Linearization, result: MaximalResult) -> np.ndarray:
    """Per-leaf maximal values rebuilt from the linearization weights."""
    lookup = {i: lin.y_avg[i] for i in lin.s_phi.tolist()}
    return np.array([lookup[int(i)] for i in result.attaining_node])


def weak_type_deficit(phi: StepFunction, lam: float) -> float:
    """Slack of the weak-type bound at level ``lam``.

    Returns ``(1/lam) * integral of phi over {M phi > lam}`` minus the
    measure of that set; nonnegative up to floating roundoff.
    """
    if lam <= 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    m_phi = maximal_function(phi).m_phi.leaf_values
    mask = m_phi > lam
    leaf_measure = phi.tree.leaf_measure
    restricted = float(phi.leaf_values[mask].sum()) * leaf_measure
    return restricted / lam - float(mask.sum()) * leaf_measure


def level_approximation(phi: StepFunction, level: int) -> StepFunction:
    """Coarsen ``phi`` to the given level by node averages.

    The result is still represented on the leaf level (constant on each
    level-``level`` node), so it composes with every other operation here.
    Its integral equals ``phi``'s and its p-th moments can only shrink.
    """
    tree = phi.tree
    if not 0 <= level <= tree.depth:
        raise DomainError(f"level must be in [0, {tree.depth}], got {level}")
    avg = _level_averages(tree, phi.leaf_values)[level]
    block = tree.arity ** (tree.depth - level)
    return StepFunction(tree, np.repeat(avg, block))


def lp_bound_deficit(phi: StepFunction, p: float) -> float:
    """Slack of the crude p-th power bound ``(p/(p-1))**p * F`` over the
    maximal function's p-th moment; nonnegative for every p > 1."""
    if p <= 1:
        raise DomainError(f"p must be > 1, got {p}")
    m_phi = maximal_function(phi).m_phi
    return (p / (p - 1)) ** p * moment(phi, p) - moment(m_phi, p)
