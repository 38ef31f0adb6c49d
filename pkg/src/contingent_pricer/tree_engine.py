"""Multi-step pricing on a leveled uncertainty tree.

Each non-root node carries the risk-neutral probability of the branch from
its parent and the one-step SDF on that edge. Prices and dividends are
adapted: one number per node. The pricing kernel is the running product of
edge SDFs from the root.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Hashable, Iterable, Mapping, Sequence

from .errors import (
    MissingTerminalPrices,
    NegativeSdf,
    NonFiniteInput,
    TreeStructureError,
    UnknownNode,
    ZeroKernel,
)

NodeId = Hashable
PROB_SUM_TOL = 1e-12
MARTINGALE_TOL = 1e-9


@dataclass(frozen=True)
class TreeNode:
    id: NodeId
    time: int
    parent: NodeId | None = None
    branch_probability: float = 1.0
    sdf_step: float = 1.0
    price: float | None = None
    dividend: float = 0.0


class UncertaintyTree:
    """Immutable rooted tree; construction validates the whole structure.

    Children are kept in insertion order, and every traversal sums over
    children in that order so results are reproducible bit for bit.
    """

    def __init__(self, nodes: Iterable[TreeNode]):
        by_id: dict[NodeId, TreeNode] = {}
        children: dict[NodeId, list[NodeId]] = {}
        for node in nodes:
            if node.id in by_id:
                raise TreeStructureError(f"duplicate node id {node.id!r}")
            for name in ("branch_probability", "sdf_step", "dividend"):
                if not math.isfinite(getattr(node, name)):
                    raise NonFiniteInput(f"node {node.id!r}: {name} is not finite")
            if node.price is not None and not math.isfinite(node.price):
                raise NonFiniteInput(f"node {node.id!r}: price is not finite")
            by_id[node.id] = node
            children[node.id] = []

        roots = [n for n in by_id.values() if n.parent is None]
        if len(roots) != 1:
            raise TreeStructureError(f"expected exactly one root, found {len(roots)}")
        root = roots[0]
        if root.time != 0 or root.branch_probability != 1.0 or root.sdf_step != 1.0:
            raise TreeStructureError("root must have time 0, branch probability 1 and sdf 1")

        for node in by_id.values():
            if node.parent is None:
                continue
            if node.parent not in by_id:
                raise TreeStructureError(f"node {node.id!r} has unknown parent {node.parent!r}")
            if node.time != by_id[node.parent].time + 1:
                raise TreeStructureError(f"node {node.id!r}: time must be parent time + 1")
            if not 0.0 < node.branch_probability <= 1.0:
                raise TreeStructureError(f"node {node.id!r}: branch probability must lie in (0, 1]")
            children[node.parent].append(node.id)

        # breadth-first order doubles as the reachability check
        order = [root.id]
        for nid in order:
            order.extend(children[nid])
        if len(order) != len(by_id):
            raise TreeStructureError("some nodes are not reachable from the root")

        leaves = [nid for nid in order if not children[nid]]
        horizon = by_id[leaves[0]].time
        if any(by_id[nid].time != horizon for nid in leaves):
            raise TreeStructureError("tree is not leveled: leaves at different times")
        for nid, kids in children.items():
            if kids:
                total = math.fsum(by_id[k].branch_probability for k in kids)
                if abs(total - 1.0) > PROB_SUM_TOL:
                    raise TreeStructureError(f"children of {nid!r} have probabilities summing to {total!r}")

        self._nodes = MappingProxyType(by_id)
        self._children = MappingProxyType({k: tuple(v) for k, v in children.items()})
        self._order = tuple(order)
        self.root = root.id
        self.horizon = horizon
        self.leaves = tuple(leaves)

    @property
    def nodes(self) -> Mapping[NodeId, TreeNode]:
        return self._nodes

    @property
    def order(self) -> tuple[NodeId, ...]:
        """Node ids in breadth-first order (parents before children)."""
        return self._order

    def __len__(self) -> int:
        return len(self._nodes)

    def __getitem__(self, node_id: NodeId) -> TreeNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(f"unknown node {node_id!r}") from None

    def children(self, node_id: NodeId) -> tuple[NodeId, ...]:
        self[node_id]
        return self._children[node_id]

    def is_leaf(self, node_id: NodeId) -> bool:
        return not self.children(node_id)

    def descendants_at(self, node_id: NodeId, level: int) -> list[tuple[NodeId, float]]:
        """Nodes at time ``level`` below ``node_id`` with their conditional probabilities."""
        start = self[node_id]
        if not start.time <= level <= self.horizon:
            raise ValueError(f"level {level} is outside [{start.time}, {self.horizon}]")
        frontier = [(node_id, 1.0)]
        for _ in range(level - start.time):
            frontier = [
                (kid, prob * self._nodes[kid].branch_probability)
                for nid, prob in frontier
                for kid in self._children[nid]
            ]
        return frontier

    def with_values(self, prices: Mapping[NodeId, float] | None = None,
                    dividends: Mapping[NodeId, float] | None = None) -> "UncertaintyTree":
        """Copy of the tree with some prices and/or dividends replaced."""
        prices = prices or {}
        dividends = dividends or {}
        return UncertaintyTree(
            TreeNode(n.id, n.time, n.parent, n.branch_probability, n.sdf_step,
                     prices.get(n.id, n.price), dividends.get(n.id, n.dividend))
            for n in (self._nodes[i] for i in self._order)
        )


PricingKernelMap = Mapping[NodeId, float]


def compute_pricing_kernel(tree: UncertaintyTree) -> PricingKernelMap:
    kernel: dict[NodeId, float] = {}
    for nid in tree.order:
        node = tree.nodes[nid]
        if node.sdf_step < 0:
            raise NegativeSdf(f"node {nid!r} has negative sdf_step {node.sdf_step}")
        kernel[nid] = 1.0 if node.parent is None else kernel[node.parent] * node.sdf_step
    return MappingProxyType(kernel)


def conditional_expectation(tree: UncertaintyTree, values: Mapping[NodeId, float], at_node: NodeId,
                            level: int | None = None) -> float:
    """``E[X | I_t]`` at ``at_node`` for ``X`` given on the nodes of ``level``.

    ``level`` defaults to the horizon, so ``values`` are usually leaf values.
    Supplying an intermediate level is how iterated expectations are formed.
    """
    level = tree.horizon if level is None else level
    total = 0.0
    for nid, prob in tree.descendants_at(at_node, level):
        if nid not in values:
            raise ValueError(f"no value supplied for node {nid!r}")
        total += prob * values[nid]
    return total


def _terminal_prices(tree: UncertaintyTree) -> dict[NodeId, float]:
    missing = [nid for nid in tree.leaves if tree.nodes[nid].price is None]
    if missing:
        raise MissingTerminalPrices(f"{len(missing)} leaves have no price, e.g. {missing[0]!r}")
    return {nid: tree.nodes[nid].price for nid in tree.leaves}


def price_backward_induction(tree: UncertaintyTree) -> dict[NodeId, float]:
    """Roll ``p = sum_children prob * sdf * (p_child + d_child)`` back from the leaves."""
    prices = _terminal_prices(tree)
    for nid in reversed(tree.order):
        kids = tree.children(nid)
        if not kids:
            continue
        total = 0.0
        for kid in kids:
            child = tree.nodes[kid]
            total += child.branch_probability * child.sdf_step * (prices[kid] + child.dividend)
        prices[nid] = total
    return {nid: prices[nid] for nid in tree.order}


def price_reduced_lottery(tree: UncertaintyTree, at_node: NodeId) -> float:
    """Price at ``at_node`` by enumerating every path to the horizon.

    Each path contributes its probability times the kernel-weighted dividends
    after ``at_node`` plus the kernel-weighted terminal price; the sum is then
    divided by the kernel at ``at_node``.
    """
    kernel = compute_pricing_kernel(tree)
    a_here = kernel[tree[at_node].id]
    if a_here == 0.0:
        raise ZeroKernel(f"pricing kernel vanishes at node {at_node!r}")
    terminal = _terminal_prices(tree)

    total = 0.0
    stack = [(at_node, 1.0, 0.0)]
    while stack:
        nid, prob, paid = stack.pop()
        kids = tree.children(nid)
        if not kids:
            total += prob * (paid + kernel[nid] * terminal[nid])
            continue
        for kid in reversed(kids):
            child = tree.nodes[kid]
            stack.append((kid, prob * child.branch_probability, paid + kernel[kid] * child.dividend))
    return total / a_here


@dataclass(frozen=True)
class MartingaleReport:
    residuals: Mapping[NodeId, float]
    max_residual: float
    threshold: float
    verdict: str

    @property
    def is_martingale(self) -> bool:
        return self.verdict == "martingale"


def check_martingale(tree: UncertaintyTree, prices: Mapping[NodeId, float]) -> MartingaleReport:
    """Residuals ``a_t p_t - E[a_T p_T | node]`` at every internal node."""
    kernel = compute_pricing_kernel(tree)
    discounted = {nid: kernel[nid] * prices[nid] for nid in tree.order}
    expected: dict[NodeId, float] = {}
    residuals: dict[NodeId, float] = {}
    for nid in reversed(tree.order):
        kids = tree.children(nid)
        if not kids:
            expected[nid] = discounted[nid]
            continue
        expected[nid] = sum(tree.nodes[k].branch_probability * expected[k] for k in kids)
        residuals[nid] = discounted[nid] - expected[nid]
    max_residual = max((abs(r) for r in residuals.values()), default=0.0)
    threshold = MARTINGALE_TOL * (1.0 + max(abs(v) for v in discounted.values()))
    verdict = "martingale" if max_residual <= threshold else "not_martingale"
    return MartingaleReport(MappingProxyType(residuals), max_residual, threshold, verdict)


def expand_lattice(
    transitions: Sequence[Mapping[Hashable, Sequence[tuple[Hashable, float, float]]]],
    terminal_prices: Mapping[Hashable, float],
    dividends: Sequence[Mapping[Hashable, float]] | None = None,
    root_state: Hashable = 0,
) -> UncertaintyTree:
    """Expand a recombining lattice into the full path tree.

    ``transitions[t][s]`` lists ``(next_state, probability, sdf)`` edges out of
    state ``s`` at time ``t``. ``dividends[t][s]`` is the dividend paid in
    state ``s`` at time ``t`` (missing entries are 0). Node ids are tuples of
    visited states, so paths that meet again in the lattice stay distinct.
    """
    T = len(transitions)

    def dividend(t, s):
        if dividends is None or t >= len(dividends):
            return 0.0
        return float(dividends[t].get(s, 0.0))

    nodes = [TreeNode((root_state,), 0, None, 1.0, 1.0, terminal_prices.get(root_state) if T == 0 else None,
                      dividend(0, root_state))]
    frontier = [(root_state,)]
    for t in range(T):
        nxt = []
        for path in frontier:
            for state, prob, sdf in transitions[t][path[-1]]:
                if prob == 0.0:
                    continue
                child = path + (state,)
                price = terminal_prices[state] if t + 1 == T else None
                nodes.append(TreeNode(child, t + 1, path, float(prob), float(sdf), price, dividend(t + 1, state)))
                nxt.append(child)
        frontier = nxt
    return UncertaintyTree(nodes)


def binomial_tree(
    steps: int,
    up_probability: float,
    sdf_up: float,
    sdf_down: float | None = None,
    leaf_price: Callable[[int, int], float] = lambda ups, steps: 0.0,
    dividend: Callable[[int, int], float] = lambda t, ups: 0.0,
) -> UncertaintyTree:
    """Non-recombining binomial tree; node ids are strings of 'u'/'d' moves."""
    sdf_down = sdf_up if sdf_down is None else sdf_down
    nodes = [TreeNode("", 0, None, 1.0, 1.0, leaf_price(0, 0) if steps == 0 else None, dividend(0, 0))]
    frontier = [""]
    for t in range(1, steps + 1):
        nxt = []
        for path in frontier:
            for move, prob, sdf in (("u", up_probability, sdf_up), ("d", 1.0 - up_probability, sdf_down)):
                child = path + move
                ups = child.count("u")
                price = leaf_price(ups, steps) if t == steps else None
                nodes.append(TreeNode(child, t, path, prob, sdf, price, dividend(t, ups)))
                nxt.append(child)
        frontier = nxt
    return UncertaintyTree(nodes)


def tree_from_records(records: Iterable[Mapping]) -> UncertaintyTree:
    """Build a tree from ``{id, parent, time, prob, sdf, price?, dividend}`` records."""
    nodes = []
    for i, rec in enumerate(records):
        try:
            price = rec.get("price")
            nodes.append(TreeNode(
                id=rec["id"],
                time=int(rec["time"]),
                parent=rec.get("parent"),
                branch_probability=float(rec.get("prob", 1.0)),
                sdf_step=float(rec.get("sdf", 1.0)),
                price=None if price is None else float(price),
                dividend=float(rec.get("dividend", 0.0)),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise TreeStructureError(f"record {i}: {exc!r}") from None
    return UncertaintyTree(nodes)


def load_tree(path: str | os.PathLike) -> UncertaintyTree:
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, Mapping):
        data = data.get("nodes", [])
    return tree_from_records(data)


def tree_to_records(tree: UncertaintyTree) -> list[dict]:
    return [
        {"id": n.id, "parent": n.parent, "time": n.time, "prob": n.branch_probability,
         "sdf": n.sdf_step, "price": n.price, "dividend": n.dividend}
        for n in (tree.nodes[i] for i in tree.order)
    ]
