"""Instrumented data-structure algorithms emitting replayable step traces.

Every public operation returns the list of atomic steps it performed;
replaying those steps against the recorded initial state reproduces the
final state, which is what the trace files and the structure animations
consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .errors import (
    CycleDetected,
    DuplicateKey,
    EmptyHeap,
    KeyNotFound,
    NegativeWeight,
    OutOfRange,
)

STEP_KINDS = frozenset(
    {
        "compare", "swap", "insert", "delete", "rotate_left", "rotate_right",
        "visit", "enqueue", "dequeue", "relax", "settle", "emit",
    }
)


@dataclass(frozen=True)
class AlgoStep:
    index: int
    kind: str
    operands: dict
    annotation: str = ""


class StepRecorder:
    def __init__(self):
        self.steps: list[AlgoStep] = []

    def emit(self, kind: str, annotation: str = "", **operands) -> None:
        assert kind in STEP_KINDS, kind
        self.steps.append(
            AlgoStep(index=len(self.steps), kind=kind, operands=operands, annotation=annotation)
        )


# -- AVL tree -----------------------------------------------------------------


class AvlNode:
    __slots__ = ("key", "height", "left", "right")

    def __init__(self, key: int):
        self.key = key
        self.height = 0
        self.left: Optional[AvlNode] = None
        self.right: Optional[AvlNode] = None


def _h(node: Optional[AvlNode]) -> int:
    return node.height if node is not None else -1


def _update(node: AvlNode) -> None:
    node.height = 1 + max(_h(node.left), _h(node.right))


def _balance(node: AvlNode) -> int:
    return _h(node.left) - _h(node.right)


class AvlTree:
    """Height-balanced BST over integer keys; deletion replaces with the
    in-order successor."""

    def __init__(self):
        self.root: Optional[AvlNode] = None

    def insert(self, key: int) -> list[AlgoStep]:
        rec = StepRecorder()
        self.root = self._insert(self.root, key, None, "", rec)
        return rec.steps

    def _insert(self, node, key, parent_key, side, rec) -> AvlNode:
        if node is None:
            rec.emit("insert", key=key, parent=parent_key, side=side or None)
            return AvlNode(key)
        rec.emit("compare", key=key, against=node.key)
        if key == node.key:
            raise DuplicateKey(f"key {key} already present")
        if key < node.key:
            node.left = self._insert(node.left, key, node.key, "left", rec)
        else:
            node.right = self._insert(node.right, key, node.key, "right", rec)
        _update(node)
        return self._rebalance(node, rec)

    def delete(self, key: int) -> list[AlgoStep]:
        rec = StepRecorder()
        self.root = self._delete(self.root, key, rec)
        return rec.steps

    def _delete(self, node, key, rec) -> Optional[AvlNode]:
        if node is None:
            raise KeyNotFound(f"key {key} not in tree")
        rec.emit("compare", key=key, against=node.key)
        if key < node.key:
            node.left = self._delete(node.left, key, rec)
        elif key > node.key:
            node.right = self._delete(node.right, key, rec)
        else:
            if node.left is not None and node.right is not None:
                succ = node.right
                rec.emit("visit", key=succ.key)
                while succ.left is not None:
                    succ = succ.left
                    rec.emit("visit", key=succ.key)
                rec.emit("swap", a=node.key, b=succ.key)
                node.key, succ.key = succ.key, node.key
                node.right = self._delete(node.right, key, rec)
            else:
                rec.emit("delete", key=key)
                return node.left if node.left is not None else node.right
        _update(node)
        return self._rebalance(node, rec)

    def _rebalance(self, node: AvlNode, rec: StepRecorder) -> AvlNode:
        bal = _balance(node)
        if bal > 1:
            if _balance(node.left) < 0:
                node.left = self._rotate_left(node.left, rec)
            return self._rotate_right(node, rec)
        if bal < -1:
            if _balance(node.right) > 0:
                node.right = self._rotate_right(node.right, rec)
            return self._rotate_left(node, rec)
        return node

    def _rotate_left(self, node: AvlNode, rec: StepRecorder) -> AvlNode:
        rec.emit("rotate_left", pivot=node.key)
        new_root = node.right
        node.right = new_root.left
        new_root.left = node
        _update(node)
        _update(new_root)
        return new_root

    def _rotate_right(self, node: AvlNode, rec: StepRecorder) -> AvlNode:
        rec.emit("rotate_right", pivot=node.key)
        new_root = node.left
        node.left = new_root.right
        new_root.right = node
        _update(node)
        _update(new_root)
        return new_root

    def inorder(self) -> list[int]:
        out: list[int] = []
        stack: list[AvlNode] = []
        node = self.root
        while node or stack:
            while node:
                stack.append(node)
                node = node.left
            node = stack.pop()
            out.append(node.key)
            node = node.right
        return out

    def shape(self):
        """Nested (key, left, right) tuples; the replayable snapshot form."""

        def walk(node):
            if node is None:
                return None
            return (node.key, walk(node.left), walk(node.right))

        return walk(self.root)


def avl_from_shape(shape) -> AvlTree:
    def build(s):
        if s is None:
            return None
        node = AvlNode(s[0])
        node.left = build(s[1])
        node.right = build(s[2])
        return node

    tree = AvlTree()
    tree.root = build(shape)
    _fix_heights(tree.root)
    return tree


def _fix_heights(node: Optional[AvlNode]) -> int:
    if node is None:
        return -1
    node.height = 1 + max(_fix_heights(node.left), _fix_heights(node.right))
    return node.height


def replay_avl(shape, steps: list[AlgoStep]) -> AvlTree:
    """Mechanically apply recorded steps to a snapshot; no AVL logic reruns."""
    tree = avl_from_shape(shape)
    for step in steps:
        ops = step.operands
        if step.kind == "insert":
            node = AvlNode(ops["key"])
            if ops.get("parent") is None:
                assert tree.root is None
                tree.root = node
            else:
                parent = _find(tree.root, ops["parent"])
                if ops["side"] == "left":
                    parent.left = node
                else:
                    parent.right = node
        elif step.kind == "swap":
            na, nb = _find(tree.root, ops["a"]), _find(tree.root, ops["b"])
            na.key, nb.key = nb.key, na.key
        elif step.kind == "delete":
            tree.root = _splice(tree.root, ops["key"])
        elif step.kind == "rotate_left":
            tree.root = _replay_rotate(tree.root, ops["pivot"], left=True)
        elif step.kind == "rotate_right":
            tree.root = _replay_rotate(tree.root, ops["pivot"], left=False)
        # compare/visit carry no state change
    _fix_heights(tree.root)
    return tree


def _locate(root: Optional[AvlNode], key: int):
    """Find (parent, node, side) by full traversal.

    Mid-replay trees can violate BST order (a swap step leaves the deleted
    key parked at the successor position), so ordered descent is not safe.
    """
    stack = [(None, root, "")]
    while stack:
        parent, node, side = stack.pop()
        if node is None:
            continue
        if node.key == key:
            return parent, node, side
        stack.append((node, node.left, "left"))
        stack.append((node, node.right, "right"))
    raise KeyNotFound(f"replay: key {key} not found")


def _find(root: Optional[AvlNode], key: int) -> AvlNode:
    return _locate(root, key)[1]


def _splice(root, key):
    """Remove the node holding key; it must have at most one child."""
    parent, node, side = _locate(root, key)
    assert node.left is None or node.right is None
    child = node.left if node.left is not None else node.right
    if parent is None:
        return child
    setattr(parent, side, child)
    return root


def _replay_rotate(root, pivot_key, left: bool):
    parent, node, side = _locate(root, pivot_key)
    if left:
        new_root = node.right
        node.right = new_root.left
        new_root.left = node
    else:
        new_root = node.left
        node.left = new_root.right
        new_root.right = node
    if parent is None:
        return new_root
    setattr(parent, side, new_root)
    return root


# -- binary heap -------------------------------------------------------------------


class BinaryHeap:
    """Array heap; min or max order chosen at construction."""

    def __init__(self, mode: str = "min"):
        if mode not in ("min", "max"):
            raise OutOfRange(f"mode must be min or max, got {mode!r}")
        self.mode = mode
        self.items: list[int] = []

    def _before(self, a: int, b: int) -> bool:
        return a < b if self.mode == "min" else a > b

    def insert(self, key: int) -> list[AlgoStep]:
        rec = StepRecorder()
        self.items.append(key)
        i = len(self.items) - 1
        rec.emit("insert", key=key, pos=i)
        while i > 0:
            parent = (i - 1) // 2
            rec.emit("compare", i=i, j=parent, ki=self.items[i], kj=self.items[parent])
            if self._before(self.items[i], self.items[parent]):
                self.items[i], self.items[parent] = self.items[parent], self.items[i]
                rec.emit("swap", i=i, j=parent)
                i = parent
            else:
                break
        return rec.steps

    def extract(self) -> tuple[int, list[AlgoStep]]:
        if not self.items:
            raise EmptyHeap("extract from empty heap")
        rec = StepRecorder()
        top = self.items[0]
        last = len(self.items) - 1
        rec.emit("dequeue", pos=0, key=top)
        if last > 0:
            self.items[0], self.items[last] = self.items[last], self.items[0]
            rec.emit("swap", i=0, j=last)
        self.items.pop()
        rec.emit("delete", pos=last)
        i, n = 0, len(self.items)
        while True:
            best = i
            for child in (2 * i + 1, 2 * i + 2):
                if child < n:
                    rec.emit("compare", i=child, j=best, ki=self.items[child], kj=self.items[best])
                    if self._before(self.items[child], self.items[best]):
                        best = child
            if best == i:
                break
            self.items[i], self.items[best] = self.items[best], self.items[i]
            rec.emit("swap", i=i, j=best)
            i = best
        return top, rec.steps

    def verify(self) -> None:
        for i in range(1, len(self.items)):
            parent = (i - 1) // 2
            assert not self._before(self.items[i], self.items[parent]), (
                f"heap order violated at {i}"
            )


def replay_heap(initial: list[int], steps: list[AlgoStep]) -> list[int]:
    items = list(initial)
    for step in steps:
        ops = step.operands
        if step.kind == "insert":
            items.append(ops["key"])
        elif step.kind == "swap":
            i, j = ops["i"], ops["j"]
            items[i], items[j] = items[j], items[i]
        elif step.kind == "delete":
            assert ops["pos"] == len(items) - 1
            items.pop()
    return items


# -- directed graph, toposort, dijkstra -----------------------------------------------


class DiGraph:
    def __init__(self):
        self.vertices: set[int] = set()
        self.adj: dict[int, list[tuple[int, float]]] = {}

    def add_vertex(self, v: int) -> None:
        self.vertices.add(v)
        self.adj.setdefault(v, [])

    def add_edge(self, u: int, v: int, w: float = 1) -> None:
        self.add_vertex(u)
        self.add_vertex(v)
        self.adj[u].append((v, w))

    def neighbors(self, u: int) -> list[tuple[int, float]]:
        return sorted(self.adj.get(u, []))


def topo_sort(g: DiGraph) -> tuple[list[int], list[AlgoStep]]:
    """Kahn's algorithm, lowest-id tie-break; cycles raise with the residual
    vertex set as witness."""
    import heapq

    rec = StepRecorder()
    indeg = {v: 0 for v in g.vertices}
    for u in g.vertices:
        for v, _ in g.adj.get(u, []):
            indeg[v] += 1
    ready = [v for v in sorted(g.vertices) if indeg[v] == 0]
    heapq.heapify(ready)
    for v in sorted(ready):
        rec.emit("enqueue", vertex=v)
    order: list[int] = []
    while ready:
        v = heapq.heappop(ready)
        rec.emit("dequeue", vertex=v)
        order.append(v)
        rec.emit("emit", vertex=v)
        for u, _ in g.neighbors(v):
            rec.emit("visit", src=v, dst=u)
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(ready, u)
                rec.emit("enqueue", vertex=u)
    if len(order) != len(g.vertices):
        raise CycleDetected(set(g.vertices) - set(order))
    return order, rec.steps


def dijkstra(g: DiGraph, src: int) -> tuple[dict, dict, list[AlgoStep]]:
    """Binary-heap Dijkstra; unreachable vertices come back with inf."""
    import heapq

    for u in g.vertices:
        for v, w in g.adj.get(u, []):
            if w < 0:
                raise NegativeWeight(f"edge {u}->{v} has weight {w}")
    rec = StepRecorder()
    dist: dict[int, float] = {v: math.inf for v in g.vertices}
    pred: dict[int, Optional[int]] = {v: None for v in g.vertices}
    dist[src] = 0
    heap: list[tuple[float, int]] = [(0, src)]
    rec.emit("enqueue", vertex=src, dist=0)
    settled: set[int] = set()
    while heap:
        d, v = heapq.heappop(heap)
        rec.emit("dequeue", vertex=v, dist=d)
        if v in settled:
            continue
        settled.add(v)
        rec.emit("settle", vertex=v, dist=d)
        for u, w in g.neighbors(v):
            nd = d + w
            if nd < dist[u]:
                dist[u] = nd
                pred[u] = v
                rec.emit("relax", src=v, dst=u, dist=nd)
                heapq.heappush(heap, (nd, u))
                rec.emit("enqueue", vertex=u, dist=nd)
    return dist, pred, rec.steps


def replay_search(vertices, steps: list[AlgoStep]):
    """Rebuild toposort/dijkstra outputs from a step trace alone."""
    order: list[int] = []
    dist = {v: math.inf for v in vertices}
    pred = {v: None for v in vertices}
    for step in steps:
        if step.kind == "emit":
            order.append(step.operands["vertex"])
        elif step.kind == "settle":
            dist[step.operands["vertex"]] = step.operands["dist"]
        elif step.kind == "relax":
            pred[step.operands["dst"]] = step.operands["src"]
    return order, dist, pred


# -- scripted runs from scenarios -------------------------------------------------------


def run_scripted(spec: dict) -> list[AlgoStep]:
    algo = spec.get("algo")
    steps: list[AlgoStep] = []
    if algo == "avl":
        tree = AvlTree()
        for op in spec.get("ops", []):
            if op["op"] == "insert":
                steps.extend(tree.insert(op["key"]))
            elif op["op"] == "delete":
                steps.extend(tree.delete(op["key"]))
            else:
                raise OutOfRange(f"unknown avl op {op['op']!r}")
    elif algo == "heap":
        heap = BinaryHeap(spec.get("mode", "min"))
        for op in spec.get("ops", []):
            if op["op"] == "insert":
                steps.extend(heap.insert(op["key"]))
            elif op["op"] == "extract":
                _, more = heap.extract()
                steps.extend(more)
            else:
                raise OutOfRange(f"unknown heap op {op['op']!r}")
    elif algo == "topo":
        g = DiGraph()
        for v in spec.get("vertices", []):
            g.add_vertex(v)
        for u, v in spec.get("edges", []):
            g.add_edge(u, v)
        _, steps = topo_sort(g)
    elif algo == "dijkstra":
        g = DiGraph()
        for v in spec.get("vertices", []):
            g.add_vertex(v)
        for u, v, w in spec.get("edges", []):
            g.add_edge(u, v, w)
        _, _, steps = dijkstra(g, spec["src"])
    else:
        raise OutOfRange(f"unknown algo {algo!r}")
    return [replace(s, index=i) for i, s in enumerate(steps)]
