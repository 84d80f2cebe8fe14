import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from netlab.algokit import (
    AvlTree,
    BinaryHeap,
    DiGraph,
    dijkstra,
    replay_avl,
    replay_heap,
    replay_search,
    run_scripted,
    topo_sort,
)
from netlab.errors import (
    CycleDetected,
    DuplicateKey,
    EmptyHeap,
    KeyNotFound,
    NegativeWeight,
    OutOfRange,
)


# -- independent invariant scans (test-side oracles) ---------------------------------


def scan_avl(tree: AvlTree):
    """Full scan: BST order, stored heights correct, balance in {-1,0,1}."""

    def walk(node, lo, hi):
        if node is None:
            return -1, 0
        assert lo < node.key < hi, "BST order violated"
        hl, nl = walk(node.left, lo, node.key)
        hr, nr = walk(node.right, node.key, hi)
        assert node.height == 1 + max(hl, hr), "stored height wrong"
        assert abs(hl - hr) <= 1, "balance factor out of range"
        return node.height, nl + nr + 1

    height, count = walk(tree.root, -math.inf, math.inf)
    if count:
        assert height <= 1.44 * math.log2(count + 2)
    return count, height


# -- AVL ---------------------------------------------------------------------------


def test_avl_ascending_insert_forces_single_left_rotation():
    tree = AvlTree()
    steps = []
    for k in (1, 2, 3):
        steps.extend(tree.insert(k))
    rotations = [s for s in steps if s.kind.startswith("rotate")]
    assert [s.kind for s in rotations] == ["rotate_left"]
    assert tree.root.key == 2
    scan_avl(tree)


def test_avl_zigzag_insert_forces_double_rotation():
    tree = AvlTree()
    steps = []
    for k in (3, 1, 2):
        steps.extend(tree.insert(k))
    kinds = sorted(s.kind for s in steps if s.kind.startswith("rotate"))
    assert kinds == ["rotate_left", "rotate_right"]
    assert tree.root.key == 2
    scan_avl(tree)


def test_avl_duplicate_and_missing_keys_rejected():
    tree = AvlTree()
    tree.insert(5)
    with pytest.raises(DuplicateKey):
        tree.insert(5)
    with pytest.raises(KeyNotFound):
        tree.delete(42)


def test_avl_thousand_random_inserts_stay_balanced():
    rng = random.Random(7)
    keys = rng.sample(range(100000), 1000)
    tree = AvlTree()
    for k in keys:
        tree.insert(k)
    assert tree.inorder() == sorted(keys)
    count, height = scan_avl(tree)
    assert count == 1000


def test_avl_mixed_ops_keep_invariants_after_every_operation():
    rng = random.Random(99)
    tree = AvlTree()
    present = set()
    for _ in range(600):
        if present and rng.random() < 0.4:
            k = rng.choice(sorted(present))
            tree.delete(k)
            present.discard(k)
        else:
            k = rng.randrange(500)
            if k in present:
                continue
            tree.insert(k)
            present.add(k)
        scan_avl(tree)
        assert tree.inorder() == sorted(present)


def test_avl_delete_uses_inorder_successor():
    tree = AvlTree()
    for k in (10, 5, 20, 15, 30):
        tree.insert(k)
    steps = tree.delete(10)
    swaps = [s for s in steps if s.kind == "swap"]
    assert swaps and swaps[0].operands == {"a": 10, "b": 15}
    assert tree.root.key == 15


def test_avl_replay_reproduces_final_shape():
    rng = random.Random(3)
    tree = AvlTree()
    present = set()
    for _ in range(200):
        before = tree.shape()
        if present and rng.random() < 0.4:
            k = rng.choice(sorted(present))
            steps = tree.delete(k)
            present.discard(k)
        else:
            k = rng.randrange(300)
            if k in present:
                continue
            steps = tree.insert(k)
            present.add(k)
        assert replay_avl(before, steps).shape() == tree.shape()


# -- heaps -------------------------------------------------------------------------


def test_min_heap_basic_extract():
    h = BinaryHeap("min")
    for k in (5, 3, 8):
        h.insert(k)
    assert h.extract()[0] == 3


def test_max_heap_basic_extract():
    h = BinaryHeap("max")
    for k in (5, 3, 8):
        h.insert(k)
    assert h.extract()[0] == 8


def test_heap_extract_empty_rejected():
    with pytest.raises(EmptyHeap):
        BinaryHeap("min").extract()


@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=60),
       st.sampled_from(["min", "max"]))
@settings(max_examples=100, derandomize=True)
def test_heap_drain_matches_sort_oracle(keys, mode):
    h = BinaryHeap(mode)
    for k in keys:
        h.insert(k)
        h.verify()
    drained = []
    while h.items:
        top, _ = h.extract()
        h.verify()
        drained.append(top)
    assert drained == sorted(keys, reverse=(mode == "max"))


@given(st.lists(st.integers(0, 100), min_size=1, max_size=40))
@settings(max_examples=60, derandomize=True)
def test_heap_replay_reproduces_array(keys):
    h = BinaryHeap("min")
    all_steps = []
    for k in keys:
        all_steps.extend(h.insert(k))
    mid = list(h.items)
    drain_steps = []
    for _ in range(len(keys) // 2):
        _, steps = h.extract()
        drain_steps.extend(steps)
    assert replay_heap([], all_steps) == mid
    assert replay_heap(mid, drain_steps) == h.items


# -- topological sort -----------------------------------------------------------------


def test_topo_lowest_id_tie_break():
    g = DiGraph()
    for u, v in ((1, 2), (1, 3), (2, 4)):
        g.add_edge(u, v)
    order, steps = topo_sort(g)
    assert order == [1, 2, 3, 4]
    assert [s.operands["vertex"] for s in steps if s.kind == "emit"] == order


def test_topo_cycle_witness():
    g = DiGraph()
    g.add_edge(1, 2)
    g.add_edge(2, 1)
    g.add_edge(3, 1)  # 3 is sortable, the cycle is {1,2}
    with pytest.raises(CycleDetected) as exc:
        topo_sort(g)
    assert exc.value.witness == {1, 2}


def test_topo_random_dags_satisfy_edge_order():
    rng = random.Random(12)
    for _ in range(30):
        n = rng.randint(2, 50)
        g = DiGraph()
        for v in range(n):
            g.add_vertex(v)
        edges = set()
        for _ in range(rng.randint(0, n * 2)):
            u, v = sorted(rng.sample(range(n), 2))
            edges.add((u, v))  # u < v guarantees acyclicity
            g.add_edge(u, v)
        order, _ = topo_sort(g)
        pos = {v: i for i, v in enumerate(order)}
        assert len(order) == n
        for u, v in edges:
            assert pos[u] < pos[v]


# -- dijkstra ---------------------------------------------------------------------------


def bellman_ford(g: DiGraph, src):
    dist = {v: math.inf for v in g.vertices}
    dist[src] = 0
    for _ in range(len(g.vertices) - 1):
        for u in g.vertices:
            for v, w in g.adj.get(u, ()):
                if dist[u] + w < dist[v]:
                    dist[v] = dist[u] + w
    return dist


def test_dijkstra_triangle():
    g = DiGraph()
    g.add_edge(0, 1, 1)
    g.add_edge(0, 2, 4)
    g.add_edge(1, 2, 2)
    dist, pred, steps = dijkstra(g, 0)
    assert dist[2] == 3
    assert pred[2] == 1
    assert [s for s in steps if s.kind == "settle"]


def test_dijkstra_unreachable_vertex_is_infinite():
    g = DiGraph()
    g.add_edge(0, 1, 1)
    g.add_vertex(9)
    dist, _, _ = dijkstra(g, 0)
    assert dist[9] == math.inf


def test_dijkstra_negative_weight_rejected():
    g = DiGraph()
    g.add_edge(0, 1, -2)
    with pytest.raises(NegativeWeight):
        dijkstra(g, 0)


def test_dijkstra_matches_bellman_ford_on_random_graphs():
    rng = random.Random(5)
    for _ in range(60):
        n = rng.randint(2, 30)
        g = DiGraph()
        for v in range(n):
            g.add_vertex(v)
        for _ in range(rng.randint(n, n * 3)):
            u, v = rng.randrange(n), rng.randrange(n)
            if u != v:
                g.add_edge(u, v, rng.randint(0, 100))
        src = rng.randrange(n)
        dist, pred, steps = dijkstra(g, src)
        assert dist == bellman_ford(g, src)
        # replaying the steps reproduces the outputs
        r_order, r_dist, r_pred = replay_search(g.vertices, steps)
        assert r_dist == dist


# -- scripted runs ------------------------------------------------------------------------


def test_run_scripted_reindexes_steps_contiguously():
    steps = run_scripted(
        {"algo": "heap", "mode": "min",
         "ops": [{"op": "insert", "key": 5}, {"op": "insert", "key": 3}, {"op": "extract"}]}
    )
    assert [s.index for s in steps] == list(range(len(steps)))


def test_run_scripted_unknown_algo_rejected():
    with pytest.raises(OutOfRange):
        run_scripted({"algo": "bogosort"})
