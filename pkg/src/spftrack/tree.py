"""Minimum spanning tree over detected cells.

The tracker sweeps cells parent-first, so the cell graph must be a tree with
a deterministic order. Edges weigh the Euclidean distance between centroids
(z already in physical units); the root is the hop-count center of the tree
and children are visited in ascending id, which fixes the sweep uniquely.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class CellTree:
    """Rooted spanning tree over cell centroids.

    ``order`` lists every cell id parent-first starting at ``root``;
    ``parent`` maps each non-root id to its parent id.
    """

    nodes: np.ndarray  # (K, 3) float64 centroid positions
    edges: list  # [(k1, k2, weight)] with k1 < k2
    root: int
    parent: dict = field(repr=False)
    order: list = field(repr=False)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def build_mst(nodes):
    """Kruskal MST edges over the complete graph of ``nodes``.

    Ties in edge weight are broken by the (k1, k2) id pair so the tree is
    unique. Returns [(k1, k2, weight)] with k1 < k2, sorted as processed.
    """
    nodes = np.asarray(nodes, dtype=np.float64)
    n = len(nodes)
    if n == 0:
        raise ValueError("cannot build a tree over zero nodes")
    diff = nodes[:, None, :] - nodes[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    i_idx, j_idx = np.triu_indices(n, k=1)
    order = np.lexsort((j_idx, i_idx, dist[i_idx, j_idx]))
    uf = _UnionFind(n)
    picked = []
    for e in order:
        a, b = int(i_idx[e]), int(j_idx[e])
        if uf.union(a, b):
            picked.append((a, b, float(dist[a, b])))
            if len(picked) == n - 1:
                break
    return picked


def _adjacency(n, edges):
    adj = [[] for _ in range(n)]
    for a, b, _ in edges:
        adj[a].append(b)
        adj[b].append(a)
    for lst in adj:
        lst.sort()
    return adj


def _bfs_depths(adj, start):
    depth = np.full(len(adj), -1, dtype=np.int64)
    depth[start] = 0
    queue = [start]
    while queue:
        nxt = []
        for u in queue:
            for v in adj[u]:
                if depth[v] < 0:
                    depth[v] = depth[u] + 1
                    nxt.append(v)
        queue = nxt
    return depth

def choose_root(n, edges):
    """Pick the hop-count center: minimum eccentricity, lowest id on ties."""
    adj = _adjacency(n, edges)
    best_id, best_ecc = 0, None
    for k in range(n):
        ecc = int(_bfs_depths(adj, k).max())
        if best_ecc is None or ecc < best_ecc:
            best_id, best_ecc = k, ecc
    return best_id


def topological_order(n, edges, root):
    """BFS order from ``root`` with children in ascending id, plus parents."""
    adj = _adjacency(n, edges)
    parent = {}
    order = [root]
    seen = {root}
    queue = [root]
    while queue:
        nxt = []
        for u in queue:
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    parent[v] = u
                    order.append(v)
                    nxt.append(v)
        queue = nxt
    if len(order) != n:
        raise ValueError("edge list does not connect all nodes")
    return order, parent


def build_cell_tree(nodes):
    """Build the full rooted tree the tracker sweeps."""
    nodes = np.asarray(nodes, dtype=np.float64)
    edges = build_mst(nodes)
    root = choose_root(len(nodes), edges)
    order, parent = topological_order(len(nodes), edges, root)
    return CellTree(nodes=nodes, edges=edges, root=root, parent=parent, order=order)


def write_tree(path, tree):
    """Write ``root <id>`` then one ``edge k1 k2 weight`` line per edge."""
    with open(path, "w") as fh:
        fh.write(f"root {tree.root}\n")
        for a, b, w in tree.edges:
            fh.write(f"edge {a} {b} {w}\n")


def read_tree(path, nodes):
    """Rebuild a CellTree from a tree file and its node positions."""
    nodes = np.asarray(nodes, dtype=np.float64)
    root = None
    edges = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "root" and len(parts) == 2:
                root = int(parts[1])
            elif parts[0] == "edge" and len(parts) == 4:
                edges.append((int(parts[1]), int(parts[2]), float(parts[3])))
            else:
                raise ValueError(f"{path}: malformed tree line {line!r}")
    if root is None:
        raise ValueError(f"{path}: missing root line")
    if len(edges) != len(nodes) - 1:
        raise ValueError(
            f"{path}: expected {len(nodes) - 1} edges for {len(nodes)} nodes, got {len(edges)}"
        )
    order, parent = topological_order(len(nodes), edges, root)
    return CellTree(nodes=nodes, edges=edges, root=root, parent=parent, order=order)
