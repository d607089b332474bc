"""Reservoir wiring: rings of neurons coupled through a Watts-Strogatz graph.

Neurons are numbered ring by ring. Inside a ring, local neuron ``i`` is driven
by local neuron ``i - 1 (mod n)`` with weight 1. For every small-world edge
between rings ``a`` and ``b``, local neuron 0 of each ring (the sender) drives
local neuron 1 of the other ring (the receiver) with weight ``epsilon``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, TopologyError

SENDER = 0
RECEIVER = 1
TOPOLOGY_FORMAT = "oscres-topology/1"


@dataclass(frozen=True)
class RingSpec:
    size: int
    start: int

    @property
    def stop(self) -> int:
        return self.start + self.size

    def neuron(self, local: int) -> int:
        return self.start + local % self.size


def rings_from_sizes(sizes) -> list[RingSpec]:
    sizes = [int(s) for s in sizes]
    if any(s < 3 for s in sizes):
        raise TopologyError(f"ring sizes must be >= 3, got {min(sizes)}")
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
    return [RingSpec(s, int(st)) for s, st in zip(sizes, starts)]


def sample_ring_sizes(n_rings: int, lower: int = 3, upper: int = 10, rng=None) -> list[int]:
    """Draw ``n_rings`` sizes uniformly from ``{lower, ..., upper}``."""
    if lower < 3:
        raise TopologyError(f"rings need at least 3 neurons, lower={lower}")
    if upper < lower:
        raise TopologyError(f"upper={upper} < lower={lower}")
    if n_rings < 1:
        raise TopologyError("n_rings must be >= 1")
    rng = np.random.default_rng(rng)
    return rng.integers(lower, upper + 1, size=n_rings).tolist()


def build_small_world(n_rings: int, k: int, p: float, rng=None) -> list[tuple[int, int]]:
    """Watts-Strogatz edge list over ``n_rings`` nodes, each edge as ``(a, b)`` with a < b.

    Starts from the ring lattice joining each node to its ``k`` nearest
    neighbours, then for each lattice edge ``(u, u+j)`` rewires the far end with
    probability ``p`` to a uniform node, rejecting self-loops and duplicates.
    The edge count ``n_rings * k / 2`` is preserved.
    """
    if k < 2 or k % 2:
        raise TopologyError(f"k must be even and >= 2, got {k}")
    if k >= n_rings:
        raise TopologyError(f"k={k} must be smaller than n_rings={n_rings}")
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"p must lie in [0, 1], got {p}")
    rng = np.random.default_rng(rng)
    n = n_rings
    adj: list[set[int]] = [set() for _ in range(n)]
    for u in range(n):
        for j in range(1, k // 2 + 1):
            v = (u + j) % n
            adj[u].add(v)
            adj[v].add(u)
    for j in range(1, k // 2 + 1):
        for u in range(n):
            v = (u + j) % n
            if v not in adj[u] or rng.random() >= p:
                continue
            if len(adj[u]) >= n - 1:
                continue
            w = int(rng.integers(n))
            while w == u or w in adj[u]:
                w = int(rng.integers(n))
            adj[u].discard(v)
            adj[v].discard(u)
            adj[u].add(w)
            adj[w].add(u)
    return sorted((u, v) for u in range(n) for v in adj[u] if u < v)


def assemble_coupling(rings: list[RingSpec], edges, epsilon: float) -> sp.csr_matrix:
    """Recurrent matrix ``W`` with ``W[i, m]`` the weight of neuron m's output into neuron i."""
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError(f"epsilon must lie in [0, 1], got {epsilon}")
    n_neurons = rings[-1].stop if rings else 0
    rows, cols, vals = [], [], []
    for ring in rings:
        for i in range(ring.size):
            rows.append(ring.neuron(i))
            cols.append(ring.neuron(i - 1))
            vals.append(1.0)
    if epsilon > 0:
        for a, b in edges:
            if a == b:
                raise TopologyError(f"self-loop on ring {a}")
            ra, rb = rings[a], rings[b]
            rows += [rb.neuron(RECEIVER), ra.neuron(RECEIVER)]
            cols += [ra.neuron(SENDER), rb.neuron(SENDER)]
            vals += [epsilon, epsilon]
    W = sp.coo_matrix((vals, (rows, cols)), shape=(n_neurons, n_neurons)).tocsr()
    W.sort_indices()
    return W


def build_input_matrix(
    n_neurons: int,
    n_in: int,
    p: float,
    epsilon: float,
    rng=None,
    row_mask: np.ndarray | None = None,
) -> sp.csr_matrix:
    """Bernoulli(p) input wiring scaled by ``epsilon``; ``row_mask`` limits which neurons may receive."""
    if n_in < 1:
        raise ConfigError("n_in must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"p must lie in [0, 1], got {p}")
    rng = np.random.default_rng(rng)
    mask = rng.random((n_neurons, n_in)) < p
    if row_mask is not None:
        mask &= np.asarray(row_mask, dtype=bool)[:, None]
    W_in = sp.csr_matrix(mask * float(epsilon))
    W_in.eliminate_zeros()
    W_in.sort_indices()
    return W_in


def _streams(seed: int):
    # independent substreams so each piece can be regenerated on its own
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(3)]


@dataclass
class ReservoirTopology:
    rings: list[RingSpec]
    edges: list[tuple[int, int]]
    W: sp.csr_matrix
    W_in: sp.csr_matrix
    epsilon: float
    p: float
    k: int
    seed: int
    size_range: tuple[int, int] = (3, 10)
    input_ring_fraction: float | None = None
    _W_in_T: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    @property
    def n_neurons(self) -> int:
        return self.W.shape[0]

    @property
    def n_rings(self) -> int:
        return len(self.rings)

    @property
    def n_in(self) -> int:
        return self.W_in.shape[1]

    @property
    def sizes(self) -> list[int]:
        return [r.size for r in self.rings]

    def ring_of(self) -> np.ndarray:
        """Ring index of every neuron."""
        return np.repeat(np.arange(self.n_rings), self.sizes)

    def to_dict(self) -> dict:
        return {
            "format": TOPOLOGY_FORMAT,
            "seed": int(self.seed),
            "n_rings": self.n_rings,
            "size_range": list(self.size_range),
            "epsilon": float(self.epsilon),
            "p": float(self.p),
            "k": int(self.k),
            "n_in": int(self.n_in),
            "input_ring_fraction": self.input_ring_fraction,
            "ring_sizes": self.sizes,
            "edges": [list(e) for e in self.edges],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def from_dict(cls, d: dict) -> "ReservoirTopology":
        if d.get("format") != TOPOLOGY_FORMAT:
            raise ConfigError(f"unknown topology format {d.get('format')!r}")
        topo = build_topology(
            n_rings=d["n_rings"],
            epsilon=d["epsilon"],
            p=d["p"],
            k=d["k"],
            n_in=d["n_in"],
            seed=d["seed"],
            size_range=tuple(d["size_range"]),
            input_ring_fraction=d.get("input_ring_fraction"),
        )
        if topo.sizes != list(d["ring_sizes"]) or [list(e) for e in topo.edges] != d["edges"]:
            raise ConfigError("stored ring sizes/edges do not match regeneration from seed")
        return topo

    @classmethod
    def load(cls, path) -> "ReservoirTopology":
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_topology(
    n_rings: int,
    epsilon: float,
    p: float,
    k: int = 4,
    n_in: int = 16,
    seed: int = 0,
    size_range: tuple[int, int] = (3, 10),
    input_ring_fraction: float | None = None,
) -> ReservoirTopology:
    """Build a full reservoir deterministically from ``seed``.

    ``p`` is shared between the rewiring probability and the input Bernoulli
    parameter. With ``input_ring_fraction`` set, only neurons in the first
    ``ceil(fraction * n_rings)`` rings of a seeded permutation receive input.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ConfigError(f"epsilon must lie in (0, 1], got {epsilon}")
    r_sizes, r_graph, r_input = _streams(seed)
    sizes = sample_ring_sizes(n_rings, size_range[0], size_range[1], r_sizes)
    rings = rings_from_sizes(sizes)
    # a single ring has no neighbours to couple to
    edges = build_small_world(n_rings, k, p, r_graph) if n_rings > 1 else []
    W = assemble_coupling(rings, edges, epsilon)
    row_mask = None
    if input_ring_fraction is not None:
        if not 0.0 < input_ring_fraction <= 1.0:
            raise ConfigError("input_ring_fraction must lie in (0, 1]")
        n_sel = int(np.ceil(input_ring_fraction * n_rings))
        chosen = r_input.permutation(n_rings)[:n_sel]
        ring_mask = np.zeros(n_rings, dtype=bool)
        ring_mask[chosen] = True
        row_mask = np.repeat(ring_mask, sizes)
    W_in = build_input_matrix(W.shape[0], n_in, p, epsilon, r_input, row_mask)
    return ReservoirTopology(
        rings=rings,
        edges=edges,
        W=W,
        W_in=W_in,
        epsilon=epsilon,
        p=p,
        k=k,
        seed=seed,
        size_range=tuple(size_range),
        input_ring_fraction=input_ring_fraction,
    )
