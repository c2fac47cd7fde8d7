"""Interconnect-tree topology and the unfolded coordinate domain.

A tree is a set of straight segments meeting at nodes.  Nodes touching a
single segment are blocked terminals; nodes touching two or more segments
are interior junctions where stress is continuous and net atomic flux is
zero.  For the neural solver the tree is "unfolded": a small non-physical
gap (the virtual distance) is inserted at every junction so that a smooth
network can represent the kinked stress profile, and the junction
constraints are imposed at the gap endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Segment",
    "Node",
    "InterconnectTree",
    "UnfoldedDomain",
    "JunctionGroup",
    "EndPoint",
    "TreeError",
    "LocateError",
    "build_tree",
    "unfold",
    "locate",
]


class TreeError(ValueError):
    """Raised for invalid tree descriptions (cycles, disconnection, ...)."""


class LocateError(ValueError):
    """Raised when a coordinate is in a virtual gap or outside the domain."""


@dataclass(frozen=True)
class Segment:
    """A straight wire segment between two nodes.

    ``current_density`` is signed along the segment's local +x axis, which
    runs from ``node_a`` (local 0) to ``node_b`` (local ``length``).
    ``width`` and ``spacing`` feed the Joule-heating healing length.
    ``angle_deg``, when set, fixes the planar direction of the local +x
    axis in the unfolded layout.
    """

    id: int
    length: float
    current_density: float
    node_a: int
    node_b: int
    width: float = 0.3e-6
    spacing: float = 0.3e-6
    angle_deg: float | None = None

    def __post_init__(self):
        if self.length <= 0:
            raise TreeError(f"segment {self.id}: length must be > 0")
        if self.width <= 0 or self.spacing <= 0:
            raise TreeError(f"segment {self.id}: width and spacing must be > 0")
        if self.node_a == self.node_b:
            raise TreeError(f"segment {self.id}: node_a == node_b")


@dataclass(frozen=True)
class Node:
    id: int
    kind: str  # "terminal" | "junction"


@dataclass(frozen=True)
class InterconnectTree:
    """Validated tree with terminal/junction classification.

    ``adjacency`` maps node id to a list of ``(segment_id, orientation)``
    where orientation is +1 if the segment's local +x axis points away
    from the node (the node is ``node_a``) and -1 otherwise.  This equals
    the unit inward normal used in the junction flux-balance condition.
    """

    segments: tuple[Segment, ...]
    nodes: tuple[Node, ...]
    adjacency: dict[int, list[tuple[int, int]]]

    @property
    def terminals(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == "terminal"]

    @property
    def junctions(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == "junction"]

    @property
    def total_length(self) -> float:
        return sum(s.length for s in self.segments)

    def segment(self, seg_id: int) -> Segment:
        return self._by_id[seg_id]

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {s.id: s for s in self.segments})


def build_tree(segments: list[Segment]) -> InterconnectTree:
    """Validate segments and classify nodes.

    Raises ``TreeError`` on duplicate segment ids, cycles, or a
    disconnected graph.
    """
    if not segments:
        raise TreeError("empty segment list")
    segments = tuple(sorted(segments, key=lambda s: s.id))
    ids = [s.id for s in segments]
    if len(set(ids)) != len(ids):
        raise TreeError("duplicate segment ids")

    adjacency: dict[int, list[tuple[int, int]]] = {}
    for s in segments:
        adjacency.setdefault(s.node_a, []).append((s.id, +1))
        adjacency.setdefault(s.node_b, []).append((s.id, -1))

    n_nodes = len(adjacency)
    if len(segments) != n_nodes - 1:
        raise TreeError(
            f"{len(segments)} segments on {n_nodes} nodes: not a tree "
            "(cycle or multi-edge)"
        )

    # connectivity check by BFS over node-segment incidence
    start = next(iter(adjacency))
    seen = {start}
    frontier = [start]
    by_id = {s.id: s for s in segments}
    while frontier:
        node = frontier.pop()
        for seg_id, orient in adjacency[node]:
            s = by_id[seg_id]
            other = s.node_b if orient == +1 else s.node_a
            if other not in seen:
                seen.add(other)
                frontier.append(other)
    if len(seen) != n_nodes:
        raise TreeError("disconnected graph")

    nodes = tuple(
        Node(nid, "terminal" if len(incident) == 1 else "junction")
        for nid, incident in sorted(adjacency.items())
    )
    return InterconnectTree(segments, nodes, {k: sorted(v) for k, v in adjacency.items()})


@dataclass(frozen=True)
class EndPoint:
    """A segment end placed in the unfolded layout.

    ``end`` is 0.0 or the segment length; ``normal`` is the inward normal
    of the node this end touches; ``direction`` is the planar unit vector
    of the segment's local +x axis (length ``dim``).
    """

    segment_id: int
    end: float
    coord: np.ndarray
    normal: int
    direction: np.ndarray


@dataclass(frozen=True)
class JunctionGroup:
    """One interior junction: its center and the gap endpoints around it."""

    node_id: int
    center: np.ndarray
    members: tuple[EndPoint, ...]


@dataclass(frozen=True)
class UnfoldedDomain:
    """Tree laid out on a 1-D axis (chains) or in the plane (general trees).

    Each segment keeps its physical length; junctions are widened so that
    every incident segment end sits exactly ``virtual_distance`` away from
    the junction center.  The gaps carry no physics.
    """

    tree: InterconnectTree
    dim: int
    virtual_distance: float
    origin: dict[int, np.ndarray]      # segment id -> position of node_a end
    direction: dict[int, np.ndarray]   # segment id -> unit vector of local +x
    junction_groups: tuple[JunctionGroup, ...]
    terminal_points: tuple[EndPoint, ...]

    def coord(self, seg_id: int, x_local) -> np.ndarray:
        """Unfolded coordinate of a local position along a segment."""
        x_local = np.asarray(x_local, dtype=float)
        return self.origin[seg_id] + np.multiply.outer(x_local, self.direction[seg_id])

    def interval(self, seg_id: int) -> tuple[np.ndarray, np.ndarray]:
        a = self.origin[seg_id]
        return a, a + self.tree.segment(seg_id).length * self.direction[seg_id]


def _layout_angles(deg: int, incoming: float | None) -> list[float]:
    """Directions for segments leaving a node, given the incoming direction."""
    if incoming is None:
        return [2 * math.pi * k / deg for k in range(deg)]
    back = incoming + math.pi
    return [back + 2 * math.pi * k / deg for k in range(1, deg)]


def unfold(tree: InterconnectTree, virtual_distance: float) -> UnfoldedDomain:
    """Lay the tree out with a virtual gap of width ``virtual_distance``
    on each side of every interior junction.

    Chains (all node degrees <= 2) unfold onto a single axis; trees with
    higher-degree junctions are laid out in the plane, with evenly
    distributed directions unless a segment carries ``angle_deg``.
    """
    if virtual_distance <= 0:
        raise TreeError("virtual_distance must be > 0")
    nu = virtual_distance
    max_deg = max(len(v) for v in tree.adjacency.values())
    dim = 1 if max_deg <= 2 else 2

    # root at the lowest-id terminal so chains unfold left to right
    root = min(n.id for n in tree.terminals)
    node_pos: dict[int, np.ndarray] = {root: np.zeros(dim)}
    origin: dict[int, np.ndarray] = {}
    direction: dict[int, np.ndarray] = {}

    def unit(angle: float) -> np.ndarray:
        if dim == 1:
            return np.array([math.cos(angle)])  # +1 or -1 for chains
        return np.array([math.cos(angle), math.sin(angle)])

    # BFS placing each segment; ``incoming[nid]`` is the travel direction
    # (angle) used to arrive at the node
    incoming: dict[int, float | None] = {root: None}
    frontier = [root]
    placed: set[int] = set()
    while frontier:
        nid = frontier.pop(0)
        here = node_pos[nid]
        is_junction = len(tree.adjacency[nid]) > 1
        outgoing = [(sid, o) for sid, o in tree.adjacency[nid] if sid not in placed]
        angles = _layout_angles(len(tree.adjacency[nid]), incoming[nid])
        for (sid, orient), angle in zip(outgoing, angles):
            seg = tree.segment(sid)
            if seg.angle_deg is not None:
                # angle_deg fixes the local +x axis; travel direction flips
                # when we enter through node_b
                angle = math.radians(seg.angle_deg)
                if orient == -1:
                    angle += math.pi
            u = unit(angle)
            start = here + (nu * u if is_junction else 0.0)
            far = start + seg.length * u
            if orient == +1:
                origin[sid] = start
                direction[sid] = u
            else:
                origin[sid] = far
                direction[sid] = -u
            other = seg.node_b if orient == +1 else seg.node_a
            other_is_junction = len(tree.adjacency[other]) > 1
            node_pos[other] = far + (nu * u if other_is_junction else 0.0)
            incoming[other] = angle
            placed.add(sid)
            frontier.append(other)

    def endpoint(nid: int, sid: int, orient: int) -> EndPoint:
        seg = tree.segment(sid)
        end = 0.0 if orient == +1 else seg.length
        return EndPoint(
            segment_id=sid,
            end=end,
            coord=origin[sid] + end * direction[sid],
            normal=orient,
            direction=direction[sid],
        )

    groups = tuple(
        JunctionGroup(
            node_id=n.id,
            center=node_pos[n.id],
            members=tuple(endpoint(n.id, sid, o) for sid, o in tree.adjacency[n.id]),
        )
        for n in tree.junctions
    )
    terms = tuple(
        endpoint(n.id, *tree.adjacency[n.id][0]) for n in tree.terminals
    )
    return UnfoldedDomain(tree, dim, nu, origin, direction, groups, terms)


def locate(domain: UnfoldedDomain, x) -> tuple[int, float]:
    """Map an unfolded coordinate back to ``(segment_id, local position)``.

    ``x`` is a scalar for 1-D domains, a length-2 point for planar ones.
    Raises ``LocateError`` inside a virtual gap or off the domain.
    """
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.shape != (domain.dim,):
        raise LocateError(f"expected a {domain.dim}-D coordinate, got shape {p.shape}")
    tol = 1e-9 * max(s.length for s in domain.tree.segments)
    for seg in domain.tree.segments:
        d = domain.direction[seg.id]
        rel = p - domain.origin[seg.id]
        u = float(rel @ d)
        perp = rel - u * d
        if -tol <= u <= seg.length + tol and float(perp @ perp) <= tol * tol:
            return seg.id, min(max(u, 0.0), seg.length)
    raise LocateError(f"coordinate {x} lies in a virtual gap or outside the domain")
