"""Closed-form references: steady state, single-wire series solution,
time-transform integral, nucleation time and the conservation diagnostic.

These are the independent oracles the mesh-based and neural solvers are
checked against.  A "stress field" here is any object with a method
``stress(segment_id, x_local, t)`` returning Pa, vectorized over
``x_local``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import InterconnectTree
from .physics import MaterialParams, em_driving_force

__all__ = [
    "SteadyState",
    "steady_state",
    "series_solution_single_wire",
    "series_tail_bound",
    "integrate_time_transform",
    "nucleation_time",
    "stress_integral",
    "tree_max_stress",
]


@dataclass(frozen=True)
class SteadyState:
    """Piecewise-linear steady stress: sigma_i(x) = start_i - G_i * x."""

    tree: InterconnectTree
    start: dict[int, float]   # stress at each segment's local x = 0
    slope: dict[int, float]   # equals -G_i

    def stress(self, seg_id: int, x_local, t=None):
        x = np.asarray(x_local, dtype=float)
        out = self.start[seg_id] + self.slope[seg_id] * x
        if t is not None:
            out = out * np.ones_like(np.asarray(t, dtype=float))
        return out


def steady_state(tree: InterconnectTree, params: MaterialParams) -> SteadyState:
    """Zero-flux steady state of the DC-stressed tree.

    Each segment has slope -G_i, stress is continuous at junctions, and
    the free constant is fixed by atom conservation: the tree-wide
    integral of sigma equals zero (the initial stress integrates to 0).
    """
    G = {s.id: em_driving_force(params, s.current_density) for s in tree.segments}

    # propagate node stresses from an arbitrary reference by BFS
    ref = tree.nodes[0].id
    node_sigma = {ref: 0.0}
    frontier = [ref]
    while frontier:
        nid = frontier.pop()
        for sid, orient in tree.adjacency[nid]:
            s = tree.segment(sid)
            other = s.node_b if orient == +1 else s.node_a
            if other in node_sigma:
                continue
            delta = -G[sid] * s.length  # sigma drop along local +x
            node_sigma[other] = node_sigma[nid] + (delta if orient == +1 else -delta)
            frontier.append(other)

    start = {s.id: node_sigma[s.node_a] for s in tree.segments}
    # shift so that the integral over the tree vanishes
    total = sum(
        start[s.id] * s.length - 0.5 * G[s.id] * s.length**2 for s in tree.segments
    )
    shift = total / tree.total_length
    start = {sid: v - shift for sid, v in start.items()}
    return SteadyState(tree, start, {sid: -g for sid, g in G.items()})


def series_solution_single_wire(L, kappa_const, G, x, t, n_terms=200):
    """Transient stress on a single blocked wire with constant diffusivity.

    Cosine eigen-series: sigma(x, t) = G (L/2 - x)
    - sum over odd n of (4 G L / (n pi)^2) cos(n pi x / L) exp(-kappa (n pi / L)^2 t).
    At t = 0 the series reconstructs 0; at large t only the linear steady
    state remains.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    x = np.asarray(x, dtype=float)
    out = G * (L / 2.0 - x)
    ns = np.arange(1, n_terms + 1, 2)  # odd modes only
    coeff = 4.0 * G * L / (np.pi * ns) ** 2
    decay = np.exp(-kappa_const * (ns * np.pi / L) ** 2 * t)
    out = out - np.tensordot(coeff * decay, np.cos(np.outer(ns, x) * np.pi / L), axes=1)
    return out


def series_tail_bound(L, G, n_terms):
    """Bound on the truncation error of the cosine series (worst over x, t)."""
    n0 = n_terms + 1 if n_terms % 2 == 1 else n_terms
    # sum_{odd n > n_terms} 4GL/(n pi)^2 <= 4GL/pi^2 * 1/(2(n0-1))
    return 4.0 * abs(G) * L / np.pi**2 / (2.0 * max(n0 - 1, 1))


def integrate_time_transform(kappa_of_t, t_end, steps):
    """Classic 4th-order Runge-Kutta integration of
    T'(t) = integral_0^t kappa(t') / kappa(0) dt'.

    Returns (times, T') sampled at steps+1 uniform points on [0, t_end].
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    k0 = float(kappa_of_t(0.0))
    if k0 <= 0:
        raise ValueError("kappa(0) must be > 0")
    h = t_end / steps
    times = np.linspace(0.0, t_end, steps + 1)
    rate = lambda t: float(kappa_of_t(t)) / k0
    y = np.empty(steps + 1)
    y[0] = 0.0
    for i in range(steps):
        t = times[i]
        k1 = rate(t)
        k2 = rate(t + h / 2)
        k3 = k2  # rate does not depend on y; k2 == k3 for RK4
        k4 = rate(t + h)
        y[i + 1] = y[i] + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return times, y


def tree_max_stress(field, tree: InterconnectTree, t, points_per_segment=200):
    """Max of sigma over the whole tree at time t."""
    best = -np.inf
    for s in tree.segments:
        xs = np.linspace(0.0, s.length, points_per_segment)
        best = max(best, float(np.max(field.stress(s.id, xs, t))))
    return best


def nucleation_time(field, tree, params: MaterialParams, t_max, rel_tol=1e-3):
    """Earliest time at which the peak tensile stress reaches the critical
    stress, or None if it never does within [0, t_max].

    Coarse log-spaced scan followed by bisection to ``rel_tol`` relative.
    """
    crit = params.critical_stress
    if crit <= 0:
        return 0.0
    peak = lambda t: tree_max_stress(field, tree, t)
    if peak(t_max) < crit:
        return None
    ts = np.concatenate([[0.0], np.geomspace(t_max * 1e-6, t_max, 80)])
    lo, hi = 0.0, t_max
    for a, b in zip(ts[:-1], ts[1:]):
        if peak(b) >= crit:
            lo, hi = a, b
            break
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if peak(mid) >= crit:
            hi = mid
        else:
            lo = mid
    return hi


def stress_integral(field, tree: InterconnectTree, t, min_points=1000):
    """Integral of sigma over all segments (Pa m) by composite trapezoid.

    With zero-flux boundaries and zero initial stress this is a
    conservation diagnostic: it should stay at 0.
    """
    total = 0.0
    for s in tree.segments:
        n = max(int(np.ceil(min_points * s.length / tree.total_length)), 32)
        xs = np.linspace(0.0, s.length, n)
        total += float(np.trapezoid(field.stress(s.id, xs, t), xs))
    return total
