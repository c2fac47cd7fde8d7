"""Mesh-based reference solver for stress evolution on interconnect trees.

Conservative finite-volume discretization of
d(sigma)/dt = d/dx [ kappa (d(sigma)/dx + G) ] on the meshed tree:
diffusivity is evaluated at cell faces (arithmetic mean of node values),
terminals impose zero flux through the outer face, and each junction is a
single shared unknown whose control volume collects the incident
half-cells, which makes the discrete tree-wide integral of sigma exactly
conserved.  Junctions use the physical shared node; the virtual distance
is a neural-network device only.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import InterconnectTree
from .physics import (
    MaterialParams,
    ThermalModel,
    em_driving_force,
    kappa_and_gradient,
)

__all__ = ["FdmSolution", "fdm_solve", "StabilityError"]


class StabilityError(RuntimeError):
    """Explicit scheme run with a time step above the diffusion limit."""


@dataclass
class FdmSolution:
    """Gridded solution, queryable by bilinear interpolation.

    ``seg_values[sid]`` has shape (n_times, mesh_points).
    """

    tree: InterconnectTree
    scheme: str
    seg_grids: dict[int, np.ndarray]
    times: np.ndarray
    seg_values: dict[int, np.ndarray]
    meta: dict = field(default_factory=dict)

    def stress(self, seg_id: int, x_local, t):
        xs = self.seg_grids[seg_id]
        vals = self.seg_values[seg_id]
        t = float(t)
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), len(self.times) - 2)
        t0, t1 = self.times[i], self.times[i + 1]
        w = 0.0 if t1 == t0 else np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
        x = np.asarray(x_local, dtype=float)
        lo = np.interp(x, xs, vals[i])
        hi = np.interp(x, xs, vals[i + 1])
        return (1.0 - w) * lo + w * hi

    def junction_stress(self, node_id: int, t):
        """Stress at a junction node over (possibly vectorized) times."""
        sid, orient = self.tree.adjacency[node_id][0]
        x = 0.0 if orient == +1 else self.tree.segment(sid).length
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.array([float(self.stress(sid, x, tv)) for tv in ts])
        return out if np.ndim(t) else float(out[0])


def _time_grid(dt, t_end, mode, output_times):
    """Uniform grid, or a ramp whose step grows with t (resolves the steep
    early transient) capped at dt."""
    if mode == "uniform":
        n = int(np.ceil(t_end / dt))
        ts = np.linspace(0.0, t_end, n + 1)
    else:
        ts = [0.0]
        t = dt * 1e-3
        while t < t_end:
            ts.append(t)
            t += min(dt, max(dt * 1e-3, 0.25 * t))
        ts.append(t_end)
        ts = np.array(ts)
    if output_times is not None:
        ts = np.union1d(ts, np.asarray(output_times, dtype=float))
        ts = ts[(ts >= 0.0) & (ts <= t_end * (1 + 1e-12))]
    return ts


def fdm_solve(
    tree: InterconnectTree,
    thermal: ThermalModel,
    params: MaterialParams,
    mesh_points_per_segment: int = 101,
    dt: float = 1e5,
    t_end: float = 1e8,
    scheme: str = "implicit",
    time_grid: str = "auto",
    output_times=None,
) -> FdmSolution:
    """Solve the tree stress-evolution system from sigma = 0.

    ``scheme`` is "implicit" (backward Euler, unconditionally stable,
    default) or "explicit" (forward Euler with a stability check).
    ``time_grid`` is "auto" (ramped steps, implicit only) or "uniform".
    """
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be > 0")
    if scheme not in ("implicit", "explicit"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if mesh_points_per_segment < 2:
        raise ValueError("need at least 2 mesh points per segment")

    M = mesh_points_per_segment
    segs = tree.segments
    node_dof = {n.id: i for i, n in enumerate(tree.nodes)}
    ndof = len(node_dof)
    seg_dofs: dict[int, np.ndarray] = {}
    for s in segs:
        g = np.empty(M, dtype=int)
        g[0] = node_dof[s.node_a]
        g[-1] = node_dof[s.node_b]
        g[1:-1] = np.arange(ndof, ndof + M - 2)
        ndof += M - 2
        seg_dofs[s.id] = g

    # control-volume weights
    w = np.zeros(ndof)
    for s in segs:
        h = s.length / (M - 1)
        g = seg_dofs[s.id]
        w[g[1:-1]] += h
        w[g[0]] += h / 2
        w[g[-1]] += h / 2

    G = {s.id: em_driving_force(params, s.current_density) for s in segs}
    grids = {s.id: np.linspace(0.0, s.length, M) for s in segs}

    # static sparsity pattern: per face, 4 matrix entries
    rows, cols = [], []
    for s in segs:
        g = seg_dofs[s.id]
        a, b = g[:-1], g[1:]
        rows += [a, a, b, b]
        cols += [b, a, a, b]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)

    kappa_varies = thermal.case != "I"

    def face_kappa(t):
        out = {}
        for s in segs:
            xc = grids[s.id] - s.length / 2
            k, _ = kappa_and_gradient(thermal, params, s, xc, t)
            out[s.id] = 0.5 * (k[:-1] + k[1:])
        return out

    def assemble(t):
        """A, b with w * d(sigma)/dt = A sigma + b."""
        fk = face_kappa(t)
        data = []
        b = np.zeros(ndof)
        for s in segs:
            h = s.length / (M - 1)
            g = seg_dofs[s.id]
            c = fk[s.id] / h
            data += [c, -c, c, -c]
            gf = fk[s.id] * G[s.id]
            np.add.at(b, g[:-1], gf)
            np.add.at(b, g[1:], -gf)
        A = sp.csr_matrix(
            (np.concatenate(data), (rows, cols)), shape=(ndof, ndof)
        )
        max_cond = max(float(np.max(fk[s.id])) / (s.length / (M - 1)) ** 2 for s in segs)
        return A, b, max_cond

    times = _time_grid(dt, t_end, "uniform" if scheme == "explicit" else time_grid, output_times)
    sigma = np.zeros(ndof)
    history = np.zeros((len(times), ndof))

    t0 = _time.perf_counter()
    A, b, max_cond = assemble(times[0])
    solver = None
    solver_step = None
    Winv = 1.0 / w
    for i in range(1, len(times)):
        step = times[i] - times[i - 1]
        if step <= 0:
            history[i] = sigma
            continue
        if scheme == "explicit":
            if kappa_varies:
                A, b, max_cond = assemble(times[i - 1])
            if max_cond * step > 0.5 + 1e-12:
                raise StabilityError(
                    f"explicit scheme unstable: max kappa*dt/h^2 = "
                    f"{max_cond * step:.3g} > 0.5 (reduce dt below "
                    f"{0.5 / max_cond:.3g} s)"
                )
            sigma = sigma + step * Winv * (A @ sigma + b)
        else:
            if kappa_varies:
                A, b, _ = assemble(times[i])
            # (W/dt - A) sigma' = W/dt sigma + b
            if kappa_varies or solver is None or step != solver_step:
                lhs = (sp.diags(w / step) - A).tocsc()
                solver = spla.splu(lhs)
                solver_step = step
            sigma = solver.solve(w / step * sigma + b)
        if not np.all(np.isfinite(sigma)):
            raise RuntimeError(f"non-finite stress at t = {times[i]:g}")
        history[i] = sigma

    wall = _time.perf_counter() - t0
    seg_values = {s.id: history[:, seg_dofs[s.id]] for s in segs}
    meta = {
        "mesh_points_per_segment": M,
        "dt": dt,
        "scheme": scheme,
        "time_grid": time_grid,
        "n_steps": len(times) - 1,
        "wall_time_s": wall,
    }
    return FdmSolution(tree, scheme, grids, times, seg_values, meta)
