"""Space-time physics-informed neural network for tree stress evolution.

The model stacks three pieces: a time-transform network F_t mapping
(scaled) time to n channel variables, a shared solution network F taking
the (scaled) spatial coordinate, optionally the scaled per-segment
driving force, and one time channel, and a linear combination layer with
weights theta over the channel outputs.  With n = 0 channels the model
degenerates to a plain PINN consuming scaled time directly.

Training minimizes the composite mean-square loss: PDE residual at
interior collocation points, zero-flux terms at blocked terminals, the
initial condition, and the junction continuity/flux-balance constraints
imposed at the virtual-distance gap endpoints.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .analytic import integrate_time_transform
from .autodiff import Jet2, Tape, concat, getcol, jet_input, mlp_forward_jet
from .geometry import UnfoldedDomain
from .optim import TrainingConfig, adam_minimize, lbfgs_minimize, xavier_init
from .physics import (
    MaterialParams,
    ThermalModel,
    em_driving_force,
    kappa,
    kappa_and_gradient,
)

__all__ = [
    "ScalingConfig",
    "StpinnModel",
    "CollocationSet",
    "scale",
    "unscale_stress",
    "make_model",
    "sample_collocation",
    "forward",
    "loss",
    "residual",
    "train",
    "StpinnField",
    "evaluate_stress",
    "rescale_diffusivity",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class ScalingConfig:
    """Linear preprocessing factors mapping the problem to O(1) ranges."""

    omega_sigma: float = 1e-9  # 1/Pa
    omega_x: float = 1e5       # 1/m
    omega_t: float = 1e-7      # 1/s

    def __post_init__(self):
        if min(self.omega_sigma, self.omega_x, self.omega_t) <= 0:
            raise ValueError("scaling factors must be > 0")

    @property
    def kappa_factor(self):
        return self.omega_x**2 / self.omega_t

    @property
    def g_factor(self):
        return self.omega_sigma / self.omega_x


def scale(point, cfg: ScalingConfig):
    """(x [m], t [s]) -> (x_hat, t_hat)."""
    x, t = point
    return np.asarray(x, dtype=float) * cfg.omega_x, np.asarray(t, dtype=float) * cfg.omega_t


def unscale_stress(sigma_hat, cfg: ScalingConfig):
    """Network output (sigma_hat = omega_sigma * sigma) back to Pa."""
    return np.asarray(sigma_hat, dtype=float) / cfg.omega_sigma


@dataclass
class StpinnModel:
    """Architecture metadata plus the flat parameter vector.

    Flat layout: F_t layers (row-major W then b, layer by layer), then F
    layers, then the channel weights theta.  ``f_shapes`` / ``ft_shapes``
    are (out, in) pairs.
    """

    channels: int
    ft_shapes: list
    f_shapes: list
    g_input: bool
    spatial_dim: int
    scaling: ScalingConfig
    params: np.ndarray

    @staticmethod
    def _count(shapes):
        return sum(o * i + o for o, i in shapes)

    @property
    def n_params(self):
        return self._count(self.ft_shapes) + self._count(self.f_shapes) + self.channels

    def split(self, params=None, tape: Tape | None = None):
        """Unflatten into (ft_layers, f_layers, theta); leaves on ``tape``
        when given (training mode), plain arrays otherwise."""
        p = self.params if params is None else params
        if p.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {p.size}")
        ofs = 0
        out = []
        for shapes in (self.ft_shapes, self.f_shapes):
            layers = []
            for o, i in shapes:
                W = p[ofs : ofs + o * i].reshape(o, i)
                ofs += o * i
                b = p[ofs : ofs + o].reshape(1, o)
                ofs += o
                if tape is not None:
                    W, b = tape.leaf(W), tape.leaf(b)
                layers.append((W, b))
            out.append(layers)
        theta = p[ofs:].reshape(1, -1)
        if tape is not None and self.channels:
            theta = tape.leaf(theta)
        return out[0], out[1], theta

    @staticmethod
    def collect_grads(ft_layers, f_layers, theta, channels) -> np.ndarray:
        chunks = []
        for layers in (ft_layers, f_layers):
            for W, b in layers:
                chunks.append(np.zeros(W.value.size) if W.grad is None else W.grad.ravel())
                chunks.append(np.zeros(b.value.size) if b.grad is None else b.grad.ravel())
        if channels:
            g = theta.grad
            chunks.append(np.zeros(channels) if g is None else g.ravel())
        return np.concatenate(chunks) if chunks else np.zeros(0)


def make_model(
    channels: int,
    f_hidden: list,
    ft_hidden: list | None = None,
    g_input: bool = False,
    spatial_dim: int = 1,
    scaling: ScalingConfig | None = None,
    seed: int = 0,
) -> StpinnModel:
    """Build a model with Xavier-initialized weights and theta = 1."""
    scaling = scaling or ScalingConfig()
    f_in = spatial_dim + (1 if g_input else 0) + 1
    f_sizes = [f_in] + list(f_hidden) + [1]
    f_shapes = [(f_sizes[i + 1], f_sizes[i]) for i in range(len(f_sizes) - 1)]
    ft_shapes = []
    if channels > 0:
        hidden = ft_hidden if ft_hidden is not None else [100]
        ft_sizes = [1] + list(hidden) + [channels]
        ft_shapes = [(ft_sizes[i + 1], ft_sizes[i]) for i in range(len(ft_sizes) - 1)]
    params = np.concatenate(
        [
            xavier_init(ft_shapes, seed),
            xavier_init(f_shapes, seed + 1),
            np.ones(channels),
        ]
    )
    return StpinnModel(channels, ft_shapes, f_shapes, g_input, spatial_dim, scaling, params)


# ---------------------------------------------------------------------------
# collocation sampling


@dataclass
class CollocationSet:
    """Preprocessed (scaled) sample batches; all physics coefficients are
    precomputed constants at the sampled points."""

    scaling: ScalingConfig
    t_end: float
    seed: int
    counts: tuple
    # residual batch
    res: dict = field(default_factory=dict)
    # terminal-BC batch
    bnd: dict = field(default_factory=dict)
    # initial-condition batch
    ini: dict = field(default_factory=dict)
    # junction batches: list per junction group
    jun: list = field(default_factory=list)
    # optional time-transform supervision (times + per-channel targets)
    tt: dict | None = None


def _lhs(rng, n, lo, hi):
    """One-dimensional Latin hypercube: one sample per stratum."""
    if n == 0:
        return np.zeros(0)
    u = (rng.permutation(n) + rng.uniform(size=n)) / n
    return lo + (hi - lo) * u


def _sample_times(rng, n, t_end):
    """Half Latin-hypercube uniform on [0, t_end], half log-uniform on
    [1e-5 t_end, t_end] (denser near 0 where the transient is steep)."""
    n_uni = n // 2
    uni = _lhs(rng, n_uni, 0.0, t_end)
    logs = _lhs(rng, n - n_uni, np.log(t_end * 1e-5), np.log(t_end))
    t = np.concatenate([uni, np.exp(logs)])
    return rng.permutation(t)


def _allocate(counts_total, lengths):
    """Largest-remainder allocation proportional to segment length."""
    lengths = np.asarray(lengths, dtype=float)
    quota = counts_total * lengths / lengths.sum()
    base = np.floor(quota).astype(int)
    rem = counts_total - base.sum()
    order = np.argsort(quota - base)[::-1]
    base[order[:rem]] += 1
    return base


def _physics_at(domain, thermal, params, cfg, seg_ids, x_local, t):
    """kappa_hat, dkappa/dx_hat, g_hat at (segment, local position, time)."""
    n = len(seg_ids)
    kh = np.empty((n, 1))
    dkh = np.empty((n, 1))
    gh = np.empty((n, 1))
    tree = domain.tree
    for sid in np.unique(seg_ids):
        m = seg_ids == sid
        seg = tree.segment(int(sid))
        xc = x_local[m] - seg.length / 2
        k, dk = kappa_and_gradient(thermal, params, seg, xc, t[m])
        kh[m, 0] = cfg.kappa_factor * k
        dkh[m, 0] = (cfg.omega_x / cfg.omega_t) * dk
        gh[m, 0] = cfg.g_factor * em_driving_force(params, seg.current_density)
    return kh, dkh, gh


def sample_collocation(
    domain: UnfoldedDomain,
    thermal: ThermalModel,
    params: MaterialParams,
    t_end: float,
    counts=(25000, 1000, 1000, 500),
    seed: int = 0,
    scaling: ScalingConfig | None = None,
    time_transform_targets: int = 0,
) -> CollocationSet:
    """Draw the residual / terminal / junction / initial batches.

    ``counts`` is (N_f, N_b, N_c, N_0).  Spatial positions use Latin
    hypercube sampling per segment (allocated by length); times mix LHS
    with log-uniform sampling.  Residual points always fall strictly
    inside segments, never in the virtual gaps.  Deterministic per seed.

    ``time_transform_targets > 0`` additionally samples that many times
    and stores the Runge-Kutta integral of kappa(t)/kappa(0) as a
    supervision target for F_t (only meaningful when kappa varies in time
    but not space, i.e. thermal Case II).
    """
    if t_end <= 0:
        raise ValueError("t_end must be > 0")
    n_f, n_b, n_c, n_0 = counts
    if min(counts) <= 0:
        raise ValueError("all collocation counts must be > 0")
    cfg = scaling or ScalingConfig()
    rng = np.random.default_rng(seed)
    tree = domain.tree
    segs = tree.segments
    colloc = CollocationSet(cfg, t_end, seed, tuple(counts))

    def pack(seg_ids, x_local, t):
        """Assemble one scaled batch dict from physical samples."""
        n = len(seg_ids)
        coords = np.empty((n, domain.dim))
        dirs = np.empty((n, domain.dim))
        for sid in np.unique(seg_ids):
            m = seg_ids == sid
            coords[m] = domain.coord(int(sid), x_local[m]).reshape(-1, domain.dim)
            dirs[m] = domain.direction[int(sid)]
        kh, dkh, gh = _physics_at(domain, thermal, params, cfg, seg_ids, x_local, t)
        return {
            "seg_id": seg_ids,
            "x_hat": coords * cfg.omega_x,
            "dirs": dirs,
            "t_hat": (t * cfg.omega_t).reshape(-1, 1),
            "kappa_hat": kh,
            "dkappa_hat": dkh,
            "g_hat": gh,
        }

    # residual batch
    alloc = _allocate(n_f, [s.length for s in segs])
    seg_ids = np.concatenate([np.full(c, s.id) for s, c in zip(segs, alloc)])
    x_local = np.concatenate(
        [_lhs(rng, c, 0.0, s.length) for s, c in zip(segs, alloc)]
    )
    t_res = _sample_times(rng, n_f, t_end)
    colloc.res = pack(seg_ids, x_local, t_res)

    # terminal batch: N_b samples round-robin over terminals
    terms = domain.terminal_points
    idx = np.arange(n_b) % len(terms)
    seg_ids = np.array([terms[i].segment_id for i in idx])
    x_local = np.array([terms[i].end for i in idx])
    t_b = _sample_times(rng, n_b, t_end)
    colloc.bnd = pack(seg_ids, x_local, t_b)
    colloc.bnd["normal"] = np.array([[terms[i].normal] for i in idx], dtype=float)

    # initial batch at t = 0 exactly
    alloc = _allocate(n_0, [s.length for s in segs])
    seg_ids = np.concatenate([np.full(c, s.id) for s, c in zip(segs, alloc)])
    x_local = np.concatenate(
        [_lhs(rng, c, 0.0, s.length) for s, c in zip(segs, alloc)]
    )
    colloc.ini = pack(seg_ids, x_local, np.zeros(n_0))

    # junction batches: the same N_c times at every group
    t_c = _sample_times(rng, n_c, t_end)
    for group in domain.junction_groups:
        members = []
        for m in group.members:
            seg_ids = np.full(n_c, m.segment_id)
            x_local = np.full(n_c, m.end)
            batch = pack(seg_ids, x_local, t_c)
            batch["normal"] = float(m.normal)
            members.append(batch)
        center = np.broadcast_to(group.center * cfg.omega_x, (n_c, domain.dim)).copy()
        colloc.jun.append(
            {
                "node_id": group.node_id,
                "center_x_hat": center,
                "t_hat": (t_c * cfg.omega_t).reshape(-1, 1),
                "members": members,
            }
        )

    if time_transform_targets > 0:
        # kappa(T0(t)) is space-independent when only the underlying-layer
        # temperature varies, which is the regime this supervision targets
        kap = lambda t: float(kappa(params, thermal.t0(t)))
        ts, tp = integrate_time_transform(kap, t_end, 2000)
        t_s = _sample_times(rng, time_transform_targets, t_end)
        target = np.interp(t_s, ts, tp) * cfg.omega_t
        colloc.tt = {
            "t_hat": (t_s * cfg.omega_t).reshape(-1, 1),
            "target": target.reshape(-1, 1),
        }
    return colloc


# ---------------------------------------------------------------------------
# forward pass and losses


def _jet_concat(parts: list[Jet2]) -> Jet2:
    return Jet2(
        concat([p.value for p in parts]),
        concat([p.d_dx for p in parts]),
        concat([p.d_dt for p in parts]),
        concat([p.d2_dx2 for p in parts]),
    )


def forward(model: StpinnModel, split, x_hat, dirs, t_hat, g_hat=None) -> Jet2:
    """Scaled stress jet at scaled inputs.

    ``dirs`` seeds the spatial derivative direction (the owning segment's
    local +x axis), so d_dx / d2_dx2 are derivatives along that axis.
    ``split`` comes from ``model.split`` (traced or plain).
    """
    ft_layers, f_layers, theta = split
    parts = [jet_input(x_hat, dirs, 0.0)]
    if model.g_input:
        if g_hat is None:
            raise ValueError("model expects a driving-force input")
        parts.append(ad.jet_const(g_hat))
    t_jet = jet_input(t_hat, 0.0, 1.0)
    if model.channels == 0:
        out = mlp_forward_jet(f_layers, _jet_concat(parts + [t_jet]))
        return out
    tau = mlp_forward_jet(ft_layers, t_jet)
    total = None
    for k in range(model.channels):
        tau_k = Jet2(
            getcol(tau.value, k),
            getcol(tau.d_dx, k),
            getcol(tau.d_dt, k),
            getcol(tau.d2_dx2, k),
        )
        out_k = mlp_forward_jet(f_layers, _jet_concat(parts + [tau_k]))
        theta_k = getcol(theta, k)
        term = Jet2(
            out_k.value * theta_k,
            out_k.d_dx * theta_k,
            out_k.d_dt * theta_k,
            out_k.d2_dx2 * theta_k,
        )
        total = term if total is None else total + term
    return total


def residual(model: StpinnModel, split, batch: dict):
    """Scaled PDE residual r = sigma_t - [dkappa/dx (sigma_x + G) + kappa sigma_xx]."""
    out = forward(model, split, batch["x_hat"], batch["dirs"], batch["t_hat"],
                  batch.get("g_hat"))
    flux_grad = (out.d_dx + batch["g_hat"]) * batch["dkappa_hat"]
    return out.d_dt - (flux_grad + out.d2_dx2 * batch["kappa_hat"])


def loss(model: StpinnModel, colloc: CollocationSet, split):
    """Composite loss (total, parts).  The total is the plain sum of the
    four mean-square terms; the optional F_t supervision term is reported
    separately under "mse_t" and is NOT part of the total."""
    parts = {}
    r = residual(model, split, colloc.res)
    parts["mse_f"] = ad.mean(ad.square(r))

    bout = forward(model, split, colloc.bnd["x_hat"], colloc.bnd["dirs"],
                   colloc.bnd["t_hat"], colloc.bnd.get("g_hat"))
    flux = (bout.d_dx + colloc.bnd["g_hat"]) * colloc.bnd["kappa_hat"]
    parts["mse_b"] = ad.mean(ad.square(flux))

    iout = forward(model, split, colloc.ini["x_hat"], colloc.ini["dirs"],
                   colloc.ini["t_hat"], colloc.ini.get("g_hat"))
    parts["mse_i"] = ad.mean(ad.square(iout.value))

    mse_c = None
    for group in colloc.jun:
        m0 = group["members"][0]
        cout = forward(model, split, group["center_x_hat"], m0["dirs"],
                       group["t_hat"], m0.get("g_hat"))
        flux_sum = None
        term = None
        for mem in group["members"]:
            mout = forward(model, split, mem["x_hat"], mem["dirs"], mem["t_hat"],
                           mem.get("g_hat"))
            cont = ad.mean(ad.square(mout.value - cout.value))
            term = cont if term is None else term + cont
            f = (mout.d_dx + mem["g_hat"]) * mem["kappa_hat"] * mem["normal"]
            flux_sum = f if flux_sum is None else flux_sum + f
        term = term + ad.mean(ad.square(flux_sum))
        mse_c = term if mse_c is None else mse_c + term
    parts["mse_c"] = mse_c if mse_c is not None else 0.0

    total = parts["mse_f"] + parts["mse_b"] + parts["mse_i"]
    if colloc.jun:
        total = total + parts["mse_c"]

    if colloc.tt is not None and model.channels > 0:
        ft_layers, _, _ = split
        tj = mlp_forward_jet(ft_layers, jet_input(colloc.tt["t_hat"], 0.0, 1.0))
        diff = tj.value - np.broadcast_to(
            colloc.tt["target"], (colloc.tt["target"].shape[0], model.channels)
        )
        parts["mse_t"] = ad.mean(ad.square(diff))
    return total, parts


def objective(model: StpinnModel, colloc: CollocationSet, tt_weight: float = 1.0,
              term_weights: dict | None = None):
    """Closure suitable for the optimizers: theta -> (loss, grad).

    The training objective is the composite loss plus ``tt_weight`` times
    the F_t supervision term when supervision targets are present.
    ``term_weights`` reweights individual loss terms (all default 1.0).
    """

    def fun(theta_flat):
        tape = Tape()
        split = model.split(theta_flat, tape)
        total, parts = loss(model, colloc, split)
        if term_weights:
            total = None
            for name in ("mse_f", "mse_b", "mse_i", "mse_c"):
                if name == "mse_c" and not colloc.jun:
                    continue
                term = parts[name] * term_weights.get(name, 1.0)
                total = term if total is None else total + term
        train_obj = total
        if "mse_t" in parts and tt_weight > 0:
            train_obj = train_obj + tt_weight * parts["mse_t"]
        tape.backward(train_obj)
        ft_layers, f_layers, th = split
        grad = StpinnModel.collect_grads(ft_layers, f_layers, th, model.channels)
        fun.last_parts = {k: float(ad.value_of(v)) for k, v in parts.items()}
        value = float(train_obj.value)
        # Var <-> Tape form reference cycles; clear the node list so the
        # whole graph (and its large arrays) is freed by refcounting
        # instead of waiting on the cycle collector
        tape.nodes.clear()
        return value, grad

    fun.last_parts = {}
    return fun


def train(
    model: StpinnModel,
    colloc: CollocationSet,
    config: TrainingConfig,
    tt_weight: float = 1.0,
    term_weights: dict | None = None,
    log=None,
):
    """Adam warm-up then L-BFGS; the model is updated in place.

    ``log``, when given, is called as log(iter, phase, loss, parts, grad_norm)
    every iteration.  Returns (adam_result, lbfgs_result, wall_seconds).
    """
    fun = objective(model, colloc, tt_weight, term_weights)

    def make_cb(phase):
        if log is None:
            return None

        def cb(it, lv, gn):
            # parts come from the most recent evaluation, which for Adam is
            # exactly the reported iterate
            log(it, phase, lv, dict(fun.last_parts), gn)

        return cb

    t0 = _time.perf_counter()
    adam_res = adam_minimize(fun, model.params, config, callback=make_cb("adam"))
    model.params = adam_res.x
    lbfgs_res = lbfgs_minimize(fun, model.params, config, callback=make_cb("lbfgs"))
    model.params = lbfgs_res.x
    wall = _time.perf_counter() - t0
    return adam_res, lbfgs_res, wall


# ---------------------------------------------------------------------------
# evaluation


class StpinnField:
    """Stress-field adapter over a trained model: sigma(segment, x, t) in Pa."""

    def __init__(self, model: StpinnModel, domain: UnfoldedDomain,
                 params: MaterialParams | None = None):
        self.model = model
        self.domain = domain
        self._split = model.split()
        self._params = params or MaterialParams()

    def refresh(self):
        self._split = self.model.split()

    def _g_hat(self, seg_id, n):
        if not self.model.g_input:
            return None
        g = em_driving_force(self._params, self.domain.tree.segment(seg_id).current_density)
        return np.full((n, 1), g * self.model.scaling.g_factor)

    def _check_domain(self, seg_id, x, ts):
        L = self.domain.tree.segment(seg_id).length
        if np.any(x < -1e-9 * L) or np.any(x > L * (1 + 1e-9)) or np.any(ts < 0):
            raise ValueError(
                f"query outside segment {seg_id} (length {L:g} m) or at t < 0"
            )

    def _forward(self, seg_id, x_local, t):
        cfg = self.model.scaling
        x = np.atleast_1d(np.asarray(x_local, dtype=float))
        ts = np.broadcast_to(np.asarray(t, dtype=float), x.shape)
        self._check_domain(seg_id, x, ts)
        coords = self.domain.coord(seg_id, x).reshape(len(x), self.domain.dim)
        dirs = np.broadcast_to(self.domain.direction[seg_id], coords.shape)
        return forward(
            self.model,
            self._split,
            coords * cfg.omega_x,
            dirs,
            (ts * cfg.omega_t).reshape(-1, 1),
            self._g_hat(seg_id, len(x)),
        )

    def stress(self, seg_id, x_local, t):
        out = self._forward(seg_id, x_local, t)
        sigma = unscale_stress(out.value[:, 0], self.model.scaling)
        return sigma if np.ndim(x_local) else float(sigma[0])

    def stress_and_gradient(self, seg_id, x_local, t):
        """(sigma [Pa], dsigma/dx [Pa/m]) along the segment-local axis."""
        out = self._forward(seg_id, x_local, t)
        cfg = self.model.scaling
        sigma = unscale_stress(out.value[:, 0], cfg)
        dsdx = out.d_dx[:, 0] / cfg.omega_sigma * cfg.omega_x
        return sigma, dsdx

    def junction_stress(self, node_id, t):
        sid, orient = self.domain.tree.adjacency[node_id][0]
        x = 0.0 if orient == +1 else self.domain.tree.segment(sid).length
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = self.stress(sid, np.full(ts.shape, x), ts)
        return out if np.ndim(t) else float(out[0])

    def time_transform(self, t):
        """Learned F_t channel values at physical times (scaled units)."""
        if self.model.channels == 0:
            raise ValueError("plain PINN has no time-transform network")
        ft_layers, _, _ = self._split
        t_hat = (np.asarray(t, dtype=float) * self.model.scaling.omega_t).reshape(-1, 1)
        jet = mlp_forward_jet(ft_layers, jet_input(t_hat, 0.0, 1.0))
        return jet.value


def evaluate_stress(model: StpinnModel, domain: UnfoldedDomain, seg_id, x_local, t,
                    params: MaterialParams | None = None):
    """Convenience one-shot query; constant-time per point (mesh-free)."""
    return StpinnField(model, domain, params).stress(seg_id, x_local, t)


class _TimeScaledField:
    def __init__(self, base, ratio):
        self.base = base
        self.ratio = ratio

    def stress(self, seg_id, x_local, t):
        return self.base.stress(seg_id, x_local, self.ratio * t)

    def junction_stress(self, node_id, t):
        return self.base.junction_stress(node_id, self.ratio * t)


class _ChannelScaledField(StpinnField):
    """1-STPINN diffusivity rescaling: feed ratio * F_t(t) to F."""

    def __init__(self, model, domain, ratio, params=None):
        super().__init__(model, domain, params)
        self.ratio = ratio

    def _forward(self, seg_id, x_local, t):
        cfg = self.model.scaling
        ft_layers, f_layers, theta = self._split
        x = np.atleast_1d(np.asarray(x_local, dtype=float))
        ts = np.broadcast_to(np.asarray(t, dtype=float), x.shape)
        self._check_domain(seg_id, x, ts)
        coords = self.domain.coord(seg_id, x).reshape(len(x), self.domain.dim)
        dirs = np.broadcast_to(self.domain.direction[seg_id], coords.shape)
        t_hat = (ts * cfg.omega_t).reshape(-1, 1)
        tau = mlp_forward_jet(ft_layers, jet_input(t_hat, 0.0, 1.0))
        parts = [jet_input(coords * cfg.omega_x, dirs, 0.0)]
        if self.model.g_input:
            parts.append(ad.jet_const(self._g_hat(seg_id, len(x))))
        total = None
        for k in range(self.model.channels):
            tau_k = Jet2(
                self.ratio * tau.value[:, k : k + 1],
                self.ratio * tau.d_dx[:, k : k + 1],
                self.ratio * tau.d_dt[:, k : k + 1],
                self.ratio * tau.d2_dx2[:, k : k + 1],
            )
            out_k = mlp_forward_jet(f_layers, _jet_concat(parts + [tau_k]))
            term = Jet2(*(c * theta[0, k] for c in
                          (out_k.value, out_k.d_dx, out_k.d_dt, out_k.d2_dx2)))
            total = term if total is None else total + term
        return total


def rescale_diffusivity(field, ratio: float, case: str, domain=None, params=None):
    """Stress field under a rescaled atomic diffusivity D_a* = ratio * D_a.

    Case I: exact time reindexing sigma*(x, t) = sigma(x, ratio t), valid
    for any stress field.  Case II: requires a trained 1-STPINN; the time
    channel is multiplied by the ratio.  Case III has no rescaling
    identity.
    """
    if ratio <= 0:
        raise ValueError("ratio must be > 0")
    if case == "I":
        return _TimeScaledField(field, ratio)
    if case == "II":
        if not isinstance(field, StpinnField) or field.model.channels < 1:
            raise ValueError("Case II rescaling needs a trained multi-channel model")
        return _ChannelScaledField(field.model, field.domain, ratio, field._params)
    raise ValueError("no diffusivity-rescaling identity for Case III")


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: StpinnModel, path):
    """Plain-text checkpoint; weights one per line at full precision so a
    save/load/save cycle is byte-identical."""
    n_theta = model.channels
    weights = model.params[: model.params.size - n_theta]
    theta = model.params[model.params.size - n_theta :]
    sizes = lambda shapes: ([shapes[0][1]] + [o for o, _ in shapes]) if shapes else []
    with open(path, "w") as fh:
        fh.write("stpinn-v1\n")
        fh.write(f"channels {model.channels}\n")
        fh.write("ft_layers" + "".join(f" {n}" for n in sizes(model.ft_shapes)) + "\n")
        fh.write("f_layers" + "".join(f" {n}" for n in sizes(model.f_shapes)) + "\n")
        fh.write("theta" + "".join(f" {float(v)!r}" for v in theta) + "\n")
        fh.write(
            f"scaling {float(model.scaling.omega_sigma)!r} "
            f"{float(model.scaling.omega_x)!r} {float(model.scaling.omega_t)!r}\n"
        )
        fh.write(f"g_input {1 if model.g_input else 0}\n")
        for v in weights:
            fh.write(f"{float(v)!r}\n")


class CheckpointError(ValueError):
    pass


def load_checkpoint(path) -> StpinnModel:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "stpinn-v1":
        raise CheckpointError(f"{path}: not a stpinn-v1 checkpoint")

    def fields(i, name):
        parts = lines[i].split()
        if parts[0] != name:
            raise CheckpointError(f"{path}: expected '{name}' on line {i + 1}")
        return parts[1:]

    channels = int(fields(1, "channels")[0])
    ft_sizes = [int(v) for v in fields(2, "ft_layers")]
    f_sizes = [int(v) for v in fields(3, "f_layers")]
    theta = np.array([float(v) for v in fields(4, "theta")])
    sc = [float(v) for v in fields(5, "scaling")]
    g_input = bool(int(fields(6, "g_input")[0]))
    if len(theta) != channels:
        raise CheckpointError(f"{path}: {len(theta)} theta values for {channels} channels")
    ft_shapes = [(ft_sizes[i + 1], ft_sizes[i]) for i in range(len(ft_sizes) - 1)]
    f_shapes = [(f_sizes[i + 1], f_sizes[i]) for i in range(len(f_sizes) - 1)]
    spatial_dim = f_sizes[0] - (1 if g_input else 0) - 1
    if spatial_dim not in (1, 2):
        raise CheckpointError(f"{path}: implausible F input width {f_sizes[0]}")
    weights = np.array([float(v) for v in lines[7:] if v.strip()])
    n_expected = StpinnModel._count(ft_shapes) + StpinnModel._count(f_shapes)
    if weights.size != n_expected:
        raise CheckpointError(
            f"{path}: {weights.size} weights but layer sizes require {n_expected}"
        )
    model = StpinnModel(
        channels,
        ft_shapes,
        f_shapes,
        g_input,
        spatial_dim,
        ScalingConfig(*sc),
        np.concatenate([weights, theta]),
    )
    return model
