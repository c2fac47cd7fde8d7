"""Run-configuration file format and validation.

The format is plain nested key/value text: ``[section]`` headers, one
``key = value`` pair per line, ``#`` comments.  The ``[segment]`` section
repeats, one block per wire segment.  Dotted keys group related settings
(``t0.mean_k``).  Unknown sections or keys are rejected, not ignored.

Example::

    [segment]
    id = 1
    length_um = 20
    current_density = 4e10
    node_a = 0
    node_b = 1

    [thermal]
    case = II
    t0.amplitude_k = 30

Command-line ``--set section.key=value`` overrides apply after the file
is read (segment blocks are addressed as ``segment<id>.key``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import Segment, build_tree, unfold
from .physics import EV, MaterialParams, ThermalModel
from .optim import TrainingConfig
from .stpinn import ScalingConfig


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    if s.lower() in ("true", "on", "yes", "1"):
        return True
    if s.lower() in ("false", "off", "no", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _ints(s: str):
    return [int(v) for v in s.split()]


def _floats(s: str):
    return [float(v) for v in s.split()]


# section -> key -> (parse, default); None default means required
_SEGMENT_SCHEMA = {
    "id": (int, None),
    "length_um": (float, None),
    "current_density": (float, None),
    "node_a": (int, None),
    "node_b": (int, None),
    "width_um": (float, 0.3),
    "spacing_um": (float, 0.3),
    "angle_deg": (float, float("nan")),
}

_SCHEMA = {
    "run": {
        "t_end": (float, 1e8),
        "seed": (int, 0),
        "eval_times": (_floats, [5e5, 5e6, 5e7]),
        "points_per_segment": (int, 200),
    },
    "thermal": {
        "case": (str, "I"),
        "t_const_k": (float, 350.0),
        "t0.mean_k": (float, 350.0),
        "t0.amplitude_k": (float, 30.0),
        "t0.omega": (float, 4e-8 * 3.141592653589793),
        "joule.k_m": (float, 400.0),
        "joule.k_ild": (float, 1.2),
        "joule.t_ild_um": (float, 0.8),
        "joule.h_ild_um": (float, 0.8),
    },
    "material": {
        "boltzmann": (float, 1.38e-23),
        "charge": (float, 1.6e-19),
        "z_eff": (float, 10.0),
        "activation_energy_ev": (float, 1.1),
        "bulk_modulus": (float, 1e11),
        "d0": (float, 5.2e-5),
        "resistivity": (float, 3e-8),
        "atomic_volume": (float, 8.78e-30),
        "critical_stress": (float, 4e8),
    },
    "scaling": {
        "omega_sigma": (float, 1e-9),
        "omega_x": (float, 1e5),
        "omega_t": (float, 1e-7),
    },
    "model": {
        "channels": (int, 0),
        "f_hidden": (_ints, [40] * 10),
        "ft_hidden": (_ints, [100]),
        "g_input": (_bool, False),
        "virtual_distance_um": (float, 0.5),
    },
    "sampling": {
        "n_f": (int, 25000),
        "n_b": (int, 1000),
        "n_c": (int, 1000),
        "n_0": (int, 500),
        "time_transform_targets": (int, 0),
    },
    "training": {
        "adam_iters": (int, 5000),
        "adam_lr": (float, 0.001),
        "adam_beta1": (float, 0.9),
        "adam_beta2": (float, 0.999),
        "adam_eps": (float, 1e-8),
        "lbfgs_max_iters": (int, 20000),
        "lbfgs_memory": (int, 50),
        "wolfe_c1": (float, 1e-4),
        "wolfe_c2": (float, 0.9),
        "grad_tol": (float, 1e-8),
        "loss_tol": (float, 0.0),
        "tt_weight": (float, 1.0),
        "weight_f": (float, 1.0),
        "weight_b": (float, 1.0),
        "weight_i": (float, 1.0),
        "weight_c": (float, 1.0),
    },
    "fdm": {
        "mesh_points_per_segment": (int, 101),
        "dt": (float, 1e5),
        "scheme": (str, "implicit"),
        "time_grid": (str, "auto"),
    },
}


@dataclass
class RunConfig:
    """Fully validated run configuration with derived objects attached."""

    segments: list
    values: dict           # section -> key -> parsed value
    tree: object = None
    domain: object = None
    thermal: ThermalModel = None
    material: MaterialParams = None
    scaling: ScalingConfig = None
    training: TrainingConfig = None

    def __getitem__(self, dotted):
        section, key = dotted.split(".", 1)
        return self.values[section][key]


def _parse_lines(text: str, source: str):
    """Raw pass: list of (section, {key: raw string}) preserving repeats."""
    blocks = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = (line[1:-1].strip(), {})
            blocks.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            raise ConfigError(f"{source}:{lineno}: key outside any [section]")
        key, val = (p.strip() for p in line.split("=", 1))
        if key in current[1]:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        current[1][key] = val
    return blocks


def _apply_schema(schema, raw: dict, where: str):
    out = {}
    for key, val in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} in {where}")
        parse = schema[key][0]
        try:
            out[key] = parse(val)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{where}.{key}: {exc}") from None
    for key, (_, default) in schema.items():
        if key not in out:
            if default is None:
                raise ConfigError(f"missing required key {key!r} in {where}")
            out[key] = default
    return out


def parse_config(text: str, source: str = "<config>", overrides=()) -> RunConfig:
    """Parse, apply ``--set`` overrides, validate, and build derived objects."""
    blocks = _parse_lines(text, source)

    seg_raw = []
    values_raw = {}
    for section, kv in blocks:
        if section == "segment":
            seg_raw.append(kv)
            continue
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}] in {source}")
        if section in values_raw:
            raise ConfigError(f"repeated section [{section}] in {source}")
        values_raw[section] = kv
    if not seg_raw:
        raise ConfigError(f"{source}: no [segment] blocks")

    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected section.key=value")
        dotted, val = item.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"override {item!r}: expected section.key=value")
        section, key = dotted.strip().split(".", 1)
        if section.startswith("segment") and section != "segment":
            sid = section[len("segment"):]
            for kv in seg_raw:
                if kv.get("id", "").strip() == sid:
                    kv[key] = val
                    break
            else:
                raise ConfigError(f"override {item!r}: no segment with id {sid}")
        elif section in _SCHEMA:
            values_raw.setdefault(section, {})[key] = val
        else:
            raise ConfigError(f"override {item!r}: unknown section {section!r}")

    segments = [_apply_schema(_SEGMENT_SCHEMA, kv, "[segment]") for kv in seg_raw]
    values = {
        section: _apply_schema(schema, values_raw.get(section, {}), f"[{section}]")
        for section, schema in _SCHEMA.items()
    }
    return _build(segments, values)


def load_config(path, overrides=()) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), str(path), overrides)


def _build(segments, values) -> RunConfig:
    segs = [
        Segment(
            id=s["id"],
            length=s["length_um"] * 1e-6,
            current_density=s["current_density"],
            node_a=s["node_a"],
            node_b=s["node_b"],
            width=s["width_um"] * 1e-6,
            spacing=s["spacing_um"] * 1e-6,
            angle_deg=None if s["angle_deg"] != s["angle_deg"] else s["angle_deg"],
        )
        for s in segments
    ]
    tree = build_tree(segs)
    domain = unfold(tree, values["model"]["virtual_distance_um"] * 1e-6)

    th = values["thermal"]
    thermal = ThermalModel(
        case=th["case"],
        t_const=th["t_const_k"],
        t0_mean=th["t0.mean_k"],
        t0_amplitude=th["t0.amplitude_k"],
        t0_omega=th["t0.omega"],
        k_m=th["joule.k_m"],
        k_ild=th["joule.k_ild"],
        t_ild=th["joule.t_ild_um"] * 1e-6,
        h_ild=th["joule.h_ild_um"] * 1e-6,
    )
    ma = values["material"]
    material = MaterialParams(
        boltzmann=ma["boltzmann"],
        charge=ma["charge"],
        z_eff=ma["z_eff"],
        activation_energy=ma["activation_energy_ev"] * EV,
        bulk_modulus=ma["bulk_modulus"],
        d0=ma["d0"],
        resistivity=ma["resistivity"],
        atomic_volume=ma["atomic_volume"],
        critical_stress=ma["critical_stress"],
    )
    sc = values["scaling"]
    scaling = ScalingConfig(sc["omega_sigma"], sc["omega_x"], sc["omega_t"])
    tr = values["training"]
    training = TrainingConfig(
        adam_iters=tr["adam_iters"],
        adam_lr=tr["adam_lr"],
        adam_betas=(tr["adam_beta1"], tr["adam_beta2"]),
        adam_eps=tr["adam_eps"],
        lbfgs_max_iters=tr["lbfgs_max_iters"],
        lbfgs_memory=tr["lbfgs_memory"],
        wolfe=(tr["wolfe_c1"], tr["wolfe_c2"]),
        grad_tol=tr["grad_tol"],
        loss_tol=tr["loss_tol"],
        seed=values["run"]["seed"],
    )
    return RunConfig(segments, values, tree, domain, thermal, material, scaling, training)
