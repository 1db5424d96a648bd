"""INI-style run configuration and the generated defaults reference.

Every key is optional; anything missing keeps the library default. Unknown
sections or keys are rejected so typos do not silently fall back.
"""

from __future__ import annotations

import configparser
from dataclasses import fields, replace
from pathlib import Path

from .engine import SimulationConfig
from .errors import ConfigurationError
from .harvest import HarvesterSet
from .network import LinkModel, Topology
from .node import DutyCycleConfig, default_battery_model
from .quantities import OperatingPoint

# section -> key -> (type, help)
SCHEMA: dict[str, dict[str, tuple[type, str]]] = {
    "run": {
        "scenario": (str, "built-in scenario name"),
        "trace": (str, "path to a trace CSV (overrides scenario)"),
        "days": (float, "run length in days (default: one trace span)"),
        "nodes": (int, "number of nodes"),
        "rf_distances": (str, "comma-separated per-node RF distances in m"),
        "start_soc": (str, "initial soc in J, one value or one per node"),
        "seed": (int, "master seed"),
        "mode": (str, "event or fixed_step"),
        "step": (float, "fixed-step dt in s, at most 1"),
        "soc_interval": (float, "soc log interval in s"),
        "sensing_noise": (bool, "add sensor and environment noise"),
    },
    "duty": {
        "period": (float, "cycle period in s"),
        "warmup_duration": (float, "sensor warm-up in s"),
        "transmit_duration": (float, "sample + transmit window in s"),
        "voltage": (float, "supply voltage for all phases in V"),
        "sleep_current": (float, "sleep current in A"),
        "warmup_current": (float, "warm-up current in A"),
        "transmit_current": (float, "transmit current in A"),
    },
    "battery": {
        "capacity": (float, "usable capacity in J"),
        "brown_out_threshold": (float, "soc at which the load is cut, J"),
        "cold_start_threshold": (float, "soc needed to restart, J (default: one cycle's energy)"),
        "charge_efficiency": (float, "fraction of harvested energy stored"),
    },
    "link": {
        "base_loss_probability": (float, "per-attempt loss before coding gain"),
        "noise_multiplier": (float, "interference multiplier, >= 1"),
        "coding_gain": (float, "spread-spectrum loss divisor, >= 1"),
        "max_retries": (int, "retries after the first attempt"),
        "retry_duration": (float, "airtime of one retry in s"),
    },
    "topology": {
        "mode": (str, "star or relay_chain"),
        "hops": (int, "maximum hop count of the relay chain"),
    },
    "harvest": {
        "pv_indoor": (bool, "enable the indoor PV model"),
        "pv_outdoor": (bool, "enable the outdoor PV model"),
        "teg": (bool, "enable the TEG bank"),
        "piezo": (bool, "enable the piezo harvester"),
        "rf": (bool, "enable the RF harvester"),
        "pv_indoor_efficiency": (float, "indoor PV conversion efficiency"),
        "teg_efficiency": (float, "TEG converter efficiency"),
        "teg_threshold": (float, "TEG activation |dT| in C"),
        "rf_efficiency": (float, "RF rectifier efficiency"),
    },
}


def _getter(cp: configparser.ConfigParser, section: str, key: str, typ: type):
    try:
        if typ is bool:
            return cp.getboolean(section, key)
        if typ is int:
            return cp.getint(section, key)
        if typ is float:
            return cp.getfloat(section, key)
        return cp.get(section, key).strip()
    except ValueError as exc:
        raise ConfigurationError(f"[{section}] {key}: {exc}") from None


def _floats(text: str, label: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigurationError(f"{label}: expected comma-separated numbers, got {text!r}") from None


def load_config(path: str | Path, base: SimulationConfig | None = None) -> SimulationConfig:
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return from_parser(cp, base)


def from_parser(cp: configparser.ConfigParser, base: SimulationConfig | None = None) -> SimulationConfig:
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigurationError(f"unknown config section [{section}]")
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"unknown key {key!r} in [{section}]")
    vals = {
        s: {k: _getter(cp, s, k, SCHEMA[s][k][0]) for k in cp[s]} for s in cp.sections()
    }
    cfg = base or SimulationConfig()
    try:
        return _apply(cfg, vals)
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from None


def _apply(cfg: SimulationConfig, vals: dict) -> SimulationConfig:
    kw = {}
    run = vals.get("run", {})
    if "scenario" in run:
        kw["scenario"] = run["scenario"]
    if "trace" in run:
        kw["trace_path"] = run["trace"]
    for key in ("days", "nodes", "seed", "mode", "step", "soc_interval", "sensing_noise"):
        if key in run:
            kw[key] = run[key]
    if "rf_distances" in run:
        kw["rf_distances"] = _floats(run["rf_distances"], "rf_distances")
    if "start_soc" in run:
        socs = _floats(run["start_soc"], "start_soc")
        kw["start_soc"] = socs[0] if len(socs) == 1 else socs

    duty = cfg.duty
    d = vals.get("duty", {})
    if d:
        v = d.get("voltage")
        pts = {}
        for name in ("sleep", "warmup", "transmit"):
            old = getattr(duty, f"{name}_point")
            pts[f"{name}_point"] = OperatingPoint(
                v if v is not None else old.voltage, d.get(f"{name}_current", old.current)
            )
        durations = {k: d[k] for k in ("period", "warmup_duration", "transmit_duration") if k in d}
        duty = replace(duty, **durations, **pts)
        kw["duty"] = duty

    b = vals.get("battery", {})
    if b or "duty" in vals:
        current = cfg.battery
        params = {}
        if current is not None:
            params = {f.name: getattr(current, f.name) for f in fields(current)}
        params.update(b)
        kw["battery"] = default_battery_model(duty, **params)

    if "link" in vals:
        kw["link"] = replace(cfg.link, **vals["link"])
    if "topology" in vals:
        kw["topology"] = replace(cfg.topology, **vals["topology"])

    h = vals.get("harvest", {})
    if h:
        hs = cfg.harvesters
        pv_in = replace(hs.pv_indoor, enabled=h.get("pv_indoor", hs.pv_indoor.enabled))
        if "pv_indoor_efficiency" in h:
            pv_in = replace(pv_in, conversion_efficiency=h["pv_indoor_efficiency"])
        teg = replace(
            hs.teg,
            enabled=h.get("teg", hs.teg.enabled),
            conversion_efficiency=h.get("teg_efficiency", hs.teg.conversion_efficiency),
            activation_threshold=h.get("teg_threshold", hs.teg.activation_threshold),
        )
        rf = replace(
            hs.rf,
            enabled=h.get("rf", hs.rf.enabled),
            conversion_efficiency=h.get("rf_efficiency", hs.rf.conversion_efficiency),
        )
        kw["harvesters"] = replace(
            hs,
            pv_indoor=pv_in,
            pv_outdoor=replace(hs.pv_outdoor, enabled=h.get("pv_outdoor", hs.pv_outdoor.enabled)),
            teg=teg,
            piezo=replace(hs.piezo, enabled=h.get("piezo", hs.piezo.enabled)),
            rf=rf,
        )
    return replace(cfg, **kw)


def _defaults() -> dict[str, dict[str, object]]:
    cfg = SimulationConfig()
    duty = DutyCycleConfig()
    bat = default_battery_model(duty)
    link = LinkModel()
    topo = Topology()
    hs = HarvesterSet()
    return {
        "run": {
            "scenario": cfg.scenario,
            "trace": "(none)",
            "days": "(trace span)",
            "nodes": cfg.nodes,
            "rf_distances": "(from trace)",
            "start_soc": cfg.start_soc,
            "seed": cfg.seed,
            "mode": cfg.mode,
            "step": cfg.step,
            "soc_interval": cfg.soc_interval,
            "sensing_noise": cfg.sensing_noise,
        },
        "duty": {
            "period": duty.period,
            "warmup_duration": duty.warmup_duration,
            "transmit_duration": duty.transmit_duration,
            "voltage": duty.sleep_point.voltage,
            "sleep_current": duty.sleep_point.current,
            "warmup_current": duty.warmup_point.current,
            "transmit_current": duty.transmit_point.current,
        },
        "battery": {
            "capacity": bat.capacity,
            "brown_out_threshold": bat.brown_out_threshold,
            "cold_start_threshold": f"(one duty cycle, {bat.cold_start_threshold:.6g})",
            "charge_efficiency": bat.charge_efficiency,
        },
        "link": {f.name: getattr(link, f.name) for f in fields(link)},
        "topology": {"mode": topo.mode, "hops": topo.hops},
        "harvest": {
            "pv_indoor": hs.pv_indoor.enabled,
            "pv_outdoor": hs.pv_outdoor.enabled,
            "teg": hs.teg.enabled,
            "piezo": hs.piezo.enabled,
            "rf": hs.rf.enabled,
            "pv_indoor_efficiency": hs.pv_indoor.conversion_efficiency,
            "teg_efficiency": hs.teg.conversion_efficiency,
            "teg_threshold": hs.teg.activation_threshold,
            "rf_efficiency": hs.rf.conversion_efficiency,
        },
    }


def reference_page() -> str:
    """Markdown page listing every config key with its default."""
    out = ["# Configuration reference", "", "INI file, all keys optional.", ""]
    defaults = _defaults()
    for section, keys in SCHEMA.items():
        out += [f"## [{section}]", "", "| key | default | meaning |", "|---|---|---|"]
        for key, (_, help_) in keys.items():
            out.append(f"| `{key}` | `{defaults[section][key]}` | {help_} |")
        out.append("")
    return "\n".join(out)


def example_file() -> str:
    lines = []
    for section, keys in _defaults().items():
        lines.append(f"[{section}]")
        for key, value in keys.items():
            prefix = "# " if isinstance(value, str) and value.startswith("(") else ""
            lines.append(f"{prefix}{key} = {value}")
        lines.append("")
    return "\n".join(lines)
