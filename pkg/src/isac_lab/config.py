"""Scenario configuration files.

Configs are TOML documents with a fixed schema. Unknown keys are rejected,
and keys carrying units by suffix (``_db``, ``_dbm``, ``_deg``) must be
plain numbers (or lists of numbers). Powers are normalized to a unit user
noise floor when the scenario is built.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .array import AngleInterval, ArrayGeometry, ChannelSet, angle_grid, random_user_channel
from .scenario import BeampatternSpec, CsiErrorModel, Scenario, Uncertainty


class ConfigError(ValueError):
    """Malformed config; the message carries ``file:line:col`` when known."""


NUM = (int, float)
REQ, OPT = True, False

# section -> key -> (required, type, default)
SCHEMA = {
    "array": {
        "n_elements": (REQ, int, None),
        "spacing": (OPT, NUM, 0.5),
    },
    "channels": {
        "users": (REQ, list, None),
        "target": (REQ, dict, None),
        "target_gain_db": (OPT, NUM, 0.0),
        "noise_user_dbm": (OPT, NUM, -94.0),
        "noise_eve_dbm": (OPT, NUM, None),
        "noise_radar_dbm": (OPT, NUM, None),
        "clutter": (OPT, list, []),
    },
    "power": {
        "budget_dbm": (REQ, NUM, None),
    },
    "comm": {
        "sinr_threshold_db": (REQ, NUM, None),
        "modulation": (OPT, int, 4),
        "designated_stream": (OPT, int, 0),
        "protect": (OPT, str, "all"),
        "di_margin": (OPT, NUM, None),
    },
    "sensing": {
        "floor_fraction": (OPT, NUM, 0.5),
        "cap_fraction": (OPT, NUM, 0.1),
        "grid_step_deg": (OPT, NUM, 0.25),
        "transition_deg": (OPT, NUM, None),
    },
    "uncertainty": {
        "interval_deg": (OPT, list, None),
        "samples": (OPT, int, None),
        "csi_error": (OPT, dict, None),
    },
    "run": {
        "seed": (OPT, int, 0),
        "trials": (OPT, int, 100000),
        "output_dir": (OPT, str, "out"),
        "candidates": (OPT, int, 200),
        "audit_draws": (OPT, int, None),
        "sweep_power_dbm": (OPT, list, None),
        "slots": (OPT, int, 1000),
        "snr_db": (OPT, list, None),
        "ci_mode": (OPT, str, "min_power"),
    },
}
REQUIRED_SECTIONS = ("array", "channels", "power", "comm")
USER_KEYS = {"model": str, "seed": int, "kappa": NUM, "angle_deg": NUM, "gain_db": NUM}
TARGET_KEYS = {"angle_deg": NUM, "interval_deg": list}
CLUTTER_KEYS = {"angle_deg": NUM, "gain_db": NUM}
CSI_KEYS = {"kind": str, "radius": NUM, "variance": NUM, "outage": NUM, "enforce": bool}


@dataclass
class RunConfig:
    seed: int = 0
    trials: int = 100000
    output_dir: str = "out"
    candidates: int = 200
    audit_draws: int | None = None
    sweep_power_dbm: list | None = None
    slots: int = 1000
    snr_db: list | None = None
    ci_mode: str = "min_power"


@dataclass
class Config:
    scenario: Scenario
    run: RunConfig
    data: dict
    noise_floor_dbm: float
    source: str = "<string>"

    @property
    def config_hash(self) -> str:
        return config_hash(self.data)


# -- parsing ------------------------------------------------------------------

class _Locator:
    """Maps dotted key paths to ``line:col`` positions in the source text."""

    def __init__(self, text: str, name: str):
        self.name = name
        self.index = {}
        section = ()
        for i, line in enumerate(text.splitlines(), 1):
            m = re.match(r"\s*\[+\s*([^\]]+?)\s*\]+", line)
            if m:
                section = tuple(p.strip() for p in m.group(1).split("."))
                self.index.setdefault(section, (i, m.start(1) + 1))
                continue
            for km in re.finditer(r"([A-Za-z_][A-Za-z0-9_]*)\s*=", line):
                self.index.setdefault(section + (km.group(1),), (i, km.start(1) + 1))

    def where(self, path) -> str:
        path = tuple(path)
        while path:
            if path in self.index:
                line, col = self.index[path]
                return f"{self.name}:{line}:{col}"
            # keys inside inline tables are indexed by their own name
            if len(path) >= 2 and (path[0], path[-1]) in self.index:
                line, col = self.index[(path[0], path[-1])]
                return f"{self.name}:{line}:{col}"
            path = path[:-1]
        return self.name

    def error(self, path, msg) -> ConfigError:
        return ConfigError(f"{self.where(path)}: {'.'.join(map(str, path))}: {msg}")


def _is_number(v) -> bool:
    return isinstance(v, NUM) and not isinstance(v, bool)


def _check_type(loc, path, value, typ):
    key = str(path[-1])
    if typ is NUM:
        ok = _is_number(value)
    elif typ is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, typ)
    if not ok:
        hint = ""
        if isinstance(value, str) and re.search(r"_(db|dbm|deg)$", key):
            hint = f" (unit is implied by the suffix of {key!r}; write a bare number)"
        name = "number" if typ is NUM else typ.__name__
        raise loc.error(path, f"expected {name}, got {type(value).__name__} {value!r}{hint}")
    if re.search(r"_(db|dbm|deg)$", key) and isinstance(value, list):
        for v in value:
            if not _is_number(v):
                raise loc.error(path, f"unit-suffixed list must hold numbers, got {v!r}")
    if _is_number(value) and not math.isfinite(value) and key not in ("cap_fraction",):
        raise loc.error(path, f"value must be finite, got {value!r}")


def _check_table(loc, path, table, keys):
    for k, v in table.items():
        if k not in keys:
            raise loc.error(path + (k,), f"unknown key (allowed: {', '.join(sorted(keys))})")
        _check_type(loc, path + (k,), v, keys[k])


def normalize(raw: dict, loc: _Locator) -> dict:
    """Validated config with defaults filled in."""
    out = {}
    for sec in raw:
        if sec not in SCHEMA:
            raise loc.error((sec,), f"unknown section (allowed: {', '.join(SCHEMA)})")
        if not isinstance(raw[sec], dict):
            raise loc.error((sec,), "expected a section table")
    for sec in REQUIRED_SECTIONS:
        if sec not in raw:
            raise ConfigError(f"{loc.name}: missing required section [{sec}]")
    for sec, keys in SCHEMA.items():
        if sec not in raw and sec not in REQUIRED_SECTIONS:
            continue
        table = raw.get(sec, {})
        norm = {}
        for k in table:
            if k not in keys:
                raise loc.error((sec, k), f"unknown key in [{sec}] (allowed: {', '.join(keys)})")
        for k, (required, typ, default) in keys.items():
            if k in table:
                _check_type(loc, (sec, k), table[k], typ)
                norm[k] = copy.deepcopy(table[k])
            elif required:
                raise loc.error((sec,), f"missing required key {k!r} in [{sec}]")
            elif default is not None:
                norm[k] = copy.deepcopy(default)
        out[sec] = norm

    ch = out["channels"]
    if not ch["users"]:
        raise loc.error(("channels", "users"), "at least one user is required")
    for i, u in enumerate(ch["users"]):
        if not isinstance(u, dict):
            raise loc.error(("channels", "users"), f"user {i} must be a table")
        _check_table(loc, ("channels", "users", i), u, USER_KEYS)
        u.setdefault("model", "rayleigh")
        if "seed" not in u:
            raise loc.error(("channels", "users", i), "user needs a 'seed'")
        if u["model"] not in ("rayleigh", "rician"):
            raise loc.error(("channels", "users", i, "model"), f"unknown model {u['model']!r}")
    _check_table(loc, ("channels", "target"), ch["target"], TARGET_KEYS)
    if len(ch["target"]) != 1:
        raise loc.error(("channels", "target"), "give exactly one of angle_deg or interval_deg")
    for i, c in enumerate(ch.get("clutter", [])):
        if not isinstance(c, dict):
            raise loc.error(("channels", "clutter"), f"clutter entry {i} must be a table")
        _check_table(loc, ("channels", "clutter", i), c, CLUTTER_KEYS)
    for path in (("channels", "target", "interval_deg"), ("uncertainty", "interval_deg")):
        v = out.get(path[0], {})
        for p in path[1:]:
            v = v.get(p) if isinstance(v, dict) else None
        if v is not None and (len(v) != 2 or v[0] > v[1]):
            raise loc.error(path, "interval must be [lower, upper] with lower <= upper")
    unc = out.get("uncertainty")
    if unc and "csi_error" in unc:
        _check_table(loc, ("uncertainty", "csi_error"), unc["csi_error"], CSI_KEYS)
        if unc["csi_error"].get("kind") not in ("bounded", "gaussian"):
            raise loc.error(("uncertainty", "csi_error", "kind"), "kind must be 'bounded' or 'gaussian'")
    if out["comm"]["protect"] not in ("all", "designated"):
        raise loc.error(("comm", "protect"), "protect must be 'all' or 'designated'")
    if "run" in out and out["run"]["ci_mode"] not in ("min_power", "max_margin"):
        raise loc.error(("run", "ci_mode"), "ci_mode must be 'min_power' or 'max_margin'")
    out.setdefault("run", {k: copy.deepcopy(d) for k, (_, _, d) in SCHEMA["run"].items() if d is not None})
    return out


def config_hash(data: dict) -> str:
    """Digest of the canonical JSON form of a normalized config."""
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def build_scenario(data: dict) -> Scenario:
    arr, ch, comm = data["array"], data["channels"], data["comm"]
    geo = ArrayGeometry(arr["n_elements"], arr["spacing"])
    users = []
    for u in ch["users"]:
        h = random_user_channel(geo, u["seed"], u["model"], u.get("kappa", 0.0),
                                math.radians(u.get("angle_deg", 0.0)))
        users.append(h * 10 ** (u.get("gain_db", 0.0) / 20))
    floor = ch["noise_user_dbm"]
    rel = lambda dbm: 10 ** ((dbm - floor) / 10)
    tgt = ch["target"]
    unc_cfg = data.get("uncertainty", {})
    interval = None
    if "interval_deg" in tgt:
        interval = AngleInterval(*np.deg2rad(tgt["interval_deg"]))
    if "interval_deg" in unc_cfg:
        interval = AngleInterval(*np.deg2rad(unc_cfg["interval_deg"]))
    angle = math.radians(tgt["angle_deg"]) if "angle_deg" in tgt else interval.center
    channels = ChannelSet(
        users, angle, target_gain=10 ** (ch["target_gain_db"] / 20),
        clutter=[(math.radians(c["angle_deg"]), 10 ** (c["gain_db"] / 20)) for c in ch.get("clutter", [])],
        noise_power_user=1.0,
        noise_power_eve=rel(ch.get("noise_eve_dbm", floor)),
        noise_power_radar=rel(ch.get("noise_radar_dbm", floor)),
    )
    sen = data.get("sensing", {k: d for k, (_, _, d) in SCHEMA["sensing"].items() if d is not None})
    bp = BeampatternSpec(
        floor_fraction=sen.get("floor_fraction", 0.5),
        sidelobe_cap_fraction=sen.get("cap_fraction", 0.1),
        grid=angle_grid(sen.get("grid_step_deg", 0.25)),
        transition=math.radians(sen["transition_deg"]) if "transition_deg" in sen else None,
    )
    uncertainty = None
    if interval is not None or "csi_error" in unc_cfg:
        csi = None
        if "csi_error" in unc_cfg:
            csi = CsiErrorModel(**unc_cfg["csi_error"])
        uncertainty = Uncertainty(interval, unc_cfg.get("samples"), csi)
    return Scenario(
        geometry=geo, channels=channels,
        power_budget=rel(data["power"]["budget_dbm"]),
        user_sinr_threshold=10 ** (comm["sinr_threshold_db"] / 10),
        beampattern=bp, uncertainty=uncertainty,
        designated_stream=comm["designated_stream"],
        protect_all_streams=comm["protect"] == "all",
        modulation_order=comm["modulation"],
        di_margin=comm.get("di_margin"),
    )


def loads(text: str, name: str = "<string>") -> Config:
    """Parse config text into a validated :class:`Config`."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        where = f"{name}:{m.group(1)}:{m.group(2)}" if m else name
        raise ConfigError(f"{where}: {exc}") from None
    loc = _Locator(text, name)
    data = normalize(raw, loc)
    try:
        scenario = build_scenario(data)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None
    run = RunConfig(**data["run"])
    return Config(scenario, run, data, data["channels"]["noise_user_dbm"], name)


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return loads(text, str(path))


def parse_config(path) -> Scenario:
    """Validated scenario from a config file."""
    return load_config(path).scenario


def dumps(data: dict) -> str:
    """Config text for a normalized config; ``loads(dumps(d)).data == d``."""
    return tomli_w.dumps(data)


def shipped_config(name: str) -> Path:
    """Path of an example config bundled with the package."""
    return Path(__file__).with_name("configs") / name
