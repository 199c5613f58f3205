"""Scenario model plus JSON load/dump.

Config files use degrees for every angle and SI units otherwise; the
in-memory representation is radians.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from functools import cached_property, lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Union

import numpy as np

from . import phy as phy_mod
from .errors import ValidationError
from .phy import DEFAULT_SCHEMES, BeamGroup, ModScheme, PhyParams, User

RECEPTION_MODES = ("worst-user", "per-user")
BINARY_TREE = "binary-index-order"

TreeSpec = Union[str, tuple]


@dataclass(frozen=True)
class Scenario:
    users: tuple[User, ...]
    m: int
    r_max: int = 2
    phy: PhyParams = field(default_factory=PhyParams)
    schemes: tuple[ModScheme, ...] = DEFAULT_SCHEMES
    x_cap: int | None = None
    tree: TreeSpec = BINARY_TREE
    reception_mode: str = "worst-user"
    name: str = "scenario"

    def __post_init__(self):
        ids = [u.id for u in self.users]
        if ids != list(range(1, len(ids) + 1)):
            raise ValidationError(f"user ids must be 1..N in order, got {ids}")
        if self.m < 1:
            raise ValidationError("m must be >= 1")
        if self.r_max < 0:
            raise ValidationError("R_max must be >= 0")
        if self.x_cap is not None and self.x_cap < 1:
            raise ValidationError("X_cap must be >= 1")
        if not self.schemes:
            raise ValidationError("at least one modulation is required")
        if len({s.name for s in self.schemes}) != len(self.schemes):
            raise ValidationError("modulation names must be unique")
        if self.reception_mode not in RECEPTION_MODES:
            raise ValidationError(f"reception_mode must be one of {RECEPTION_MODES}")

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def cap(self) -> int:
        """Per-beam packet cap; defaults to twice the decoding threshold."""
        return self.x_cap if self.x_cap is not None else 2 * self.m

    @cached_property
    def tau(self) -> np.ndarray:
        return np.array([phy_mod.packet_duration(s, self.phy) for s in self.schemes])

    def group(self, members) -> BeamGroup:
        return _group(self, tuple(members))

    def p_dec(self, members) -> np.ndarray:
        """Worst-member decode probability per scheme, shape (K,)."""
        return _member_probs(self, tuple(members)).min(axis=1)

    def p_dec_members(self, members) -> np.ndarray:
        """Decode probability per scheme and member, shape (K, len(members))."""
        return _member_probs(self, tuple(members))

    def replace(self, **changes) -> "Scenario":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return Scenario(**kw)


@lru_cache(maxsize=None)
def _group(scn: Scenario, members: tuple) -> BeamGroup:
    return phy_mod.make_group(scn.users, members, scn.phy)


@lru_cache(maxsize=None)
def _member_probs(scn: Scenario, members: tuple) -> np.ndarray:
    g = _group(scn, members)
    out = np.empty((len(scn.schemes), len(members)))
    for k, s in enumerate(scn.schemes):
        probs = phy_mod.decode_prob(s, g, scn.users, scn.phy)
        out[k] = [probs[i] for i in members]
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------- loading

_PHY_DEFAULTS = PhyParams()


def _fail(path: str, msg: str):
    raise ValidationError(f"{path}: {msg}")


def _number(obj: dict, key: str, path: str, *, default=None, positive=False, integer=False):
    if key not in obj:
        if default is None:
            _fail(f"{path}.{key}" if path else key, "missing required key")
        return default
    v = obj[key]
    where = f"{path}.{key}" if path else key
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(where, f"expected a number, got {v!r}")
    if integer and (not isinstance(v, int) and not float(v).is_integer()):
        _fail(where, f"expected an integer, got {v!r}")
    if positive and v <= 0:
        _fail(where, f"expected a positive value, got {v!r}")
    return int(v) if integer else float(v)


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        _fail(path or "<root>", f"expected an object, got {type(obj).__name__}")
    extra = set(obj) - set(allowed)
    if extra:
        _fail(path or "<root>", f"unknown key(s) {sorted(extra)}")


_PHY_KEYS = {
    "tx_power": "tx_power",
    "carrier_freq": "carrier_freq",
    "bandwidth": "bandwidth",
    "noise_figure": "noise_figure",
    "pathloss_exp": "pathloss_exp",
    "rx_gain": "rx_gain",
    "sidelobe_gain": "sidelobe_gain",
    "min_beamwidth": "min_beamwidth",
    "nakagami_m": "nakagami_m",
    "payload_bits": "payload_bits",
    "overhead_bits": "overhead_bits",
}


def _parse_phy(obj) -> PhyParams:
    _check_keys(obj, _PHY_KEYS, "phy")
    kw = {}
    for key in _PHY_KEYS:
        if key not in obj:
            continue
        integer = key in ("payload_bits", "overhead_bits")
        v = _number(obj, key, "phy", integer=integer)
        kw[key] = math.radians(v) if key == "min_beamwidth" else v
    try:
        return PhyParams(**kw)
    except ValidationError as exc:
        _fail("phy", str(exc))


def _parse_user(obj, idx: int) -> User:
    path = f"users[{idx}]"
    _check_keys(obj, ("id", "radius", "angle"), path)
    uid = _number(obj, "id", path, default=idx + 1, integer=True)
    radius = _number(obj, "radius", path, positive=True)
    angle = _number(obj, "angle", path) % 360.0
    return User(uid, radius, math.radians(angle) % phy_mod.TWO_PI)


def _parse_scheme(obj, idx: int) -> ModScheme:
    path = f"modulations[{idx}]"
    _check_keys(obj, ("name", "bits_per_symbol", "code_n", "code_k", "symbol_bits"), path)
    if not isinstance(obj.get("name"), str):
        _fail(f"{path}.name", "expected a string")
    try:
        return ModScheme(
            obj["name"],
            _number(obj, "bits_per_symbol", path, integer=True),
            _number(obj, "code_n", path, integer=True),
            _number(obj, "code_k", path, integer=True),
            _number(obj, "symbol_bits", path, default=8, integer=True),
        )
    except ValidationError as exc:
        _fail(path, str(exc))


def _parse_tree(v, n_users: int) -> TreeSpec:
    if isinstance(v, str):
        if v != BINARY_TREE:
            _fail("tree", f"unknown tree spec {v!r}")
        return v

    def conv(node, path):
        if isinstance(node, bool) or not isinstance(node, (int, list)):
            _fail(path, f"expected a user id or a list, got {node!r}")
        if isinstance(node, int):
            return node
        if not node:
            _fail(path, "empty subtree")
        return tuple(conv(c, f"{path}[{i}]") for i, c in enumerate(node))

    tree = conv(v, "tree")
    validate_tree(tree, n_users)
    return tree


def tree_leaves(tree) -> list[int]:
    if isinstance(tree, int):
        return [tree]
    return [i for c in tree for i in tree_leaves(c)]


def validate_tree(tree, n_users: int) -> None:
    leaves = tree_leaves(tree)
    if sorted(leaves) != list(range(1, n_users + 1)):
        raise ValidationError(
            f"tree: leaves {sorted(leaves)} do not partition users 1..{n_users}"
        )


def scenario_from_dict(obj: dict[str, Any]) -> Scenario:
    _check_keys(
        obj,
        ("name", "phy", "users", "modulations", "m", "R_max", "X_cap", "tree", "reception_mode"),
        "",
    )
    phy = _parse_phy(obj.get("phy", {}))
    if "users" not in obj:
        _fail("users", "missing required key")
    if not isinstance(obj["users"], list) or not obj["users"]:
        _fail("users", "expected a non-empty list")
    users = tuple(_parse_user(u, i) for i, u in enumerate(obj["users"]))
    if "modulations" in obj:
        if not isinstance(obj["modulations"], list):
            _fail("modulations", "expected a list")
        schemes = tuple(_parse_scheme(s, i) for i, s in enumerate(obj["modulations"]))
    else:
        schemes = DEFAULT_SCHEMES
    m = _number(obj, "m", "", integer=True)
    r_max = _number(obj, "R_max", "", default=2, integer=True)
    x_cap = obj.get("X_cap")
    if x_cap is not None:
        x_cap = _number(obj, "X_cap", "", integer=True, positive=True)
    tree = _parse_tree(obj.get("tree", BINARY_TREE), len(users))
    mode = obj.get("reception_mode", "worst-user")
    if mode not in RECEPTION_MODES:
        _fail("reception_mode", f"expected one of {RECEPTION_MODES}, got {mode!r}")
    name = obj.get("name", "scenario")
    if not isinstance(name, str):
        _fail("name", "expected a string")
    return Scenario(users, m, r_max, phy, schemes, x_cap, tree, mode, name)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON ({exc})") from None
    return scenario_from_dict(obj)


def bundled(name: str) -> Scenario:
    """Load a scenario shipped in ``mmcast/data`` (``table1``, ``twouser``)."""
    text = resources.files("mmcast.data").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return scenario_from_dict(json.loads(text))


def _degrees_exact(rad: float) -> float:
    # degrees value whose radians() conversion gives back ``rad`` bit for bit
    d = math.degrees(rad)
    if math.radians(d) == rad:
        return d
    for direction in (math.inf, -math.inf):
        c = d
        for _ in range(8):
            c = math.nextafter(c, direction)
            if math.radians(c) == rad:
                return c
    return d


def scenario_to_dict(scn: Scenario) -> dict[str, Any]:
    def tree_out(t):
        return t if isinstance(t, (int, str)) else [tree_out(c) for c in t]

    phy = {}
    for key in _PHY_KEYS:
        v = getattr(scn.phy, key)
        phy[key] = _degrees_exact(v) if key == "min_beamwidth" else v
    return {
        "name": scn.name,
        "phy": phy,
        "users": [
            {"id": u.id, "radius": u.radius, "angle": _degrees_exact(u.angle)} for u in scn.users
        ],
        "modulations": [
            {
                "name": s.name,
                "bits_per_symbol": s.bits_per_symbol,
                "code_n": s.code_n,
                "code_k": s.code_k,
                "symbol_bits": s.symbol_bits,
            }
            for s in scn.schemes
        ],
        "m": scn.m,
        "R_max": scn.r_max,
        "X_cap": scn.x_cap,
        "tree": tree_out(scn.tree),
        "reception_mode": scn.reception_mode,
    }


def dump_scenario(scn: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scn), indent=2) + "\n", encoding="utf-8")


def two_user(theta_deg: float, radius: float = 50.0, *, m: int = 5, r_max: int = 2) -> Scenario:
    """User 1 fixed at (0 deg, 80 m), user 2 at (theta_deg, radius)."""
    base = bundled("twouser")
    u2 = User(2, float(radius), math.radians(theta_deg % 360.0) % phy_mod.TWO_PI)
    return base.replace(
        users=(base.users[0], u2),
        m=m,
        r_max=r_max,
        name=f"twouser_r{radius:g}_t{theta_deg:g}",
    )
