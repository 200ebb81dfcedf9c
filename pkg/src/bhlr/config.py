"""TOML experiment configs: parsing and schema validation.

Schema (``*`` marks required keys)::

    experiment*  = "particle" | "lr" | "commutator" | "ladder" | "verify"
    id           = str                      (default: file stem)
    seed         = int >= 0                 (default 0)

    [lattice]      d*, extents*             (extents: list of d positive ints)
    [sector]       N_tot*, n_max*
    [hamiltonian]  J=1.0, U=0.0, mu=0.0, form="onsite", p=2.0
    [state]        type="fock"|"spread"; occupations (fock, one entry per site index);
                   profile="uniform" or list of weights (spread); mixed=false;
                   lambda (optional, checked); eta=1.0 (moment order for the check)
    [propagator]   method="auto"|"dense"|"krylov", tol=1e-10, krylov_dim=30
    [observable]   site=<coordinate, default origin>, nu_A=1 (0 disables the projection)
    [grid]         per experiment:
                     particle:   v*, t*, r=[0], R*, centers="all" or list of coordinates,
                                 eta=1.0, delta0=0.5
                     lr:         R*, t*
                     commutator: separations*, t*, nu (optional)
                     ladder:     R*, nu*, t*
    [fit]          mode ("decay-in-gap" | "exp-decay" | "front-speed"), threshold=1e-3
    [output]       csv="<id>.csv", json="<id>.json"

Any numeric list in ``[grid]`` may instead be a table ``{start, stop, step}``; ``stop``
is included when it lies on the step lattice.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli

from .errors import ConfigError

KINDS = ("particle", "lr", "commutator", "ladder", "verify")
FIT_MODES = ("decay-in-gap", "exp-decay", "front-speed")

_SECTIONS = ("lattice", "sector", "hamiltonian", "state", "propagator", "observable", "grid", "fit", "output")
_TOP = ("experiment", "id", "seed") + _SECTIONS
_KEYS = {
    "lattice": ("d", "extents"),
    "sector": ("N_tot", "n_max"),
    "hamiltonian": ("J", "U", "mu", "form", "p"),
    "state": ("type", "occupations", "profile", "mixed", "lambda", "eta"),
    "propagator": ("method", "tol", "krylov_dim"),
    "observable": ("site", "nu_A"),
    "fit": ("mode", "threshold"),
    "output": ("csv", "json"),
}
_GRID_KEYS = {
    "particle": ("v", "t", "r", "R", "centers", "eta", "delta0"),
    "lr": ("R", "t"),
    "commutator": ("separations", "t", "nu"),
    "ladder": ("R", "nu", "t"),
    "verify": (),
}
_GRID_REQUIRED = {
    "particle": ("v", "t", "R"),
    "lr": ("R", "t"),
    "commutator": ("separations", "t"),
    "ladder": ("R", "nu", "t"),
    "verify": (),
}


@dataclass
class ExperimentConfig:
    kind: str
    id: str
    seed: int
    raw: dict = field(repr=False)
    source: Optional[Path] = None
    lattice: dict = field(default_factory=dict)
    sector: dict = field(default_factory=dict)
    hamiltonian: dict = field(default_factory=dict)
    state: dict = field(default_factory=dict)
    propagator: dict = field(default_factory=dict)
    observable: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def sha256(self) -> str:
        """Hash of the canonical JSON form of the parsed config with the effective seed."""
        blob = json.dumps({**self.raw, "seed": self.seed}, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


class _Locator:
    """Maps dotted key paths to line numbers in the source text, best effort."""

    def __init__(self, text: str, name: str):
        self.name = name
        self.lines = text.splitlines()

    def line_of(self, key: str) -> Optional[int]:
        parts = key.split(".")
        section, leaf = (parts[0], parts[-1]) if len(parts) > 1 else (None, parts[0])
        current = None
        for i, line in enumerate(self.lines, 1):
            stripped = line.strip()
            header = re.match(r"^\[([^\]]+)\]", stripped)
            if header:
                current = header.group(1).strip()
                if section is not None and current == section and len(parts) == 1:
                    return i
                continue
            if re.match(rf"^{re.escape(leaf)}\s*=", stripped) and current == section:
                return i
        if section is not None:
            for i, line in enumerate(self.lines, 1):
                if line.strip() == f"[{section}]":
                    return i
        return None

    def error(self, key: str, message: str) -> ConfigError:
        line = self.line_of(key)
        where = f"{self.name}:{line}: " if line else f"{self.name}: "
        err = ConfigError(message, key=key)
        err.args = (where + str(err),)
        err.line = line
        return err


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and np.isfinite(v)


def expand_values(value, key: str, loc: _Locator) -> list:
    """A scalar, a list, or a ``{start, stop, step}`` table as a list of numbers."""
    if isinstance(value, dict):
        missing = {"start", "stop", "step"} - set(value)
        if missing:
            raise loc.error(key, f"range table needs start, stop, step (missing {sorted(missing)})")
        start, stop, step = value["start"], value["stop"], value["step"]
        if not all(_is_num(v) for v in (start, stop, step)) or step <= 0 or stop < start:
            raise loc.error(key, "range needs numeric start <= stop and step > 0")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(n)]
    if _is_num(value):
        return [value]
    if isinstance(value, list) and value and all(_is_num(v) for v in value):
        return list(value)
    raise loc.error(key, "expected a number, a nonempty list of numbers, or a {start, stop, step} table")


def _check_unknown(table: dict, allowed, prefix: str, loc: _Locator):
    for k in table:
        if k not in allowed:
            key = f"{prefix}.{k}" if prefix else k
            raise loc.error(key, f"unknown key (allowed: {', '.join(allowed)})")


def _section(raw: dict, name: str, loc: _Locator, required: bool) -> dict:
    sec = raw.get(name)
    if sec is None:
        if required:
            raise loc.error(name, "missing required section")
        return {}
    if not isinstance(sec, dict):
        raise loc.error(name, "must be a table")
    return sec


def parse_config(text: str, name: str = "<config>", seed: Optional[int] = None) -> ExperimentConfig:
    loc = _Locator(text, name)
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{name}: {exc}") from None
    _check_unknown(raw, _TOP, "", loc)
    kind = raw.get("experiment")
    if kind is None:
        raise loc.error("experiment", "missing required key")
    if kind not in KINDS:
        raise loc.error("experiment", f"unknown experiment kind {kind!r} (known: {', '.join(KINDS)})")
    cfg_seed = raw.get("seed", 0)
    if not _is_int(cfg_seed) or cfg_seed < 0:
        raise loc.error("seed", "must be a nonnegative integer")
    exp_id = raw.get("id", Path(name).stem)
    if not isinstance(exp_id, str) or not exp_id:
        raise loc.error("id", "must be a nonempty string")

    needs_system = kind != "verify"
    cfg = ExperimentConfig(kind=kind, id=exp_id, seed=cfg_seed if seed is None else seed, raw=raw)
    for sec in _SECTIONS:
        table = _section(raw, sec, loc, required=needs_system and sec in ("lattice", "sector"))
        allowed = _GRID_KEYS[kind] if sec == "grid" else _KEYS[sec]
        _check_unknown(table, allowed, sec, loc)
        setattr(cfg, sec, dict(table))
    if kind == "verify":
        return cfg

    lat = cfg.lattice
    for k in ("d", "extents"):
        if k not in lat:
            raise loc.error(f"lattice.{k}", "missing required key")
    if not _is_int(lat["d"]) or lat["d"] < 1:
        raise loc.error("lattice.d", "must be an integer >= 1")
    ext = lat["extents"]
    if not isinstance(ext, list) or len(ext) != lat["d"] or not all(_is_int(e) and e >= 1 for e in ext):
        raise loc.error("lattice.extents", f"must be a list of {lat['d']} positive integers")

    sec = cfg.sector
    for k in ("N_tot", "n_max"):
        if k not in sec:
            raise loc.error(f"sector.{k}", "missing required key")
    if not _is_int(sec["N_tot"]) or sec["N_tot"] < 0:
        raise loc.error("sector.N_tot", "must be an integer >= 0")
    if not _is_int(sec["n_max"]) or sec["n_max"] < 1:
        raise loc.error("sector.n_max", "must be an integer >= 1")

    ham = {"J": 1.0, "U": 0.0, "mu": 0.0, "form": "onsite", "p": 2.0, **cfg.hamiltonian}
    for k in ("J", "U", "mu", "p"):
        if not _is_num(ham[k]):
            raise loc.error(f"hamiltonian.{k}", "must be a finite number")
    if ham["form"] not in ("onsite", "pairwise"):
        raise loc.error("hamiltonian.form", "must be 'onsite' or 'pairwise'")
    cfg.hamiltonian = ham

    st = {"type": "fock", "mixed": False, "eta": 1.0, **cfg.state}
    if kind != "commutator":
        if not cfg.state:
            raise loc.error("state", "missing required section")
        if st["type"] not in ("fock", "spread"):
            raise loc.error("state.type", "must be 'fock' or 'spread'")
        if st["type"] == "fock":
            occ = st.get("occupations")
            if not isinstance(occ, list) or not all(_is_int(n) and n >= 0 for n in occ):
                raise loc.error("state.occupations", "fock state needs a list of nonnegative integers")
        else:
            prof = st.get("profile", "uniform")
            if not (prof == "uniform" or (isinstance(prof, list) and all(_is_num(w) for w in prof))):
                raise loc.error("state.profile", "must be 'uniform' or a list of weights")
            st["profile"] = prof
        if not isinstance(st["mixed"], bool):
            raise loc.error("state.mixed", "must be true or false")
        if "lambda" in st and (not _is_num(st["lambda"]) or st["lambda"] <= 0):
            raise loc.error("state.lambda", "must be a positive number")
        if not _is_num(st["eta"]) or st["eta"] < 1:
            raise loc.error("state.eta", "must be a number >= 1")
    cfg.state = st

    prop = {"method": "auto", "tol": 1e-10, "krylov_dim": 30, **cfg.propagator}
    if prop["method"] not in ("auto", "dense", "krylov"):
        raise loc.error("propagator.method", "must be 'auto', 'dense' or 'krylov'")
    if not _is_num(prop["tol"]) or prop["tol"] <= 0:
        raise loc.error("propagator.tol", "must be a positive number")
    if not _is_int(prop["krylov_dim"]) or prop["krylov_dim"] < 2:
        raise loc.error("propagator.krylov_dim", "must be an integer >= 2")
    cfg.propagator = prop

    obs = {"nu_A": 1, **cfg.observable}
    if "site" in obs:
        site = obs["site"]
        if not isinstance(site, list) or len(site) != lat["d"] or not all(_is_int(c) for c in site):
            raise loc.error("observable.site", f"must be a list of {lat['d']} integer coordinates")
    if not _is_int(obs["nu_A"]) or obs["nu_A"] < 0:
        raise loc.error("observable.nu_A", "must be an integer >= 0")
    cfg.observable = obs

    grid = dict(cfg.grid)
    for k in _GRID_REQUIRED[kind]:
        if k not in grid:
            raise loc.error(f"grid.{k}", "missing required key")
    for k, v in list(grid.items()):
        if k == "centers":
            if v != "all" and not (isinstance(v, list) and all(isinstance(c, list) and len(c) == lat["d"] for c in v)):
                raise loc.error("grid.centers", "must be 'all' or a list of coordinates")
            continue
        if k in ("v", "eta", "delta0"):
            if not _is_num(v):
                raise loc.error(f"grid.{k}", "must be a number")
            continue
        if k == "nu" and kind == "commutator":
            if not _is_int(v) or v < 1:
                raise loc.error("grid.nu", "must be an integer >= 1")
            continue
        grid[k] = expand_values(v, f"grid.{k}", loc)
    if kind == "particle":
        grid.setdefault("r", [0.0])
        grid.setdefault("centers", "all")
        grid.setdefault("eta", 1.0)
        grid.setdefault("delta0", 0.5)
        kappa = 2 * lat["d"] * abs(ham["J"])
        if not grid["v"] > kappa:
            raise loc.error("grid.v", f"velocity must exceed 2d|J| = {kappa:g}")
        if not 0 < grid["delta0"] < 1:
            raise loc.error("grid.delta0", "must lie in (0, 1)")
        if grid["eta"] <= 0:
            raise loc.error("grid.eta", "must be > 0")
        if any(R <= r for R in grid["R"] for r in grid["r"]):
            raise loc.error("grid.R", "every R must exceed every r")
    if kind == "ladder" and not all(float(n).is_integer() and n >= 1 for n in grid["nu"]):
        raise loc.error("grid.nu", "must be integers >= 1")
    if kind == "ladder":
        grid["nu"] = [int(n) for n in grid["nu"]]
    if kind == "commutator" and not all(float(s).is_integer() and s >= 1 for s in grid["separations"]):
        raise loc.error("grid.separations", "must be integers >= 1")
    cfg.grid = grid

    fit = dict(cfg.fit)
    if "mode" in fit and fit["mode"] not in FIT_MODES:
        raise loc.error("fit.mode", f"must be one of {', '.join(FIT_MODES)}")
    fit.setdefault("threshold", 1e-3)
    if not _is_num(fit["threshold"]) or not 0 < fit["threshold"] < 1:
        raise loc.error("fit.threshold", "must lie in (0, 1)")
    cfg.fit = fit

    cfg.output = {"csv": f"{exp_id}.csv", "json": f"{exp_id}.json", **cfg.output}
    for k in ("csv", "json"):
        if not isinstance(cfg.output[k], str) or not cfg.output[k]:
            raise loc.error(f"output.{k}", "must be a nonempty file name")
    return cfg


def load_config(path, seed: Optional[int] = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    cfg = parse_config(text, name=str(path), seed=seed)
    cfg.source = path
    return cfg


def shipped_configs() -> dict[str, Path]:
    """Example configs bundled with the package, keyed by stem."""
    root = Path(__file__).with_name("configs")
    return {p.stem: p for p in sorted(root.glob("*.toml"))}
