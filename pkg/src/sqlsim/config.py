"""Run configuration: flat ``key=value`` files, command-line overrides, manifests."""

from __future__ import annotations

import argparse
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError, MissingRequired, TypeMismatch, UnknownKey
from .model import FIG1_B, FIG1_D, FIG1_MASS, HBAR, PhysicalParams

MODES = ("simulate-discrete", "simulate-sde", "filter", "force-detect", "sql-report", "sweep", "figure1")


@dataclass(frozen=True)
class RunConfig:
    """Fully specified run. ``None`` fields are resolved per mode by :func:`resolve`."""

    mode: str
    mass: float = FIG1_MASS
    coupling_D: float = FIG1_D
    bandwidth_B: float = FIG1_B
    hbar: float = HBAR
    tau: float | None = None
    sigma: float | None = None
    force_alpha: float | str = 0.0
    n_trajectories: int | None = None
    t_final: float | None = None
    step_h: float | None = None
    seed: int = 0
    out_dir: str = "."
    decimate: int | None = None
    mass_grid: str | None = None
    D_grid: str | None = None
    B_grid: str | None = None
    svg: bool = True
    quiet: bool = False

    @property
    def params(self) -> PhysicalParams:
        alpha = self.force_alpha if isinstance(self.force_alpha, float) else 0.0
        return PhysicalParams(
            mass=self.mass, coupling_D=self.coupling_D, bandwidth_B=self.bandwidth_B,
            hbar=self.hbar, tau=self.tau, sigma=self.sigma, force_alpha=alpha,
        )

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


_FLOAT = {"mass", "coupling_D", "bandwidth_B", "hbar", "tau", "sigma", "t_final", "step_h"}
_INT = {"n_trajectories", "seed", "decimate"}
_BOOL = {"svg", "quiet"}
_STR = {"mode", "out_dir", "mass_grid", "D_grid", "B_grid"}
KEYS = tuple(f.name for f in fields(RunConfig))

# flag name -> config key
_FLAGS = {
    "seed": "seed", "out": "out_dir", "trajectories": "n_trajectories", "t_final": "t_final",
    "step": "step_h", "mass": "mass", "D": "coupling_D", "B": "bandwidth_B", "alpha": "force_alpha",
    "tau": "tau", "hbar": "hbar", "decimate": "decimate",
}


def _coerce(key, raw: str):
    raw = raw.strip()
    try:
        if key in _FLOAT:
            return float(raw)
        if key in _INT:
            v = int(raw, 0)
            if key == "seed" and not 0 <= v < 2**64:
                raise ValueError(raw)
            return v
        if key in _BOOL:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if key == "force_alpha":
            return "alpha_min" if raw == "alpha_min" else float(raw)
    except ValueError:
        raise TypeMismatch(f"{key}: cannot parse {raw!r}", key=key) from None
    if key == "mode" and raw not in MODES:
        raise TypeMismatch(f"mode: unknown mode {raw!r}", key=key)
    return raw


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise TypeMismatch(f"{path}:{lineno}: expected key=value", key=line)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise UnknownKey(f"{path}:{lineno}: unknown key {key!r}", key=key)
        out[key] = _coerce(key, val)
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    ap = _Parser(prog="sqlsim", description="Continuous position measurement simulations")
    ap.add_argument("mode", nargs="?", help="one of: " + ", ".join(MODES))
    ap.add_argument("--config", metavar="PATH")
    ap.add_argument("--seed", metavar="U64")
    ap.add_argument("--out", metavar="DIR")
    ap.add_argument("--trajectories", metavar="N")
    ap.add_argument("--t-final", dest="t_final", metavar="SEC")
    ap.add_argument("--step", metavar="SEC")
    ap.add_argument("--mass", metavar="KG")
    ap.add_argument("--D", metavar="M2S")
    ap.add_argument("--B", metavar="HZ")
    ap.add_argument("--alpha", metavar="N")
    ap.add_argument("--tau", metavar="SEC")
    ap.add_argument("--hbar", metavar="JS")
    ap.add_argument("--decimate", metavar="K")
    ap.add_argument("--no-svg", action="store_true")
    ap.add_argument("--quiet", action="store_true")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return ap


def parse_config(argv=None) -> RunConfig:
    """Merge config file and flags (flags win) into a :class:`RunConfig`."""
    ns = build_parser().parse_args(argv)
    values = read_config_file(ns.config) if ns.config else {}
    for item in ns.set:
        if "=" not in item:
            raise TypeMismatch(f"--set expects KEY=VALUE, got {item!r}", key=item)
        key, val = item.split("=", 1)
        key = key.strip()
        if key not in KEYS:
            raise UnknownKey(f"unknown key {key!r}", key=key)
        values[key] = _coerce(key, val)
    for flag, key in _FLAGS.items():
        raw = getattr(ns, flag)
        if raw is not None:
            values[key] = _coerce(key, raw)
    if ns.mode is not None:
        values["mode"] = _coerce("mode", ns.mode)
    if ns.no_svg:
        values["svg"] = False
    if ns.quiet:
        values["quiet"] = True
    if "mode" not in values:
        raise MissingRequired("mode is required (positional argument or mode= in --config)", key="mode")
    return RunConfig(**values)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def manifest_text(cfg: RunConfig) -> str:
    lines = ["# resolved configuration; rerun with: sqlsim --config <this file>"]
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is not None:
            lines.append(f"{f.name}={_fmt(v)}")
    return "\n".join(lines) + "\n"
