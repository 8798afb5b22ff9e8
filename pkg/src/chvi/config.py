"""Flat key=value run configuration: parsing, validation, normalization.

The accepted keys are fixed; anything else is a hard parse error naming the
offending line.  Only newton.tol, newton.max_iter, dealias and output.every
carry defaults.  Floats are serialized with 17 significant digits so that
normalize/parse round-trips are lossless.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .dynamics import SimConfig
from .potential import PotentialKind, PotentialSpec
from .spectral import Grid, SpectralField, to_spectral, to_values, zero_field


class ConfigError(ValueError):
    """Malformed or out-of-range run configuration."""


KNOWN_KEYS = (
    "dim",
    "n",
    "alpha",
    "delta",
    "lambda",
    "eps",
    "T",
    "dt",
    "potential.kind",
    "output.every",
    "newton.tol",
    "newton.max_iter",
    "dealias",
    "seed",
    "init.kind",
    "init.amplitude",
    "init.path",
)

_DEFAULTS = {
    "newton.tol": "1e-10",
    "newton.max_iter": "50",
    "dealias": "0",
    "output.every": "100",
}

_POTENTIALS = {k.value: k for k in PotentialKind}
_INIT_KINDS = ("mode1", "modes", "file")


@dataclass(frozen=True)
class InitSpec:
    kind: str
    amplitude: float | None
    path: str | None
    seed: int | None


@dataclass(frozen=True)
class RunSetup:
    """A fully validated configuration: solver config plus run plumbing."""

    config: SimConfig
    init: InitSpec
    output_every: int
    seed: int | None


def _parse_lines(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not val:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        values[key] = val
    return values


def _need(values: dict[str, str], key: str) -> str:
    if key not in values:
        raise ConfigError(f"missing required key {key!r}")
    return values[key]


def _as_float(values: dict[str, str], key: str) -> float:
    try:
        return float(_need(values, key))
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: not a number ({values[key]!r})") from exc


def _as_int(values: dict[str, str], key: str) -> int:
    raw = _need(values, key)
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: not an integer ({raw!r})") from exc


def parse_config(text: str) -> RunSetup:
    """Parse and fully validate a flat key=value configuration."""
    values = _parse_lines(text)
    for key, default in _DEFAULTS.items():
        values.setdefault(key, default)

    dim = _as_int(values, "dim")
    n = _as_int(values, "n")
    try:
        grid = Grid(dim, n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    kind_raw = _need(values, "potential.kind")
    if kind_raw not in _POTENTIALS:
        raise ConfigError(
            f"key 'potential.kind': expected one of {sorted(_POTENTIALS)}, got {kind_raw!r}"
        )
    lam = _as_float(values, "lambda")
    if lam < 0.0:
        raise ConfigError("key 'lambda': must be >= 0")
    potential = PotentialSpec(kind=_POTENTIALS[kind_raw], lam=lam)

    dealias_raw = values["dealias"]
    if dealias_raw not in ("0", "1"):
        raise ConfigError(f"key 'dealias': expected 0 or 1, got {dealias_raw!r}")

    try:
        config = SimConfig(
            alpha=_as_float(values, "alpha"),
            delta=_as_float(values, "delta"),
            lam=lam,
            eps=_as_float(values, "eps"),
            T=_as_float(values, "T"),
            dt=_as_float(values, "dt"),
            potential=potential,
            grid=grid,
            newton_tol=_as_float(values, "newton.tol"),
            newton_max_iter=_as_int(values, "newton.max_iter"),
            dealias=dealias_raw == "1",
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    output_every = _as_int(values, "output.every")
    if output_every < 1:
        raise ConfigError("key 'output.every': must be >= 1")

    init_kind = _need(values, "init.kind")
    if init_kind not in _INIT_KINDS:
        raise ConfigError(
            f"key 'init.kind': expected one of {_INIT_KINDS}, got {init_kind!r}"
        )
    seed = _as_int(values, "seed") if "seed" in values else None
    amplitude = _as_float(values, "init.amplitude") if "init.amplitude" in values else None
    path = values.get("init.path")

    if init_kind in ("mode1", "modes") and amplitude is None:
        raise ConfigError(f"init.kind={init_kind} requires init.amplitude")
    if init_kind == "modes" and seed is None:
        raise ConfigError("init.kind=modes requires seed")
    if init_kind == "file":
        if path is None:
            raise ConfigError("init.kind=file requires init.path")
    elif path is not None:
        raise ConfigError("init.path is only valid with init.kind=file")
    if amplitude is not None and not amplitude > 0.0:
        raise ConfigError("key 'init.amplitude': must be > 0")

    return RunSetup(
        config=config,
        init=InitSpec(kind=init_kind, amplitude=amplitude, path=path, seed=seed),
        output_every=output_every,
        seed=seed,
    )


def fmt_float(x: float) -> str:
    """17-significant-digit decimal form (lossless for binary64)."""
    return f"{x:.17g}"


def normalize_config(setup: RunSetup) -> str:
    """Canonical text form; parse(normalize(parse(t))) is the identity."""
    cfg = setup.config
    lines = [
        f"dim={cfg.grid.dim}",
        f"n={cfg.grid.n}",
        f"alpha={fmt_float(cfg.alpha)}",
        f"delta={fmt_float(cfg.delta)}",
        f"lambda={fmt_float(cfg.lam)}",
        f"eps={fmt_float(cfg.eps)}",
        f"T={fmt_float(cfg.T)}",
        f"dt={fmt_float(cfg.dt)}",
        f"potential.kind={cfg.potential.kind.value}",
        f"output.every={setup.output_every}",
        f"newton.tol={fmt_float(cfg.newton_tol)}",
        f"newton.max_iter={cfg.newton_max_iter}",
        f"dealias={1 if cfg.dealias else 0}",
        f"init.kind={setup.init.kind}",
    ]
    if setup.init.amplitude is not None:
        lines.append(f"init.amplitude={fmt_float(setup.init.amplitude)}")
    if setup.init.path is not None:
        lines.append(f"init.path={setup.init.path}")
    if setup.seed is not None:
        lines.append(f"seed={setup.seed}")
    return "\n".join(lines) + "\n"


def config_hash(normalized_text: str) -> str:
    """64-bit content hash of the normalized config text, as 16 hex chars."""
    return hashlib.blake2b(normalized_text.encode("utf-8"), digest_size=8).hexdigest()


def build_initial_fields(setup: RunSetup) -> tuple[SpectralField, SpectralField]:
    """Raw (unregularized) initial fields described by the init block.

    mode1: amplitude a gives the profile a sin(pi x) (times sin(pi y) in
    2-D), so max |u0| equals a.  modes: a seeded random superposition with
    k^-2 coefficient decay, rescaled so max |u0| equals the amplitude.
    file: whitespace-separated collocation values, C order.
    """
    grid = setup.config.grid
    init = setup.init
    u1 = zero_field(grid)
    if init.kind == "mode1":
        coeffs = np.zeros(grid.shape)
        if grid.dim == 1:
            coeffs[0] = init.amplitude / np.sqrt(2.0)
        else:
            coeffs[0, 0] = init.amplitude / 2.0
        return SpectralField(grid, coeffs), u1
    if init.kind == "modes":
        rng = np.random.default_rng(init.seed)
        draw = rng.uniform(-1.0, 1.0, size=grid.shape)
        k = np.arange(1, grid.n + 1, dtype=float)
        decay = 1.0 / k**2 if grid.dim == 1 else 1.0 / (k[:, None] ** 2 + k[None, :] ** 2)
        u = SpectralField(grid, draw * decay)
        peak = float(np.max(np.abs(to_values(u))))
        if peak == 0.0:
            raise ConfigError("seeded initial profile degenerated to zero")
        u.coeffs *= init.amplitude / peak
        return u, u1
    try:
        vals = np.loadtxt(init.path, dtype=float).reshape(grid.shape)
    except OSError as exc:
        raise ConfigError(f"init.path {init.path!r}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(
            f"init.path {init.path!r}: expected {grid.size} values shaped {grid.shape}"
        ) from exc
    return to_spectral(vals, grid), u1
