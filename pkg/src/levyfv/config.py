"""Flat ``dotted.key = value`` experiment configuration.

Lines starting with ``#`` and blank lines are ignored; every other line
must be ``key = value`` with a known key.  The schema is :data:`SCHEMA`;
see the README for the meaning of each key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, LevyFVError
from .initial import Bump, Cosine, Step, TensorProduct, riemann, square_wave
from .measures import CGMY, Atomic, LevyMeasure, PowerLaw, Tabulated
from .nonlinear import Diffusion, Flux, Nonlinearity, NumericalFlux
from .scheme import FixedPoint, Problem, SchemeConfig

__all__ = ["SCHEMA", "Config", "parse_config", "load_config"]


def _float(v):
    return float(v)


def _int(v):
    f = float(v)
    if f != int(f):
        raise ValueError(f"expected an integer, got {v!r}")
    return int(f)


def _bool(v):
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _auto_float(v):
    return None if v.lower() == "auto" else float(v)


def _floats(v):
    return tuple(float(p) for p in v.replace(",", " ").split())


def _ints(v):
    return tuple(_int(p) for p in v.replace(",", " ").split())


def _str(v):
    return v


def _choice(*options):
    def conv(v):
        low = v.lower()
        if low not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {v!r}")
        return low

    return conv


def _atoms(v):
    out = []
    for part in v.split(","):
        part = part.strip()
        if not part:
            continue
        z, _, w = part.partition(":")
        if not w:
            raise ValueError(f"atom {part!r} must be written location:mass")
        out.append((float(z), float(w)))
    return tuple(out)


SCHEMA = {
    "problem.dimension": (_int, 1),
    "problem.N": (_int, 64),
    "problem.length": (_float, 2 * math.pi),
    "problem.T": (_float, 0.5),
    "problem.flux.type": (_choice("none", "linear", "burgers"), "none"),
    "problem.flux.lipschitz": (_auto_float, None),
    "problem.flux.speed": (_float, 1.0),
    "problem.flux.numerical": (_choice("engquist_osher", "lax_friedrichs", "godunov"), "engquist_osher"),
    "problem.diffusion.type": (_choice("identity", "porous", "stairs", "none"), "identity"),
    "problem.diffusion.m": (_float, 2.0),
    "problem.measure.type": (_choice("powerlaw", "fractional_laplacian", "cgmy", "atomic", "tabulated"), "fractional_laplacian"),
    "problem.measure.lambda": (_float, 0.5),
    "problem.measure.c": (_float, 1.0),
    "problem.measure.C": (_float, 1.0),
    "problem.measure.G": (_float, 5.0),
    "problem.measure.M": (_float, 5.0),
    "problem.measure.Y": (_float, 0.5),
    "problem.measure.atoms": (_atoms, ((1.0, 1.0), (-1.0, 1.0))),
    "problem.measure.file": (_str, None),
    "problem.initial.type": (_choice("riemann", "square", "cos", "bump", "step", "file"), "square"),
    "problem.initial.params": (_floats, ()),
    "problem.initial.file": (_str, None),
    "scheme.type": (_choice("explicit", "imex", "implicit"), "implicit"),
    "scheme.dt": (_auto_float, None),
    "scheme.cfl_safety": (_float, 0.9),
    "scheme.tol": (_float, 1e-10),
    "scheme.max_iters": (_int, 200_000),
    "scheme.epsilon": (_auto_float, None),
    "scheme.time_cap": (_bool, False),
    "weights.K": (_int, 64),
    "weights.policy": (_choice("periodic_wrap", "diagonal_lump"), "periodic_wrap"),
    "converge.resolutions": (_ints, (64, 128, 256)),
    "converge.reference": (_choice("spectral", "fine"), "spectral"),
    "converge.refinement": (_int, 8),
    "converge.min_order": (_auto_float, None),
    "converge.workers": (_int, 1),
    "output.dir": (_str, "out"),
    "output.snapshots": (_floats, ()),
}


@dataclass
class Config:
    values: dict
    base: Path = field(default_factory=Path.cwd)
    lines: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def _fail(self, key, message):
        raise ConfigError(message, line=self.lines.get(key), key=key)

    def path(self, key) -> Path | None:
        v = self.values[key]
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() else self.base / p

    def measure(self) -> LevyMeasure:
        kind = self["problem.measure.type"]
        d = self["problem.dimension"]
        try:
            if kind == "powerlaw":
                return PowerLaw(self["problem.measure.lambda"], self["problem.measure.c"], d)
            if kind == "fractional_laplacian":
                return PowerLaw.fractional_laplacian(self["problem.measure.lambda"], d)
            if kind == "cgmy":
                return CGMY(self["problem.measure.C"], self["problem.measure.G"], self["problem.measure.M"],
                            self["problem.measure.Y"])
            if kind == "atomic":
                return Atomic(self["problem.measure.atoms"])
            path = self.path("problem.measure.file")
            if path is None:
                self._fail("problem.measure.file", "a tabulated measure needs a file")
            return Tabulated.from_file(path)
        except LevyFVError as exc:
            if isinstance(exc, ConfigError):
                raise
            self._fail("problem.measure.type", str(exc))

    def initial(self):
        kind = self["problem.initial.type"]
        p = self["problem.initial.params"]
        L = self["problem.length"]
        key = "problem.initial.params"
        try:
            if kind == "riemann":
                return riemann(p[0] if p else 1.0, p[1] if len(p) > 1 else -1.0, L)
            if kind == "square":
                return square_wave(p[0] if p else 1.0, L)
            if kind == "cos":
                amp = p[0] if p else 1.0
                mode = int(p[1]) if len(p) > 1 else 1
                return Cosine(amp, L, mode, p[2] if len(p) > 2 else 0.0)
            if kind == "bump":
                defaults = (1.0, 0.5 * L, 0.1 * L)
                amp, center, width = (tuple(p) + defaults[len(p):])[:3]
                return Bump(amp, center, width, L)
            if kind == "step":
                if len(p) < 2 or len(p) % 2:
                    raise ValueError("step data is written break1, value1, break2, value2, ...")
                return Step(p[0::2], p[1::2], L)
            path = self.path("problem.initial.file")
            if path is None:
                key = "problem.initial.file"
                raise ValueError("file initial data needs problem.initial.file")
            vals = np.loadtxt(path, ndmin=1)
            if vals.size != self["problem.N"] ** self["problem.dimension"]:
                raise ValueError(f"{path} holds {vals.size} values, expected one per cell")
            return vals.reshape((self["problem.N"],) * self["problem.dimension"])
        except (ValueError, OSError) as exc:
            self._fail(key, str(exc))

    def nonlinearity(self) -> Nonlinearity:
        try:
            A = Diffusion(self["problem.diffusion.type"], self["problem.diffusion.m"])
        except ValueError as exc:
            self._fail("problem.diffusion.m", str(exc))
        return Nonlinearity(A, Flux(self["problem.flux.type"], self["problem.flux.speed"]))

    def problem(self) -> Problem:
        N = self["problem.N"]
        if N < 2:
            self._fail("problem.N", "need at least two cells")
        if not self["problem.length"] > 0:
            self._fail("problem.length", "length must be positive")
        if self["problem.T"] < 0:
            self._fail("problem.T", "final time must be nonnegative")
        if self["problem.dimension"] not in (1, 2):
            self._fail("problem.dimension", "dimension must be 1 or 2")
        u0 = self.initial()
        if self["problem.dimension"] == 2 and callable(u0):
            u0 = TensorProduct(u0)
        return Problem(
            measure=self.measure(),
            u0=u0,
            N=N,
            T=self["problem.T"],
            length=self["problem.length"],
            nonlin=self.nonlinearity(),
            numflux=NumericalFlux(self["problem.flux.numerical"], self["problem.flux.lipschitz"]),
            dimension=self["problem.dimension"],
            snapshots=self["output.snapshots"],
        )

    def scheme(self) -> SchemeConfig:
        try:
            fp = FixedPoint(self["scheme.epsilon"], self["scheme.tol"], self["scheme.max_iters"])
        except ValueError as exc:
            self._fail("scheme.tol", str(exc))
        try:
            return SchemeConfig(self["scheme.type"], self["scheme.dt"], self["scheme.cfl_safety"], fp,
                                self["scheme.time_cap"])
        except ValueError as exc:
            self._fail("scheme.cfl_safety" if "cfl" in str(exc) else "scheme.dt", str(exc))


def parse_config(text: str, base: Path | None = None) -> Config:
    values = {k: default for k, (_, default) in SCHEMA.items()}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError("expected 'key = value'", line=lineno)
        if key not in SCHEMA:
            raise ConfigError("unknown key", line=lineno, key=key)
        if key in lines:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", line=lineno, key=key)
        conv = SCHEMA[key][0]
        try:
            values[key] = conv(value)
        except ValueError as exc:
            raise ConfigError(str(exc), line=lineno, key=key) from None
        lines[key] = lineno
    return Config(values, base or Path.cwd(), lines)


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)
