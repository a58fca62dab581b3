"""
Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
Unknown or repeated keys are errors.  Only ``mode`` and ``cells`` are
required, every other key has the default listed in :data:`KEYS`.

``serialize`` writes every key in the fixed order of :data:`KEYS`, which is
the canonical form: ``parse_text(serialize(c)) == c``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .energetics import CoefficientSpec, CustomPotential, PotentialFamily, PotentialSpec, minimal_lambda_sixth
from .errors import AmplitudeTooLarge, MeanOutOfRange, NonPositiveCoefficient, ParseError, ValidationError
from .grid import BC, Domain
from .model import Constant, CosineMode, Mode, ModelParams, SeededNoise, TanhInterface, make_initial
from .stepper import StepperConfig

__all__ = ["RunConfig", "KEYS", "parse_config", "parse_text", "serialize", "write_config"]

_MODES = ("sixth", "fourth", "phasefield")
_BCS = ("noflux", "periodic")
_POTENTIALS = ("logarithmic", "polynomial", "linear")
_COEFFICIENTS = ("constant", "even_quadratic", "quadratic")
_INITIALS = ("noise", "cosine", "tanh", "constant")

# key: (kind, default, help).  ``None`` default marks a required key.
KEYS: dict[str, tuple[str, object, str]] = {
    "mode": ("choice", None, "sixth | fourth | phasefield"),
    "cells": ("ints", None, "cells per axis, e.g. 128 or 64,64"),
    "lengths": ("floats", (1.0,), "side lengths; one value applies to every axis"),
    "bc": ("choice", "noflux", "noflux | periodic"),
    "potential": ("choice", "logarithmic", "logarithmic | polynomial | linear"),
    "lambda": ("float", "auto", "λ >= 0; auto = 0, or the convexity minimum for polynomial"),
    "h0": ("float", 0.0, "shape parameter of the polynomial potential"),
    "lambda0": ("float", 1.0, "slope of the linear potential f = lambda0 u"),
    "sigma": ("float", 0.0, "regularisation σ (Yosida parameter and model σ); 0 = none"),
    "delta": ("float", 0.0, "sixth-order coefficient δ"),
    "epsilon": ("float", 0.0, "viscosity ε"),
    "mobility": ("float", 1.0, "mobility M"),
    "coefficient": ("choice", "constant", "constant | even_quadratic | quadratic"),
    "a0": ("float", 1.0, "a(u) = a0 + a1 u + a2 u^2 (constant uses a0 only)"),
    "a1": ("float", 0.0, ""),
    "a2": ("float", 0.0, ""),
    "g0": ("float", 1.0, "even_quadratic: a(u) = g0 + g2 u^2"),
    "g2": ("float", 0.0, ""),
    "tau": ("float", 1e-4, "time step"),
    "t_end": ("float", 0.01, "final time"),
    "tau_min": ("float", "auto", "smallest retry step; auto = tau/1024"),
    "newton_tol": ("float", 1e-10, ""),
    "newton_max": ("int", 30, ""),
    "krylov_tol": ("float", 1e-8, ""),
    "krylov_max": ("int", 500, ""),
    "domain_guard": ("bool", True, ""),
    "accept_energy_slack": ("float", 1e-9, ""),
    "initial": ("choice", "noise", "noise | cosine | tanh | constant"),
    "mean": ("float", 0.0, "mean of noise, cosine and constant data"),
    "amplitude": ("float", 0.1, ""),
    "seed": ("int", 0, "noise seed (u64)"),
    "wavenumber": ("int", 1, "cosine mode index"),
    "position": ("float", 0.5, "tanh interface position"),
    "width": ("float", 0.05, "tanh interface width"),
    "smoothing": ("float", 0.0, "elliptic smoothing of the initial datum; 0 = off"),
    "smoothing_order": ("int", 2, "1: (I - sΔ), 2: (I + sΔ²)"),
    "diagnostics_every": ("int", 1, ""),
    "checkpoint_every": ("int", 0, "0 = no checkpoints"),
    "snapshot_every": ("int", 0, "0 = final snapshot only"),
    "out": ("str", "out", "output directory"),
}

_CHOICES = {"mode": _MODES, "bc": _BCS, "potential": _POTENTIALS, "coefficient": _COEFFICIENTS, "initial": _INITIALS}


@dataclass(frozen=True)
class RunConfig:
    mode: str
    cells: tuple
    lengths: tuple = (1.0,)
    bc: str = "noflux"
    potential: str = "logarithmic"
    lam: float = 0.0
    h0: float = 0.0
    lambda0: float = 1.0
    sigma: float = 0.0
    delta: float = 0.0
    epsilon: float = 0.0
    mobility: float = 1.0
    coefficient: str = "constant"
    a0: float = 1.0
    a1: float = 0.0
    a2: float = 0.0
    g0: float = 1.0
    g2: float = 0.0
    tau: float = 1e-4
    t_end: float = 0.01
    tau_min: float | None = None
    newton_tol: float = 1e-10
    newton_max: int = 30
    krylov_tol: float = 1e-8
    krylov_max: int = 500
    domain_guard: bool = True
    accept_energy_slack: float = 1e-9
    initial: str = "noise"
    mean: float = 0.0
    amplitude: float = 0.1
    seed: int = 0
    wavenumber: int = 1
    position: float = 0.5
    width: float = 0.05
    smoothing: float = 0.0
    smoothing_order: int = 2
    diagnostics_every: int = 1
    checkpoint_every: int = 0
    snapshot_every: int = 0
    out: str = "out"

    # -- builders -----------------------------------------------------------

    def domain(self) -> Domain:
        lengths = self.lengths * len(self.cells) if len(self.lengths) == 1 else self.lengths
        return Domain(tuple(self.cells), tuple(lengths), BC.PERIODIC if self.bc == "periodic" else BC.NOFLUX)

    def potential_spec(self) -> PotentialSpec:
        sig = self.sigma if self.sigma > 0 else None
        if self.potential == "logarithmic":
            return PotentialSpec.logarithmic(self.lam, sig)
        if self.potential == "polynomial":
            return PotentialSpec.sixth_polynomial(self.h0, self.lam, sig)
        return PotentialSpec(PotentialFamily.CUSTOM, lam=self.lam, sigma=sig,
                             custom=CustomPotential.linear(self.lambda0))

    def coefficient_spec(self) -> CoefficientSpec:
        if self.coefficient == "constant":
            return CoefficientSpec.constant(self.a0)
        if self.coefficient == "even_quadratic":
            return CoefficientSpec.even_quadratic(self.g0, self.g2)
        return CoefficientSpec.quadratic(self.a0, self.a1, self.a2)

    def params(self) -> ModelParams:
        return ModelParams(Mode(self.mode), self.potential_spec(), self.coefficient_spec(),
                           delta=self.delta, epsilon=self.epsilon, sigma=self.sigma, mobility=self.mobility)

    def stepper(self) -> StepperConfig:
        return StepperConfig(
            tau=self.tau, t_end=self.t_end, newton_tol=self.newton_tol, newton_max=self.newton_max,
            krylov_tol=self.krylov_tol, krylov_max=self.krylov_max, tau_min=self.tau_min,
            domain_guard=self.domain_guard, accept_energy_slack=self.accept_energy_slack,
        )

    def initial_kind(self):
        if self.initial == "noise":
            return SeededNoise(self.mean, self.amplitude, self.seed)
        if self.initial == "cosine":
            return CosineMode(self.mean, self.amplitude, self.wavenumber)
        if self.initial == "tanh":
            return TanhInterface(self.position, self.width, self.amplitude)
        return Constant(self.mean)

    def scenario(self):
        from .diagnostics import Scenario

        return Scenario(self.domain(), self.params(), self.stepper(), self.initial_kind(),
                        smoothing=self.smoothing, smoothing_order=self.smoothing_order)

    def replace(self, **kw) -> "RunConfig":
        return validate(dataclasses.replace(self, **kw))


_FIELD_OF = {"lambda": "lam"}


def _field(key: str) -> str:
    return _FIELD_OF.get(key, key)


def _convert(kind: str, key: str, raw: str, line: int):
    try:
        if kind == "choice":
            v = raw.lower()
            if v not in _CHOICES[key]:
                raise ValueError(f"expected one of {', '.join(_CHOICES[key])}")
            return v
        if kind == "str":
            if not raw:
                raise ValueError("empty value")
            return raw
        if kind == "bool":
            v = raw.lower()
            if v in ("true", "yes", "on", "1"):
                return True
            if v in ("false", "no", "off", "0"):
                return False
            raise ValueError("expected true or false")
        if kind == "int":
            return int(raw)
        if kind == "float":
            if KEYS[key][1] == "auto" and raw.lower() == "auto":
                return None
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError("not finite")
            return v
        if kind == "ints":
            return tuple(int(p) for p in raw.split(","))
        if kind == "floats":
            return tuple(float(p) for p in raw.split(","))
    except ValueError as exc:
        raise ParseError(line, key, str(exc)) from None
    raise AssertionError(kind)


def parse_text(text: str, source: str = "<string>") -> RunConfig:
    seen: dict[str, int] = {}
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, line, "expected key = value")
        key, _, val = line.partition("=")
        key, val = key.strip().lower(), val.strip()
        if key not in KEYS:
            raise ParseError(lineno, key, "unknown key")
        if key in seen:
            raise ParseError(lineno, key, f"repeated (first set on line {seen[key]})")
        seen[key] = lineno
        values[_field(key)] = _convert(KEYS[key][0], key, val, lineno)
    for key, (_, default, _) in KEYS.items():
        if default is None and _field(key) not in values:
            raise ValidationError(key, "required key missing")
    lam = values.pop("lam", None)
    cfg = RunConfig(**values)
    if lam is None:
        lam = minimal_lambda_sixth(cfg.h0) if cfg.potential == "polynomial" else 0.0
    return validate(dataclasses.replace(cfg, lam=float(lam)))


def parse_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read(), str(path))


def validate(cfg: RunConfig) -> RunConfig:
    """Check every cross-key constraint; raise :class:`ValidationError` naming the keys."""
    if not 1 <= len(cfg.cells) <= 3:
        raise ValidationError("cells", "1 to 3 axes")
    if len(cfg.lengths) not in (1, len(cfg.cells)):
        raise ValidationError("lengths,cells", "one length or one per axis")
    try:
        cfg.domain()
    except ValueError as exc:
        raise ValidationError("cells,lengths", str(exc)) from None
    for key in ("delta", "epsilon", "sigma", "lam"):
        if getattr(cfg, key) < 0:
            raise ValidationError("lambda" if key == "lam" else key, "must be >= 0")
    if not cfg.mobility > 0:
        raise ValidationError("mobility", "must be > 0")
    if cfg.mode == "sixth" and not cfg.delta > 0:
        raise ValidationError("mode,delta", "mode=sixth requires delta > 0")
    if cfg.mode != "sixth" and cfg.delta != 0:
        raise ValidationError("mode,delta", f"mode={cfg.mode} requires delta = 0")
    if cfg.mode == "phasefield" and not cfg.sigma > 0:
        raise ValidationError("mode,sigma", "mode=phasefield requires sigma > 0")
    if cfg.potential == "logarithmic" and cfg.sigma == 0 and not cfg.domain_guard:
        raise ValidationError("sigma,domain_guard", "an unregularised logarithmic potential needs the domain guard")
    if cfg.potential == "polynomial" and cfg.lam < minimal_lambda_sixth(cfg.h0) - 1e-12:
        raise ValidationError("lambda,h0", f"lambda must be >= {minimal_lambda_sixth(cfg.h0):.6g} for h0={cfg.h0}")
    try:
        cfg.coefficient_spec()
    except NonPositiveCoefficient as exc:
        keys = {"constant": "a0", "even_quadratic": "g0,g2", "quadratic": "a0,a1,a2"}[cfg.coefficient]
        raise ValidationError(keys, str(exc)) from None
    if not cfg.tau > 0:
        raise ValidationError("tau", "must be > 0")
    if cfg.t_end < 0:
        raise ValidationError("t_end", "must be >= 0")
    if cfg.tau_min is not None and not 0 < cfg.tau_min <= cfg.tau:
        raise ValidationError("tau_min,tau", "need 0 < tau_min <= tau")
    for key in ("newton_tol", "krylov_tol", "accept_energy_slack"):
        if not getattr(cfg, key) > 0:
            raise ValidationError(key, "must be > 0")
    for key in ("newton_max", "krylov_max", "diagnostics_every"):
        if getattr(cfg, key) < 1:
            raise ValidationError(key, "must be >= 1")
    for key in ("checkpoint_every", "snapshot_every", "wavenumber"):
        if getattr(cfg, key) < 0:
            raise ValidationError(key, "must be >= 0")
    if not 0 <= cfg.seed < 2**64:
        raise ValidationError("seed", "must fit in an unsigned 64-bit integer")
    if cfg.smoothing < 0:
        raise ValidationError("smoothing", "must be >= 0")
    if cfg.smoothing_order not in (1, 2):
        raise ValidationError("smoothing_order", "must be 1 or 2")
    try:
        make_initial(cfg.initial_kind(), cfg.domain(), singular=cfg.potential == "logarithmic")
    except MeanOutOfRange as exc:
        raise ValidationError("mean", str(exc)) from None
    except AmplitudeTooLarge as exc:
        raise ValidationError("amplitude", str(exc)) from None
    except ValueError as exc:
        raise ValidationError("initial", str(exc)) from None
    return cfg


def _format(kind: str, value) -> str:
    if value is None:
        return "auto"
    if kind == "bool":
        return "true" if value else "false"
    if kind == "ints":
        return ",".join(str(v) for v in value)
    if kind == "floats":
        return ",".join(repr(float(v)) for v in value)
    if kind == "float":
        return repr(float(value))
    return str(value)


def serialize(cfg: RunConfig) -> str:
    lines = []
    for key, (kind, _, _) in KEYS.items():
        lines.append(f"{key} = {_format(kind, getattr(cfg, _field(key)))}")
    return "\n".join(lines) + "\n"


def write_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(cfg))


