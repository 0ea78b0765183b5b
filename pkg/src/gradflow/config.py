"""Run configuration: a flat UTF-8 key-value document.

One ``key = value`` pair per line, ``#`` comments, lists comma-separated,
points inside lists separated by ``;``.  Unknown keys are rejected so a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .factors import FactorSpec
from .ics import IC_NAMES
from .models import MODEL_NAMES
from .schemes import SCHEME_NAMES
from .spectral import make_grid


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


TWO_PI = 6.283185307179586

# Per-model defaults mirror the shipped experiment parameter sets.
_MODEL_PARAM_DEFAULTS = {
    "allen_cahn": {"epsilon": 0.4, "mobility": 1.0},
    "cahn_hilliard_beta": {"epsilon": 0.4, "mobility": 0.5, "beta": 2.0},
    "pfc": {"epsilon": 0.325, "mobility": 1.0},
    "heat": {},
    "custom_split": {"epsilon": 0.4, "mobility": 0.5, "beta": 2.0},
}

_KNOWN_KEYS = {
    "model", "scheme", "grid", "extent", "dt", "t_final",
    "epsilon", "mobility", "beta", "c_sav",
    "factor", "factor_k", "factor_eta0",
    "factor2", "factor2_k", "factor2_eta0",
    "ic", "ic_amplitude", "ic_mode", "ic_radius", "ic_center", "ic_centers",
    "ic_mean", "ic_offset", "ic_epsilon",
    "seed", "snapshot_times", "assertions", "dealias", "bootstrap",
}

_REQUIRED_KEYS = ("model", "grid", "dt", "t_final")


@dataclass(frozen=True)
class RunConfig:
    model: str
    model_params: dict
    scheme: str
    factor: FactorSpec
    factor2: FactorSpec
    dims: tuple[int, ...]
    extents: tuple[float, ...]
    dt: float
    t_final: float
    ic: str
    ic_params: dict
    seed: int
    snapshot_times: tuple[float, ...]
    assertions: bool
    dealias: bool
    c_sav: float
    bootstrap: str = "rzf_cn"
    raw: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        n = round(self.t_final / self.dt)
        return max(n, 1)

    def manifest_items(self) -> list[tuple[str, str]]:
        """Every effective setting, defaults materialised, as printable pairs."""
        items = [
            ("model", self.model),
            ("scheme", self.scheme),
            ("grid", ",".join(str(d) for d in self.dims)),
            ("extent", ",".join(repr(x) for x in self.extents)),
            ("dt", repr(self.dt)),
            ("t_final", repr(self.t_final)),
            ("factor", self.factor.kind),
            ("factor_k", repr(self.factor.k)),
            ("factor_eta0", repr(self.factor.eta_init)),
            ("factor2", self.factor2.kind),
            ("factor2_k", repr(self.factor2.k)),
            ("factor2_eta0", repr(self.factor2.eta_init)),
            ("ic", self.ic),
            ("seed", str(self.seed)),
            ("snapshot_times", ",".join(repr(t) for t in self.snapshot_times)),
            ("assertions", "on" if self.assertions else "off"),
            ("dealias", "on" if self.dealias else "off"),
            ("c_sav", repr(self.c_sav)),
            ("bootstrap", self.bootstrap),
        ]
        for key in sorted(self.model_params):
            items.append((f"param_{key}", repr(float(self.model_params[key]))))
        for key in sorted(self.ic_params):
            value = self.ic_params[key]
            if isinstance(value, tuple) and value and isinstance(value[0], tuple):
                text = ";".join(",".join(repr(float(x)) for x in pt) for pt in value)
            elif isinstance(value, tuple):
                text = ",".join(repr(float(x)) for x in value)
            else:
                text = repr(float(value)) if isinstance(value, float) else str(value)
            items.append((f"ic_{key}", text))
        return items


def _parse_scalar(key: str, text: str, kind) -> object:
    try:
        return kind(text)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {text!r}") from exc


def _parse_floats(key: str, text: str) -> tuple[float, ...]:
    return tuple(_parse_scalar(key, part.strip(), float) for part in text.split(",") if part.strip())


def _parse_bool(key: str, text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"key {key!r}: expected on/off, got {text!r}")


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a configuration document."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    for key in _REQUIRED_KEYS:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")

    model = raw["model"]
    if model not in MODEL_NAMES:
        raise ConfigError(f"key 'model': unknown model {model!r}")
    scheme = raw.get("scheme", "rzf_cn")
    if scheme not in SCHEME_NAMES:
        raise ConfigError(f"key 'scheme': unknown scheme {scheme!r}")

    dims = tuple(
        _parse_scalar("grid", part.strip(), int)
        for part in raw["grid"].split(",") if part.strip()
    )
    extents = (
        _parse_floats("extent", raw["extent"])
        if "extent" in raw
        else (TWO_PI,) * len(dims)
    )
    if len(extents) != len(dims):
        raise ConfigError("key 'extent': needs one entry per grid axis")
    try:
        make_grid(dims, extents)
    except ValueError as exc:
        raise ConfigError(f"key 'grid': {exc}") from exc

    dt = _parse_scalar("dt", raw["dt"], float)
    if not dt > 0:
        raise ConfigError("key 'dt': must be positive")
    t_final = _parse_scalar("t_final", raw["t_final"], float)
    if t_final < dt:
        raise ConfigError("key 't_final': must be at least dt")

    model_params = dict(_MODEL_PARAM_DEFAULTS[model])
    for key in ("epsilon", "mobility", "beta"):
        if key in raw:
            model_params[key] = _parse_scalar(key, raw[key], float)
    c_sav = _parse_scalar("c_sav", raw.get("c_sav", "1.0"), float)

    def build_factor(prefix: str) -> FactorSpec:
        suffix_k = f"{prefix}_k"
        suffix_eta = f"{prefix}_eta0"
        try:
            return FactorSpec(
                kind=raw.get(prefix, "rate"),
                k=_parse_scalar(suffix_k, raw.get(suffix_k, "1.0"), float),
                eta_init=_parse_scalar(suffix_eta, raw.get(suffix_eta, "0.0"), float),
            )
        except ValueError as exc:
            raise ConfigError(f"key {prefix!r}: {exc}") from exc

    factor = build_factor("factor")
    factor2 = build_factor("factor2")

    ic = raw.get("ic", "cosine_product")
    if ic not in IC_NAMES:
        raise ConfigError(f"key 'ic': unknown initial condition {ic!r}")
    ic_params: dict = {}
    if "ic_amplitude" in raw:
        ic_params["amplitude"] = _parse_scalar("ic_amplitude", raw["ic_amplitude"], float)
    if "ic_mode" in raw:
        ic_params["mode"] = _parse_scalar("ic_mode", raw["ic_mode"], int)
    if "ic_radius" in raw:
        ic_params["radius"] = _parse_scalar("ic_radius", raw["ic_radius"], float)
    if "ic_mean" in raw:
        ic_params["mean"] = _parse_scalar("ic_mean", raw["ic_mean"], float)
    if "ic_center" in raw:
        ic_params["center"] = _parse_floats("ic_center", raw["ic_center"])
    if "ic_offset" in raw:
        ic_params["offset"] = _parse_floats("ic_offset", raw["ic_offset"])
    if "ic_centers" in raw:
        ic_params["centers"] = tuple(
            _parse_floats("ic_centers", part) for part in raw["ic_centers"].split(";")
        )
    # tanh profiles default their interface width to the model epsilon
    if "ic_epsilon" in raw:
        ic_params["epsilon"] = _parse_scalar("ic_epsilon", raw["ic_epsilon"], float)
    elif "epsilon" in model_params:
        ic_params["epsilon"] = float(model_params["epsilon"])

    seed = _parse_scalar("seed", raw.get("seed", "0"), int)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("key 'seed': must fit an unsigned 64-bit integer")
    snapshot_times = (
        _parse_floats("snapshot_times", raw["snapshot_times"])
        if "snapshot_times" in raw
        else ()
    )
    for t in snapshot_times:
        if not 0.0 <= t <= t_final:
            raise ConfigError(f"key 'snapshot_times': {t} outside [0, t_final]")

    bootstrap = raw.get("bootstrap", "rzf_cn")
    if bootstrap != "rzf_cn":
        raise ConfigError("key 'bootstrap': only 'rzf_cn' is supported")

    return RunConfig(
        model=model,
        model_params=model_params,
        scheme=scheme,
        factor=factor,
        factor2=factor2,
        dims=dims,
        extents=extents,
        dt=dt,
        t_final=t_final,
        ic=ic,
        ic_params=ic_params,
        seed=seed,
        snapshot_times=snapshot_times,
        assertions=_parse_bool("assertions", raw.get("assertions", "on")),
        dealias=_parse_bool("dealias", raw.get("dealias", "off")),
        c_sav=c_sav,
        bootstrap=bootstrap,
        raw=raw,
    )
