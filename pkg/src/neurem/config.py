"""JSON pipeline configuration: parsing, validation and defaults.

A config file may omit whole sections (defaults apply) but an entry that is
present must be complete: a beam without a ``center`` is an error, not a
silently defaulted beam.  A run manifest (``{"config": {...}, ...}``) is
accepted wherever a config is.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .experiments import SpectrumScenario
from .neural_cs import NcsConfig
from .neural_td import NtdConfig
from .rem_sim import BeamSpec, ShadowSpec

__all__ = ["ConfigError", "ScenarioConfig", "PipelineConfig", "load_config", "parse_config"]

SHOWCASE_SLICES = (2, 12)


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


@dataclass
class ScenarioConfig:
    dims: tuple[int, int, int] = (100, 100, 12)
    beams: list[BeamSpec] = field(default_factory=lambda: [BeamSpec((30.0, 30.0)),
                                                          BeamSpec((70.0, 70.0))])
    shadow: ShadowSpec = field(default_factory=ShadowSpec)
    missing_rate: float = 0.98
    # physical scale, carried as metadata only
    cell_size_m: tuple[float, float, float] = (250.0, 250.0, 10.0)


@dataclass
class PipelineConfig:
    seed: int = 0
    trials: int = 100
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    sampler: SpectrumScenario = field(default_factory=SpectrumScenario)
    ncs: NcsConfig = field(default_factory=NcsConfig)
    ntd: NtdConfig = field(default_factory=NtdConfig)
    showcase_slices: tuple[int, ...] = SHOWCASE_SLICES
    baseline: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenario"]["beams"] = [asdict(b) for b in self.scenario.beams]
        return _plain(d)


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _known(cls, d: dict, where: str) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in fields(cls)}
    extra = set(d) - names
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {sorted(extra)}")
    return d


def _build(cls, d: dict, where: str, tuples=()):
    d = dict(_known(cls, d, where))
    for k in tuples:
        if k in d and d[k] is not None:
            d[k] = tuple(d[k])
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _beam(d, i) -> BeamSpec:
    where = f"scenario.beams[{i}]"
    _known(BeamSpec, d, where)
    if "center" not in d:
        raise ConfigError(f"{where}: missing required field 'center'")
    return _build(BeamSpec, d, where, tuples=("center",))


def parse_config(raw: dict) -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]          # a run manifest
    _known(PipelineConfig, raw, "config")

    sc = dict(_known(ScenarioConfig, raw.get("scenario", {}), "scenario"))
    if "beams" in sc:
        if not isinstance(sc["beams"], list) or not sc["beams"]:
            raise ConfigError("scenario.beams: need a non-empty list")
        sc["beams"] = [_beam(b, i) for i, b in enumerate(sc["beams"])]
    if "shadow" in sc:
        sc["shadow"] = _build(ShadowSpec, sc["shadow"], "scenario.shadow")
    for k in ("dims", "cell_size_m"):
        if k in sc:
            sc[k] = tuple(sc[k])
    scenario = _build(ScenarioConfig, sc, "scenario")
    if len(scenario.dims) != 3 or min(scenario.dims) < 1:
        raise ConfigError("scenario.dims: need three positive extents")
    if not 0.0 <= scenario.missing_rate < 1.0:
        raise ConfigError("scenario.missing_rate must lie in [0, 1)")
    I, J, _ = scenario.dims
    for i, b in enumerate(scenario.beams):
        if not (0 <= b.center[0] <= I - 1 and 0 <= b.center[1] <= J - 1):
            raise ConfigError(f"scenario.beams[{i}]: centre {b.center} outside the grid")

    sampler = _build(SpectrumScenario, raw.get("sampler", {}), "sampler",
                     tuples=("cosets", "power_range_dbm"))
    ncs = _build(NcsConfig, raw.get("ncs", {}), "ncs", tuples=("hidden", "activate"))
    ntd = _build(NtdConfig, raw.get("ntd", {}), "ntd", tuples=("ranks",))
    try:
        ntd.check_dims(scenario.dims)
    except ValueError as exc:
        raise ConfigError(f"ntd: {exc}") from exc

    top = {k: raw[k] for k in ("seed", "trials", "showcase_slices", "baseline") if k in raw}
    if "showcase_slices" in top:
        top["showcase_slices"] = tuple(top["showcase_slices"])
    cfg = PipelineConfig(scenario=scenario, sampler=sampler, ncs=ncs, ntd=ntd, **top)
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    if not isinstance(cfg.trials, int) or cfg.trials < 1:
        raise ConfigError("trials must be a positive integer")
    if cfg.baseline not in (None, "somp"):
        raise ConfigError(f"unknown baseline {cfg.baseline!r}")
    K = scenario.dims[2]
    if any(not 1 <= s <= K for s in cfg.showcase_slices):
        raise ConfigError(f"showcase slices must lie in [1, {K}]")
    return cfg


def load_config(path) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw)
