from __future__ import annotations
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Set

from .constants import (
    APP_DIR,
    DEFAULT_BASE_SEED,
    DEFAULT_BETA,
    DEFAULT_EPSILON,
    DEFAULT_H,
    DEFAULT_HEAVY_K,
    DEFAULT_HEAVY_RUNS,
    DEFAULT_REPLICATIONS,
    DEFAULT_T_MAX,
    ENV_WORKERS,
    LAST_CONFIG_FILE_NAME,
    RENEWAL_MC_BUDGET,
)
from .core import BuildMode
from .families import UnknownFamilyError, parse_family
from .renewal import Grid, GridError
from .utils import atomic_write_text

log = logging.getLogger("splittree.settings")

# Speicherort der letzten GUI-Konfiguration: <APP_DIR>/last_experiment.cfg
LAST_CONFIG_FILE = APP_DIR / LAST_CONFIG_FILE_NAME


class ConfigError(ValueError):
    """Ungültige oder unbekannte Konfiguration."""


@dataclass
class RenewalSettings:
    h: float = DEFAULT_H
    t_max: float = DEFAULT_T_MAX
    budget: int = RENEWAL_MC_BUDGET


@dataclass
class HeavySettings:
    K: float = DEFAULT_HEAVY_K
    runs: int = DEFAULT_HEAVY_RUNS


@dataclass
class ExperimentConfig:
    family: str = "bst"
    family_params: str = ""
    n_grid: List[int] = field(default_factory=lambda: [1000])
    replications: int = DEFAULT_REPLICATIONS
    base_seed: int = DEFAULT_BASE_SEED
    epsilon: float = DEFAULT_EPSILON
    beta: float = DEFAULT_BETA
    mode: str = BuildMode.COUNTS.value
    out_csv: str = "results.csv"
    out_json: str = "summary.json"
    renewal: RenewalSettings = field(default_factory=RenewalSettings)
    heavy: HeavySettings = field(default_factory=HeavySettings)
    # Lattice-Gate vor dem Lauf (Erneuerungsprüfung angefordert)
    renewal_check: bool = False
    workers: Optional[int] = None
    k_grid: List[int] = field(default_factory=list)  # leer -> Standardgitter


_NESTED = {"renewal": RenewalSettings, "heavy": HeavySettings}


def _known_keys() -> Set[str]:
    keys: Set[str] = set()
    for f in fields(ExperimentConfig):
        if f.name in _NESTED:
            keys.update(f"{f.name}.{nf.name}" for nf in fields(_NESTED[f.name]))
        else:
            keys.add(f.name)
    return keys


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "ja", "on"):
        return True
    if t in ("0", "false", "no", "nein", "off", ""):
        return False
    raise ValueError(f"kein Wahrheitswert: {text!r}")


def _parse_int_list(text: Any) -> List[int]:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    parts = [p for p in str(text).replace(",", " ").split() if p]
    # "1e5" usw. zulassen, aber nur ganzzahlige Werte
    out = []
    for p in parts:
        x = float(p)
        if x != int(x):
            raise ValueError(f"{p!r} ist keine ganze Zahl")
        out.append(int(x))
    return out


def _convert(key: str, value: Any) -> Any:
    leaf = key.rsplit(".", 1)[-1]
    if isinstance(value, str):
        value = value.strip()
    try:
        if leaf in ("n_grid", "k_grid"):
            return _parse_int_list(value)
        if leaf in ("replications", "runs", "budget"):
            return int(float(value))
        if leaf == "base_seed":
            return int(value, 16) if isinstance(value, str) and value.lower().startswith("0x") else int(value)
        if leaf == "workers":
            return None if value in (None, "") else int(value)
        if leaf in ("epsilon", "beta", "h", "t_max", "K"):
            return float(value)
        if leaf == "renewal_check":
            return value if isinstance(value, bool) else _parse_bool(str(value))
        return "" if value is None else str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Ungültiger Wert für {key}: {value!r} ({e})") from e


def _merge_dict(defaults: Dict[str, Any], current: Mapping[str, Any]) -> Dict[str, Any]:
    """Rekursives Merge: fehlende Felder aus defaults ergänzen."""
    out = dict(defaults)
    for k, v in current.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _merge_dict(out[k], v)
        else:
            out[k] = v
    return out


def _nest(flat: Mapping[str, Any]) -> Dict[str, Any]:
    known = _known_keys()
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        if key not in known:
            raise ConfigError(f"Unbekannter Schlüssel {key!r}")
        value = _convert(key, value)
        if "." in key:
            outer, inner = key.split(".", 1)
            nested.setdefault(outer, {})[inner] = value
        else:
            nested[key] = value
    return nested


def config_from_mapping(flat: Mapping[str, Any], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Flache Schlüssel (auch 'renewal.h') über base bzw. Defaults legen."""
    merged = _merge_dict(asdict(base or ExperimentConfig()), _nest(flat))
    renewal = RenewalSettings(**merged.pop("renewal"))
    heavy = HeavySettings(**merged.pop("heavy"))
    return ExperimentConfig(renewal=renewal, heavy=heavy, **merged)


def apply_overrides(config: ExperimentConfig, overrides: Mapping[str, Any]) -> ExperimentConfig:
    """CLI-Flags überschreiben Dateiwerte; None heißt 'nicht gesetzt'."""
    return config_from_mapping({k: v for k, v in overrides.items() if v is not None}, base=config)


def validate_config(config: ExperimentConfig) -> None:
    if not config.n_grid:
        raise ConfigError("n_grid ist leer")
    bad = [n for n in config.n_grid if n < 1]
    if bad:
        raise ConfigError(f"alle n müssen >= 1 sein: {bad}")
    if config.replications < 2:
        raise ConfigError(f"replications muss >= 2 sein, nicht {config.replications}")
    if not config.epsilon > 0:
        raise ConfigError(f"epsilon muss > 0 sein, nicht {config.epsilon}")
    if not config.beta > 0:
        raise ConfigError(f"beta muss > 0 sein, nicht {config.beta}")
    if not 0 <= config.base_seed < 2 ** 64:
        raise ConfigError(f"base_seed muss ein 64-Bit-Wert sein, nicht {config.base_seed}")
    try:
        BuildMode(config.mode)
    except ValueError as e:
        raise ConfigError(f"Unbekannter Modus {config.mode!r} (counts, traced, instrumented)") from e
    if config.workers is not None and config.workers < 1:
        raise ConfigError(f"workers muss >= 1 sein, nicht {config.workers}")
    if any(k < 1 for k in config.k_grid):
        raise ConfigError(f"k_grid enthält Werte < 1: {config.k_grid}")
    if not config.renewal.h > 0 or not config.renewal.t_max > 0 or config.renewal.budget < 1:
        raise ConfigError("renewal.h, renewal.t_max und renewal.budget müssen positiv sein")
    try:
        Grid(config.renewal.h, config.renewal.t_max)
    except GridError as e:
        raise ConfigError(f"renewal: {e}") from e
    if config.heavy.K < 1 or config.heavy.runs < 1:
        raise ConfigError("heavy.K und heavy.runs müssen >= 1 sein")
    try:
        parse_family(config.family, config.family_params)
    except UnknownFamilyError as e:
        raise ConfigError(str(e)) from e
    for out in (config.out_csv, config.out_json):
        parent = Path(out).resolve().parent
        existing = parent
        while not existing.exists():
            existing = existing.parent
        if not os.access(existing, os.W_OK):
            raise ConfigError(f"Ausgabepfad nicht beschreibbar: {out}")


def resolve_workers(config: ExperimentConfig) -> int:
    """Konfiguration, sonst Umgebungsvariable, sonst 1."""
    if config.workers is not None:
        return config.workers
    env = os.environ.get(ENV_WORKERS, "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("%s=%r ist keine Zahl, verwende 1 Worker", ENV_WORKERS, env)
    return 1


def parse_config_text(text: str, source: str = "<text>") -> ExperimentConfig:
    flat: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: Zeile ohne '=': {raw.strip()!r}")
        key = key.strip()
        if key in flat:
            raise ConfigError(f"{source}:{lineno}: Schlüssel {key!r} doppelt")
        flat[key] = value.strip()
    try:
        return config_from_mapping(flat)
    except ConfigError as e:
        raise ConfigError(f"{source}: {e}") from e


def load_config(path: Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Konfiguration nicht lesbar: {path} ({e})") from e
    config = parse_config_text(text, str(path))
    log.info("Konfiguration geladen: %s", path)
    return config


def _format_value(value: Any) -> str:
    if isinstance(value, list):
        return ", ".join(str(x) for x in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def format_config(config: ExperimentConfig) -> str:
    lines = []
    for key, value in asdict(config).items():
        if isinstance(value, dict):
            lines.extend(f"{key}.{k} = {_format_value(v)}" for k, v in value.items())
        else:
            lines.append(f"{key} = {_format_value(value)}")
    return "\n".join(lines) + "\n"


def save_config(config: ExperimentConfig, path: Optional[Path] = None) -> None:
    """Schreibt die Konfiguration atomisch im key = value-Format (Standard: letzte GUI-Konfiguration)."""
    path = Path(path) if path else LAST_CONFIG_FILE
    atomic_write_text(path, format_config(config))
    log.info("Konfiguration gespeichert: %s", path)


def load_last_config() -> ExperimentConfig:
    """Letzte GUI-Konfiguration; bei Fehlern Defaults."""
    if not LAST_CONFIG_FILE.exists():
        return ExperimentConfig()
    try:
        return load_config(LAST_CONFIG_FILE)
    except ConfigError as e:
        log.warning("Letzte Konfiguration unbrauchbar, verwende Defaults: %s", e)
        return ExperimentConfig()
