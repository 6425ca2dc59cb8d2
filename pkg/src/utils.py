from __future__ import annotations
import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any

log = logging.getLogger("splittree.utils")

# ---------- Seeds (splitmix64) ----------

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MUL_1 = 0xBF58476D1CE4E5B9
MIX_MUL_2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """splitmix64-Finalizer (Shifts 30/27/31)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_MUL_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MUL_2) & MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, n: int, replication_index: int) -> int:
    """64-Bit-Seed aus (base_seed, n, rep); bijektiv in jedem Argument bei festen übrigen."""
    z = mix64(base_seed + GOLDEN_GAMMA)
    z = mix64((z ^ (n & MASK64)) + GOLDEN_GAMMA)
    return mix64((z ^ (replication_index & MASK64)) + GOLDEN_GAMMA)


# ---------- Zahlenformat ----------

def fmt_float(x: Any) -> str:
    """12 signifikante Stellen; None/NaN -> leer."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return f"{x:.12g}"


def json_ready(obj: Any) -> Any:
    """Floats auf 12 signifikante Stellen runden, nicht-endliche -> None."""
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {str(k): json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if hasattr(obj, "item"):  # numpy-Skalare
        return json_ready(obj.item())
    return obj


# ---------- Dateien ----------

def _atomic_write_text(path: Path, text: str) -> None:
    """Schreibt atomisch (Temp-Datei -> flush/fsync -> replace)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=path.stem + "_", suffix=".tmp", dir=str(path.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_path, path)
    except Exception:
        try:
            os.remove(tmp_path)
        except OSError:
            pass
        raise
    log.debug("Datei geschrieben: %s (%d Zeichen)", path, len(text))


def atomic_write_json(path: Path, data: Any) -> None:
    _atomic_write_text(path, json.dumps(json_ready(data), ensure_ascii=False, indent=2) + "\n")


def atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_text(path, text)
