"""Benannte Voreinstellungen (Parameter + Split-Vektor) der Baumfamilien."""
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .core import SplitParams, validate_params
from .distributions import (
    AnalyticConstants,
    DeterministicPermuted,
    DirichletSymmetric,
    SplitVectorError,
    SplitVectorSource,
    UniformSpacings,
    constants,
)

log = logging.getLogger("splittree.families")

PRESETS: Dict[str, str] = {
    "bst": "Binärer Suchbaum: b=2, s=1, s0=1, s1=0, V=(U,1-U)",
    "mary": "m-ärer Suchbaum (m>=2): b=m, s=m-1, s0=m-1, s1=0, Abstände von m-1 Gleichverteilten",
    "trie": "Trie (p=p1/.../pb, bucket=s): b=len(p), s0=0, s1=0, permutierte feste Komponenten",
    "custom": "eigene Parameter: b, s, s0, s1, split=dirichlet/a | spacings | fixed/p1/.../pb",
}


class UnknownFamilyError(ValueError):
    """Unbekannter Familienname oder ungültiger Familienparameter."""


@dataclass(frozen=True)
class FamilySpec:
    name: str
    params: SplitParams
    source: SplitVectorSource
    constants: AnalyticConstants
    lattice_suspect: bool
    notes: str = ""
    family_params: Tuple[Tuple[str, str], ...] = ()

    @property
    def label(self) -> str:
        return family_label(self)


def list_presets() -> Dict[str, str]:
    return dict(PRESETS)


def parse_split(text: str, b: Optional[int] = None) -> SplitVectorSource:
    """'dirichlet/a', 'spacings' oder 'fixed/p1/.../pb'."""
    kind, _, rest = text.partition("/")
    try:
        if kind == "dirichlet":
            if b is None:
                raise UnknownFamilyError("dirichlet braucht b")
            return DirichletSymmetric(float(rest or 1.0), b)
        if kind == "spacings":
            if b is None:
                raise UnknownFamilyError("spacings braucht b")
            return UniformSpacings(b)
        if kind == "fixed":
            return DeterministicPermuted(tuple(float(x) for x in rest.split("/")))
    except (SplitVectorError, ValueError) as e:
        raise UnknownFamilyError(f"Ungültiger Split-Vektor {text!r}: {e}") from e
    raise UnknownFamilyError(f"Unbekannter Split-Vektor {text!r} (dirichlet/a, spacings, fixed/p1/...)")


def _as_int(params: Dict[str, object], key: str, default: Optional[int] = None) -> int:
    val = params.get(key, default)
    if val is None:
        raise UnknownFamilyError(f"Parameter {key!r} fehlt")
    try:
        return int(val)
    except (TypeError, ValueError) as e:
        raise UnknownFamilyError(f"Parameter {key}={val!r} ist keine ganze Zahl") from e


def _as_vector(val: object) -> Tuple[float, ...]:
    if isinstance(val, str):
        return tuple(float(x) for x in val.split("/"))
    return tuple(float(x) for x in val)  # type: ignore[union-attr]


def _finish(name: str, params: SplitParams, source: SplitVectorSource, notes: str,
            family_params: Tuple[Tuple[str, str], ...]) -> FamilySpec:
    ok, msg = validate_params(params)
    if not ok:
        raise UnknownFamilyError(f"{name}: {msg}")
    if source.b != params.b:
        raise UnknownFamilyError(f"{name}: Split-Vektor hat b = {source.b}, Parameter b = {params.b}")
    spec = FamilySpec(
        name=name,
        params=params,
        source=source,
        constants=constants(source),
        lattice_suspect=source.lattice_suspect,
        notes=notes,
        family_params=family_params,
    )
    if spec.lattice_suspect:
        log.warning("Familie %s: -ln V vermutlich gitterförmig (lattice_suspect)", family_label(spec))
    return spec


def preset(name: str, **family_params) -> FamilySpec:
    name = name.strip().lower()
    if name == "bst":
        return _finish(name, SplitParams(b=2, s=1, s0=1, s1=0), DirichletSymmetric(1.0, 2), PRESETS[name], ())

    if name == "mary":
        m = _as_int(family_params, "m")
        if m < 2:
            raise UnknownFamilyError(f"mary verlangt m >= 2, nicht {m}")
        return _finish(name, SplitParams(b=m, s=m - 1, s0=m - 1, s1=0), UniformSpacings(m),
                       PRESETS[name], (("m", str(m)),))

    if name == "trie":
        p = _as_vector(family_params.get("p", (0.5, 0.5)))
        bucket = _as_int(family_params, "bucket", 1)
        try:
            source = DeterministicPermuted(p)
        except SplitVectorError as e:
            raise UnknownFamilyError(f"trie: {e}") from e
        fp = [("p", "/".join(f"{x:.12g}" for x in p))]
        if bucket != 1:
            fp.append(("bucket", str(bucket)))
        return _finish(name, SplitParams(b=len(p), s=bucket, s0=0, s1=0), source, PRESETS[name], tuple(fp))

    if name == "custom":
        b = _as_int(family_params, "b")
        params = SplitParams(b=b, s=_as_int(family_params, "s"), s0=_as_int(family_params, "s0", 0),
                             s1=_as_int(family_params, "s1", 0))
        split = family_params.get("split", "dirichlet/1")
        source = split if isinstance(split, SplitVectorSource) else parse_split(str(split), b)
        fp = (("b", str(params.b)), ("s", str(params.s)), ("s0", str(params.s0)),
              ("s1", str(params.s1)), ("split", source.label))
        return _finish(name, params, source, PRESETS[name], fp)

    raise UnknownFamilyError(f"Unbekannte Familie {name!r}; verfügbar: {', '.join(sorted(PRESETS))}")


def family_label(spec: FamilySpec) -> str:
    """Kommafreie Textform, z. B. 'mary:m=3' oder 'trie:p=0.3/0.7'."""
    if not spec.family_params:
        return spec.name
    return spec.name + ":" + ";".join(f"{k}={v}" for k, v in spec.family_params)


def parse_family_params(text: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for part in filter(None, (x.strip() for x in text.split(";"))):
        key, sep, val = part.partition("=")
        if not sep:
            raise UnknownFamilyError(f"Familienparameter ohne '=': {part!r}")
        out[key.strip()] = val.strip()
    return out


def parse_family(label: str, family_params: str = "") -> FamilySpec:
    name, _, rest = label.strip().partition(":")
    params = parse_family_params(rest)
    params.update(parse_family_params(family_params))
    return preset(name, **params)
