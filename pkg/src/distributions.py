"""Gesetz des Split-Vektors, seine Randverteilung V, die größenverzerrte
Variable Delta und die Konstanten mu, sigma^2 und c."""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special, stats

from .constants import (
    LATTICE_MAX_DENOMINATOR,
    LATTICE_TOLERANCE,
    MC_BUDGET,
    QUAD_EPSABS,
    SUM_TOLERANCE,
)

log = logging.getLogger("splittree.distributions")

CLOSED_FORM = "closed-form"
QUADRATURE = "quadrature"
MONTE_CARLO = "monte-carlo"
AUTO = "auto"
METHODS = (CLOSED_FORM, QUADRATURE, MONTE_CARLO)

_MC_CHUNK = 100_000


class SplitVectorError(ValueError):
    """Ungültige Quelle oder ungültiger gezogener Split-Vektor."""


class ConstantsError(ValueError):
    """Konstanten lassen sich mit der gewählten Methode nicht bestimmen."""


@dataclass(frozen=True)
class AnalyticConstants:
    mu: float                  # b E(-V ln V), in nats
    sigma2: float              # b E(V ln^2 V) - mu^2
    c: float                   # b E(V^2)
    method: str
    standard_error: Optional[float] = None  # nur bei Monte Carlo (für mu)


class SplitVectorSource:
    """Basisklasse der Varianten. Unterklassen sind eingefrorene Dataclasses."""

    b: int

    @property
    def lattice_suspect(self) -> bool:
        return False

    @property
    def label(self) -> str:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.stack([self.sample(rng) for _ in range(size)])

    def marginal_beta(self) -> Optional[Tuple[float, float]]:
        """(alpha, beta), falls V Beta-verteilt ist."""
        return None

    def closed_form_constants(self) -> Optional[AnalyticConstants]:
        return None

    def closed_neg_log_cdf(self, t: np.ndarray) -> Optional[np.ndarray]:
        ab = self.marginal_beta()
        if ab is None:
            return None
        # P(-ln V <= t) = P(V >= e^-t)
        return stats.beta.sf(np.exp(-t), ab[0], ab[1])


def _check_b(b: int) -> None:
    if int(b) != b or b < 2:
        raise SplitVectorError(f"Verzweigungsgrad b muss eine ganze Zahl >= 2 sein, nicht {b!r}")


def _beta_size_biased_constants(alpha: float, beta: float, b: int) -> AnalyticConstants:
    # E(V g(V)) = E(V) * E_{Beta(alpha+1, beta)} g
    mean_v = alpha / (alpha + beta)
    p, q = alpha + 1.0, beta
    e_ln = special.digamma(p) - special.digamma(p + q)
    var_ln = special.polygamma(1, p) - special.polygamma(1, p + q)
    mu = -b * mean_v * e_ln
    sigma2 = b * mean_v * (var_ln + e_ln**2) - mu**2
    c = b * alpha * (alpha + 1.0) / ((alpha + beta) * (alpha + beta + 1.0))
    return AnalyticConstants(float(mu), max(0.0, float(sigma2)), float(c), CLOSED_FORM)


@dataclass(frozen=True)
class DirichletSymmetric(SplitVectorSource):
    concentration: float
    b: int

    def __post_init__(self):
        _check_b(self.b)
        if not self.concentration > 0 or not math.isfinite(self.concentration):
            raise SplitVectorError(f"Konzentration muss positiv sein, nicht {self.concentration!r}")

    @property
    def label(self) -> str:
        return f"dirichlet/{self.concentration:.12g}"

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.b == 2:
            u = rng.beta(self.concentration, self.concentration)
            return np.array([u, 1.0 - u])
        return rng.dirichlet(np.full(self.b, self.concentration))

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.dirichlet(np.full(self.b, self.concentration), size=size)

    def marginal_beta(self) -> Optional[Tuple[float, float]]:
        return self.concentration, (self.b - 1) * self.concentration

    def closed_form_constants(self) -> Optional[AnalyticConstants]:
        a, bb = self.marginal_beta()
        return _beta_size_biased_constants(a, bb, self.b)


@dataclass(frozen=True)
class UniformSpacings(SplitVectorSource):
    """Abstände von b-1 gleichverteilten Punkten auf [0,1]; V ~ Beta(1, b-1)."""
    b: int

    def __post_init__(self):
        _check_b(self.b)

    @property
    def label(self) -> str:
        return "spacings"

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        cuts = np.sort(rng.random(self.b - 1))
        return np.diff(np.concatenate(([0.0], cuts, [1.0])))

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        cuts = np.sort(rng.random((size, self.b - 1)), axis=1)
        padded = np.hstack([np.zeros((size, 1)), cuts, np.ones((size, 1))])
        return np.diff(padded, axis=1)

    def marginal_beta(self) -> Optional[Tuple[float, float]]:
        return 1.0, float(self.b - 1)


def _is_lattice(p: Sequence[float]) -> bool:
    """Liegen alle -ln p_i auf einem gemeinsamen arithmetischen Gitter?"""
    xs = [-math.log(x) for x in p]
    x_min = min(xs)
    for x in xs:
        r = x / x_min
        approx = Fraction(r).limit_denominator(LATTICE_MAX_DENOMINATOR)
        if abs(r - float(approx)) > LATTICE_TOLERANCE:
            return False
    return True


@dataclass(frozen=True)
class DeterministicPermuted(SplitVectorSource):
    """Feste Komponenten, pro Ziehung gleichverteilt permutiert (Tries)."""
    p: Tuple[float, ...]
    b: int = field(init=False)

    def __post_init__(self):
        p = tuple(float(x) for x in self.p)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "b", len(p))
        _check_b(self.b)
        if any(not (0.0 < x < 1.0) for x in p):
            raise SplitVectorError(f"Komponenten müssen in (0,1) liegen: {p}")
        if abs(sum(p) - 1.0) > SUM_TOLERANCE * self.b * 10:
            raise SplitVectorError(f"Komponenten summieren nicht auf 1: {sum(p)!r}")

    @property
    def lattice_suspect(self) -> bool:
        return _is_lattice(self.p)

    @property
    def label(self) -> str:
        return "fixed/" + "/".join(f"{x:.12g}" for x in self.p)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.permutation(np.asarray(self.p))

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.permuted(np.tile(np.asarray(self.p), (size, 1)), axis=1)

    def closed_form_constants(self) -> Optional[AnalyticConstants]:
        p = np.asarray(self.p)
        lp = np.log(p)
        mu = float(-(p * lp).sum())
        sigma2 = float((p * lp**2).sum()) - mu**2
        return AnalyticConstants(mu, max(0.0, sigma2), float((p**2).sum()), CLOSED_FORM)

    def closed_neg_log_cdf(self, t: np.ndarray) -> Optional[np.ndarray]:
        x = -np.log(np.asarray(self.p))
        # Toleranz gegen Rundung bei t = -ln p_i
        return (x[None, :] <= np.atleast_1d(t)[:, None] + 1e-12).mean(axis=1).reshape(np.shape(t))


@dataclass(frozen=True)
class Custom(SplitVectorSource):
    """Vom Aufrufer geliefertes Ziehverfahren (+ optional CDF von -ln V)."""
    b: int
    sampler: Callable[[np.random.Generator], Sequence[float]]
    neg_log_cdf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    permute: bool = True
    lattice: bool = False
    name: str = "custom"

    def __post_init__(self):
        _check_b(self.b)

    @property
    def lattice_suspect(self) -> bool:
        return self.lattice

    @property
    def label(self) -> str:
        return self.name

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        v = np.asarray(self.sampler(rng), dtype=float)
        _validate_vector(v, self.b)
        return rng.permutation(v) if self.permute else v

    def closed_neg_log_cdf(self, t: np.ndarray) -> Optional[np.ndarray]:
        if self.neg_log_cdf is None:
            return None
        return np.asarray(self.neg_log_cdf(t), dtype=float)


def _validate_vector(v: np.ndarray, b: int) -> None:
    if v.shape != (b,):
        raise SplitVectorError(f"Split-Vektor hat Form {v.shape}, erwartet ({b},)")
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise SplitVectorError(f"Split-Vektor mit negativen/nicht-endlichen Komponenten: {v}")
    if abs(v.sum() - 1.0) > SUM_TOLERANCE:
        raise SplitVectorError(f"Split-Vektor summiert auf {v.sum()!r} statt 1")


# ---------- Operationen ----------

def sample_split_vector(source: SplitVectorSource, rng: np.random.Generator) -> np.ndarray:
    return source.sample(rng)


def sample_split_vectors(source: SplitVectorSource, rng: np.random.Generator, size: int) -> np.ndarray:
    return source.sample_many(rng, size)


def _pick_size_biased(vectors: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(vectors, axis=1)
    idx = (cum < u[:, None]).sum(axis=1)
    idx = np.minimum(idx, vectors.shape[1] - 1)
    return vectors[np.arange(len(vectors)), idx]


def sample_size_biased(source: SplitVectorSource, rng: np.random.Generator) -> float:
    """Delta = V_j mit Wahrscheinlichkeit V_j."""
    v = source.sample(rng)
    return float(_pick_size_biased(v[None, :], np.array([rng.random()]))[0])


def sample_size_biased_many(source: SplitVectorSource, rng: np.random.Generator, size: int) -> np.ndarray:
    vectors = source.sample_many(rng, size)
    return _pick_size_biased(vectors, rng.random(size))


def _quadrature_constants(source: SplitVectorSource) -> AnalyticConstants:
    ab = source.marginal_beta()
    if ab is None:
        raise ConstantsError(f"Keine Randdichte für Quadratur bekannt: {source.label}")
    density = stats.beta(ab[0], ab[1]).pdf

    def expect(g: Callable[[float], float]) -> float:
        def integrand(x: float) -> float:
            val = g(x) * density(x)
            if not math.isfinite(val):
                raise ConstantsError(f"Integrand nicht endlich bei x={x!r} ({source.label})")
            return val
        val, _err = integrate.quad(integrand, 0.0, 1.0, epsabs=QUAD_EPSABS, limit=200)
        return val

    b = source.b
    mu = b * expect(lambda x: -x * math.log(x))
    second = b * expect(lambda x: x * math.log(x) ** 2)
    c = b * expect(lambda x: x * x)
    return AnalyticConstants(mu, max(0.0, second - mu**2), c, QUADRATURE)


def _monte_carlo_constants(source: SplitVectorSource, budget: int, seed: int) -> AnalyticConstants:
    rng = np.random.default_rng(seed)
    s1 = s2 = sc = 0.0
    done = 0
    while done < budget:
        m = min(_MC_CHUNK, budget - done)
        delta = sample_size_biased_many(source, rng, m)
        x = -np.log(delta)
        s1 += x.sum()
        s2 += (x * x).sum()
        sc += delta.sum()
        done += m
    mu = s1 / budget
    var = (s2 - budget * mu * mu) / (budget - 1)
    if not all(math.isfinite(v) for v in (mu, var, sc)):
        raise ConstantsError(f"Monte-Carlo-Schätzung nicht endlich ({source.label})")
    log.debug("MC-Konstanten %s: mu=%.6f (Budget %d)", source.label, mu, budget)
    return AnalyticConstants(float(mu), max(0.0, float(var)), float(sc / budget), MONTE_CARLO,
                             standard_error=math.sqrt(var / budget))


def constants(source: SplitVectorSource, method: str = AUTO, budget: int = MC_BUDGET, seed: int = 0) -> AnalyticConstants:
    """mu, sigma^2, c. 'auto' wählt geschlossene Form, dann Quadratur, dann Monte Carlo."""
    if method == AUTO:
        if source.closed_form_constants() is not None:
            method = CLOSED_FORM
        elif source.marginal_beta() is not None:
            method = QUADRATURE
        else:
            method = MONTE_CARLO
    if method == CLOSED_FORM:
        out = source.closed_form_constants()
        if out is None:
            raise ConstantsError(f"Keine geschlossene Form für {source.label}")
        return out
    if method == QUADRATURE:
        return _quadrature_constants(source)
    if method == MONTE_CARLO:
        return _monte_carlo_constants(source, budget, seed)
    raise ConstantsError(f"Unbekannte Methode {method!r}; erlaubt: {', '.join(METHODS)}")


@lru_cache(maxsize=8)
def _empirical_neg_log_sample(source: SplitVectorSource, budget: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    parts = []
    done = 0
    while done < budget:
        m = min(_MC_CHUNK, budget - done)
        parts.append(-np.log(source.sample_many(rng, m)[:, 0]))
        done += m
    log.info("Empirische CDF von -ln V für %s aus %d Ziehungen", source.label, budget)
    return np.sort(np.concatenate(parts))


def neg_log_V_cdf(source: SplitVectorSource, t, budget: int = MC_BUDGET, seed: int = 0):
    """P(-ln V <= t); geschlossen wo möglich, sonst empirisch aus `budget` Ziehungen."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t muss >= 0 sein")
    out = source.closed_neg_log_cdf(t_arr)
    if out is None:
        sample = _empirical_neg_log_sample(source, budget, seed)
        out = np.searchsorted(sample, t_arr, side="right") / len(sample)
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out
