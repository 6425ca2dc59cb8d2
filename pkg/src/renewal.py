"""Numerische Lösung der Erneuerungsgleichungen auf einem gleichmäßigen Gitter.

U(t) = nu(t) + (U * dnu)(t) wird in der gekippten Form
U^(t) = nu^(t) + (U^ * domega)(t) gelöst, mit U^ = e^-t U, nu^ = e^-t nu und
domega(t) = e^-t dnu(t). omega ist ein Wahrscheinlichkeitsmaß, daher ist die
Vorwärtssubstitution stabil.
"""
from __future__ import annotations
import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy import integrate

from .constants import DEFAULT_H, DEFAULT_T_MAX, RENEWAL_MC_BUDGET
from .distributions import AnalyticConstants, SplitVectorSource, constants as source_constants, neg_log_V_cdf

log = logging.getLogger("splittree.renewal")

GridFunc = Callable[[np.ndarray], np.ndarray]


class LatticeError(ValueError):
    """Quelle mit (vermutlich) gitterförmigem -ln V."""


class GridError(ValueError):
    """Ungültiges Gitter oder Argument außerhalb des Gitters."""


@dataclass
class Grid:
    h: float
    t_max: float
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if not self.h > 0 or not self.t_max > 0:
            raise GridError(f"h und t_max müssen positiv sein (h={self.h}, t_max={self.t_max})")
        steps = self.t_max / self.h
        if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
            raise GridError(f"t_max/h = {steps} ist keine ganze Zahl")

    @property
    def size(self) -> int:
        return int(round(self.t_max / self.h)) + 1

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.size) * self.h

    def with_values(self, values: np.ndarray) -> "Grid":
        return Grid(self.h, self.t_max, np.asarray(values, dtype=float))

    def at(self, t: float) -> float:
        """Lineare Interpolation; außerhalb [0, t_max] ein Fehler."""
        if t < 0 or t > self.t_max + 1e-12:
            raise GridError(f"t = {t} liegt außerhalb [0, {self.t_max}]")
        return float(np.interp(t, self.t, self.values))


@dataclass
class RenewalSolution:
    U: Grid
    U_hat: Grid
    W: Grid
    mu_used: float
    diagnostics: Dict[str, float] = field(default_factory=dict)


@dataclass
class GeneralRenewalProblem:
    z: Union[GridFunc, Grid]      # nichtnegativ, integrierbar
    F: GridFunc                   # Verteilungsfunktion auf [0, inf)
    mu_F: float
    sigma2_F: float


def _forward_substitute(y: np.ndarray, dF: np.ndarray) -> np.ndarray:
    """Z_i = y_i + sum_k (Z_{i-k} + Z_{i-k+1})/2 * dF_k, Inkremente dF_k auf ((k-1)h, kh].

    Trapezregel in Z; der Term mit Z_i steht implizit links.
    """
    m = len(y)
    z = np.empty(m)
    z[0] = y[0]
    q = 1.0 / (1.0 - 0.5 * dF[1]) if m > 1 else 1.0
    for i in range(1, m):
        known = np.dot(dF[1:i + 1], z[i - 1::-1])
        known += np.dot(dF[2:i + 1], z[i - 1:0:-1])
        z[i] = q * (y[i] + 0.5 * known)
    return z


def renewal_measure(source: SplitVectorSource, t: np.ndarray, budget: int = RENEWAL_MC_BUDGET,
                    seed: int = 0) -> np.ndarray:
    """nu(t) = b P(-ln V <= t)."""
    return source.b * np.asarray(neg_log_V_cdf(source, t, budget=budget, seed=seed), dtype=float)


def predicted_W_limit(c: AnalyticConstants) -> float:
    return (c.sigma2 - c.mu ** 2) / (2 * c.mu ** 2) - 1.0 / c.mu


def _tail_slope(grid: Grid) -> float:
    m = grid.size
    start = int(0.9 * (m - 1))
    t = grid.t[start:]
    return float(np.polyfit(t, grid.values[start:], 1)[0])


def solve_split_renewal(source: SplitVectorSource, grid: Optional[Grid] = None, *,
                        consts: Optional[AnalyticConstants] = None,
                        budget: int = RENEWAL_MC_BUDGET, seed: int = 0) -> RenewalSolution:
    if source.lattice_suspect:
        raise LatticeError(f"{source.label}: -ln V ist vermutlich gitterförmig (lattice_suspect)")
    grid = grid or Grid(DEFAULT_H, DEFAULT_T_MAX)
    t = grid.t
    nu = renewal_measure(source, t, budget=budget, seed=seed)
    if np.any(np.diff(nu) < -1e-12):
        raise ValueError("nu ist nicht monoton")
    consts = consts or source_constants(source)

    # omega-Inkremente per Trapezregel aus den Differenzen von nu
    e = np.exp(-t)
    d_omega = np.zeros_like(t)
    d_omega[1:] = 0.5 * (e[1:] + e[:-1]) * np.diff(nu)
    nu_hat = e * nu
    u_hat = _forward_substitute(nu_hat, d_omega)
    u = u_hat / e
    mu_inv = 1.0 / consts.mu
    w = np.concatenate(([0.0], integrate.cumulative_trapezoid(u_hat - mu_inv, t)))

    diag = {
        "omega_mass": float(d_omega.sum()),
        "tail_slope_U_hat": _tail_slope(grid.with_values(u_hat)),
        "U_hat_defect": float(abs(u_hat[-1] - mu_inv)),
        "W_limit_predicted": predicted_W_limit(consts),
        "budget": float(budget) if source.closed_neg_log_cdf(np.zeros(1)) is None else 0.0,
    }
    log.info("Renewal %s: U^(%.3g)=%.6f (1/mu=%.6f), W=%.6f (Grenze %.6f)", source.label,
             grid.t_max, u_hat[-1], mu_inv, w[-1], diag["W_limit_predicted"])
    return RenewalSolution(
        U=grid.with_values(u),
        U_hat=grid.with_values(u_hat),
        W=grid.with_values(w),
        mu_used=consts.mu,
        diagnostics=diag,
    )


def expected_heavy_count(solution: RenewalSolution, n: float, K: float) -> float:
    """Erwartete Anzahl Knoten mit M_v^n >= K: U(ln n - ln K) + 1."""
    if not 1 <= K <= n:
        raise GridError(f"verlangt 1 <= K <= n (K={K}, n={n})")
    x = math.log(n) - math.log(K)
    return solution.U.at(x) + 1.0


def _integral_first_moment(z: Union[GridFunc, Grid], t: np.ndarray, values: np.ndarray) -> Tuple[float, float]:
    """(a, int u z(u) du) auf dem Gitter, bei Funktionen plus Rest über [t_max, inf) per quad.

    Divergiert der Rest des ersten Moments, ist das Ergebnis inf.
    """
    a = float(integrate.trapezoid(values, t))
    m1 = float(integrate.trapezoid(t * values, t))
    if isinstance(z, Grid):
        return a, m1
    f = lambda u: float(np.asarray(z(np.asarray([u])))[0])  # noqa: E731
    t_max = float(t[-1])
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            a += integrate.quad(f, t_max, np.inf, limit=400)[0]
        except integrate.IntegrationWarning as e:
            raise ValueError(f"z ist nicht integrierbar: {e}") from e
        try:
            m1 += integrate.quad(lambda u: u * f(u), t_max, np.inf, limit=400)[0]
        except integrate.IntegrationWarning:
            m1 = math.inf
    return a, m1


def solve_general(problem: GeneralRenewalProblem, grid: Optional[Grid] = None) -> Tuple[Grid, Grid, float]:
    """Z = z + Z * dF, G(x) = int_0^x (Z - a/mu_F) dt und der Grenzwert von G."""
    grid = grid or Grid(DEFAULT_H, DEFAULT_T_MAX)
    t = grid.t
    if isinstance(problem.z, Grid):
        if problem.z.size != grid.size:
            raise GridError("z-Gitter passt nicht zum Lösungsgitter")
        z = problem.z.values
    else:
        z = np.asarray(problem.z(t), dtype=float)
    if np.any(z < 0):
        raise ValueError("z muss nichtnegativ sein")
    F = np.asarray(problem.F(t), dtype=float)
    if F[0] > 1e-12 or np.any(np.diff(F) < -1e-12):
        raise ValueError("F muss bei 0 verschwinden und monoton wachsen")
    dF = np.zeros_like(t)
    dF[1:] = np.diff(F)

    Z = _forward_substitute(z, dF)
    a, m1 = _integral_first_moment(problem.z, t, z)
    mu, s2 = problem.mu_F, problem.sigma2_F
    G = np.concatenate(([0.0], integrate.cumulative_trapezoid(Z - a / mu, t)))
    if math.isinf(m1):
        g_limit = -math.inf
    else:
        g_limit = -m1 / mu + a * (s2 + mu ** 2) / (2 * mu ** 2)
    log.info("Allgemeine Erneuerung: G(%.3g)=%.6f, Grenzwert %.6f", grid.t_max, G[-1], g_limit)
    return grid.with_values(Z), grid.with_values(G), g_limit


def dump_grid(path: Path, grid: Grid) -> None:
    """Zweispaltiges CSV (t, value)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "value"])
        for ti, vi in zip(grid.t, grid.values):
            writer.writerow([f"{ti:.12g}", f"{vi:.12g}"])
    log.info("Gitter geschrieben: %s (%d Punkte)", path, grid.size)
