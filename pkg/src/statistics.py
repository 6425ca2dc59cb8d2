"""Kennzahlen pro Baum und über Replikationen.

Alle Logarithmen natürlich; Tiefen ganzzahlig.
"""
from __future__ import annotations
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .constants import CONCENTRATION_EXPONENT, DEFAULT_EPSILON
from .core import BuildMode, Tree, ball_depths, subtree_ball_counts, subtree_vertex_counts
from .distributions import AnalyticConstants

log = logging.getLogger("splittree.statistics")


class StatisticsError(ValueError):
    """Ungültige Eingabe für eine Kennzahl."""


@dataclass
class TreeStatistics:
    n: int
    N: int
    Psi: int                       # Summe der Balltiefen
    Upsilon: int                   # Summe der Vertextiefen
    height: int
    N_good: int
    N_bad: int
    epsilon: float
    sum_sq_dev: float              # sum_v (d(v) - ln n / mu)^2
    sum_sq_dev_good: float
    profile: Dict[int, int] = field(default_factory=dict)
    ball_profile: Dict[int, int] = field(default_factory=dict)
    D_n: Optional[int] = None      # nur traced
    D_n_star: Optional[float] = None
    mean_insertion_depth: Optional[float] = None
    depth_at: Dict[int, int] = field(default_factory=dict)  # k -> D_k
    subtree_layer_sum: Optional[float] = None   # Teilbaumsummen der Schicht L
    subtree_upsilon: Optional[float] = None
    family: str = ""
    mode: str = BuildMode.COUNTS.value
    seed: Optional[int] = None
    rep: Optional[int] = None

    @property
    def bad_fraction(self) -> float:
        return self.N_bad / self.N


@dataclass
class ReplicationSummary:
    family: str
    n: int
    R: int
    seed: int
    mu: float
    sigma2: float
    alpha_hat: float
    mean_N_over_n: float
    se_N_over_n: float
    var_N: float
    mean_Psi_over_n: float
    se_Psi_over_n: float
    mean_Upsilon_over_n: float
    se_Upsilon_over_n: float
    mean_bad_fraction: float
    se_bad_fraction: float
    q_hat: float
    r_hat: float
    sum_sq_dev_ratio: float        # mittlere sum_sq_dev / (alpha n mu^-3 sigma^2 ln n)
    mean_D_n: Optional[float] = None
    se_D_n: Optional[float] = None
    var_D_n: Optional[float] = None
    se_var_D_n: Optional[float] = None
    mean_D_n_star: Optional[float] = None
    se_D_n_star: Optional[float] = None
    depth_shift: Optional[float] = None        # (E D_n - ln n / mu) / sqrt(ln n)
    mean_shift: Optional[float] = None         # E D_n - ln n / mu
    ks_statistic: Optional[float] = None
    var_D_k_over_ln_n: Dict[int, float] = field(default_factory=dict)
    subtree_layer_ratio: Optional[float] = None  # Mittel / (sigma^2 alpha n / ln^2 n)
    # nur mit renewal_check: Erneuerungslösung und Dreieck der schweren Knoten
    U_hat_t_max: Optional[float] = None
    W_t_max: Optional[float] = None
    W_limit_predicted: Optional[float] = None
    heavy_K: Optional[float] = None
    heavy_renewal: Optional[float] = None      # U(ln n - ln K) + 1
    heavy_mc: Optional[float] = None
    heavy_mc_se: Optional[float] = None
    heavy_leading: Optional[float] = None      # n / (mu K)

    def to_dict(self) -> dict:
        return asdict(self)


def depth_grid(n: int) -> List[int]:
    """Standard-k-Gitter für D_k: n/ln n, n/2, n (auf [1, n] begrenzt)."""
    if n <= 2:
        return list(range(1, n + 1))
    ks = {max(1, min(n, math.ceil(n / math.log(n)))), max(1, math.ceil(n / 2)), n}
    return sorted(ks)


def _strip(n: int, mu: float, epsilon: float) -> Tuple[float, float, float]:
    ln_n = math.log(n)
    center = ln_n / mu
    half = ln_n ** (0.5 + epsilon) if n > 1 else 0.0
    return center, center - half, center + half


def summarize(tree: Tree, constants: AnalyticConstants, epsilon: float = DEFAULT_EPSILON,
              ks: Optional[Sequence[int]] = None) -> TreeStatistics:
    if not epsilon > 0:
        raise StatisticsError(f"epsilon muss > 0 sein, nicht {epsilon!r}")
    n = tree.n_balls
    if n < 1:
        raise StatisticsError("Baum enthält keine Bälle")
    depth = np.asarray(tree.depth, dtype=np.int64)
    count = np.asarray(tree.count, dtype=np.int64)

    profile_arr = np.bincount(depth)
    ball_profile_arr = np.bincount(depth, weights=count).astype(np.int64)
    upsilon = int(depth.sum())
    psi = int((depth * count).sum())

    # Querprüfung: Psi = Summe der Teilbaumgrößen ohne Wurzel
    n_v = subtree_ball_counts(tree)
    if psi != sum(n_v) - n_v[tree.root]:
        raise StatisticsError(f"Psi-Identität verletzt: {psi} != {sum(n_v) - n_v[tree.root]}")

    center, lo, hi = _strip(n, constants.mu, epsilon)
    good = (depth >= lo) & (depth <= hi)
    dev2 = (depth - center) ** 2

    st = TreeStatistics(
        n=n,
        N=tree.N,
        Psi=psi,
        Upsilon=upsilon,
        height=int(depth.max()),
        N_good=int(good.sum()),
        N_bad=int((~good).sum()),
        epsilon=epsilon,
        sum_sq_dev=float(dev2.sum()),
        sum_sq_dev_good=float(dev2[good].sum()),
        profile={d: int(c) for d, c in enumerate(profile_arr) if c},
        ball_profile={d: int(c) for d, c in enumerate(ball_profile_arr) if c},
        mode=tree.mode.value,
    )
    if tree.mode.traced:
        d_k = ball_depths(tree)
        st.D_n = d_k[-1]
        st.D_n_star = sum(d_k) / n
        st.mean_insertion_depth = sum(tree.insertion_depths) / n
        st.depth_at = {k: d_k[k - 1] for k in (ks or depth_grid(n)) if 1 <= k <= n}
    return st


def path_length_identity_check(tree: Tree) -> bool:
    """Psi = sum_{v != root} n_v und Upsilon = sum_{v != root} N_v."""
    n_v = subtree_ball_counts(tree)
    big_n_v = subtree_vertex_counts(tree)
    depth = tree.depth
    psi = sum(d * c for d, c in zip(depth, tree.count))
    upsilon = sum(depth)
    if tree.mode.traced:
        # Balltiefen unabhängig über die Ball-Positionen
        if sum(ball_depths(tree)) != psi:
            return False
    root = tree.root
    return psi == sum(n_v) - n_v[root] and upsilon == sum(big_n_v) - big_n_v[root]


def concentration_report(tree: Tree, d: int, exponent: float = CONCENTRATION_EXPONENT) -> Tuple[float, int]:
    """Anteil der Vertices in Tiefe d mit |n_v - n W_v| > n^0.6, und deren Anzahl."""
    if tree.weight is None:
        raise StatisticsError("Konzentrationsbericht braucht den Modus 'instrumented'")
    at_d = [v for v, dv in enumerate(tree.depth) if dv == d]
    if not at_d:
        raise StatisticsError(f"Keine Vertices in Tiefe {d}")
    n = tree.n_balls
    n_v = subtree_ball_counts(tree)
    bound = n ** exponent
    bad = sum(1 for v in at_d if abs(n_v[v] - n * tree.weight[v]) > bound)
    return bad / len(at_d), len(at_d)


@dataclass
class SubtreeLayer:
    """Teilbäume T_i mit Wurzeln in Tiefe L = floor(beta log_b ln n)."""
    L: int
    n_i: np.ndarray        # Ballzahl je Wurzel (nur n_i > s)
    rel_depth: np.ndarray  # d_i(v) je Vertex der behaltenen Teilbäume
    owner_n: np.ndarray    # n_i des zugehörigen Teilbaums je Vertex


def subtree_layer(tree: Tree, beta: float) -> SubtreeLayer:
    n = tree.n_balls
    b = tree.params.b
    if n < 3:
        raise StatisticsError("n zu klein für Teilbaumsummen")
    L = math.floor(beta * math.log(math.log(n)) / math.log(b))
    if L < 1:
        raise StatisticsError(f"L = {L} < 1 (beta = {beta}, n = {n})")
    depth = np.asarray(tree.depth, dtype=np.int64)
    empty = np.zeros(0)
    if depth.max() < L:
        return SubtreeLayer(L, empty, empty, empty)

    # Vorfahr in Tiefe L; parent[v] < v erlaubt einen Vorwärtsdurchlauf
    parent = tree.parent
    anc = [-1] * len(depth)
    for v, dv in enumerate(tree.depth):
        if dv == L:
            anc[v] = v
        elif dv > L:
            anc[v] = anc[parent[v]]
    anc_arr = np.asarray(anc, dtype=np.int64)
    n_v = np.asarray(subtree_ball_counts(tree), dtype=np.float64)
    roots = np.flatnonzero(depth == L)
    # Teilbäume mit n_i <= s fallen heraus (entartete ln n_i)
    roots = roots[n_v[roots] > tree.params.s]
    inside = np.isin(anc_arr, roots)
    return SubtreeLayer(
        L=L,
        n_i=n_v[roots],
        rel_depth=(depth[inside] - L).astype(np.float64),
        owner_n=n_v[anc_arr[inside]],
    )


def subtree_sums(tree: Tree, beta: float, constants: AnalyticConstants,
                 alpha_hat: float = 1.0) -> Tuple[float, float]:
    """(Abweichungssumme, Upsilon-Summe) über die Teilbäume der Schicht L."""
    layer = subtree_layer(tree, beta)
    if not len(layer.n_i):
        return 0.0, 0.0
    mu = constants.mu
    ln_ni = np.log(layer.owner_n)
    layer_sum = float((((layer.rel_depth - ln_ni / mu) ** 2) / (mu ** -3 * ln_ni ** 3)).sum())
    upsilon = float((layer.rel_depth / (mu ** -2 * ln_ni ** 2)).sum())
    predicted = float((constants.sigma2 * alpha_hat * layer.n_i / np.log(layer.n_i) ** 2).sum())
    log.debug("Teilbaumsummen: L=%d, %d Teilbäume, Abweichungssumme %.4g (Vorhersage %.4g)",
              layer.L, len(layer.n_i), layer_sum, predicted)
    return layer_sum, upsilon


def subtree_sum_predictions(tree: Tree, beta: float, constants: AnalyticConstants,
                            alpha_hat: float, zeta: float) -> Tuple[float, float]:
    """Führende Terme bei endlichem n: sum_i sigma^2 alpha n_i / ln^2 n_i und
    sum_i alpha n_i / (mu^-1 ln n_i) + n zeta / (mu^-2 ln^2 n).

    Der erste Term geht erst für ln n_i ~ ln n in sigma^2 alpha n / ln^2 n über.
    """
    layer = subtree_layer(tree, beta)
    mu = constants.mu
    n = tree.n_balls
    ln_n = math.log(n)
    layer_sum = float((constants.sigma2 * alpha_hat * layer.n_i / np.log(layer.n_i) ** 2).sum())
    ups = float((alpha_hat * layer.n_i / (np.log(layer.n_i) / mu)).sum()) if len(layer.n_i) else 0.0
    ups += n * zeta / (ln_n ** 2 / mu ** 2)
    return layer_sum, ups


def _mean_se(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr)))


def _var_se(values: Sequence[float]) -> Tuple[float, float]:
    """Stichprobenvarianz (n-1) und ihr Standardfehler."""
    arr = np.asarray(values, dtype=float)
    r = len(arr)
    var = float(arr.var(ddof=1))
    m4 = float(((arr - arr.mean()) ** 4).mean())
    se2 = (m4 - (r - 3) / (r - 1) * var ** 2) / r
    return var, math.sqrt(max(se2, 0.0))


def ks_normal(values: Sequence[float]) -> float:
    """Exaktes Supremum |F_emp - Phi| über die Stichprobenpunkte."""
    return float(stats.kstest(np.asarray(values, dtype=float), "norm").statistic)


def aggregate(replications: Sequence[TreeStatistics], constants: AnalyticConstants,
              seed: int = 0) -> ReplicationSummary:
    reps = list(replications)
    if len(reps) < 2:
        raise StatisticsError("mindestens 2 Replikationen nötig")
    first = reps[0]
    for r in reps[1:]:
        if (r.n, r.family, r.mode, r.epsilon) != (first.n, first.family, first.mode, first.epsilon):
            raise StatisticsError(
                f"Gemischte Konfigurationen: ({first.family}, n={first.n}, {first.mode}) vs "
                f"({r.family}, n={r.n}, {r.mode})")
    # Reihenfolge nach Replikationsindex: bitstabile Summen
    reps.sort(key=lambda r: (r.rep if r.rep is not None else 0))
    n = first.n
    ln_n = math.log(n)
    mu, sigma2 = constants.mu, constants.sigma2
    R = len(reps)

    N_vals = [r.N for r in reps]
    mean_N_n, se_N_n = _mean_se([x / n for x in N_vals])
    alpha_hat = mean_N_n
    mean_psi, se_psi = _mean_se([r.Psi / n for r in reps])
    mean_ups, se_ups = _mean_se([r.Upsilon / n for r in reps])
    mean_bad, se_bad = _mean_se([r.bad_fraction for r in reps])
    denom = alpha_hat * n * mu ** -3 * sigma2 * ln_n
    ssd = float(np.mean([r.sum_sq_dev for r in reps]))

    summary = ReplicationSummary(
        family=first.family,
        n=n,
        R=R,
        seed=seed,
        mu=mu,
        sigma2=sigma2,
        alpha_hat=alpha_hat,
        mean_N_over_n=mean_N_n,
        se_N_over_n=se_N_n,
        var_N=float(np.var(N_vals, ddof=1)),
        mean_Psi_over_n=mean_psi,
        se_Psi_over_n=se_psi,
        mean_Upsilon_over_n=mean_ups,
        se_Upsilon_over_n=se_ups,
        mean_bad_fraction=mean_bad,
        se_bad_fraction=se_bad,
        q_hat=mean_psi - ln_n / mu,
        r_hat=mean_ups - alpha_hat * ln_n / mu,
        sum_sq_dev_ratio=ssd / denom if denom > 0 else math.nan,
    )

    if all(r.D_n is not None for r in reps):
        d_n = [float(r.D_n) for r in reps]
        summary.mean_D_n, summary.se_D_n = _mean_se(d_n)
        summary.var_D_n, summary.se_var_D_n = _var_se(d_n)
        summary.mean_D_n_star, summary.se_D_n_star = _mean_se([r.D_n_star for r in reps])
        if n > 1:
            summary.depth_shift = (summary.mean_D_n - ln_n / mu) / math.sqrt(ln_n)
            summary.mean_shift = summary.mean_D_n - ln_n / mu
            if sigma2 > 0:
                # zentriert auf den geschätzten O(1)-Versatz, Streuung aus sigma^2 mu^-3 ln n
                scale = math.sqrt(sigma2 * mu ** -3 * ln_n)
                summary.ks_statistic = ks_normal([(x - summary.mean_D_n) / scale for x in d_n])
            common = set.intersection(*(set(r.depth_at) for r in reps))
            for k in sorted(common):
                summary.var_D_k_over_ln_n[k] = float(np.var([r.depth_at[k] for r in reps], ddof=1)) / ln_n
    sub = [r.subtree_layer_sum for r in reps if r.subtree_layer_sum is not None]
    if sub and len(sub) == R and sigma2 > 0:
        summary.subtree_layer_ratio = float(np.mean(sub)) / (sigma2 * alpha_hat * n / ln_n ** 2)
    log.info("Zusammenfassung %s n=%d: alpha=%.4f q=%.4f r=%.4f", first.family, n, alpha_hat,
             summary.q_hat, summary.r_hat)
    return summary


def depth_means_by_index(stats_list: Sequence[TreeStatistics], ks: Sequence[int]) -> Dict[int, Tuple[float, float]]:
    """Mittleres D_k mit Standardfehler je k (empirische Monotonie in k)."""
    out: Dict[int, Tuple[float, float]] = {}
    for k in ks:
        vals = [r.depth_at[k] for r in stats_list if k in r.depth_at]
        if len(vals) < 2:
            raise StatisticsError(f"D_{k} in weniger als 2 Replikationen vorhanden")
        out[k] = _mean_se(vals)
    return out
