"""Gewichteter Verzweigungsprozess M_v^n = n * W_1 * ... * W_d ohne Bälle.

Dient als unabhängiges Monte-Carlo-Orakel für expected_heavy_count.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .distributions import SplitVectorSource
from .utils import derive_seed

log = logging.getLogger("splittree.branching")


@dataclass(frozen=True)
class HeavyCountResult:
    count: int              # Knoten mit Gewicht >= K
    max_depth_reached: int
    expansions: int         # vom Stapel genommene Knoten


def count_heavy(source: SplitVectorSource, n: float, K: float, rng: np.random.Generator) -> HeavyCountResult:
    """Tiefensuche ab der Wurzel mit Gewicht n.

    Komponenten liegen in [0, 1], Gewichte fallen also entlang jedes Pfads;
    unter K wird abgeschnitten.
    """
    if K < 1:
        raise ValueError(f"K muss >= 1 sein, nicht {K}")
    count = 0
    max_depth = 0
    expansions = 0
    stack = [(float(n), 0)]
    while stack:
        weight, depth = stack.pop()
        expansions += 1
        if weight < K:
            continue
        count += 1
        max_depth = max(max_depth, depth)
        for w in source.sample(rng):
            stack.append((weight * float(w), depth + 1))
    return HeavyCountResult(count=count, max_depth_reached=max_depth if count else 0, expansions=expansions)


def mean_heavy_count(source: SplitVectorSource, n: float, K: float, runs: int,
                     seed: int = 0) -> Tuple[float, float]:
    """(Mittelwert, Standardfehler) von count_heavy über `runs` Läufe."""
    if runs < 1:
        raise ValueError(f"runs muss >= 1 sein, nicht {runs}")
    # ein Seed je Lauf, wie bei den Replikationen
    counts = np.array([count_heavy(source, n, K, np.random.default_rng(derive_seed(seed, int(n), i))).count
                       for i in range(runs)], dtype=float)
    mean = float(counts.mean())
    se = float(counts.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
    log.info("Schwere Knoten %s (n=%g, K=%g): %.3f +- %.3f über %d Läufe",
             source.label, n, K, mean, se, runs)
    return mean, se
