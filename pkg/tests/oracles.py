"""Geschlossene Formeln für die BST-Familie (b=2, s=1, s0=1, s1=0, V=(U,1-U))."""
import math

import numpy as np

EULER_GAMMA = 0.5772156649015329


def harmonic(n: int) -> float:
    return math.fsum(1.0 / k for k in range(1, n + 1))


def harmonic2(n: int) -> float:
    return math.fsum(1.0 / k ** 2 for k in range(1, n + 1))


def bst_path_length_mean(n: int) -> float:
    """E(Psi_n) = 2(n+1)H_n - 4n."""
    return 2 * (n + 1) * harmonic(n) - 4 * n


def bst_q_limit() -> float:
    return 2 * EULER_GAMMA - 4


def bst_last_ball_depth_mean(n: int) -> float:
    """E(D_n) für den zuletzt eingefügten Ball.

    Trifft der Ball ein volles Blatt, bleibt er mit Wahrscheinlichkeit 1/2
    oben; daraus folgt 2(H_n - 1) - 1/3 für n >= 3.
    """
    if n == 1:
        return 0.0
    if n == 2:
        return 0.5
    return 2 * (harmonic(n) - 1) - 1 / 3


def bst_depth_variance(n: int) -> float:
    """Var der Einfügetiefe im klassischen BST: 2H_n - 4H_n^(2) + 2."""
    return 2 * harmonic(n) - 4 * harmonic2(n) + 2


def bst_renewal_U(t):
    """U(t) = 2e^t - 2 (Summe der Gamma-Verteilungen)."""
    return 2 * np.exp(t) - 2


def bst_renewal_U_hat(t):
    return 2 - 2 * np.exp(-np.asarray(t, dtype=float))


def bst_W(x):
    return -2 * (1 - np.exp(-np.asarray(x, dtype=float)))


def bst_depth_sums(m_max: int):
    """E(sum d) und E(sum d^2) über alle Knoten eines zufälligen BST mit m Knoten, m = 0..m_max.

    Wurzel teilt gleichverteilt in k und m-1-k; im Teilbaum der Größe k gilt
    sum (d+1)^2 = sum d^2 + 2 sum d + k.
    """
    s1 = np.zeros(m_max + 1)
    s2 = np.zeros(m_max + 1)
    acc1 = acc2 = 0.0  # Präfixsummen über k < m
    for m in range(1, m_max + 1):
        k = m - 1
        acc1 += s1[k] + k
        acc2 += s2[k] + 2 * s1[k] + k
        s1[m] = 2 * acc1 / m
        s2[m] = 2 * acc2 / m
    return s1, s2


def bst_layer_sum_mean(n_i, s1, s2) -> float:
    """Erwartete Abweichungssumme bei gegebenen Teilbaumgrößen (mu = 1/2, zentriert bei 2 ln m)."""
    total = 0.0
    for m in np.asarray(n_i, dtype=np.int64):
        c = 2 * math.log(m)
        total += (s2[m] - 2 * c * s1[m] + c * c * m) / (8 * math.log(m) ** 3)
    return total
