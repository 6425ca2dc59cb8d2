"""Split-Baum-Generator: Bälle einzeln einfügen, volle Blätter aufteilen.

Der Baum ist eine Arena aus parallelen Listen (Index = Vertex-Handle).
Kinder werden immer nach ihrem Elternknoten angelegt, daher gilt
parent[v] < v für alle v > 0; darauf beruhen die Bottom-up-Durchläufe.
"""
from __future__ import annotations
import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .distributions import SplitVectorSource

log = logging.getLogger("splittree.core")

ANONYMOUS = -1  # Ball ohne Identität (Zähl-Modus)

# Zähl-Modus: nur der gerade eingefügte Ball (Tree._watched) behält seine
# Identität. Tree._landing ist sein aktueller Ruheplatz; wird dieses Blatt
# erneut aufgeteilt, steht _watched an Position _slot der Gruppe, wie die
# Ball-Liste im traced-Modus; so ziehen beide Modi dieselben Zufallszahlen
# und liefern dieselbe Einfügetiefe.


class ParameterError(ValueError):
    """Verletzte Parameterbedingung (b, s, s0, s1) oder ungültiges n."""


class UnreachableStateError(RuntimeError):
    """Interner Zustand, der bei gültigem Baum nicht auftreten kann."""


class BuildMode(str, Enum):
    COUNTS = "counts"              # nur Ballzahlen
    TRACED = "traced"              # + Ball-ID -> Vertex, Einfügetiefen
    INSTRUMENTED = "instrumented"  # + kumulative Gewichte (schließt TRACED ein)

    @property
    def traced(self) -> bool:
        return self is not BuildMode.COUNTS


@dataclass(frozen=True)
class SplitParams:
    b: int    # Verzweigungsgrad
    s: int    # Kapazität eines Blatts
    s0: int   # Bälle, die beim Aufteilen im Knoten bleiben
    s1: int   # Saat-Bälle pro Kind


def validate_params(p: SplitParams) -> Tuple[bool, str]:
    """(ok, Meldung); die Meldung nennt die verletzte Ungleichung."""
    if p.b < 2:
        return False, f"b = {p.b} < 2"
    if p.s < 1:
        return False, f"s = {p.s} < 1"
    if not 0 <= p.s0 <= p.s:
        return False, f"0 <= s0 <= s verletzt: s0 = {p.s0}, s = {p.s}"
    if p.s1 < 0:
        return False, f"0 <= b*s1 verletzt: s1 = {p.s1}"
    if p.b * p.s1 > p.s + 1 - p.s0:
        return False, f"b*s1 = {p.b * p.s1} > s+1-s0 = {p.s + 1 - p.s0}"
    return True, "ok"


@dataclass(frozen=True)
class Vertex:
    """Lesende Sicht auf einen Arena-Eintrag."""
    id: int
    parent: Optional[int]
    depth: int
    children: Tuple[Optional[int], ...]
    ball_count: int
    cumulative_weight: Optional[float]
    split_vector: Optional[Tuple[float, ...]]


class Tree:
    def __init__(self, params: SplitParams, mode: BuildMode = BuildMode.COUNTS):
        self.params = params
        self.mode = BuildMode(mode)
        self.root = 0
        self.n_balls = 0
        self.parent: List[int] = [-1]
        self.depth: List[int] = [0]
        self.children: List[Optional[List[int]]] = [None]  # None <=> Blatt
        self.count: List[int] = [0]
        self.split_vector: List[Optional[Tuple[float, ...]]] = [None]
        self._cumulative: List[Optional[Tuple[float, ...]]] = [None]
        self.weight: Optional[List[float]] = [1.0] if self.mode is BuildMode.INSTRUMENTED else None
        traced = self.mode.traced
        self.balls: Optional[List[List[int]]] = [[]] if traced else None
        self.ball_locations: Optional[List[int]] = [] if traced else None
        self.insertion_depths: Optional[List[int]] = [] if traced else None
        # zuletzt eingefügter Ball und sein Ruheplatz
        self._watched = -1
        self._landing = -1
        self._slot = -1

    def __len__(self) -> int:
        return len(self.depth)

    @property
    def N(self) -> int:
        return len(self.depth)

    def is_leaf(self, v: int) -> bool:
        return self.children[v] is None

    def leaves(self) -> List[int]:
        return [v for v, kids in enumerate(self.children) if kids is None]

    def vertex(self, v: int) -> Vertex:
        kids = self.children[v]
        return Vertex(
            id=v,
            parent=None if v == self.root else self.parent[v],
            depth=self.depth[v],
            children=tuple(None if w < 0 else w for w in kids) if kids else (None,) * self.params.b,
            ball_count=self.count[v],
            cumulative_weight=self.weight[v] if self.weight is not None else None,
            split_vector=self.split_vector[v],
        )

    @property
    def vertices(self) -> List[Vertex]:
        return [self.vertex(v) for v in range(len(self))]

    # -------- Arena --------
    def _new_vertex(self, parent: int, index: int) -> int:
        v = len(self.depth)
        self.parent.append(parent)
        self.depth.append(self.depth[parent] + 1)
        self.children.append(None)
        self.count.append(0)
        self.split_vector.append(None)
        self._cumulative.append(None)
        if self.weight is not None:
            self.weight.append(self.weight[parent] * self.split_vector[parent][index])
        if self.balls is not None:
            self.balls.append([])
        return v

    def _child(self, v: int, i: int) -> int:
        kids = self.children[v]
        if kids is None:
            kids = [-1] * self.params.b
            self.children[v] = kids
        w = kids[i]
        if w < 0:
            w = self._new_vertex(v, i)
            kids[i] = w
        return w

    def _vector(self, v: int, source: SplitVectorSource, rng: np.random.Generator) -> Tuple[float, ...]:
        """Split-Vektor von v: beim ersten Gebrauch ziehen, danach fest."""
        cum = self._cumulative[v]
        if cum is None:
            vec = tuple(float(x) for x in source.sample(rng))
            acc = 0.0
            out = []
            for x in vec:
                acc += x
                out.append(acc)
            # Rundung: ab der letzten positiven Komponente exakt 1.0,
            # Null-Komponenten werden nie gewählt
            last = max(i for i, x in enumerate(vec) if x > 0.0)
            for i in range(last, len(out)):
                out[i] = 1.0
            cum = tuple(out)
            self.split_vector[v] = vec
            self._cumulative[v] = cum
        return cum

    def _choose_child(self, v: int, source: SplitVectorSource, rng: np.random.Generator) -> int:
        cum = self._vector(v, source, rng)
        u = rng.random()
        for i, c in enumerate(cum):
            if u < c:
                return i
        raise UnreachableStateError(f"keine Komponente gewählt (u={u!r}, kumulativ={cum})")

    # -------- Invarianten --------
    def check_invariants(self) -> None:
        p = self.params
        total = sum(self.count)
        if total != self.n_balls:
            raise UnreachableStateError(f"Ballerhaltung verletzt: {total} != {self.n_balls}")
        for v in range(len(self)):
            if v != self.root:
                pv = self.parent[v]
                if not 0 <= pv < v or self.depth[v] != self.depth[pv] + 1:
                    raise UnreachableStateError(f"Elternverweis/Tiefe falsch bei Vertex {v}")
            if self.children[v] is not None:
                if self.count[v] != p.s0:
                    raise UnreachableStateError(f"Innerer Vertex {v} hält {self.count[v]} != s0 = {p.s0}")
            elif self.n_balls and not 1 <= self.count[v] <= p.s:
                raise UnreachableStateError(f"Blatt {v} hält {self.count[v]} Bälle (erlaubt 1..{p.s})")
        if self.n_balls and min(subtree_ball_counts(self)) <= 0:
            raise UnreachableStateError("Vertex ohne Bälle im Teilbaum gespeichert")


def _place(tree: Tree, v: int, ball: int) -> None:
    tree.count[v] += 1
    if tree.count[v] > tree.params.s:
        raise UnreachableStateError(f"Blatt {v} über Kapazität ({tree.count[v]} > {tree.params.s})")
    if tree.balls is not None:
        tree.balls[v].append(ball)
        tree.ball_locations[ball] = v
    if ball == tree._watched:
        tree._landing = v
        tree._slot = tree.count[v] - 1


def _split(tree: Tree, v: int, ball: int, source: SplitVectorSource,
           rng: np.random.Generator, queue: deque) -> None:
    """Volles Blatt v bekommt einen weiteren Ball und wird aufgeteilt."""
    p = tree.params
    if tree.balls is not None:
        residents = list(tree.balls[v])
    else:
        residents = [ANONYMOUS] * tree.count[v]
        if v == tree._landing and residents:
            residents[tree._slot] = tree._watched
    group = residents + [ball]
    if len(group) != p.s + 1:
        raise UnreachableStateError(f"Blatt {v} teilt mit {len(group)} statt {p.s + 1} Bällen")
    tree._vector(v, source, rng)
    order = rng.permutation(p.s + 1)

    stay = [group[j] for j in order[:p.s0]]
    tree.count[v] = p.s0
    if tree.balls is not None:
        tree.balls[v] = stay
        for x in stay:
            tree.ball_locations[x] = v
    if tree._watched in stay:
        tree._landing = v
        tree._slot = stay.index(tree._watched)

    pos = p.s0
    for i in range(p.b):
        seeds = order[pos:pos + p.s1]
        pos += p.s1
        if len(seeds):
            w = tree._child(v, i)
            for j in seeds:
                _place(tree, w, group[j])

    # Rest unabhängig nach V_v verteilen, Einfügen über die Warteschlange
    for j in order[pos:]:
        i = tree._choose_child(v, source, rng)
        queue.append((tree._child(v, i), group[j]))


def _insert_from(tree: Tree, start: int, ball: int, source: SplitVectorSource,
                 rng: np.random.Generator, queue: deque) -> None:
    v = start
    while tree.children[v] is not None:
        v = tree._child(v, tree._choose_child(v, source, rng))
    if tree.count[v] < tree.params.s:
        _place(tree, v, ball)
    else:
        _split(tree, v, ball, source, rng, queue)


def add_ball(tree: Tree, source: SplitVectorSource, rng: np.random.Generator) -> int:
    """Fügt einen Ball an der Wurzel ein; liefert die Einfügetiefe D_k^f."""
    ball = tree.n_balls
    tree.n_balls += 1
    if tree.ball_locations is not None:
        tree.ball_locations.append(-1)

    # Der neue Ball wird auch im Zähl-Modus verfolgt (übrige Bälle anonym)
    tree._watched = ball
    tree._landing = -1
    tree._slot = -1
    queue: deque = deque([(tree.root, ball)])
    while queue:
        start, x = queue.popleft()
        _insert_from(tree, start, x, source, rng, queue)
    if tree._landing < 0:
        raise UnreachableStateError(f"Ball {ball} hat keinen Ruheplatz")
    depth = tree.depth[tree._landing]
    if tree.insertion_depths is not None:
        tree.insertion_depths.append(depth)
    return depth


def build(p: SplitParams, source: SplitVectorSource, n: int, seed: int,
          mode: BuildMode = BuildMode.COUNTS) -> Tree:
    ok, msg = validate_params(p)
    if not ok:
        raise ParameterError(msg)
    if source.b != p.b:
        raise ParameterError(f"Split-Vektor hat b = {source.b}, Parameter verlangen b = {p.b}")
    if n < 1:
        raise ParameterError(f"n muss >= 1 sein, nicht {n}")
    rng = np.random.default_rng(seed)
    tree = Tree(p, mode)
    for _ in range(n):
        add_ball(tree, source, rng)
    log.debug("Baum gebaut: n=%d, N=%d, Modus=%s, Seed=%d", n, tree.N, tree.mode.value, seed)
    return tree


def subtree_ball_counts(tree: Tree) -> List[int]:
    """n_v für jeden Vertex (Index = Handle), ein Bottom-up-Durchlauf."""
    n_v = list(tree.count)
    parent = tree.parent
    for v in range(len(n_v) - 1, 0, -1):
        n_v[parent[v]] += n_v[v]
    return n_v


def subtree_vertex_counts(tree: Tree) -> List[int]:
    """N_v für jeden Vertex."""
    n_v = [1] * len(tree)
    parent = tree.parent
    for v in range(len(n_v) - 1, 0, -1):
        n_v[parent[v]] += n_v[v]
    return n_v


def ball_depths(tree: Tree) -> List[int]:
    """Endtiefe D_k jedes Balls (Index k-1); nur mit Ball-Tracking."""
    if tree.ball_locations is None:
        raise ParameterError("Balltiefen brauchen den Modus 'traced' oder 'instrumented'")
    depth = tree.depth
    return [depth[v] for v in tree.ball_locations]
