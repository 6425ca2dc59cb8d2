"""Replikationsläufe: Seeds ableiten, Bäume bauen, CSV + JSON schreiben."""
from __future__ import annotations
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

from .branching import mean_heavy_count
from .core import BuildMode, build
from .families import FamilySpec, parse_family
from .logging_setup import set_log_context
from .protocol import group_rows, read_csv, write_csv, write_summaries
from .renewal import Grid, LatticeError, RenewalSolution, expected_heavy_count, solve_split_renewal
from .settings_store import ExperimentConfig, resolve_workers, validate_config
from .statistics import ReplicationSummary, StatisticsError, TreeStatistics, aggregate, subtree_sums, summarize
from .utils import derive_seed

log = logging.getLogger("splittree.experiments")

ProgressCallback = Callable[[int, int], None]


@dataclass(frozen=True)
class ReplicationTask:
    family: str          # kanonisches Familienlabel, in jedem Prozess neu aufgelöst
    n: int
    rep: int
    seed: int
    mode: str
    epsilon: float
    beta: float
    ks: Tuple[int, ...] = ()
    context: str = "-"  # Log-Kontext, auch in Worker-Prozessen


@dataclass
class RunResult:
    rows: List[TreeStatistics]
    summaries: List[ReplicationSummary]
    csv_path: Path
    json_path: Path
    renewal: Optional[RenewalSolution] = None


@lru_cache(maxsize=16)
def _family(label: str) -> FamilySpec:
    return parse_family(label)


def _replicate(task: ReplicationTask) -> TreeStatistics:
    previous = set_log_context(task.context)
    try:
        return _replicate_in_context(task)
    finally:
        set_log_context(previous)


def _replicate_in_context(task: ReplicationTask) -> TreeStatistics:
    spec = _family(task.family)
    tree = build(spec.params, spec.source, task.n, task.seed, BuildMode(task.mode))
    log.debug("Replikation %d: Seed %d, N=%d", task.rep, task.seed, tree.N)
    st = summarize(tree, spec.constants, task.epsilon, task.ks or None)
    st.family = task.family
    st.seed = task.seed
    st.rep = task.rep
    try:
        st.subtree_layer_sum, st.subtree_upsilon = subtree_sums(tree, task.beta, spec.constants)
    except StatisticsError:
        # n oder L zu klein: keine Schicht vorhanden
        pass
    return st


def tasks_for(config: ExperimentConfig, spec: FamilySpec, n: int) -> List[ReplicationTask]:
    return [
        ReplicationTask(
            family=spec.label,
            n=n,
            rep=i,
            seed=derive_seed(config.base_seed, n, i),
            mode=config.mode,
            epsilon=config.epsilon,
            beta=config.beta,
            ks=tuple(config.k_grid),
            context=f"{spec.label} n={n}",
        )
        for i in range(config.replications)
    ]


def run_tasks(tasks: Sequence[ReplicationTask], workers: int = 1,
              progress: Optional[ProgressCallback] = None) -> List[TreeStatistics]:
    """Führt die Replikationen aus; Ergebnis immer nach rep sortiert."""
    total = len(tasks)
    results: List[TreeStatistics] = []
    if workers <= 1 or total <= 1:
        for i, task in enumerate(tasks, start=1):
            results.append(_replicate(task))
            if progress:
                progress(i, total)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, st in enumerate(pool.map(_replicate, tasks), start=1):
                results.append(st)
                if progress:
                    progress(i, total)
    results.sort(key=lambda st: st.rep)
    return results


def check_renewal_gate(spec: FamilySpec) -> None:
    if spec.lattice_suspect:
        raise LatticeError(f"Familie {spec.label}: lattice_suspect, Erneuerungsprüfung nicht anwendbar")


def renewal_check(config: ExperimentConfig, spec: FamilySpec,
                  summaries: Sequence[ReplicationSummary]) -> RenewalSolution:
    """Erneuerungslösung auf dem konfigurierten Gitter; je n das Dreieck
    Monte-Carlo-Mittel / U(ln n - ln K) + 1 / n / (mu K) in die Zusammenfassung."""
    r, hv = config.renewal, config.heavy
    sol = solve_split_renewal(spec.source, Grid(r.h, r.t_max), consts=spec.constants, budget=r.budget)
    for s in summaries:
        s.U_hat_t_max = float(sol.U_hat.values[-1])
        s.W_t_max = float(sol.W.values[-1])
        s.W_limit_predicted = sol.diagnostics["W_limit_predicted"]
        if hv.K > s.n:
            log.warning("n=%d: K=%g > n, Dreieck übersprungen", s.n, hv.K)
            continue
        s.heavy_K = hv.K
        s.heavy_mc, s.heavy_mc_se = mean_heavy_count(spec.source, s.n, hv.K, hv.runs, seed=config.base_seed)
        s.heavy_leading = s.n / (spec.constants.mu * hv.K)
        if math.log(s.n / hv.K) <= r.t_max:
            s.heavy_renewal = expected_heavy_count(sol, s.n, hv.K)
        else:
            log.warning("n=%d: ln(n/K) > t_max = %g, U+1 nicht verfügbar", s.n, r.t_max)
        log.info("Schwere Knoten n=%d, K=%g: MC %.4g, U+1 %s, n/(mu K) %.4g", s.n, hv.K, s.heavy_mc,
                 "-" if s.heavy_renewal is None else f"{s.heavy_renewal:.4g}", s.heavy_leading)
    return sol


def run(config: ExperimentConfig, progress: Optional[ProgressCallback] = None) -> RunResult:
    """Alle n des Gitters: R Replikationen, eine CSV-Zeile je Replikation, eine Zusammenfassung je n."""
    validate_config(config)
    spec = parse_family(config.family, config.family_params)
    if config.renewal_check:
        check_renewal_gate(spec)
    workers = resolve_workers(config)
    log.info("Experiment %s: n=%s, R=%d, Modus=%s, Worker=%d", spec.label,
             config.n_grid, config.replications, config.mode, workers)

    rows: List[TreeStatistics] = []
    summaries: List[ReplicationSummary] = []
    try:
        for n in config.n_grid:
            set_log_context(f"{spec.label} n={n}")
            batch = run_tasks(tasks_for(config, spec, n), workers, progress)
            rows.extend(batch)
            summaries.append(aggregate(batch, spec.constants, seed=config.base_seed))
            log.info("n=%d fertig (%d Replikationen)", n, len(batch))
    finally:
        set_log_context(None)

    solution = renewal_check(config, spec, summaries) if config.renewal_check else None

    csv_path, json_path = Path(config.out_csv), Path(config.out_json)
    write_csv(csv_path, rows)
    write_summaries(json_path, summaries)
    log.info("Ergebnisse geschrieben: %s, %s", csv_path, json_path)
    return RunResult(rows=rows, summaries=summaries, csv_path=csv_path, json_path=json_path,
                     renewal=solution)


def report(csv_path: Path, json_path: Path) -> List[ReplicationSummary]:
    """Zusammenfassungen aus einer vorhandenen CSV neu berechnen."""
    rows = read_csv(csv_path)
    if not rows:
        raise StatisticsError(f"CSV {csv_path} enthält keine Zeilen")
    summaries = []
    for (family, n, _eps), batch in group_rows(rows).items():
        spec = _family(family)
        summaries.append(aggregate(batch, spec.constants, seed=0))
        log.info("Report %s n=%d: %d Zeilen", family, n, len(batch))
    write_summaries(json_path, summaries)
    return summaries
