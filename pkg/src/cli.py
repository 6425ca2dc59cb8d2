"""Kommandozeile: families, simulate, renewal, heavy, report, gui."""
from __future__ import annotations
import argparse
import logging
import math
from pathlib import Path
from typing import List, Optional

from .branching import mean_heavy_count
from .constants import APP_NAME, APP_VERSION, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME
from .core import ParameterError
from .experiments import report, run
from .families import UnknownFamilyError, list_presets, parse_family
from .renewal import Grid, GridError, LatticeError, dump_grid, expected_heavy_count, solve_split_renewal
from .settings_store import ConfigError, ExperimentConfig, apply_overrides, load_config
from .statistics import StatisticsError

log = logging.getLogger("splittree.cli")


def _add_family_args(p: argparse.ArgumentParser, default: Optional[str] = "bst") -> None:
    p.add_argument("--family", default=default, help="z. B. bst, mary:m=3, trie:p=0.3/0.7")
    p.add_argument("--family-params", dest="family_params", default=None,
                   help="zusätzliche Familienparameter, ';'-getrennt (k=v;...)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splittree", description=f"{APP_NAME} {APP_VERSION}")
    parser.add_argument("-v", "--verbose", action="store_true", help="DEBUG-Ausgabe auf der Konsole")
    sub = parser.add_subparsers(dest="command")

    sub.add_parser("families", help="Voreinstellungen auflisten")

    sim = sub.add_parser("simulate", help="Replikationen laufen lassen, CSV + JSON schreiben")
    sim.add_argument("--config", type=Path, default=None, help="key = value-Datei")
    _add_family_args(sim, default=None)
    sim.add_argument("--n-grid", dest="n_grid", default=None, help="z. B. '1000, 10000'")
    sim.add_argument("--replications", "-R", type=int, default=None)
    sim.add_argument("--base-seed", dest="base_seed", type=int, default=None)
    sim.add_argument("--epsilon", type=float, default=None)
    sim.add_argument("--beta", type=float, default=None)
    sim.add_argument("--mode", choices=["counts", "traced", "instrumented"], default=None)
    sim.add_argument("--out-csv", dest="out_csv", default=None)
    sim.add_argument("--out-json", dest="out_json", default=None)
    sim.add_argument("--renewal-check", dest="renewal_check", action="store_true", default=None,
                     help="vorher prüfen, ob die Erneuerungstheorie anwendbar ist (nicht gitterförmig)")
    sim.add_argument("--workers", type=int, default=None)
    sim.add_argument("--k-grid", dest="k_grid", default=None)
    sim.add_argument("--renewal-h", dest="renewal.h", type=float, default=None)
    sim.add_argument("--renewal-t-max", dest="renewal.t_max", type=float, default=None)
    sim.add_argument("--renewal-budget", dest="renewal.budget", type=int, default=None)
    sim.add_argument("--heavy-K", dest="heavy.K", type=float, default=None)
    sim.add_argument("--heavy-runs", dest="heavy.runs", type=int, default=None)

    ren = sub.add_parser("renewal", help="Erneuerungsgleichung lösen")
    _add_family_args(ren)
    ren.add_argument("--h", type=float, default=None)
    ren.add_argument("--t-max", dest="t_max", type=float, default=None)
    ren.add_argument("--budget", type=int, default=None)
    ren.add_argument("--dump", type=Path, default=None, help="Präfix für U/U_hat/W als CSV")

    hv = sub.add_parser("heavy", help="Knoten mit M_v^n >= K zählen (Verzweigungsprozess)")
    _add_family_args(hv)
    hv.add_argument("--n", type=float, required=True)
    hv.add_argument("--K", type=float, default=None)
    hv.add_argument("--runs", type=int, default=None)
    hv.add_argument("--seed", type=int, default=0)
    hv.add_argument("--with-renewal", dest="with_renewal", action="store_true",
                    help="zusätzlich die Erneuerungsvorhersage U(ln(n/K)) + 1")

    rep = sub.add_parser("report", help="Zusammenfassungen aus CSV neu berechnen")
    rep.add_argument("--csv", type=Path, required=True)
    rep.add_argument("--out-json", dest="out_json", type=Path, required=True)

    sub.add_parser("gui", help="Fenster starten")
    return parser


_SIM_KEYS = ["family", "family_params", "n_grid", "replications", "base_seed", "epsilon", "beta", "mode",
             "out_csv", "out_json", "renewal_check", "workers", "k_grid", "renewal.h", "renewal.t_max",
             "renewal.budget", "heavy.K", "heavy.runs"]


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    base = load_config(args.config) if args.config else ExperimentConfig()
    return apply_overrides(base, {k: getattr(args, k) for k in _SIM_KEYS})


def _cmd_families(args: argparse.Namespace) -> int:
    for name, desc in list_presets().items():
        print(f"{name:8s} {desc}")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    result = run(config_from_args(args))
    for s in result.summaries:
        print(f"n={s.n}: alpha={s.alpha_hat:.6g} q={s.q_hat:.6g} r={s.r_hat:.6g} "
              f"bad={s.mean_bad_fraction:.4g}"
              + (f" E(D_n)={s.mean_D_n:.6g}" if s.mean_D_n is not None else ""))
        if s.heavy_mc is not None:
            renewal = "-" if s.heavy_renewal is None else f"{s.heavy_renewal:.6g}"
            print(f"  U_hat(t_max)={s.U_hat_t_max:.6g} W(t_max)={s.W_t_max:.6g} "
                  f"heavy(K={s.heavy_K:g}): MC={s.heavy_mc:.6g} U+1={renewal} n/(mu K)={s.heavy_leading:.6g}")
    return EXIT_OK


def _renewal_grid(args: argparse.Namespace) -> Grid:
    defaults = ExperimentConfig().renewal
    return Grid(args.h or defaults.h, args.t_max or defaults.t_max)


def _cmd_renewal(args: argparse.Namespace) -> int:
    spec = parse_family(args.family, args.family_params or "")
    budget = args.budget or ExperimentConfig().renewal.budget
    sol = solve_split_renewal(spec.source, _renewal_grid(args), consts=spec.constants, budget=budget)
    print(f"{spec.label}: U_hat(t_max)={sol.U_hat.values[-1]:.6g} 1/mu={1 / sol.mu_used:.6g} "
          f"W(t_max)={sol.W.values[-1]:.6g} W_limit={sol.diagnostics['W_limit_predicted']:.6g}")
    if args.dump:
        stem = args.dump
        for name, grid in (("U", sol.U), ("U_hat", sol.U_hat), ("W", sol.W)):
            dump_grid(stem.with_name(f"{stem.name}_{name}.csv"), grid)
    return EXIT_OK


def _cmd_heavy(args: argparse.Namespace) -> int:
    spec = parse_family(args.family, args.family_params or "")
    defaults = ExperimentConfig().heavy
    K = args.K or defaults.K
    runs = args.runs or defaults.runs
    if K < 1 or runs < 1 or args.n < 1:
        raise ConfigError(f"heavy verlangt n >= 1, K >= 1, runs >= 1 (n={args.n:g}, K={K:g}, runs={runs})")
    mean, se = mean_heavy_count(spec.source, args.n, K, runs, seed=args.seed)
    line = f"{spec.label}: n={args.n:g} K={K:g} Mittel={mean:.6g} SE={se:.3g} n/(mu K)={args.n / (spec.constants.mu * K):.6g}"
    if args.with_renewal:
        x = math.log(args.n / K)
        sol = solve_split_renewal(spec.source, Grid(1e-3, max(1.0, math.ceil(x))), consts=spec.constants)
        line += f" U+1={expected_heavy_count(sol, args.n, K):.6g}"
    print(line)
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    summaries = report(args.csv, args.out_json)
    print(f"{len(summaries)} Zusammenfassung(en) geschrieben: {args.out_json}")
    return EXIT_OK


def _cmd_gui(args: argparse.Namespace) -> int:
    from .gui import App  # ttkbootstrap nur bei Bedarf laden

    app = App()
    try:
        app.mainloop()
    except KeyboardInterrupt:
        app.on_close()
    return EXIT_OK


# Fehler in Konfiguration und Eingaben (Exit-Code 2)
INPUT_ERRORS = (ConfigError, UnknownFamilyError, ParameterError, LatticeError, GridError, StatisticsError)


COMMANDS = {
    "families": _cmd_families,
    "simulate": _cmd_simulate,
    "renewal": _cmd_renewal,
    "heavy": _cmd_heavy,
    "report": _cmd_report,
    "gui": _cmd_gui,
}


def dispatch(args: argparse.Namespace) -> int:
    """Konfigurations-/Validierungsfehler -> 2, sonstige Fehler -> 3."""
    try:
        return COMMANDS[args.command](args)
    except INPUT_ERRORS as e:
        log.error("Konfigurationsfehler: %s", e)
        return EXIT_CONFIG
    except OSError as e:
        log.error("Ein-/Ausgabefehler: %s", e)
        return EXIT_RUNTIME
    except Exception:
        log.exception("Unerwarteter Fehler im Befehl %s", args.command)
        return EXIT_RUNTIME


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)
