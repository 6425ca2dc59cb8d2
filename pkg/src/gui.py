import logging
import threading
import tkinter as tk
from tkinter import filedialog, messagebox
from typing import List

import ttkbootstrap as ttk
from ttkbootstrap.constants import *

from .constants import APP_DIR, APP_NAME, APP_VERSION, COLOR_GREEN, COLOR_RED, COLOR_YELLOW
from .experiments import run
from .families import list_presets
from .logging_setup import configure_logging
from .settings_store import ExperimentConfig, apply_overrides, load_last_config, save_config
from .statistics import ReplicationSummary

log = logging.getLogger("splittree.gui")

# -------- Log- und UI-Widgets --------

class LogWidget(ttk.ScrolledText):
    def __init__(self, master):
        super().__init__(master, height=12)
        self.configure(state=tk.DISABLED, font=("Consolas", 10))

    def write(self, msg: str):
        self.configure(state=tk.NORMAL)
        self.insert(tk.END, msg + "\n")
        self.see(tk.END)
        self.configure(state=tk.DISABLED)

class Ampel(ttk.Label):
    """Status: rot = Fehler, gelb = läuft, grün = fertig."""
    def __init__(self, master):
        super().__init__(master, text="●", font=("Segoe UI", 18))
        self.set_color(COLOR_GREEN)
    def set_color(self, style):
        colors = {COLOR_GREEN: "#28a745", COLOR_YELLOW: "#ffc107", COLOR_RED: "#dc3545"}
        self.configure(foreground=colors.get(style, "#dc3545"))

class SummaryTree(ttk.Treeview):
    COLS = ("R", "alpha", "q", "r", "bad", "D_n", "var_D_n", "ks")
    HEADINGS = ("R", "α̂", "q̂", "r̂", "Anteil schlecht", "E D_n", "Var D_n", "KS")

    def __init__(self, master):
        super().__init__(master, columns=self.COLS, show="tree headings", height=12, bootstyle="secondary")
        self.heading("#0", text="Familie / n")
        self.column("#0", width=260, stretch=True)
        for col, text in zip(self.COLS, self.HEADINGS):
            self.heading(col, text=text)
            self.column(col, width=110, anchor=tk.E, stretch=False)

    def clear(self):
        for i in self.get_children(""):
            self.delete(i)

    def add_summary(self, s: ReplicationSummary):
        def f(x, spec=".5g"):
            return "" if x is None else format(x, spec)
        self.insert("", tk.END, text=f"{s.family}  n={s.n}", values=(
            s.R, f(s.alpha_hat), f(s.q_hat), f(s.r_hat), f(s.mean_bad_fraction, ".4f"),
            f(s.mean_D_n), f(s.var_D_n), f(s.ks_statistic, ".4f"),
        ))

# -------- Haupt-App --------

class App(ttk.Window):
    def __init__(self, config: ExperimentConfig = None):
        super().__init__(themename="flatly")
        self.config_ = config or load_last_config()
        self.title(f"{APP_NAME} {APP_VERSION}")
        self.geometry("1400x900")
        self.minsize(1000, 700)
        self._worker = None

        # -------- Splitter: oben Eingaben + Ergebnisse, unten Log --------
        self.pw = ttk.PanedWindow(self, orient="vertical")
        self.pw.pack(fill=BOTH, expand=True)
        self.top_frame = ttk.Frame(self.pw)
        self.pw.add(self.top_frame, weight=3)
        self.bottom_frame = ttk.Frame(self.pw)
        self.pw.add(self.bottom_frame, weight=1)

        form = ttk.Labelframe(self.top_frame, text="Experiment")
        form.pack(fill=X, padx=12, pady=8)
        c = self.config_
        self.family_var = tk.StringVar(value=c.family)
        self.fparams_var = tk.StringVar(value=c.family_params)
        self.ngrid_var = tk.StringVar(value=", ".join(str(n) for n in c.n_grid))
        self.reps_var = tk.StringVar(value=str(c.replications))
        self.seed_var = tk.StringVar(value=str(c.base_seed))
        self.mode_var = tk.StringVar(value=c.mode)
        self.workers_var = tk.StringVar(value="" if c.workers is None else str(c.workers))
        self.csv_var = tk.StringVar(value=c.out_csv)
        self.json_var = tk.StringVar(value=c.out_json)

        row = ttk.Frame(form); row.pack(fill=X, pady=6, padx=6)
        ttk.Label(row, text="Familie:").pack(side=LEFT)
        ttk.Combobox(row, textvariable=self.family_var, values=list(list_presets()), width=28).pack(side=LEFT, padx=(6, 12))
        ttk.Label(row, text="Parameter:").pack(side=LEFT)
        ttk.Entry(row, textvariable=self.fparams_var, width=30).pack(side=LEFT, padx=(6, 12))
        ttk.Label(row, text="Modus:").pack(side=LEFT)
        ttk.Combobox(row, textvariable=self.mode_var, values=["counts", "traced", "instrumented"],
                     state="readonly", width=12).pack(side=LEFT, padx=(6, 12))

        row = ttk.Frame(form); row.pack(fill=X, pady=6, padx=6)
        ttk.Label(row, text="n-Gitter:").pack(side=LEFT)
        ttk.Entry(row, textvariable=self.ngrid_var, width=30).pack(side=LEFT, padx=(6, 12))
        ttk.Label(row, text="R:").pack(side=LEFT)
        ttk.Entry(row, textvariable=self.reps_var, width=8).pack(side=LEFT, padx=(6, 12))
        ttk.Label(row, text="Seed:").pack(side=LEFT)
        ttk.Entry(row, textvariable=self.seed_var, width=14).pack(side=LEFT, padx=(6, 12))
        ttk.Label(row, text="Worker:").pack(side=LEFT)
        ttk.Entry(row, textvariable=self.workers_var, width=6).pack(side=LEFT, padx=(6, 12))

        self._row_path(form, "CSV", self.csv_var, ".csv")
        self._row_path(form, "JSON", self.json_var, ".json")

        actions = ttk.Frame(self.top_frame); actions.pack(fill=X, padx=12)
        self.btn_run = ttk.Button(actions, text="Starten", command=self._start, bootstyle=PRIMARY)
        self.btn_run.pack(side=LEFT)
        self.ampel = Ampel(actions); self.ampel.pack(side=LEFT, padx=8)
        self.progress = ttk.Progressbar(actions, mode="determinate", bootstyle=INFO)
        self.progress.pack(side=LEFT, fill=X, expand=True, padx=(8, 0))

        ttk.Label(self.top_frame, text="Zusammenfassungen (eine Zeile je n)").pack(anchor=W, padx=12, pady=(8, 0))
        self.summary = SummaryTree(self.top_frame)
        self.summary.pack(fill=BOTH, expand=True, padx=12, pady=(0, 8))

        ttk.Label(self.bottom_frame, text="Protokoll").pack(anchor=W, padx=12, pady=(6, 0))
        self.log = LogWidget(self.bottom_frame)
        self.log.pack(fill=BOTH, expand=True, padx=12, pady=(0, 12))

        self.status = ttk.Label(self, text="Bereit", anchor=W)
        self.status.pack(fill=X, side=BOTTOM)

        # Log-Einträge aus Worker-Threads über die Tk-Schleife
        configure_logging(write_cb=lambda msg: self.after(0, self._log_write, msg))
        self.protocol("WM_DELETE_WINDOW", self.on_close)

    # ----- Helpers -----
    def _row_path(self, parent, label, var: tk.StringVar, ext: str):
        row = ttk.Frame(parent); row.pack(fill=X, pady=6, padx=6)
        ttk.Label(row, text=f"{label}:", width=10).pack(side=LEFT)
        ttk.Entry(row, textvariable=var).pack(side=LEFT, fill=X, expand=True, padx=(0, 8))
        def browse():
            f = filedialog.asksaveasfilename(title=f"{label}-Datei wählen", defaultextension=ext,
                                             initialdir=str(APP_DIR))
            if f:
                var.set(f)
        ttk.Button(row, text="Durchsuchen…", command=browse, bootstyle=SECONDARY).pack(side=LEFT)

    def _log_write(self, msg: str):
        self.log.write(msg)
        self.status.configure(text=msg)

    def _read_form(self) -> ExperimentConfig:
        return apply_overrides(self.config_, {
            "family": self.family_var.get().strip(),
            "family_params": self.fparams_var.get().strip(),
            "n_grid": self.ngrid_var.get(),
            "replications": self.reps_var.get(),
            "base_seed": self.seed_var.get(),
            "mode": self.mode_var.get(),
            "workers": self.workers_var.get(),
            "out_csv": self.csv_var.get().strip(),
            "out_json": self.json_var.get().strip(),
        })

    # ----- Aktionen -----
    def _start(self):
        if self._worker and self._worker.is_alive():
            messagebox.showinfo("Hinweis", "Es läuft bereits ein Experiment.")
            return
        try:
            config = self._read_form()
        except ValueError as e:
            self.ampel.set_color(COLOR_RED)
            messagebox.showerror("Konfiguration", str(e))
            return
        self.config_ = config
        save_config(config)
        self.summary.clear()
        self.ampel.set_color(COLOR_YELLOW)
        self.btn_run.configure(state=DISABLED)

        def progress(done: int, total: int):
            self.after(0, lambda: self.progress.configure(maximum=total, value=done))

        def work():
            try:
                result = run(config, progress=progress)
            except ValueError as e:
                log.error("Konfigurationsfehler: %s", e)
                self.after(0, self._finish, None)
            except Exception:
                log.exception("Experiment abgebrochen")
                self.after(0, self._finish, None)
            else:
                self.after(0, self._finish, result.summaries)
        self._worker = threading.Thread(target=work, daemon=True)
        self._worker.start()

    def _finish(self, summaries: List[ReplicationSummary]):
        self.btn_run.configure(state=NORMAL)
        if summaries is None:
            self.ampel.set_color(COLOR_RED)
            return
        for s in summaries:
            self.summary.add_summary(s)
        self.ampel.set_color(COLOR_GREEN)
        self._log_write(f"Fertig: {len(summaries)} Zusammenfassung(en)")

    def on_close(self):
        """Formular ein letztes Mal übernehmen und atomisch speichern."""
        try:
            save_config(self._read_form())
        except Exception:
            log.warning("Letzte Konfiguration nicht gespeichert", exc_info=True)
        finally:
            self.destroy()
