from pathlib import Path
import os

APP_NAME = "SplitTree Lab"
APP_VERSION = "0.3.0"

# Logger-Namensraum (alle Module hängen darunter)
LOGGER_NAME = "splittree"

# --- Numerik ---
SUM_TOLERANCE = 1e-12          # Split-Vektor muss auf 1 summieren
QUAD_EPSABS = 1e-10            # adaptive Quadratur auf (0,1)
MC_BUDGET = 10**6              # Monte-Carlo-Fallback für Konstanten
RENEWAL_MC_BUDGET = 10**7      # empirische CDF von -ln V für den Renewal-Solver
LATTICE_MAX_DENOMINATOR = 50
LATTICE_TOLERANCE = 1e-9

# --- Experiment-Defaults ---
DEFAULT_EPSILON = 0.25
DEFAULT_BETA = 2.0
DEFAULT_REPLICATIONS = 4
DEFAULT_BASE_SEED = 7
DEFAULT_H = 1e-3
DEFAULT_T_MAX = 15.0
DEFAULT_HEAVY_K = 100.0
DEFAULT_HEAVY_RUNS = 1000
CONCENTRATION_EXPONENT = 0.6

# Exit-Codes der CLI
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

# Umgebungsvariablen
ENV_WORKERS = "SPLITTREE_WORKERS"
ENV_HOME = "SPLITTREE_HOME"

# Logs / letzte Konfiguration im App-Verzeichnis (userabhängig, plattformneutral)
LOGS_DIR_NAME = "logs"
LAST_CONFIG_FILE_NAME = "last_experiment.cfg"
APP_DIR = Path(os.environ.get(ENV_HOME, str(Path.home() / ".splittree")))

# Ampel-"Farbnamen" für die GUI-Statusanzeige
COLOR_RED = "danger"
COLOR_YELLOW = "warning"
COLOR_GREEN = "success"

def ensure_dir(p: Path) -> Path:
    p.mkdir(parents=True, exist_ok=True)
    return p
