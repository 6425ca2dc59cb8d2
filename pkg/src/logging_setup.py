import logging
from datetime import datetime
from pathlib import Path
from typing import Callable, Optional

from .constants import APP_DIR, LOGGER_NAME, LOGS_DIR_NAME, ensure_dir

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s %(context)s: %(message)s"

_context = "-"


def set_log_context(text: Optional[str]) -> Optional[str]:
    """Laufkontext (z. B. 'bst n=1000') für alle folgenden Einträge; None setzt zurück.

    Liefert den vorherigen Kontext (None für keinen).
    """
    global _context
    previous = None if _context == "-" else _context
    _context = text or "-"
    return previous


class RunContextFilter(logging.Filter):
    """Hängt den aktuellen Laufkontext als %(context)s an jeden Eintrag."""

    def filter(self, record: logging.LogRecord) -> bool:
        record.context = _context
        return True


class CallbackHandler(logging.Handler):
    """Reicht formatierte Einträge an einen Callback weiter (GUI-Logfenster)."""

    def __init__(self, write_cb: Callable[[str], None]):
        super().__init__()
        self.write_cb = write_cb

    def emit(self, record: logging.LogRecord) -> None:
        try:
            self.write_cb(self.format(record))
        except Exception:
            self.handleError(record)


def configure_logging(write_cb: Optional[Callable[[str], None]] = None, verbose: bool = False,
                      logs_dir: Optional[Path] = None) -> logging.Logger:
    """Tageslog unter <APP_DIR>/logs, Konsole (INFO bzw. DEBUG mit verbose), optional GUI-Callback."""
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(logging.DEBUG)
    for h in list(logger.handlers):
        h.close()
    logger.handlers.clear()
    logger.propagate = False

    fmt = logging.Formatter(LOG_FORMAT, datefmt="%H:%M:%S")

    logs_dir = ensure_dir(logs_dir or APP_DIR / LOGS_DIR_NAME)
    logfile = logs_dir / f"{LOGGER_NAME}-{datetime.now():%Y-%m-%d}.log"
    handlers = [logging.FileHandler(logfile, encoding="utf-8"), logging.StreamHandler()]
    handlers[0].setLevel(logging.DEBUG)
    handlers[1].setLevel(logging.DEBUG if verbose else logging.INFO)
    if write_cb is not None:
        handlers.append(CallbackHandler(write_cb))
        handlers[-1].setLevel(logging.INFO)
    # Filter an den Handlern, damit auch Einträge der Kind-Logger den Kontext bekommen
    for h in handlers:
        h.addFilter(RunContextFilter())
        h.setFormatter(fmt)
        logger.addHandler(h)

    logger.debug("Logger initialisiert. Logfile: %s", logfile)
    return logger
