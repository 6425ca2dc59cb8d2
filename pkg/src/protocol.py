"""CSV- und JSON-Schema der Experimentausgaben (Kompatibilitätsvertrag)."""
from __future__ import annotations
import csv
import io
import math
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

from .statistics import ReplicationSummary, StatisticsError, TreeStatistics
from .utils import atomic_write_json, atomic_write_text, fmt_float

CSV_COLUMNS = ["rep", "seed", "family", "n", "N", "height", "D_n", "D_n_star",
               "Psi", "Upsilon", "N_bad", "epsilon"]


def csv_row(st: TreeStatistics) -> List[str]:
    # D_n / D_n_star bleiben im Zähl-Modus leer
    return [
        str(st.rep), str(st.seed), st.family, str(st.n), str(st.N), str(st.height),
        "" if st.D_n is None else str(st.D_n),
        fmt_float(st.D_n_star),
        str(st.Psi), str(st.Upsilon), str(st.N_bad), fmt_float(st.epsilon),
    ]


def format_csv(rows: Iterable[TreeStatistics]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for st in rows:
        writer.writerow(csv_row(st))
    return buf.getvalue()


def write_csv(path: Path, rows: Iterable[TreeStatistics]) -> None:
    atomic_write_text(path, format_csv(rows))


def parse_row(row: Dict[str, str]) -> TreeStatistics:
    """CSV-Zeile -> TreeStatistics; Felder außerhalb des Schemas bleiben leer (NaN)."""
    try:
        N = int(row["N"])
        N_bad = int(row["N_bad"])
        d_n = row["D_n"].strip()
        d_star = row["D_n_star"].strip()
        return TreeStatistics(
            n=int(row["n"]),
            N=N,
            Psi=int(row["Psi"]),
            Upsilon=int(row["Upsilon"]),
            height=int(row["height"]),
            N_good=N - N_bad,
            N_bad=N_bad,
            epsilon=float(row["epsilon"]),
            sum_sq_dev=math.nan,
            sum_sq_dev_good=math.nan,
            D_n=int(d_n) if d_n else None,
            D_n_star=float(d_star) if d_star else None,
            family=row["family"],
            mode="traced" if d_n else "counts",
            seed=int(row["seed"]),
            rep=int(row["rep"]),
        )
    except (KeyError, ValueError) as e:
        raise StatisticsError(f"Ungültige CSV-Zeile {row!r}: {e}") from e


def read_csv(path: Path) -> List[TreeStatistics]:
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise StatisticsError(f"CSV {path}: Spalten fehlen: {', '.join(missing)}")
        return [parse_row(r) for r in reader]


def group_rows(rows: Sequence[TreeStatistics]) -> Dict[tuple, List[TreeStatistics]]:
    """Nach (family, n, epsilon) gruppieren, Reihenfolge des ersten Auftretens."""
    out: Dict[tuple, List[TreeStatistics]] = {}
    for st in rows:
        out.setdefault((st.family, st.n, st.epsilon), []).append(st)
    return out


def write_summaries(path: Path, summaries: Sequence[ReplicationSummary]) -> None:
    atomic_write_json(path, [s.to_dict() for s in summaries])
