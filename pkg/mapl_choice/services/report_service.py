"""
Leitura do CSV de resultados, estatísticas de boxplot por grupo e tabela de texto.
"""

from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd

from ..exceptions import SummaryError
from ..schemas import RESULT_COLUMNS, SUMMARY_COLUMNS

GROUP_COLUMNS = ["dgp", "model", "n_individuals"]


def read_results(path: Union[str, Path]) -> pd.DataFrame:
    """
    Lê um CSV de resultados. Arquivo vazio ou só com cabeçalho devolve um
    DataFrame vazio; cabeçalho diferente do esquema levanta SummaryError.
    """
    try:
        frame = pd.read_csv(path, float_precision="round_trip", keep_default_na=False,
                            na_values=[""])
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=list(RESULT_COLUMNS))
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise SummaryError(f"results file is malformed: {e}") from e

    if tuple(str(c) for c in frame.columns) != RESULT_COLUMNS:
        raise SummaryError(
            f"results header must be {','.join(RESULT_COLUMNS)}; "
            f"got {','.join(str(c) for c in frame.columns)}"
        )
    frame["status"] = frame["status"].astype(str)
    return frame


def summary_stats(values: Sequence[float]) -> dict[str, float]:
    """Mínimo, quartis (interpolação linear), máximo e média."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise SummaryError("cannot summarize an empty group")
    q1, median, q3 = np.quantile(arr, [0.25, 0.5, 0.75], method="linear")
    return {
        "min": float(arr.min()),
        "q1": float(q1),
        "median": float(median),
        "q3": float(q3),
        "max": float(arr.max()),
        "mean": float(arr.mean()),
    }


def summarize_boxplot(results: pd.DataFrame) -> pd.DataFrame:
    """
    Estatísticas de pct_error por (dgp, modelo, N) sobre as linhas com status ok,
    na ordem de primeira aparição dos grupos.
    """
    ok = results[results["status"] == "ok"]
    if ok.empty:
        raise SummaryError("no successful rows to summarize")
    rows = []
    for (dgp, model, n), group in ok.groupby(GROUP_COLUMNS, sort=False):
        rows.append({"dgp": dgp, "model": model, "n": int(n), **summary_stats(group["pct_error"])})
    return pd.DataFrame(rows, columns=list(SUMMARY_COLUMNS))


def write_summary(summary: pd.DataFrame, path: Union[str, Path]) -> None:
    summary.to_csv(path, index=False, float_format="%.6g", lineterminator="\n")


def render_table(summary: pd.DataFrame) -> str:
    """Tabela de texto alinhada para o terminal."""
    return summary.to_string(index=False, float_format=lambda v: f"{v:.3f}")
