import json
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import pandas as pd

from ilro import __version__, settings
from ilro.exceptions import OutputError
from .models import ExperimentConfig

logger = getLogger(__name__)


def make_table(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> pd.DataFrame:
    for position, row in enumerate(rows):
        if len(row) != len(columns):
            raise ValueError(f"row {position} has {len(row)} cells for {len(columns)} columns")
    return pd.DataFrame(list(rows), columns=list(columns))


def emit_csv(table: pd.DataFrame, path: Path, digits: Optional[int] = None) -> Path:
    """
    Header row, `digits` significant digits, `nan` for missing values, `\\n`
    line endings; boolean columns are written as 0/1.
    """
    digits = digits or settings.CSV_DIGITS
    path = Path(path)
    table = table.copy()
    for name in table.columns:
        if table[name].dtype == bool:
            table[name] = table[name].astype(int)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, float_format=f"%.{digits}g", na_rep='nan', lineterminator='\n',
                     encoding='utf-8')
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    logger.info("wrote %s (%d rows)", path, len(table))
    return path


def write_metadata(config: ExperimentConfig, path: Path, files: Sequence[Path], elapsed: float,
                   extra: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    metadata = {
        'experiment': config.experiment.value,
        'version': __version__,
        'elapsed_seconds': elapsed,
        'seed': config.seed,
        'config': config.resolved,
        'files': sorted(Path(f).name for f in files),
    }
    metadata.update(extra or {})
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(metadata, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    return path


__all__ = (
    'make_table',
    'emit_csv',
    'write_metadata',
)
