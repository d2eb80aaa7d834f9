"""
JointFace — Report Writers

Every report is written twice: a CSV for machines and a text table for
people. Both start with the same header block:

    # region errors are vertex-space proxies (upper ≈ brows/eyes, lower ≈ mouth/jaw)
    # correlation scores use offset magnitudes ‖·‖, not per-axis offsets
    # checkpoint manifest sha256: <hash>      when a checkpoint was involved
    # config: {...}                           the resolved run config, one line
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
import structlog

logger = structlog.get_logger()

PROXY_NOTE = "region errors are vertex-space proxies (upper ≈ brows/eyes, lower ≈ mouth/jaw)"
MAGNITUDE_NOTE = "correlation scores use offset magnitudes ‖·‖, not per-axis offsets"


def header_lines(config: Optional[Dict[str, Any]] = None, checkpoint_hash: Optional[str] = None) -> List[str]:
    lines = [PROXY_NOTE, MAGNITUDE_NOTE]
    if checkpoint_hash:
        lines.append(f"checkpoint manifest sha256: {checkpoint_hash}")
    if config is not None:
        lines.append("config: " + json.dumps(config, sort_keys=True, default=str))
    return [f"# {line}" for line in lines]


def format_table(df: pd.DataFrame, float_digits: int = 6) -> str:
    return df.to_string(index=False, float_format=lambda x: f"{x:.{float_digits}f}")


def write_report(
    df: pd.DataFrame,
    out_dir: Path,
    name: str,
    config: Optional[Dict[str, Any]] = None,
    checkpoint_hash: Optional[str] = None,
) -> tuple[Path, Path]:
    """Write <name>.csv and <name>.txt under out_dir; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = "\n".join(header_lines(config, checkpoint_hash)) + "\n"

    csv_path = out_dir / f"{name}.csv"
    with open(csv_path, "w", newline="") as f:
        f.write(header)
        df.to_csv(f, index=False, float_format="%.9g")

    txt_path = out_dir / f"{name}.txt"
    txt_path.write_text(header + "\n" + format_table(df) + "\n")

    logger.info("report_written", name=name, rows=len(df), csv=str(csv_path))
    return csv_path, txt_path


def read_report(path: Path) -> pd.DataFrame:
    """Read back a report CSV, skipping the header block."""
    return pd.read_csv(path, comment="#", keep_default_na=False)
