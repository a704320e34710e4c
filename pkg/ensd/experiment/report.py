from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import pandas as pd

from ensd.metrics.wer import WER_DECIMALS

REPORT_COLUMNS = ["split", "model", "wer", "accuracy", "weighted_wer"]
METRICS_CSV = "metrics.csv"
METRICS_JSON = "metrics.json"
IMPROVEMENTS_CSV = "relative_improvements.csv"


@dataclass(frozen=True)
class ReportRow:
    split: str
    model: str
    wer: Optional[float] = None
    accuracy: Optional[float] = None
    weighted_wer: Optional[float] = None


@dataclass
class MetricsReport:
    rows: list[ReportRow] = field(default_factory=list)
    policies: list[str] = field(default_factory=list)
    seeds: dict[str, int] = field(default_factory=dict)
    config_hash: str = ""

    def add(self, split: str, model: str, **metrics: Optional[float]) -> None:
        self.rows.append(ReportRow(split, model, **metrics))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.rows], columns=REPORT_COLUMNS)

    def get(self, split: str, model: str) -> ReportRow:
        for row in self.rows:
            if row.split == split and row.model == model:
                return row
        raise KeyError((split, model))

    def write(self, out_dir: Union[str, Path]) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / METRICS_CSV
        json_path = out_dir / METRICS_JSON
        self.to_frame().to_csv(csv_path, index=False, float_format=f"%.{WER_DECIMALS}f", lineterminator="\n")
        with open(json_path, "w", encoding="utf-8", newline="\n") as f:
            json.dump({
                "config_hash": self.config_hash,
                "policies": self.policies,
                "seeds": self.seeds,
                "rows": [asdict(r) for r in self.rows],
            }, f, indent=2, sort_keys=True)
        return csv_path, json_path

    @classmethod
    def load(cls, json_path: Union[str, Path]) -> MetricsReport:
        with open(json_path, encoding="utf-8") as f:
            data = json.load(f)
        return cls([ReportRow(**r) for r in data["rows"]], data["policies"], data["seeds"], data["config_hash"])


def relative_improvements(report: MetricsReport, target: str, splits: Optional[list[str]] = None) -> pd.DataFrame:
    """(wer_baseline - wer_target) / wer_baseline for every other model on each split."""
    frame = report.to_frame().dropna(subset=["wer"])
    if splits is not None:
        frame = frame[frame["split"].isin(splits)]
    table = frame.pivot(index="split", columns="model", values="wer")
    if target not in table.columns:
        return pd.DataFrame(columns=["split", "baseline", "baseline_wer", "target_wer", "relative_improvement"])

    rows = []
    for split, wers in table.iterrows():
        for baseline, baseline_wer in wers.items():
            if baseline == target or pd.isna(baseline_wer) or pd.isna(wers[target]) or baseline_wer == 0:
                continue
            rows.append({
                "split": split,
                "baseline": baseline,
                "baseline_wer": baseline_wer,
                "target_wer": wers[target],
                "relative_improvement": (baseline_wer - wers[target]) / baseline_wer,
            })
    return pd.DataFrame(rows, columns=["split", "baseline", "baseline_wer", "target_wer", "relative_improvement"])


def write_improvements(frame: pd.DataFrame, out_dir: Union[str, Path]) -> Path:
    path = Path(out_dir) / IMPROVEMENTS_CSV
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=f"%.{WER_DECIMALS}f", lineterminator="\n")
    return path
