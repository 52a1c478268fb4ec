"""
Report Service Manager - run artifacts, study tables and charts
"""
import json
from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from loguru import logger  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from app.constants.constants import (  # noqa: E402
    COMPLETED_FILE_TEMPLATE,
    CONFIDENCE_LEVEL,
    COVERAGE_PLOT_FILE,
    ESTIMATES_FILE,
    METRICS_FILE,
    REPLICATES_FILE,
    REPORT_FILE,
    RRMSE_PLOT_FILE,
    STUDY_FILE,
    UTF8,
)
from app.constants.messages import ERROR_MESSAGES, SUCCESS_MESSAGES  # noqa: E402
from app.exceptions import MissingArtifactError  # noqa: E402
from app.models.frame import CompletedDataset, SampleFrame  # noqa: E402
from app.schemas.imputation import RunReport  # noqa: E402
from app.storage.csv_operations import csv_ops  # noqa: E402

REFERENCE_GID = f"reference-{CONFIDENCE_LEVEL:g}"
SVG_STYLE = {"svg.fonttype": "none", "svg.hashsalt": "mdam"}


class ReportService:
    # ==================== IMPUTATION ARTIFACTS ====================

    def write_imputation(
        self, datasets: Sequence[CompletedDataset], report: RunReport, out: Path
    ) -> List[Path]:
        """completed_<l>.csv for every dataset, then report.json"""
        paths = [
            csv_ops.write_completed(
                dataset, out / COMPLETED_FILE_TEMPLATE.format(index=index)
            )
            for index, dataset in enumerate(datasets, 1)
        ]
        paths.append(report.write(out / REPORT_FILE))
        logger.info(
            SUCCESS_MESSAGES["IMPUTATION_COMPLETED"].format(count=len(datasets), path=out)
        )
        return paths

    def read_imputation(self, out: Path, frame: SampleFrame) -> List[CompletedDataset]:
        """Completed datasets listed by the run report in out"""
        report = self.read_run_report(out)
        datasets = []
        for index in range(1, report.imputations + 1):
            path = self._require(out / COMPLETED_FILE_TEMPLATE.format(index=index), "impute")
            datasets.append(csv_ops.read_completed(path, frame))
        return datasets

    def read_run_report(self, out: Path) -> RunReport:
        path = self._require(out / REPORT_FILE, "impute")
        return RunReport.model_validate_json(path.read_text(encoding=UTF8))

    def write_estimates(self, rows: List[dict], out: Path) -> Path:
        path = csv_ops.write_table(pd.DataFrame(rows), out / ESTIMATES_FILE)
        logger.info(SUCCESS_MESSAGES["ESTIMATES_WRITTEN"].format(path=path))
        return path

    # ==================== STUDY ARTIFACTS ====================

    def write_study(
        self,
        replicates: pd.DataFrame,
        metrics: pd.DataFrame,
        summary: Dict,
        out: Path,
    ) -> List[Path]:
        """replicates.csv, metrics.csv and study.json (configuration echo plus failures)"""
        out.mkdir(parents=True, exist_ok=True)
        paths = [
            csv_ops.write_table(replicates, out / REPLICATES_FILE),
            csv_ops.write_table(metrics, out / METRICS_FILE),
        ]
        study_path = out / STUDY_FILE
        study_path.write_text(json.dumps(summary, indent=2, default=str), encoding=UTF8)
        paths.append(study_path)
        return paths

    def read_replicates(self, out: Path) -> pd.DataFrame:
        path = self._require(out / REPLICATES_FILE, "simulate")
        return pd.read_csv(path, encoding=UTF8)

    # ==================== CHARTS ====================

    def rrmse_chart(self, metrics: pd.DataFrame) -> Figure:
        """Grouped bars: one series per method, one group per estimand"""
        estimands = list(dict.fromkeys(metrics["estimand"]))
        methods = list(dict.fromkeys(metrics["method"]))
        positions = np.arange(len(estimands))
        width = 0.8 / max(len(methods), 1)

        fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * len(estimands)), 4.0))
        for k, method in enumerate(methods):
            rows = metrics[metrics["method"] == method].set_index("estimand")
            heights = [
                self._metric(rows, name, "rrmse", fallback="rmse") for name in estimands
            ]
            ax.bar(positions + k * width, heights, width, label=method, gid=f"series-{method}")
        ax.set_xticks(positions + width * (len(methods) - 1) / 2)
        ax.set_xticklabels(estimands, rotation=45, ha="right")
        ax.set_ylabel("rRMSE")
        ax.legend(title="method")
        fig.tight_layout()
        return fig

    def coverage_chart(self, metrics: pd.DataFrame) -> Figure:
        """Dots per method and estimand with the nominal level as a reference line"""
        estimands = list(dict.fromkeys(metrics["estimand"]))
        methods = list(dict.fromkeys(metrics["method"]))
        positions = np.arange(len(estimands))

        fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * len(estimands)), 4.0))
        for k, method in enumerate(methods):
            rows = metrics[metrics["method"] == method].set_index("estimand")
            values = [self._metric(rows, name, "coverage") for name in estimands]
            offset = (k - (len(methods) - 1) / 2) * 0.1
            ax.plot(
                positions + offset, values, "o", label=method, gid=f"series-{method}"
            )
        ax.axhline(CONFIDENCE_LEVEL, color="grey", linestyle="--", gid=REFERENCE_GID)
        ax.set_xticks(positions)
        ax.set_xticklabels(estimands, rotation=45, ha="right")
        ax.set_ylim(0.0, 1.02)
        ax.set_ylabel("coverage")
        ax.legend(title="method")
        fig.tight_layout()
        return fig

    def write_charts(self, metrics: pd.DataFrame, out: Path) -> List[Path]:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        with matplotlib.rc_context(SVG_STYLE):
            for chart, name in [
                (self.rrmse_chart, RRMSE_PLOT_FILE),
                (self.coverage_chart, COVERAGE_PLOT_FILE),
            ]:
                fig = chart(metrics)
                path = out / name
                fig.savefig(path, format="svg", metadata={"Date": None})
                plt.close(fig)
                paths.append(path)
        logger.info(SUCCESS_MESSAGES["REPORT_WRITTEN"].format(path=out))
        return paths

    # ==================== HELPERS ====================

    def _metric(
        self, rows: pd.DataFrame, name: str, column: str, fallback: str = ""
    ) -> float:
        if name not in rows.index:
            return np.nan
        value = rows.at[name, column]
        if pd.isna(value) and fallback:
            value = rows.at[name, fallback]
        return float(value)

    def _require(self, path: Path, command: str) -> Path:
        if not path.is_file():
            raise MissingArtifactError(
                ERROR_MESSAGES["MISSING_ARTIFACT"].format(path=path, command=command)
            )
        return path


# Global instance
reporter = ReportService()
