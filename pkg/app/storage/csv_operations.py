"""
CSV Operations Manager - sample frames, margins and completed datasets
"""
import csv
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger

from app.constants.constants import (
    PROVENANCE_SUFFIX,
    UNIT_NR_COLUMN,
    UTF8,
    WEIGHT_COLUMN,
)
from app.constants.enums import Provenance
from app.constants.messages import ERROR_MESSAGES
from app.exceptions import DataParseError, DataValidationError
from app.models.frame import CompletedDataset, SampleFrame, validate
from app.schemas.frame import (
    AuxiliaryMargins,
    IngestionOptions,
    VariableMargin,
    VariableSpec,
)

PathLike = Union[str, Path]


def format_number(value: float) -> str:
    """Shortest round-tripping text for a float, integers without '.0'"""
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


class CSVOperations:
    """File-level reads and writes; everything returned is validated"""

    # ==================== READ OPERATIONS ====================

    def load_sample(
        self,
        path: PathLike,
        schema: Sequence[VariableSpec],
        options: IngestionOptions,
    ) -> SampleFrame:
        """Read a sample CSV; an empty field is a missing value"""
        path = Path(path)
        table = self._read_table(path)
        required = [spec.name for spec in schema] + list(options.design_columns)
        required += [options.weight_column, options.unit_nr_column]
        self._require_columns(table, required, path)
        lines = np.arange(len(table)) + 2  # Header is line 1

        unit_nr = self._parse_unit_flags(table[options.unit_nr_column], lines)
        weights = self._parse_numbers(table[options.weight_column], options.weight_column, lines)
        nonpositive = np.flatnonzero(weights <= 0)
        if nonpositive.size:
            i = nonpositive[0]
            raise DataValidationError(
                ERROR_MESSAGES["NONPOSITIVE_WEIGHT"].format(line=lines[i], value=weights[i])
            )

        values = np.full((len(table), len(schema)), np.nan)
        for j, spec in enumerate(schema):
            values[:, j] = self._parse_variable(table[spec.name], spec, unit_nr, lines)

        design = np.column_stack(
            [self._parse_numbers(table[c], c, lines) for c in options.design_columns]
        ) if options.design_columns else None

        frame = SampleFrame.from_arrays(
            schema=schema,
            values=values,
            design_weights=weights,
            unit_nr=unit_nr,
            population_size=options.population_size,
            design=design,
            design_names=options.design_columns,
        )
        report = validate(frame)
        if not report.is_valid:
            raise DataValidationError(
                ERROR_MESSAGES["INVALID_FRAME"].format(
                    violations="; ".join(v.message for v in report.violations)
                )
            )
        logger.info(
            f"Loaded {frame.n_units} units ({int(unit_nr.sum())} unit nonrespondents) "
            f"from {path}"
        )
        return frame

    def load_margins(self, path: PathLike, population_size: int) -> AuxiliaryMargins:
        """Read a margins CSV with columns variable, level, total, variance"""
        path = Path(path)
        table = self._read_table(path)
        self._require_columns(table, ["variable", "level", "total", "variance"], path)
        lines = np.arange(len(table)) + 2
        levels = self._parse_numbers(table["level"], "level", lines)
        totals = self._parse_numbers(table["total"], "total", lines)
        variances = self._parse_numbers(table["variance"], "variance", lines, allow_empty=True)

        margins: Dict[str, VariableMargin] = {}
        for name, rows in table.groupby("variable", sort=False).indices.items():
            order = rows[np.argsort(levels[rows])]
            expected = np.arange(1, len(order) + 1)
            if not np.array_equal(levels[order], expected):
                raise DataValidationError(
                    f"Margins for '{name}' must list levels 1..{len(order)} exactly once"
                )
            margins[str(name)] = VariableMargin(
                totals=[float(t) for t in totals[order]],
                variances=[None if np.isnan(v) else float(v) for v in variances[order]],
            )
        logger.info(f"Loaded margins for {sorted(margins)} from {path}")
        return AuxiliaryMargins(population_size=population_size, margins=margins)

    def read_completed(self, path: PathLike, frame: SampleFrame) -> CompletedDataset:
        """Read a completed dataset written by write_completed"""
        path = Path(path)
        table = self._read_table(path)
        prov_columns = [name + PROVENANCE_SUFFIX for name in frame.names]
        self._require_columns(table, frame.names + prov_columns, path)
        if len(table) != frame.n_units:
            raise DataValidationError(
                f"{path} has {len(table)} rows but the sample has {frame.n_units}"
            )
        lines = np.arange(len(table)) + 2
        values = np.column_stack(
            [
                self._parse_variable(
                    table[spec.name], spec, np.zeros(len(table), dtype=bool), lines
                )
                for spec in frame.schema
            ]
        )
        provenance = np.column_stack(
            [
                [Provenance(token).code for token in table[column].str.strip()]
                for column in prov_columns
            ]
        )
        return CompletedDataset(frame=frame, values=values, provenance=provenance)

    # ==================== WRITE OPERATIONS ====================

    def write_sample(self, frame: SampleFrame, path: PathLike) -> Path:
        """Write a frame in the load_sample layout"""
        table = self._value_table(frame.schema, frame.values)
        self._append_design_columns(table, frame)
        return self._write(table, path)

    def write_completed(self, dataset: CompletedDataset, path: PathLike) -> Path:
        """Write values plus one provenance column per variable"""
        frame = dataset.frame
        table = self._value_table(frame.schema, dataset.values)
        for j, spec in enumerate(frame.schema):
            table[spec.name + PROVENANCE_SUFFIX] = [
                Provenance.from_code(code).value for code in dataset.provenance[:, j]
            ]
        self._append_design_columns(table, frame)
        return self._write(table, path)

    def write_margins(self, margins: AuxiliaryMargins, path: PathLike) -> Path:
        rows: List[Dict[str, str]] = []
        for name, margin in margins.margins.items():
            variances = margin.variances or [None] * len(margin.totals)
            for level, (total, variance) in enumerate(zip(margin.totals, variances), 1):
                rows.append(
                    {
                        "variable": name,
                        "level": str(level),
                        "total": format_number(total),
                        "variance": "" if variance is None else format_number(variance),
                    }
                )
        return self._write(pd.DataFrame(rows), path)

    def write_table(self, table: pd.DataFrame, path: PathLike) -> Path:
        return self._write(table, path)

    # ==================== HELPERS ====================

    def _read_table(self, path: Path) -> pd.DataFrame:
        if not path.is_file():
            raise DataParseError(ERROR_MESSAGES["FILE_NOT_FOUND"].format(path=path))
        self._check_arity(path)
        return pd.read_csv(path, dtype=str, keep_default_na=False, encoding=UTF8)

    def _check_arity(self, path: Path) -> None:
        """Every non-blank row must have as many fields as the header"""
        with path.open(newline="", encoding=UTF8) as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None:
                raise DataParseError(f"{path} is empty", line=1)
            for row in reader:
                if row and len(row) != len(header):
                    raise DataParseError(
                        ERROR_MESSAGES["WRONG_ARITY"].format(
                            line=reader.line_num, expected=len(header), seen=len(row)
                        ),
                        line=reader.line_num,
                    )

    def _require_columns(self, table: pd.DataFrame, columns: Sequence[str], path: Path):
        for column in columns:
            if column not in table.columns:
                raise DataParseError(
                    ERROR_MESSAGES["MISSING_COLUMN"].format(column=column, path=path)
                )

    def _parse_unit_flags(self, tokens: pd.Series, lines: np.ndarray) -> np.ndarray:
        tokens = tokens.str.strip()
        bad = np.flatnonzero(~tokens.isin(["0", "1"]).to_numpy())
        if bad.size:
            i = bad[0]
            raise DataParseError(
                ERROR_MESSAGES["BAD_UNIT_FLAG"].format(line=lines[i], value=tokens.iloc[i]),
                line=int(lines[i]),
            )
        return (tokens == "1").to_numpy()

    def _parse_numbers(
        self,
        tokens: pd.Series,
        column: str,
        lines: np.ndarray,
        allow_empty: bool = False,
    ) -> np.ndarray:
        tokens = tokens.str.strip()
        numbers = pd.to_numeric(tokens.replace("", np.nan), errors="coerce").to_numpy(
            dtype=float
        )
        bad = np.isnan(numbers) & ((tokens != "") | (not allow_empty)).to_numpy()
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DataParseError(
                ERROR_MESSAGES["BAD_NUMBER"].format(
                    line=lines[i], column=column, value=tokens.iloc[i]
                ),
                line=int(lines[i]),
            )
        return numbers

    def _parse_variable(
        self,
        tokens: pd.Series,
        spec: VariableSpec,
        unit_nr: np.ndarray,
        lines: np.ndarray,
    ) -> np.ndarray:
        tokens = tokens.str.strip()
        empty = (tokens == "").to_numpy()
        filled_nr = np.flatnonzero(unit_nr & ~empty)
        if filled_nr.size:
            raise DataValidationError(
                ERROR_MESSAGES["UNIT_NR_WITH_VALUES"].format(
                    line=lines[filled_nr[0]], variable=spec.name
                )
            )
        column = np.full(len(tokens), np.nan)
        for i in np.flatnonzero(~empty):
            token = tokens.iloc[i]
            try:
                value = spec.code_for(token)
            except ValueError:
                key = "UNKNOWN_LABEL" if spec.labels is not None else "BAD_NUMBER"
                raise DataParseError(
                    ERROR_MESSAGES[key].format(
                        line=lines[i], variable=spec.name, column=spec.name, value=token
                    ),
                    line=int(lines[i]),
                )
            if spec.is_categorical and not spec.in_support(np.array([value]))[0]:
                raise DataValidationError(
                    ERROR_MESSAGES["LEVEL_OUT_OF_RANGE"].format(
                        line=lines[i], variable=spec.name, value=token, levels=spec.levels
                    )
                )
            column[i] = value
        return column

    def _value_table(
        self, schema: Sequence[VariableSpec], values: np.ndarray
    ) -> pd.DataFrame:
        columns = {}
        for j, spec in enumerate(schema):
            columns[spec.name] = [self._format_cell(spec, v) for v in values[:, j]]
        return pd.DataFrame(columns)

    def _format_cell(self, spec: VariableSpec, value: float) -> str:
        if np.isnan(value):
            return ""
        if spec.is_categorical:
            code = int(round(value))
            return spec.labels[code - 1] if spec.labels is not None else str(code)
        return format_number(value)

    def _append_design_columns(self, table: pd.DataFrame, frame: SampleFrame) -> None:
        for k, name in enumerate(frame.design_names):
            table[name] = [format_number(v) for v in frame.design[:, k]]
        table[WEIGHT_COLUMN] = [format_number(w) for w in frame.design_weights]
        table[UNIT_NR_COLUMN] = ["1" if u else "0" for u in frame.unit_nr]

    def _write(self, table: pd.DataFrame, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, encoding=UTF8)
        return path


# Global instance
csv_ops = CSVOperations()
