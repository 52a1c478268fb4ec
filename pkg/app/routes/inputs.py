"""
Input loading shared by the survey-data commands
"""
from typing import Optional

from app.config.settings import Settings
from app.exceptions import DataValidationError
from app.models.frame import SampleFrame
from app.schemas.frame import AuxiliaryMargins
from app.storage.csv_operations import csv_ops


def load_frame(settings: Settings) -> SampleFrame:
    """Sample CSV named by SAMPLE_PATH, read with SCHEMA"""
    missing = [
        name
        for name, value in [
            ("SAMPLE_PATH", settings.SAMPLE_PATH),
            ("POPULATION_SIZE", settings.POPULATION_SIZE),
            ("SCHEMA", settings.SCHEMA),
        ]
        if not value
    ]
    if missing:
        raise DataValidationError(f"Configuration needs {', '.join(missing)}")
    return csv_ops.load_sample(
        settings.SAMPLE_PATH, settings.SCHEMA, settings.ingestion_options()
    )


def load_margins(settings: Settings, frame: SampleFrame) -> Optional[AuxiliaryMargins]:
    """Margins from MARGINS_PATH, else from MARGIN_SHARES; None when neither is set"""
    if settings.MARGINS_PATH is not None:
        return csv_ops.load_margins(settings.MARGINS_PATH, frame.population_size)
    if settings.MARGIN_SHARES:
        return AuxiliaryMargins.from_shares(frame.population_size, settings.MARGIN_SHARES)
    return None
