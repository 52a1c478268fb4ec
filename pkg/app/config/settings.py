"""
Application Settings and Configuration
"""
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Type

from pydantic import Field, field_validator, model_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from app.constants.messages import ERROR_MESSAGES
from app.exceptions import DataParseError
from app.schemas.estimation import Estimand
from app.schemas.frame import IngestionOptions, VariableSpec
from app.schemas.imputation import ItemImputationSpec, MarginImputationConfig
from app.schemas.simulation import NonresponseConfig, PopulationConfig, StudyConfig
from app.utils import default_threads

DEFAULT_CONFIG_FILE = "mdam.toml"


class Settings(BaseSettings):
    """
    Run settings.

    Priority: init kwargs (command-line flags), MDAM_* environment
    variables, .env, then the TOML run configuration.
    """

    # Application
    PROJECT_NAME: str = "margin-imputation"
    VERSION: str = "1.0.0"
    LOG_LEVEL: str = "INFO"

    # Run
    SEED: int = 20240601
    THREADS: Optional[int] = Field(None, ge=1)  # Default: available parallelism
    OUTPUT_DIR: Path = Path("output")

    # Survey data
    SAMPLE_PATH: Optional[Path] = None
    MARGINS_PATH: Optional[Path] = None
    MARGIN_SHARES: Dict[str, List[float]] = {}  # Alternative to MARGINS_PATH
    POPULATION_SIZE: Optional[int] = Field(None, gt=0)
    SCHEMA: List[VariableSpec] = []
    DESIGN_COLUMNS: List[str] = []

    # Imputation
    IMPUTATION: ItemImputationSpec = ItemImputationSpec()
    MARGINS: MarginImputationConfig = MarginImputationConfig()
    ESTIMANDS: List[Estimand] = []

    # Simulation
    POPULATION: PopulationConfig = PopulationConfig()
    NONRESPONSE: NonresponseConfig = NonresponseConfig()
    STUDY: StudyConfig = StudyConfig()

    model_config = SettingsConfigDict(
        env_prefix="MDAM_",
        env_nested_delimiter="__",
        env_file=".env",
        extra="ignore",
        toml_file=DEFAULT_CONFIG_FILE,
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (
            init_settings,
            env_settings,
            dotenv_settings,
            TomlConfigSettingsSource(settings_cls),
        )

    @field_validator("SCHEMA")
    def validate_schema(cls, v):
        names = [spec.name for spec in v]
        if len(set(names)) != len(names):
            raise ValueError("SCHEMA lists a variable twice")
        return v

    @model_validator(mode="after")
    def validate_references(self):
        """Estimands and margin shares must match the schema; study margins must be binary"""
        if self.SCHEMA:
            for estimand in self.ESTIMANDS:
                estimand.check_against(self.SCHEMA)
            margined = {spec.name for spec in self.SCHEMA if spec.in_margins}
            unknown = set(self.MARGIN_SHARES) - margined
            if unknown:
                raise ValueError(f"MARGIN_SHARES for unmargined variables {sorted(unknown)}")
        not_binary = set(self.STUDY.margined) - set(self.POPULATION.binary)
        if not_binary:
            raise ValueError(f"STUDY.margined must be binary variables, got {sorted(not_binary)}")
        return self

    @property
    def threads(self) -> int:
        return self.THREADS or default_threads()

    def ingestion_options(self) -> IngestionOptions:
        return IngestionOptions(
            population_size=self.POPULATION_SIZE, design_columns=self.DESIGN_COLUMNS
        )


def load_settings(config_path: Optional[Path] = None, **overrides) -> Settings:
    """
    Settings for one run: the given TOML file (default mdam.toml when it
    exists) with overrides on top. None overrides are ignored.
    """
    if config_path is not None and not Path(config_path).is_file():
        raise DataParseError(ERROR_MESSAGES["FILE_NOT_FOUND"].format(path=config_path))

    class RunSettings(Settings):
        model_config = SettingsConfigDict(toml_file=config_path or DEFAULT_CONFIG_FILE)

    return RunSettings(**{k: v for k, v in overrides.items() if v is not None})


# Global settings instance
settings = Settings()
