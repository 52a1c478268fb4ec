"""
Impute Command
"""
from argparse import Namespace, _SubParsersAction

from loguru import logger

from app.config.settings import Settings
from app.middleware.logging import log_stage
from app.routes.inputs import load_frame, load_margins
from app.service_managers.pipeline_service import pipeline
from app.service_managers.report_service import reporter


def register(subparsers: _SubParsersAction, parent) -> None:
    parser = subparsers.add_parser(
        "impute", parents=[parent], help="Write L completed datasets and a run report"
    )
    parser.set_defaults(handler=cmd_impute)


def cmd_impute(settings: Settings, args: Namespace) -> int:
    """
    Complete a survey sample.

    1. Load and validate the sample and its margins
    2. Chained equations for item nonresponse
    3. Margin imputation, then hot deck, for unit nonrespondents
    4. Write completed_<l>.csv and report.json
    """
    frame = load_frame(settings)
    margins = load_margins(settings, frame)
    logger.info(
        f"Imputing {frame.n_units} units with method '{settings.MARGINS.method.value}', "
        f"seed {settings.SEED}"
    )
    with log_stage("impute"):
        datasets, report = pipeline.run_imputation(
            frame,
            margins,
            settings.IMPUTATION,
            settings.MARGINS,
            settings.SEED,
            settings.threads,
            settings.PROJECT_NAME,
            settings.VERSION,
        )
    reporter.write_imputation(datasets, report, settings.OUTPUT_DIR)
    return 0
