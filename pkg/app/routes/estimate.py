"""
Estimate Command
"""
from argparse import Namespace, _SubParsersAction

from loguru import logger

from app.config.settings import Settings
from app.exceptions import DataValidationError
from app.routes.inputs import load_frame
from app.service_managers.estimation_service import estimator
from app.service_managers.pipeline_service import pipeline
from app.service_managers.report_service import reporter


def register(subparsers: _SubParsersAction, parent) -> None:
    parser = subparsers.add_parser(
        "estimate", parents=[parent], help="Pool ESTIMANDS over the completed datasets"
    )
    parser.set_defaults(handler=cmd_estimate)


def cmd_estimate(settings: Settings, args: Namespace) -> int:
    """
    Pooled estimates from the output of `impute`.

    Weights follow the method recorded in report.json, so fabricated-weight
    runs are estimated with fabricated weights.
    """
    if not settings.ESTIMANDS:
        raise DataValidationError("Configuration lists no ESTIMANDS")
    frame = load_frame(settings)
    run = reporter.read_run_report(settings.OUTPUT_DIR)
    datasets = reporter.read_imputation(settings.OUTPUT_DIR, frame)
    logger.info(f"Pooling {len(settings.ESTIMANDS)} estimands over {len(datasets)} datasets")

    pooled = estimator.pool(datasets, pipeline.weights_for(run.method), settings.ESTIMANDS)
    reporter.write_estimates(
        estimator.estimate_rows(pooled, settings.ESTIMANDS), settings.OUTPUT_DIR
    )
    return 0
