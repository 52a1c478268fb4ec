"""
Simulate Command
"""
from argparse import Namespace, _SubParsersAction

from loguru import logger

from app.config.settings import Settings
from app.constants.messages import SUCCESS_MESSAGES
from app.service_managers.report_service import reporter
from app.service_managers.simulation_service import simulator


def register(subparsers: _SubParsersAction, parent) -> None:
    parser = subparsers.add_parser(
        "simulate", parents=[parent], help="Run the replicate study on a synthetic population"
    )
    parser.set_defaults(handler=cmd_simulate)


def cmd_simulate(settings: Settings, args: Namespace) -> int:
    """
    Replicate study.

    --method narrows STUDY.methods to one method. Writes replicates.csv,
    metrics.csv and study.json; thread count is not echoed so outputs
    match across degrees of parallelism.
    """
    study = settings.STUDY
    if args.method is not None:
        study = study.model_copy(update={"methods": [args.method]})
    result = simulator.run_study(
        study,
        settings.POPULATION,
        settings.NONRESPONSE,
        settings.IMPUTATION,
        settings.MARGINS,
        settings.SEED,
        settings.threads,
        settings.ESTIMANDS or None,
    )
    summary = {
        "project": settings.PROJECT_NAME,
        "version": settings.VERSION,
        "seed": settings.SEED,
        "study": study.model_dump(mode="json"),
        "population": settings.POPULATION.model_dump(mode="json"),
        "nonresponse": settings.NONRESPONSE.model_dump(mode="json"),
        "imputation": settings.IMPUTATION.model_dump(mode="json"),
        "margins": settings.MARGINS.model_dump(mode="json"),
        "estimands": [e.model_dump(mode="json") for e in result.estimands],
        "failures": [{"replicate": r, "error": e} for r, e in result.failures],
    }
    reporter.write_study(result.replicates, result.metrics, summary, settings.OUTPUT_DIR)
    logger.info(
        SUCCESS_MESSAGES["STUDY_COMPLETED"].format(
            replicates=study.replicates, failed=len(result.failures)
        )
    )
    return 0
