"""
Report Command
"""
from argparse import Namespace, _SubParsersAction

from app.config.settings import Settings
from app.constants.constants import METRICS_FILE
from app.service_managers.report_service import reporter
from app.service_managers.simulation_service import simulator
from app.storage.csv_operations import csv_ops


def register(subparsers: _SubParsersAction, parent) -> None:
    parser = subparsers.add_parser(
        "report", parents=[parent], help="Metrics table and charts from a finished study"
    )
    parser.set_defaults(handler=cmd_report)


def cmd_report(settings: Settings, args: Namespace) -> int:
    """Recompute metrics.csv from replicates.csv, then draw rrmse.svg and coverage.svg"""
    replicates = reporter.read_replicates(settings.OUTPUT_DIR)
    if args.method is not None:
        replicates = replicates[replicates["method"] == args.method.value]
    metrics = simulator.metrics_table(replicates)
    csv_ops.write_table(metrics, settings.OUTPUT_DIR / METRICS_FILE)
    reporter.write_charts(metrics, settings.OUTPUT_DIR)
    return 0
