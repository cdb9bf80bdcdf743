from logging import Logger
from pathlib import Path
from typing import Dict

from commands.run.report import ReportFormat, RunReport
from commands.run.scenario import Scenario

TRANSCRIPT_LOG = "transcript.log"
BOOTSTRAP_LOG = "bootstrap.log"
AUDIT_LOG = "audit.log"
REPORT_NAMES = {ReportFormat.TEXT: "report.txt", ReportFormat.STRUCTURED: "report.json"}


def setup_out_dir(logger: Logger, out_dir: Path):
    if out_dir.exists() and not out_dir.is_dir():
        raise NotADirectoryError(f"{out_dir} exists and is not a directory")
    if out_dir.exists() and any(
        (out_dir / name).exists() for name in (TRANSCRIPT_LOG, AUDIT_LOG)
    ):
        logger.warning(f"{out_dir} holds artifacts of an earlier run, overwriting")
    out_dir.mkdir(parents=True, exist_ok=True)


def write_artifacts(
    logger: Logger,
    scenario: Scenario,
    report: RunReport,
    out_dir: Path,
    report_format: ReportFormat,
) -> Dict[str, Path]:
    setup_out_dir(logger, out_dir)
    written = {
        TRANSCRIPT_LOG: out_dir / TRANSCRIPT_LOG,
        AUDIT_LOG: out_dir / AUDIT_LOG,
        "report": out_dir / REPORT_NAMES[report_format],
    }
    scenario.bus.write(written[TRANSCRIPT_LOG])
    scenario.audit.write(written[AUDIT_LOG])
    if scenario.bootstrap_bus.transcript:
        written[BOOTSTRAP_LOG] = out_dir / BOOTSTRAP_LOG
        scenario.bootstrap_bus.write(written[BOOTSTRAP_LOG])
    written["report"].write_text(report.render(report_format) + "\n")

    logger.info(f"Artifacts written to {out_dir}")
    return written
