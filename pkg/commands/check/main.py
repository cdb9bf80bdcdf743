import argparse
import json
import logging
import sys
from logging import Logger
from pathlib import Path
from typing import Dict, List, Optional

from commands.run.help_classes.config_classes import SECRET_KINDS, parse_list
from commands.run.report import EXIT_OK, EXIT_UNEXPECTED, ReportFormat
from shared.constants import MAX_STR_LEN
from shared.file import check_valid_file, read_json_lines
from shared.knowledge.closure import SecrecyResult, check_secrecy
from shared.knowledge.terms import Atom, Term, atom_kind, atoms_of, parse_term
from shared.util import prettify_rows, truncate_string

logger = logging.getLogger(__name__)

# atom kinds anyone on the plant network can be assumed to know
PUBLIC_KINDS = ["K_pub", "ID", "CD", "dh"]


def main(
    transcript_path: Path,
    knows: List[str],
    secrets: List[str],
    report_format: ReportFormat,
):
    results = check_transcript(logger, transcript_path, knows, secrets)
    print(render_results(transcript_path, results, report_format))
    leaked = [result for result in results if result.derivable]
    sys.exit(EXIT_UNEXPECTED if leaked else EXIT_OK)


def load_transcript_terms(logger: Logger, transcript_path: Path) -> List[Term]:
    terms: List[Term] = []
    for line_nbr, event in enumerate(read_json_lines(transcript_path), start=1):
        text = event.get("term")
        if not text:
            logger.debug(f"Event {line_nbr} carries no term, skipping")
            continue
        terms.append(parse_term(str(text)))
    logger.info(f"Read {len(terms)} terms from {transcript_path}")
    return terms


def default_knowledge(terms: List[Term]) -> List[Term]:
    return sorted(
        (atom for atom in atoms_of(terms) if atom_kind(atom) in PUBLIC_KINDS),
        key=str,
    )


def default_secrets(terms: List[Term], kinds: Optional[List[str]] = None) -> List[Atom]:
    kinds = kinds or SECRET_KINDS
    return sorted(
        (atom for atom in atoms_of(terms) if atom_kind(atom) in kinds),
        key=str,
    )


def check_transcript(
    logger: Logger,
    transcript_path: Path,
    knows: List[str],
    secret_kinds: List[str],
) -> List[SecrecyResult]:
    terms = load_transcript_terms(logger, transcript_path)
    initial = default_knowledge(terms) + [parse_term(label) for label in knows]
    secrets = default_secrets(terms, secret_kinds)
    if not secrets:
        logger.warning(f"No secret atoms found in {transcript_path}")
    logger.info(
        f"Checking {len(secrets)} secrets against {len(initial)} known terms"
    )
    return check_secrecy(terms, initial, secrets)


def render_results(
    transcript_path: Path, results: List[SecrecyResult], report_format: ReportFormat
) -> str:
    leaked = [result.secret.label for result in results if result.derivable]
    if report_format == ReportFormat.STRUCTURED:
        summary: Dict[str, object] = {
            "transcript": str(transcript_path),
            "secrecy": [result.to_dict() for result in results],
            "leaked": leaked,
            "exit_code": EXIT_UNEXPECTED if leaked else EXIT_OK,
        }
        return json.dumps(summary, indent=2)

    rows: List[List[object]] = [["secret", "derivable"]]
    rows.extend([result.secret.label, result.derivable] for result in results)
    lines = [f"Transcript: {transcript_path}", ""]
    lines.extend(prettify_rows(rows))
    for result in results:
        if result.path:
            lines.append(f"Derivation of {result.secret.label}:")
            lines.extend(
                f"    {truncate_string(str(step), MAX_STR_LEN)}" for step in result.path
            )
    lines.append(f"Leaked: {', '.join(leaked) or 'none'}")
    return "\n".join(lines)


def main_wrapper(args: argparse.Namespace):
    if args.silent:
        logger.setLevel(logging.WARNING)

    transcript_path = Path(args.transcript)
    if not transcript_path.exists() or not check_valid_file(transcript_path):
        logger.error(f"Could not read transcript {transcript_path}")
        sys.exit(1)

    knows = parse_list(args.knows)
    secrets = parse_list(args.secrets) or list(SECRET_KINDS)
    unknown = [kind for kind in secrets if kind not in SECRET_KINDS]
    if unknown:
        logger.error(
            f"Unknown secret kinds: {', '.join(unknown)}, valid are: {', '.join(SECRET_KINDS)}"
        )
        sys.exit(1)

    try:
        main(transcript_path, knows, secrets, ReportFormat(args.format))
    except ValueError as err:
        logger.error(str(err))
        sys.exit(1)


def add_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("transcript", help="transcript.log written by the run command")
    parser.add_argument(
        "--knows",
        help="Comma separated atoms granted to the adversary on top of every public key, identity, CD and DH parameter in the transcript (e.g. 'RND_S[SLAVE:s1]')",
    )
    parser.add_argument(
        "--secrets",
        help=f"Comma separated secret kinds to check. Defaults to all of: {', '.join(SECRET_KINDS)}",
    )
    parser.add_argument(
        "--format",
        choices=[member.value for member in ReportFormat],
        default=ReportFormat.TEXT.value,
        help="Report format, structured is JSON",
    )
    parser.add_argument(
        "--silent", action="store_true", help="Only print the secrecy report"
    )


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    add_arguments(parser)
    args = parser.parse_args()
    main_wrapper(args)
