import argparse
import json
import logging
from pathlib import Path
from typing import Optional

import pytest

from commands.check.main import (
    check_transcript,
    default_knowledge,
    default_secrets,
    load_transcript_terms,
    main,
    main_wrapper,
    render_results,
)
from commands.run.file_helpers import TRANSCRIPT_LOG
from commands.run.help_classes.config_classes import SECRET_KINDS, ScenarioConfig
from commands.run.main import run_scenario
from commands.run.report import EXIT_OK, EXIT_UNEXPECTED, ReportFormat
from shared.knowledge.terms import atom_kind
from tests.conftest_utils.run_configs import get_single_slave_config

S1 = "SLAVE:s1"


@pytest.fixture()
def transcript_path(logger: logging.Logger, tmp_path: Path) -> Path:
    config = ScenarioConfig.from_text(get_single_slave_config("direct", "symmetric"))
    run_scenario(logger, config, tmp_path)
    return tmp_path / TRANSCRIPT_LOG


def check_args(
    transcript: Path,
    knows: Optional[str] = None,
    secrets: Optional[str] = None,
    report_format: str = "text",
) -> argparse.Namespace:
    return argparse.Namespace(
        transcript=str(transcript),
        knows=knows,
        secrets=secrets,
        format=report_format,
        silent=True,
    )


def test_saved_transcript_keeps_secrets(logger: logging.Logger, transcript_path: Path):
    results = check_transcript(logger, transcript_path, [], SECRET_KINDS)
    checked = {result.secret.label for result in results}

    assert {f"NONCE_S[{S1}]", f"RND_S[{S1}]", f"SESSION_KEY[{S1}]"} <= checked
    assert "APARAM[EMPLOYEE:alice]" in checked
    assert not any(result.derivable for result in results)


def test_defaults_split_public_and_secret_atoms(
    logger: logging.Logger, transcript_path: Path
):
    terms = load_transcript_terms(logger, transcript_path)
    known = default_knowledge(terms)
    secrets = default_secrets(terms, ["NONCE_S"])

    assert known
    assert {atom_kind(atom) for atom in known} <= {"K_pub", "ID", "CD", "dh"}
    assert [secret.label for secret in secrets] == [f"NONCE_S[{S1}]"]


def test_granted_rnd_s_leaks_the_session_key(
    logger: logging.Logger, transcript_path: Path
):
    results = check_transcript(
        logger, transcript_path, [f"RND_S[{S1}]"], ["SESSION_KEY"]
    )
    (result,) = results

    assert result.derivable
    rendered = render_results(transcript_path, results, ReportFormat.TEXT)
    assert f"Derivation of SESSION_KEY[{S1}]:" in rendered
    assert rendered.endswith(f"Leaked: SESSION_KEY[{S1}]")


def test_main_exit_codes(transcript_path: Path, capsys: pytest.CaptureFixture):
    with pytest.raises(SystemExit) as clean:
        main(transcript_path, [], SECRET_KINDS, ReportFormat.STRUCTURED)
    assert clean.value.code == EXIT_OK
    assert json.loads(capsys.readouterr().out)["leaked"] == []

    with pytest.raises(SystemExit) as leaked:
        main(transcript_path, [f"RND_S[{S1}]"], SECRET_KINDS, ReportFormat.STRUCTURED)
    assert leaked.value.code == EXIT_UNEXPECTED
    assert f"SESSION_KEY[{S1}]" in json.loads(capsys.readouterr().out)["leaked"]


@pytest.mark.parametrize(
    "knows,secrets",
    [
        (None, "APARAM,PIN"),
        ("senc(a,", None),
    ],
)
def test_main_wrapper_rejects_bad_arguments(
    transcript_path: Path, knows: Optional[str], secrets: Optional[str]
):
    with pytest.raises(SystemExit) as exit_info:
        main_wrapper(check_args(transcript_path, knows, secrets))
    assert exit_info.value.code == 1


def test_main_wrapper_rejects_broken_transcripts(tmp_path: Path):
    missing = tmp_path / "missing.log"
    with pytest.raises(SystemExit) as missing_exit:
        main_wrapper(check_args(missing))
    assert missing_exit.value.code == 1

    broken = tmp_path / "broken.log"
    broken.write_text('{"term": "NONCE_S[SLAVE:s1]"}\nnot json\n')
    with pytest.raises(SystemExit) as broken_exit:
        main_wrapper(check_args(broken))
    assert broken_exit.value.code == 1
