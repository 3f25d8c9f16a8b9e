# -*- coding: utf-8 -*-
import logging

import pytest

from src.logger import RunLogger, SentenceLedger


@pytest.fixture
def run_log(tmp_path):
    logger = RunLogger()
    yield logger
    logger.close()


def test_setup_names_file_after_command(run_log, tmp_path):
    path = run_log.setup(log_dir=tmp_path, command="translate")
    assert path.parent == tmp_path
    assert path.name.startswith("sdatt_translate_") and path.suffix == ".log"


def test_records_reach_file_and_summary(run_log, tmp_path):
    path = run_log.setup(log_dir=tmp_path, command="translate")
    logging.getLogger("sdatt.test").info("hello from a test")
    run_log.log_sentence_status(0, "translated")
    run_log.log_sentence_status(2, "failed", "scores overflowed")
    run_log.log_sentence_status(1, "skipped")
    run_log.write_summary()

    text = path.read_text(encoding="utf-8")
    assert "hello from a test" in text
    assert "RUN SUMMARY (translate)" in text
    assert "TRANSLATED SENTENCES: 1" in text
    assert "✗ line 3: scores overflowed" in text
    assert "⚠ line 2: No reason given" in text


def test_summary_without_events(run_log, tmp_path):
    path = run_log.setup(log_dir=tmp_path, command="eval")
    run_log.write_summary()
    assert "No sentence-level events recorded." in path.read_text(encoding="utf-8")


def test_close_detaches_handler(run_log, tmp_path):
    run_log.setup(log_dir=tmp_path, command="mask")
    handler = run_log._handler
    run_log.close()
    assert handler not in logging.getLogger().handlers
    run_log.close()


def test_ledger_reset_and_unknown_status():
    ledger = SentenceLedger()
    ledger.record(0, "translated")
    assert not ledger.is_empty()
    ledger.clear()
    assert ledger.is_empty()
    with pytest.raises(ValueError):
        ledger.record(0, "lost")
