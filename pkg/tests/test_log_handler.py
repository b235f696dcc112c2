#!/usr/bin/env python
# -*- coding: utf-8 -*-

import logging

from utils.log_handler import LOG_FILE_NAME, ProgressReporter, TqdmLogHandler, setup_logging


class TestLogging:
    def test_file_handler(self, tmp_path):
        setup_logging(str(tmp_path), "DEBUG")
        logging.getLogger("Test").info("写入日志文件")
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert "写入日志文件" in (tmp_path / LOG_FILE_NAME).read_text(encoding="utf-8")
        setup_logging()

    def test_console_handler_replaces_previous(self):
        setup_logging()
        setup_logging()
        handlers = logging.getLogger().handlers
        assert len(handlers) == 1 and isinstance(handlers[0], TqdmLogHandler)

    def test_progress_reporter_is_monotone(self):
        with ProgressReporter("测试", disable=True) as progress:
            progress(40, "一半")
            progress(20)
            progress(150)
            assert progress.last == 100
