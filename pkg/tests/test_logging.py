import logging

from src.utils.logging_config import setup_logging


def test_repeated_setup_does_not_duplicate_handlers(tmp_path):
    log_file = tmp_path / 'run.log'
    setup_logging('DEBUG', str(log_file))
    setup_logging('INFO', str(log_file))
    root = logging.getLogger()
    try:
        assert len(root.handlers) == 2
        assert root.level == logging.INFO
        logging.getLogger('src.training.trainer').info('epoch 1 done')
        for handler in root.handlers:
            handler.flush()
        lines = log_file.read_text().splitlines()
        assert sum('epoch 1 done' in line for line in lines) == 1
        assert ' - src.training.trainer - INFO - epoch 1 done' in lines[-1]
        assert logging.getLogger('matplotlib').level == logging.WARNING
    finally:
        for handler in list(root.handlers):
            root.removeHandler(handler)
            handler.close()


def test_console_uses_stderr_and_resume_appends(tmp_path, capsys):
    log_file = tmp_path / 'run.log'
    log_file.write_text('earlier epochs\n')
    setup_logging('INFO', str(log_file), append=True)
    root = logging.getLogger()
    try:
        logging.getLogger('src.main').info('resumed')
        for handler in root.handlers:
            handler.flush()
        captured = capsys.readouterr()
        assert 'resumed' in captured.err and 'resumed' not in captured.out
        lines = log_file.read_text().splitlines()
        assert lines[0] == 'earlier epochs'
        assert lines[-1].endswith('resumed')
    finally:
        for handler in list(root.handlers):
            root.removeHandler(handler)
            handler.close()
