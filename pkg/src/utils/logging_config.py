import logging
import sys

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
# Third-party loggers that flood DEBUG output while figures are saved.
NOISY_LOGGERS = ('matplotlib', 'PIL')


def setup_logging(level="INFO", log_file=None, append=False):
    """
    Configures the root logger for a denoiser run.

    Console records go to stderr; stdout carries only command results (manifest
    summaries, report tables), so it can be piped. Repeated calls replace the
    previous handlers.

    Args:
        level (str): The minimum logging level (e.g., 'INFO', 'DEBUG').
        log_file (str, optional): Path to the log file.
        append (bool): Keep an existing log file (resumed training) instead of truncating it.
    """
    logger = logging.getLogger()
    logger.setLevel(level.upper())

    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT)

    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setFormatter(formatter)
    logger.addHandler(stream_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file, mode='a' if append else 'w')
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(max(logger.level, logging.WARNING))

    logging.info(f"Logging configured with level {level.upper()}")
    if log_file:
        logging.info(f"Log file available at {log_file}" + (" (appending)" if append else ""))
