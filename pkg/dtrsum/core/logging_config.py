import json
import logging
import sys
from datetime import datetime, timezone


class JSONFormatter(logging.Formatter):
    """
    formatter that outputs JSON strings after parsing the log record.
    """

    def format(self, record):
        logobj = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "name": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
        }

        if hasattr(record, "run_id"):
            logobj["run_id"] = record.run_id

        if record.exc_info:
            logobj["exception"] = self.formatException(record.exc_info)

        return json.dumps(logobj)


class RunIdFilter(logging.Filter):
    """stamps every record with the id of the current command invocation."""

    def __init__(self, run_id: str):
        super().__init__()
        self.run_id = run_id

    def filter(self, record):
        record.run_id = self.run_id
        return True


def setup_logging(log_level="INFO", log_format="json", run_id=None):
    """configure logging for the command line."""

    # convert string log level to numeric value
    numeric_level = getattr(logging, str(log_level).upper(), None)
    if not isinstance(numeric_level, int):
        numeric_level = logging.INFO

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)

    # remove existing handlers
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    # stderr keeps stdout free for command results
    handler = logging.StreamHandler(sys.stderr)
    if log_format == "plain":
        handler.setFormatter(logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s"))
    else:
        handler.setFormatter(JSONFormatter())
    if run_id is not None:
        handler.addFilter(RunIdFilter(run_id))
    root_logger.addHandler(handler)

    logging.getLogger("matplotlib").setLevel(logging.WARNING)

    return root_logger
