import logging
import os
from datetime import datetime

LOG_FORMAT = "[ %(asctime)s ] %(lineno)d %(name)s - %(levelname)s - %(message)s"


def configure_logging(logs_dir: str | None = None, *, level: int = logging.INFO) -> str:
    """Send records to a timestamped file under logs/ and return its path."""
    logs_path = logs_dir or os.path.join(os.getcwd(), "logs")
    os.makedirs(logs_path, exist_ok=True)
    log_file_path = os.path.join(logs_path, f"{datetime.now().strftime('%m_%d_%Y_%H_%M_%S')}.log")

    logging.basicConfig(filename=log_file_path, format=LOG_FORMAT, level=level)
    return log_file_path
