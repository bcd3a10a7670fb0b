import hashlib
import logging
import math
from typing import Tuple, Union

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger(__name__)


def configure_logging(level: Union[str, int] = "WARNING") -> None:
    """Route log records to stderr so report output on stdout stays clean."""
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def parse_weights(text: str, count: int) -> Tuple[float, ...]:
    """
    Parse comma-separated weights such as ``"0.25,0.25,0.2,0.15,0.15"``.

    :param text: Comma-separated numbers
    :param count: Number of weights expected
    :return: Tuple of floats
    :raises ValueError: If the count is wrong or a value is not a finite number
    """
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if len(parts) != count:
        raise ValueError(
            f"Expected {count} comma-separated weights, got {len(parts)}"
        )
    values = tuple(float(p) for p in parts)
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"Weights must be finite numbers: {text}")
    logger.debug("Parsed weights %s", values)
    return values
