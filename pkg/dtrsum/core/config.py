import os
from dotenv import load_dotenv

load_dotenv()

LOG_LEVEL = os.getenv("DTRSUM_LOG_LEVEL", "INFO")
LOG_FORMAT = os.getenv("DTRSUM_LOG_FORMAT", "json")
DEFAULT_SEED = int(os.getenv("DTRSUM_DEFAULT_SEED", 0))
