import sys

from dotenv import load_dotenv

# Load environment variables from .env file (LOGS_DIR, LOGS_MAX_TOTAL_MB, DANRL_WORKERS)
load_dotenv()

from src.core.cli import main

if __name__ == "__main__":
    sys.exit(main())
