import sys

from dotenv import load_dotenv

# Load environment variables first
load_dotenv("env/.env")

from pkgrelax.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
