import sys

from coldstart_research.pipeline.cli import main


if __name__ == "__main__":
    sys.exit(main())
