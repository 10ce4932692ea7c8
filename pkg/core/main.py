import os
import sys

root_dir = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if root_dir not in sys.path:
    sys.path.append(root_dir)

from core.libs.harness import main


def run(argv=None):
    """Command-line entry: parse, run the experiment, return the exit status."""
    return main(argv)


if __name__ == "__main__":
    sys.exit(run())
