import os
import sys

# Add the repository root to sys.path so that the core package is importable
root_dir = os.path.abspath(os.path.dirname(__file__))
sys.path.append(root_dir)

from core.main import run

if __name__ == "__main__":
    sys.exit(run())
