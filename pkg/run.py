#!/usr/bin/env python
"""
hlmax Launch Script
Convenient wrapper for running the command line from a source checkout
"""
import os
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

# Load environment variables from .env if exists
env_file = project_root / ".env"
if env_file.exists():
    with open(env_file) as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#") and "=" in line:
                key, value = line.split("=", 1)
                os.environ.setdefault(key.strip(), value.strip())

# Import and run
from hlmax.main import main

if __name__ == "__main__":
    if sys.version_info < (3, 9):
        sys.stderr.write("ERROR: Python 3.9 or higher is required\n")
        sys.exit(2)

    try:
        sys.exit(main())
    except KeyboardInterrupt:
        sys.stderr.write("\nInterrupted\n")
        sys.exit(130)
