#!/usr/bin/env python3
"""Run every registered experiment and summarize pass/fail."""

import sys

from aclab import harness

if __name__ == "__main__":
    sys.exit(harness.main(["all"] + sys.argv[1:]))
