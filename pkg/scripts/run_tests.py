#!/usr/bin/env python3
"""
Test Runner for the hyperboloidal foliation lab

Runs the pytest suite from the source root so flat imports resolve. The
fast suite deselects tests marked slow (simulations and convergence
studies).

Usage:
  python scripts/run_tests.py [--full] [--verbose] [--collect-only] [--test-path TEST_PATH]
"""

import argparse
import importlib.util
import os
import subprocess
import sys

SCRIPT_DIR = os.path.dirname(os.path.abspath(__file__))
ROOT_DIR = os.path.dirname(SCRIPT_DIR)
SOURCE_DIR = os.path.join(ROOT_DIR, "hyperfol")

REQUIRED_PACKAGES = ["numpy", "sympy", "pydantic", "dotenv", "yaml", "pytest"]


def check_dependencies() -> bool:
    """Verify that all required packages are importable"""
    missing = [package for package in REQUIRED_PACKAGES if importlib.util.find_spec(package) is None]
    if missing:
        print(f"Missing required packages: {', '.join(missing)}")
        print("Install them with: python -m pip install -r requirements.txt")
        return False
    return True


def run_tests(test_path=None, full=False, verbose=False, collect_only=False) -> int:
    """Run pytest and return its exit code"""
    if not test_path:
        test_path = os.path.join(SOURCE_DIR, "tests")
    if not os.path.exists(test_path):
        print(f"Test path not found: {test_path}")
        return 4

    pytest_args = ["-v"] if verbose else ["-q"]
    if not full:
        pytest_args += ["-m", "not slow"]
    if collect_only:
        pytest_args.append("--collect-only")

    env = dict(os.environ, HYPERFOL_DETERMINISTIC="true")
    result = subprocess.run([sys.executable, "-m", "pytest", test_path] + pytest_args,
                            cwd=SOURCE_DIR, env=env, check=False)
    print(f"\nTest exit code: {result.returncode}")
    return result.returncode


def main() -> int:
    parser = argparse.ArgumentParser(description="Run the hyperfol test suites")
    parser.add_argument("--full", action="store_true", help="Include tests marked slow")
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose output")
    parser.add_argument("--collect-only", action="store_true", help="Only collect tests, don't run them")
    parser.add_argument("--test-path", help="Specific test file or directory to run")
    args = parser.parse_args()

    print(f"Python: {sys.version}")
    print(f"Source directory: {SOURCE_DIR}")
    print(f"Suite: {'full' if args.full else 'fast'}")

    print("\nChecking dependencies...")
    if not check_dependencies():
        return 1

    print("\nRunning tests...")
    return run_tests(args.test_path, args.full, args.verbose, args.collect_only)


if __name__ == "__main__":
    sys.exit(main())
