#!/usr/bin/env python3
"""
Runner for the QANM simulator
Dispatches to the simulator CLI, or runs the test suite with `test`
"""

import argparse
import os
import subprocess
import sys
from pathlib import Path

from config import Config
from qanm.cli import main as cli_main
from utils.helpers import FileHelper


class TestSuiteRunner:
    def __init__(self):
        self.base_dir = Path(__file__).parent
        self.ensure_directories()

    def ensure_directories(self):
        """Create necessary directories"""
        for directory in ['test-results', 'logs', Config.RESULTS_DIR]:
            FileHelper.create_directory(directory)

    def run_tests(self, args):
        """Run pytest with the requested options"""
        command = [sys.executable, '-m', 'pytest']

        if args.show_logs:
            command.extend(['--capture=no', '-s'])
            print("🔍 Console logging enabled")

        if args.parallel:
            command.extend(['-n', str(args.workers) if args.workers else 'auto'])
            print("🚀 Parallel execution enabled")

        if args.markers:
            command.extend(['-m', args.markers])
            print(f"🏷️ Running tests with markers: {args.markers}")

        command.append(args.test_file or 'tests/')

        env = os.environ.copy()
        if args.log_level:
            env['LOG_LEVEL'] = args.log_level.upper()
            print(f"📋 Log level: {args.log_level}")

        print("\n" + "=" * 60)
        print(f"🚀 Running command: {' '.join(command)}")
        print("=" * 60)

        try:
            result = subprocess.run(command, env=env, cwd=self.base_dir)
        except OSError as e:
            print(f"❌ Error running tests: {e}")
            return False
        print("\n📋 HTML report available at: test-results/report.html")
        return result.returncode == 0


def run_test_suite(argv):
    parser = argparse.ArgumentParser(
        prog='qanm_runner.py test',
        description='Run the simulator test suite',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python qanm_runner.py test                          # Run all tests
  python qanm_runner.py test --markers smoke          # Fast unit checks only
  python qanm_runner.py test --markers "not slow"     # Skip scenario reproductions
  python qanm_runner.py test --parallel --workers 4   # Run with pytest-xdist
        """
    )
    parser.add_argument('--parallel', action='store_true', help='Run tests in parallel using pytest-xdist')
    parser.add_argument('--workers', type=int, metavar='N', help='Number of parallel workers (default: auto)')
    parser.add_argument('--markers', metavar='MARKER', help='Run tests with specific markers (smoke, regression, slow)')
    parser.add_argument('--test-file', metavar='FILE', help='Run specific test file or directory')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Set logging level')
    parser.add_argument('--show-logs', action='store_true', help='Show logs in console during test execution')
    args = parser.parse_args(argv)

    success = TestSuiteRunner().run_tests(args)
    print("\n✅ Tests completed successfully!" if success else "\n❌ Tests failed or encountered errors!")
    return 0 if success else 1


def main():
    argv = sys.argv[1:]
    if argv and argv[0] == 'test':
        sys.exit(run_test_suite(argv[1:]))
    sys.exit(cli_main(argv))


if __name__ == '__main__':
    main()
