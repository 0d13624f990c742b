#!/usr/bin/env python3
"""
Height Lab - Main Entry Point
=============================
Run this file with a subcommand, e.g.

    python run.py gamma --lambda 2 --P 100
    python run.py height --lambda 2 --t -4/3 --sign +

Reports go to stdout; logs go to stderr and the log file.
"""

import os
import sys
import logging

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config import settings

# Configure logging (stdout is reserved for reports)
log_dir = os.path.dirname(settings.LOG_FILE)
if log_dir:
    os.makedirs(log_dir, exist_ok=True)
logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.StreamHandler(sys.stderr),
        logging.FileHandler(settings.LOG_FILE),
    ]
)
logger = logging.getLogger(__name__)


def print_banner():
    """Print startup banner to stderr."""
    banner = """
    ╔═══════════════════════════════════════════════════════════════╗
    ║                                                               ║
    ║    HEIGHT LAB                                                 ║
    ║                                                               ║
    ║    Quasi-adelic heights on Per1(lambda)                       ║
    ║    Escape rates • Capacities • Small points                   ║
    ║                                                               ║
    ╚═══════════════════════════════════════════════════════════════╝
    """
    print(banner, file=sys.stderr)


def check_dependencies():
    """Check if required packages are installed."""
    missing = []

    for module, package in (('numpy', 'numpy'), ('pandas', 'pandas'), ('sympy', 'sympy'),
                            ('mpmath', 'mpmath'), ('dotenv', 'python-dotenv'),
                            ('colorama', 'colorama')):
        try:
            __import__(module)
        except ImportError:
            missing.append(package)

    if missing:
        print(f"\n⚠️  Missing dependencies: {', '.join(missing)}", file=sys.stderr)
        print(f"\nInstall with: pip install -r requirements.txt\n", file=sys.stderr)
        return False

    return True


def main(argv=None):
    """Main entry point."""
    argv = sys.argv[1:] if argv is None else argv
    if not argv or argv[0] in ('-h', '--help'):
        print_banner()

    if not check_dependencies():
        sys.exit(1)

    from colorama import init as colorama_init
    from cli.app import main as cli_main

    colorama_init()

    try:
        code = cli_main(argv)
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        code = 1
    except Exception as e:
        logger.error(f"Height lab crashed: {e}")
        raise
    sys.exit(code)


if __name__ == '__main__':
    main()
