"""
Positive Routing Control Toolkit - Main Entry Point
"""
import sys

from cli.commands import run


def main():
    """Run one command and exit with its code (0 ok, 1 numerical failure, 2 input error)."""
    try:
        code = run(sys.argv[1:])
    except Exception as e:
        print(f"❌ Unexpected error: {e}", file=sys.stderr)
        import traceback
        traceback.print_exc()
        code = 1
    sys.exit(code)


if __name__ == "__main__":
    main()
