"""Built-in verifiers: extraction fuzz, closed-form cases and, with --full, the N=2 oracle."""
import sys

from isacbeam import cli

if __name__ == "__main__":
    sys.exit(cli.main(["verify", "--level", "full" if "--full" in sys.argv[1:] else "fast"]))
