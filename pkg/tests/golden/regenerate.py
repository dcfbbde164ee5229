"""Rewrite the --help golden files after an intentional CLI change.

Run from the repository root: ``python tests/golden/regenerate.py``.
"""

import contextlib
import io
import os
from pathlib import Path

os.environ["COLUMNS"] = "100"

from egse.cli import COMMANDS, build_parser  # noqa: E402

HERE = Path(__file__).parent


def help_text(argv):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.suppress(SystemExit):
        build_parser().parse_args(argv)
    return buf.getvalue()


if __name__ == "__main__":
    (HERE / "help_egse.txt").write_text(help_text(["--help"]))
    for verb in COMMANDS:
        (HERE / f"help_{verb}.txt").write_text(help_text([verb, "--help"]))
