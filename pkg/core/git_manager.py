# git_manager.py
# Read-only git queries that stamp the run manifest with the code version.

import logging
import subprocess
from pathlib import Path
from typing import Optional

logger = logging.getLogger(__name__)

ROOT = Path(__file__).resolve().parents[1]
PACKAGE_VERSION = "0.1.0"


class GitManager:
    """Answers version questions about the checkout that holds `checkout_dir`."""

    def __init__(self, checkout_dir: str | Path = ROOT):
        self.checkout_dir = Path(checkout_dir).resolve()
        if not self.checkout_dir.is_dir():
            raise ValueError(f"Invalid checkout directory: {self.checkout_dir}")

        # the package may sit below the repository root
        self.git_root = next(
            (d for d in (self.checkout_dir, *self.checkout_dir.parents) if (d / ".git").exists()), None
        )
        if self.git_root is None:
            raise RuntimeError(f"Not a git repository: {self.checkout_dir}")

    def _git(self, *args) -> tuple[bool, str]:
        """(success, stdout or the error text)"""
        try:
            done = subprocess.run(
                ["git", *args], cwd=self.checkout_dir, capture_output=True, text=True, check=True
            )
        except subprocess.CalledProcessError as e:
            return False, (e.stderr or "").strip()
        except FileNotFoundError as e:
            return False, str(e)
        return True, done.stdout.strip()

    def describe(self) -> Optional[str]:
        """`git describe --always --dirty`, or None when git cannot answer."""
        ok, output = self._git("describe", "--always", "--dirty")
        return output if ok and output else None


def code_version() -> str:
    try:
        described = GitManager().describe()
    except (ValueError, RuntimeError):
        described = None
    if described is None:
        logger.debug("no git checkout, using the package version")
    return described or PACKAGE_VERSION
