"""Experiment logging: ``[<exp>] key=value ...`` lines, mirrored to stdout.

Log files carry no timestamps so that same-seed reruns are byte-identical.
If the log file cannot be written, one warning is printed and logging
degrades to stdout only.
"""

from __future__ import annotations

import sys
from pathlib import Path


def fmt_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


class Logger:
    def __init__(self, exp_name: str, path: str | None = None):
        self.exp_name = exp_name
        self.path = path or None
        self._fh = None
        self._degraded = False
        if self.path:
            try:
                Path(self.path).parent.mkdir(parents=True, exist_ok=True)
                self._fh = open(self.path, "w", encoding="utf-8")
            except OSError as err:
                self._degrade(err)

    def _degrade(self, err: OSError) -> None:
        if not self._degraded:
            print(f"[{self.exp_name}] logging degraded to stdout only: {err}",
                  file=sys.stderr)
        self._degraded = True
        self._fh = None

    def write_text(self, text: str) -> None:
        line = f"[{self.exp_name}] {text}"
        print(line)
        if self._fh is not None:
            try:
                self._fh.write(line + "\n")
                self._fh.flush()
            except OSError as err:
                self._degrade(err)

    def write(self, event: dict) -> None:
        self.write_text(" ".join(f"{k}={fmt_value(v)}" for k, v in event.items()))

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
