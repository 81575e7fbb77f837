"""Convergence tables and deterministic CSV output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np


def fmt(x) -> str:
    """Shortest round-trip text for a real number (``nan``/``inf`` spelled out)."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


@dataclass
class ConvergenceTable:
    """Rows of ``(mu_or_tau, measured, target)`` with derived errors.

    ``measured`` and ``target`` may be complex.  ``meta`` carries frame
    information (for example ``xi``, ``eta``, ``y``) and free-form notes.
    """

    parameter: list = field(default_factory=list)
    measured: list = field(default_factory=list)
    target: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    increasing: bool = True

    def add(self, p, measured, target=0.0):
        p = float(p)
        if self.parameter:
            last = self.parameter[-1]
            if (self.increasing and p <= last) or (not self.increasing and p >= last):
                raise ValueError("table parameter must be strictly monotone")
        self.parameter.append(p)
        self.measured.append(complex(measured))
        self.target.append(complex(target))

    def __len__(self):
        return len(self.parameter)

    @property
    def abs_error(self):
        return np.abs(np.array(self.measured) - np.array(self.target))

    @property
    def rel_error(self):
        t = np.abs(np.array(self.target))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(t > 0, self.abs_error / np.where(t > 0, t, 1.0), np.nan)

    def strictly_decreasing(self, column="abs_error"):
        v = self.abs_error if column == "abs_error" else np.abs(np.array(self.measured))
        return bool(np.all(np.diff(v) < 0))

    def rows(self):
        out = []
        ae, re = self.abs_error, self.rel_error
        for k in range(len(self)):
            m, t = self.measured[k], self.target[k]
            out.append([self.parameter[k], m.real, m.imag, t.real, t.imag, ae[k], re[k]])
        return out

    HEADER = ["mu_or_tau", "measured_re", "measured_im", "target_re", "target_im",
              "abs_error", "rel_error"]

    def to_csv(self, path):
        """Write the table.

        Complex ``measured`` and ``target`` are split into real and
        imaginary columns; the remaining columns follow the documented
        schema ``mu_or_tau, measured, target, abs_error, rel_error``.
        """
        write_csv(path, self.HEADER, self.rows())

    @classmethod
    def from_csv(cls, path):
        t = cls()
        with open(path) as fh:
            r = csv.reader(fh)
            header = next(r)
            if header != cls.HEADER:
                raise ValueError(f"unexpected header {header}")
            for row in r:
                v = [float(x) for x in row]
                t.parameter.append(v[0])
                t.measured.append(complex(v[1], v[2]))
                t.target.append(complex(v[3], v[4]))
        if len(t.parameter) > 1:
            t.increasing = t.parameter[1] > t.parameter[0]
        return t
