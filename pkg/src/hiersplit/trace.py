"""Per-iteration records shared by the KM, HSDM, and TREX drivers."""

import csv

import numpy as np

CSV_COLUMNS = ("iter", "fp_residual", "function_value", "psi_value", "distance")


class IterTrace:
    """One record per iteration: iterate norm, fixed-point residual,
    second-stage value, first-stage objective, and (when a ground truth is
    known) distance to it."""

    def __init__(self):
        self.iterate_norm = []
        self.fp_residual = []
        self.objective = []
        self.psi = []
        self.distance = []

    def append(self, iterate_norm, fp_residual, objective=np.nan, psi=np.nan,
               distance=np.nan):
        self.iterate_norm.append(float(iterate_norm))
        self.fp_residual.append(float(fp_residual))
        self.objective.append(float(objective))
        self.psi.append(float(psi))
        self.distance.append(float(distance))

    def __len__(self):
        return len(self.fp_residual)

    @classmethod
    def from_arrays(cls, fp_residual, objective=None, psi=None, distance=None,
                    iterate_norm=None):
        t = cls()
        n = len(fp_residual)
        nanfill = np.full(n, np.nan)
        t.fp_residual = list(map(float, fp_residual))
        t.iterate_norm = list(map(float, nanfill if iterate_norm is None else iterate_norm))
        t.objective = list(map(float, nanfill if objective is None else objective))
        t.psi = list(map(float, nanfill if psi is None else psi))
        t.distance = list(map(float, nanfill if distance is None else distance))
        return t

    def arrays(self):
        return {
            "iterate_norm": np.asarray(self.iterate_norm),
            "fp_residual": np.asarray(self.fp_residual),
            "objective": np.asarray(self.objective),
            "psi": np.asarray(self.psi),
            "distance": np.asarray(self.distance),
        }

    def write_csv(self, stream):
        """Write the fixed-schema trace CSV (empty cells for unknown values)."""
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for i in range(len(self)):
            writer.writerow(
                [
                    i + 1,
                    _cell(self.fp_residual[i]),
                    _cell(self.objective[i]),
                    _cell(self.psi[i]),
                    _cell(self.distance[i]),
                ]
            )


def _cell(v):
    return "" if v != v else repr(v)  # NaN -> empty cell
