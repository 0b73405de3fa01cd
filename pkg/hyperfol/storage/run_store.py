"""
Run output store: energy and decay time series (CSV), slice snapshots
(raw float64 plus a YAML sidecar) and YAML documents, all under one
output directory. Every writer has a matching reader.
"""

import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

import settings
from models.grid import Grid, GridSlice
from models.run import EnergyReport
from utils.errors import SpecParseError, UsageError
from utils.helpers import to_plain

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12e"
SNAPSHOT_DTYPE = "<f8"
SNAPSHOT_LAYOUT = "component, field (w, ds_w, dt_w), x1, x2, x3"


def energy_columns(report: EnergyReport) -> List[str]:
    """Column names of the energy time series, fixed by the first report"""
    columns = ["s"]
    columns += [f"E[{name}]" for name in report.energies]
    columns += ["E_total", "E_G", "coercive", "flux_integral", "mms_error"]
    columns += [f"EZ:{key}" for key in report.zi_energies]
    columns += [f"L2[{name}]" for name in report.l2_norms]
    return columns


def energy_row(report: EnergyReport, columns: Sequence[str]) -> List[float]:
    fixed = {
        "s": report.s,
        "E_total": report.total_energy,
        "E_G": report.curved_energy if report.curved_energy is not None else report.total_energy,
        "coercive": 1.0 if report.coercive else 0.0,
        "flux_integral": report.flux_integral,
        "mms_error": report.mms_error if report.mms_error is not None else float("nan"),
    }
    row = []
    for column in columns:
        if column in fixed:
            row.append(fixed[column])
        elif column.startswith("E["):
            row.append(report.energies.get(column[2:-1], float("nan")))
        elif column.startswith("EZ:"):
            row.append(report.zi_energies.get(column[3:], float("nan")))
        elif column.startswith("L2["):
            row.append(report.l2_norms.get(column[3:-1], float("nan")))
        else:
            row.append(float("nan"))
    return row


class RunStore:
    """
    File layout of one run directory.

    Args:
        root: output directory, created on first write
    """

    def __init__(self, root: str):
        self.root = root
        self.initialized = False

    def initialize(self) -> None:
        if self.initialized:
            return
        try:
            os.makedirs(self.root, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"output directory '{self.root}' is not writable: {exc.strerror}") from exc
        if not os.access(self.root, os.W_OK):
            raise UsageError(f"output directory '{self.root}' is not writable")
        self.initialized = True

    def path(self, name: str) -> str:
        return os.path.join(self.root, name)

    # Tables ---------------------------------------------------------------------

    def write_table(self, name: str, columns: Sequence[str], rows: Sequence[Sequence[float]]) -> str:
        self.initialize()
        target = self.path(name)
        data = np.asarray(rows, dtype=float).reshape(len(rows), len(columns))
        np.savetxt(target, data, fmt=FLOAT_FORMAT, delimiter=",", header=",".join(columns), comments="")
        logger.debug(f"wrote {len(rows)} rows to {target}")
        return target

    @staticmethod
    def read_table(path: str) -> Tuple[List[str], np.ndarray]:
        with open(path, "r", encoding="utf-8") as handle:
            header = handle.readline().strip()
        columns = header.split(",") if header else []
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.size and data.shape[1] != len(columns):
            raise SpecParseError(f"{data.shape[1]} values per row but {len(columns)} columns", path=path)
        return columns, data.reshape(-1, len(columns))

    def write_energy_series(self, reports: Sequence[EnergyReport], name: str = "energy.csv") -> str:
        if not reports:
            raise UsageError("no energy reports to write")
        columns = energy_columns(reports[0])
        return self.write_table(name, columns, [energy_row(r, columns) for r in reports])

    def write_decay_series(self, reports: Sequence[EnergyReport], name: str = "decay.csv") -> str:
        if not reports:
            raise UsageError("no energy reports to write")
        keys = list(reports[0].monitors)
        rows = [[r.s] + [r.monitors.get(k, float("nan")) for k in keys] for r in reports]
        return self.write_table(name, ["s"] + keys, rows)

    # Snapshots ------------------------------------------------------------------

    def write_snapshot(self, slice_: GridSlice, name: str) -> str:
        """`<name>.bin` little-endian float64, C order, component-major; `<name>.yaml` describes it"""
        self.initialize()
        data = np.stack([slice_.w, slice_.ds_w, slice_.dt_w], axis=1).astype(SNAPSHOT_DTYPE)
        binary = self.path(f"{name}.bin")
        data.tofile(binary)
        header = {
            "s": float(slice_.s),
            "h": float(slice_.grid.h),
            "n": int(slice_.grid.n),
            "extent": float(slice_.grid.extent),
            "dims": list(data.shape),
            "components": list(slice_.components),
            "dtype": SNAPSHOT_DTYPE,
            "order": "C",
            "layout": SNAPSHOT_LAYOUT,
            "file": os.path.basename(binary),
        }
        self.write_yaml(f"{name}.yaml", header)
        return binary

    @staticmethod
    def read_snapshot(sidecar: str) -> GridSlice:
        with open(sidecar, "r", encoding="utf-8") as handle:
            header = yaml.safe_load(handle)
        binary = os.path.join(os.path.dirname(sidecar), header["file"])
        dims = tuple(header["dims"])
        data = np.fromfile(binary, dtype=header["dtype"]).reshape(dims, order=header["order"])
        grid = Grid(header["n"], header["extent"])
        return GridSlice(s=header["s"], grid=grid, components=header["components"],
                         w=data[:, 0].astype(float), ds_w=data[:, 1].astype(float), dt_w=data[:, 2].astype(float))

    # Documents ------------------------------------------------------------------

    def write_yaml(self, name: str, document: Dict[str, Any]) -> str:
        self.initialize()
        target = self.path(name)
        with open(target, "w", encoding="utf-8") as handle:
            yaml.safe_dump(to_plain(document), handle, sort_keys=False)
        return target

    @staticmethod
    def read_yaml(path: str) -> Dict[str, Any]:
        with open(path, "r", encoding="utf-8") as handle:
            return yaml.safe_load(handle)

    def write_text(self, name: str, text: str) -> str:
        self.initialize()
        target = self.path(name)
        with open(target, "w", encoding="utf-8") as handle:
            handle.write(text if text.endswith("\n") else text + "\n")
        return target

    def list_snapshots(self) -> List[str]:
        if not os.path.isdir(self.root):
            return []
        return sorted(self.path(f) for f in os.listdir(self.root) if f.startswith("snapshot_") and f.endswith(".yaml"))


def open_store(root: Optional[str]) -> RunStore:
    return RunStore(settings.get_output_dir(root))
