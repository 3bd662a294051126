"""On-disk formats: panel CSVs, estimate bundles and simulation-truth bundles.

Complex matrices are stored as a pair of plain CSV files holding the real and
imaginary parts at 17 significant digits, which round-trips IEEE doubles
exactly. Each bundle directory carries a ``manifest.json`` describing its
contents.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import BundleError, ParseError
from .periodogram import TimeSeriesPanel

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
# fields that legitimately differ between otherwise identical runs
VOLATILE_KEYS = ("created",)


def read_panel(path, delimiter: str = ",", header: bool = False, transpose: bool = False) -> TimeSeriesPanel:
    """Read a numeric table into a panel.

    Rows are series and columns are time points; ``transpose=True`` reads a
    time-by-series table instead. Row and column numbers in errors are
    1-based and count the header line.
    """
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"no such file: {path}")
    rows = []
    width = None
    with open(path, newline="") as f:
        for i, rec in enumerate(csv.reader(f, delimiter=delimiter), start=1):
            if header and i == 1:
                continue
            if not rec or all(not c.strip() for c in rec):
                continue
            if width is None:
                width = len(rec)
            elif len(rec) != width:
                raise ParseError(f"ragged table: {len(rec)} fields, expected {width}", row=i)
            vals = []
            for j, cell in enumerate(rec, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"non-numeric cell {cell.strip()!r}", row=i, col=j) from None
                if not math.isfinite(v):
                    raise ParseError(f"non-finite cell {cell.strip()!r}", row=i, col=j)
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise ParseError(f"no data rows in {path}")
    values = np.array(rows, dtype=float)
    if transpose:
        values = values.T
    try:
        return TimeSeriesPanel(np.ascontiguousarray(values))
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def write_panel(panel, path):
    values = panel.values if isinstance(panel, TimeSeriesPanel) else np.asarray(panel)
    np.savetxt(path, values, fmt="%.17g", delimiter=",")


def _write_complex(directory: Path, stem: str, M):
    M = np.asarray(M, dtype=complex)
    np.savetxt(directory / f"{stem}_re.csv", M.real, fmt="%.17g", delimiter=",")
    np.savetxt(directory / f"{stem}_im.csv", M.imag, fmt="%.17g", delimiter=",")


def _read_complex(directory: Path, stem: str) -> np.ndarray:
    parts = []
    for suffix in ("re", "im"):
        f = directory / f"{stem}_{suffix}.csv"
        if not f.is_file():
            raise BundleError(f"missing matrix file {f}")
        try:
            parts.append(np.loadtxt(f, delimiter=",", ndmin=2))
        except ValueError as exc:
            raise BundleError(f"unreadable matrix file {f}: {exc}") from None
    if parts[0].shape != parts[1].shape:
        raise BundleError(f"real and imaginary parts of {stem} differ in shape")
    return parts[0] + 1j * parts[1]


def _stems_on_disk(directory: Path, name: str) -> set:
    pat = re.compile(rf"^{re.escape(name)}_h(\d+)_(re|im)\.csv$")
    return {int(m.group(1)) for f in directory.iterdir() if (m := pat.match(f.name))}


def _dump_manifest(directory: Path, manifest: dict):
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_manifest(directory: Path) -> dict:
    f = directory / MANIFEST
    if not f.is_file():
        raise BundleError(f"missing {MANIFEST} in {directory}")
    try:
        return json.loads(f.read_text())
    except json.JSONDecodeError as exc:
        raise BundleError(f"corrupt manifest {f}: {exc}") from None


def strip_volatile(manifest: dict) -> dict:
    """Manifest without the fields that change from run to run."""
    return {k: v for k, v in manifest.items() if k not in VOLATILE_KEYS}


@dataclass
class EstimateBundle:
    """Per-frequency estimates plus metadata.

    ``matrices`` maps a name (``"L"``, ``"S"``, ``"Sigma"``, ...) to a list with
    one ``p x p`` array per entry of ``manifest["frequencies"]``.
    """

    manifest: dict
    matrices: dict = field(default_factory=dict)

    @property
    def frequencies(self) -> list:
        return list(self.manifest["frequencies"])

    def validate(self):
        H = len(self.manifest.get("frequencies", []))
        for name, mats in self.matrices.items():
            if len(mats) != H:
                raise BundleError(f"{name}: {len(mats)} matrices for {H} frequencies")


def write_estimate(bundle: EstimateBundle, directory, timestamp: bool = True):
    bundle.validate()
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    manifest = dict(bundle.manifest)
    manifest["matrices"] = sorted(bundle.matrices)
    manifest["format_version"] = FORMAT_VERSION
    if timestamp:
        manifest["created"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    for name, mats in bundle.matrices.items():
        for h, M in enumerate(mats):
            _write_complex(d, f"{name}_h{h}", M)
    _dump_manifest(d, manifest)


def read_estimate(directory) -> EstimateBundle:
    d = Path(directory)
    manifest = _load_manifest(d)
    try:
        H = len(manifest["frequencies"])
        names = manifest["matrices"]
    except KeyError as exc:
        raise BundleError(f"manifest lacks field {exc}") from None
    matrices = {}
    for name in names:
        on_disk = _stems_on_disk(d, name)
        if on_disk != set(range(H)):
            raise BundleError(
                f"{name}: manifest lists {H} frequencies but files cover h={sorted(on_disk)}"
            )
        matrices[name] = [_read_complex(d, f"{name}_h{h}") for h in range(H)]
    return EstimateBundle(manifest=manifest, matrices=matrices)


@dataclass
class TruthBundle:
    """What an evaluation needs from a simulated replication."""

    config: dict
    panel: TimeSeriesPanel
    frequencies: np.ndarray
    L_true: list
    S_true: list
    L_star: np.ndarray | None = None
    S_star: np.ndarray | None = None

    @property
    def sigma_true(self) -> list:
        return [L + S for L, S in zip(self.L_true, self.S_true)]


def write_truth(truth, directory):
    """Write a :class:`~unalse.simulate.SimulationTruth` (or a TruthBundle)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    config = truth.config.to_dict() if hasattr(truth.config, "to_dict") else dict(truth.config)
    write_panel(truth.panel, d / "panel.csv")
    for h, (L, S) in enumerate(zip(truth.L_true, truth.S_true)):
        _write_complex(d, f"L_true_h{h}", L)
        _write_complex(d, f"S_true_h{h}", S)
    if truth.L_star is not None:
        np.savetxt(d / "L_star.csv", np.asarray(truth.L_star).real, fmt="%.17g", delimiter=",")
        np.savetxt(d / "S_star.csv", np.asarray(truth.S_star).real, fmt="%.17g", delimiter=",")
    manifest = {
        "kind": "truth",
        "format_version": FORMAT_VERSION,
        "config": config,
        "frequencies": [float(f) for f in truth.frequencies],
        "p": int(truth.panel.p),
        "T": int(truth.panel.T),
    }
    _dump_manifest(d, manifest)


def read_truth(directory) -> TruthBundle:
    d = Path(directory)
    manifest = _load_manifest(d)
    if manifest.get("kind") != "truth":
        raise BundleError(f"{d} is not a truth bundle")
    H = len(manifest["frequencies"])
    for name in ("L_true", "S_true"):
        if _stems_on_disk(d, name) != set(range(H)):
            raise BundleError(f"{name}: files do not match the {H} manifest frequencies")
    panel = read_panel(d / "panel.csv")
    stars = [np.loadtxt(d / f, delimiter=",", ndmin=2) if (d / f).is_file() else None
             for f in ("L_star.csv", "S_star.csv")]
    return TruthBundle(
        config=manifest["config"],
        panel=panel,
        frequencies=np.asarray(manifest["frequencies"], dtype=float),
        L_true=[_read_complex(d, f"L_true_h{h}") for h in range(H)],
        S_true=[_read_complex(d, f"S_true_h{h}") for h in range(H)],
        L_star=stars[0],
        S_star=stars[1],
    )


def is_truth_dir(directory) -> bool:
    f = Path(directory) / MANIFEST
    if not f.is_file():
        return False
    try:
        return json.loads(f.read_text()).get("kind") == "truth"
    except json.JSONDecodeError:
        return False


def replication_dirs(root) -> list:
    """Sorted ``rep_*`` subdirectories, or ``[root]`` if the root is itself a bundle."""
    root = Path(root)
    if (root / MANIFEST).is_file():
        return [root]
    reps = sorted(p for p in root.glob("rep_*") if p.is_dir())
    if not reps:
        raise BundleError(f"no bundle found under {root}")
    return reps
