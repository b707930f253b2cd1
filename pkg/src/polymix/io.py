"""File formats: parameter JSON, dataset CSV, latent sidecar CSV.

Datasets are headerless CSV with D numeric columns, written with 17
significant digits so values round-trip exactly.  The latent sidecar has
1 + d columns: the integer component label followed by the simplex row.
"""

from __future__ import annotations

import json

import numpy as np

from polymix.params import Dataset, MixtureParams


class DataFormatError(ValueError):
    """Malformed input file; message carries the 1-based row/column."""


_FMT = "%.17g"


def write_params_json(psi: MixtureParams, path: str, provenance: dict | None = None) -> None:
    doc = dict(provenance or {})
    doc.update(psi.to_dict())
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_params_json(path: str) -> MixtureParams:
    """Read a parameter record; accepts both raw psi files and fit outputs
    that embed one under "psi_hat"."""
    with open(path) as fh:
        doc = json.load(fh)
    if "psi_hat" in doc:
        doc = doc["psi_hat"]
    try:
        return MixtureParams.from_dict(doc)
    except KeyError as exc:
        raise DataFormatError(f"{path}: missing parameter field {exc}") from exc


def write_matrix_csv(mat: np.ndarray, path: str) -> None:
    np.savetxt(path, np.atleast_2d(mat), fmt=_FMT, delimiter=",")


def read_matrix_csv(path: str) -> np.ndarray:
    """Parse a numeric CSV; on failure, rescan to report the exact bad cell."""
    try:
        mat = np.loadtxt(path, delimiter=",", ndmin=2)
        return mat
    except ValueError:
        pass
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            for j, cell in enumerate(line.split(","), start=1):
                try:
                    float(cell)
                except ValueError:
                    raise DataFormatError(
                        f"{path}: row {i}, column {j}: could not parse {cell.strip()!r} as a number"
                    ) from None
    raise DataFormatError(f"{path}: inconsistent row lengths")


def write_dataset_csv(data: Dataset, path: str, latents_path: str | None = None) -> None:
    write_matrix_csv(data.X, path)
    if latents_path is not None:
        if data.z is None or data.beta is None:
            raise ValueError("dataset has no latents to write")
        side = np.column_stack([data.z.astype(float), data.beta])
        write_matrix_csv(side, latents_path)


def read_dataset_csv(path: str, latents_path: str | None = None, seed=None) -> Dataset:
    X = read_matrix_csv(path)
    z = beta = None
    if latents_path is not None:
        side = read_matrix_csv(latents_path)
        if side.shape[0] != X.shape[0] or side.shape[1] < 2:
            raise DataFormatError(f"{latents_path}: latent sidecar does not match the dataset")
        z = side[:, 0].astype(int)
        beta = side[:, 1:]
    return Dataset(X=X, z=z, beta=beta, seed=seed)
