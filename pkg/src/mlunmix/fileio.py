"""Plain-text on-disk formats.

Everything is UTF-8 with LF line endings and locale-independent numbers
formatted with 17 significant digits, so finite doubles round-trip
bit-exactly and output directories diff cleanly.

Matrix file::

    # matrix <rows> <cols>
    <row of comma-separated values>
    ...

Library file::

    # library <bands> <signatures>
    # <name>,<name>,...
    # wavelengths_nm <value>,<value>,...      (optional)
    <bands rows x signatures columns>

Manifests are ``key=value`` lines; evaluation reports are a small
``key,index,value`` CSV.
"""

import os

import numpy as np

from .core import as_matrix
from .errors import DataFormatError
from .metrics import EvalReport
from .synth import SpectralLibrary

_WAVELENGTH_TAG = "# wavelengths_nm "


def fmt(value: float) -> str:
    """Round-trip decimal formatting for a double."""
    return f"{value:.17g}"


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file and rename."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_matrix(path, m) -> None:
    arr = as_matrix(m)
    lines = [f"# matrix {arr.shape[0]} {arr.shape[1]}"]
    for row in arr:
        lines.append(",".join(fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read matrix file {path}: {exc}") from exc
    if not lines or not lines[0].startswith("# matrix "):
        raise DataFormatError(f"{path}: missing '# matrix <rows> <cols>' header")
    parts = lines[0].split()
    try:
        rows, cols = int(parts[2]), int(parts[3])
    except (IndexError, ValueError) as exc:
        raise DataFormatError(f"{path}: malformed matrix header {lines[0]!r}") from exc
    body = [line for line in lines[1:] if line.strip()]
    if len(body) != rows:
        raise DataFormatError(f"{path}: expected {rows} data rows, found {len(body)}")
    out = np.empty((rows, cols))
    for i, line in enumerate(body):
        fields = line.split(",")
        if len(fields) != cols:
            raise DataFormatError(
                f"{path}: row {i + 1} has {len(fields)} values, expected {cols}"
            )
        try:
            out[i, :] = [float(f) for f in fields]
        except ValueError as exc:
            raise DataFormatError(f"{path}: bad number on row {i + 1}") from exc
    return out


def write_library(path, lib: SpectralLibrary) -> None:
    lines = [
        f"# library {lib.bands} {lib.count}",
        "# " + ",".join(lib.names),
    ]
    if lib.wavelengths is not None:
        lines.append(_WAVELENGTH_TAG + ",".join(fmt(w) for w in lib.wavelengths))
    for row in lib.signatures:
        lines.append(",".join(fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_library(path) -> SpectralLibrary:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read library file {path}: {exc}") from exc
    if not lines or not lines[0].startswith("# library "):
        raise DataFormatError(f"{path}: missing '# library <bands> <signatures>' header")
    parts = lines[0].split()
    try:
        bands, count = int(parts[2]), int(parts[3])
    except (IndexError, ValueError) as exc:
        raise DataFormatError(f"{path}: malformed library header {lines[0]!r}") from exc
    if len(lines) < 2 or not lines[1].startswith("# "):
        raise DataFormatError(f"{path}: missing signature-name header line")
    names = tuple(s.strip() for s in lines[1][2:].split(","))
    if len(names) != count:
        raise DataFormatError(f"{path}: {len(names)} names for {count} signatures")

    cursor = 2
    wavelengths = None
    if cursor < len(lines) and lines[cursor].startswith(_WAVELENGTH_TAG):
        try:
            wavelengths = [float(v) for v in lines[cursor][len(_WAVELENGTH_TAG):].split(",")]
        except ValueError as exc:
            raise DataFormatError(f"{path}: bad wavelength value") from exc
        if len(wavelengths) != bands:
            raise DataFormatError(
                f"{path}: {len(wavelengths)} wavelengths for {bands} bands"
            )
        cursor += 1

    body = [line for line in lines[cursor:] if line.strip()]
    if len(body) != bands:
        raise DataFormatError(f"{path}: expected {bands} data rows, found {len(body)}")
    sigs = np.empty((bands, count))
    for i, line in enumerate(body):
        fields = line.split(",")
        if len(fields) != count:
            raise DataFormatError(
                f"{path}: row {i + 1} has {len(fields)} values, expected {count}"
            )
        try:
            sigs[i, :] = [float(f) for f in fields]
        except ValueError as exc:
            raise DataFormatError(f"{path}: bad number on row {i + 1}") from exc
    try:
        return SpectralLibrary(signatures=sigs, names=names, wavelengths=wavelengths)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def write_manifest(path, entries: dict) -> None:
    lines = []
    for key, value in entries.items():
        value = fmt(value) if isinstance(value, float) else str(value)
        if "\n" in value:
            raise ValueError(f"manifest value for {key!r} contains a newline")
        lines.append(f"{key}={value}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_manifest(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read manifest {path}: {exc}") from exc
    entries = {}
    for line in lines:
        if not line.strip() or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataFormatError(f"{path}: manifest line without '=': {line!r}")
        key, _, value = line.partition("=")
        entries[key] = value
    return entries


def write_eval_report(path, report: EvalReport) -> None:
    lines = ["key,index,value"]
    for i, value in enumerate(report.per_endmember_sad):
        lines.append(f"sad,{i},{fmt(value)}")
    lines.append(f"rms_sad,,{fmt(report.rms_sad)}")
    lines.append(f"rms_aad,,{fmt(report.rms_aad)}")
    for est, true in enumerate(report.assignment):
        lines.append(f"assignment,{est},{true}")
    lines.append(f"excluded_pixels,,{report.excluded_pixels}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_eval_report(path) -> EvalReport:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read report {path}: {exc}") from exc
    if not lines or lines[0] != "key,index,value":
        raise DataFormatError(f"{path}: missing report header")
    sads: dict[int, float] = {}
    assignment: dict[int, int] = {}
    rms_sad_value = rms_aad_value = None
    excluded = 0
    for line in lines[1:]:
        if not line.strip():
            continue
        try:
            key, index, value = line.split(",")
            if key == "sad":
                sads[int(index)] = float(value)
            elif key == "rms_sad":
                rms_sad_value = float(value)
            elif key == "rms_aad":
                rms_aad_value = float(value)
            elif key == "assignment":
                assignment[int(index)] = int(value)
            elif key == "excluded_pixels":
                excluded = int(value)
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise DataFormatError(f"{path}: bad report line {line!r}") from exc
    if rms_sad_value is None or rms_aad_value is None:
        raise DataFormatError(f"{path}: report is missing rms values")
    return EvalReport(
        per_endmember_sad=tuple(sads[i] for i in sorted(sads)),
        rms_sad=rms_sad_value,
        rms_aad=rms_aad_value,
        assignment=tuple(assignment[i] for i in sorted(assignment)),
        excluded_pixels=excluded,
    )
