"""Serialization of results and run manifests.

Floats are written with 17 significant digits, which round-trips every
double. Extended-precision values (mpfr) are written as exact decimal
strings together with their precision, ``{"mpfr": "...", "bits": n}``.

Every file written through :func:`write_artifact` gets a sibling
``<name>.manifest.json`` (a :class:`RunManifest`) holding the resolved
command, configuration, versions, wall-clock time and the SHA-256 of the
output, which is what ``lorenz-forge replay`` checks against.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import io as _io
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import gmpy2
import numpy as np

from . import __version__, kernels
from ._mp import MPFR
from .dynamics import AttractorReport, Budget, LyapunovSpectrum, Tag
from .errors import ConfigError
from .henon3d import Henon3DParams
from .hetero_model import MuVector
from .rescaling import RescaledParams
from .return_map import ReturnIndex
from .scanner import VERIFY_BUDGET, DomainReport, ScanCell

OUTPUT_SCHEMA_VERSION = 1
MANIFEST_SUFFIX = ".manifest.json"


def fmt(x) -> str:
    """A real number with 17 significant digits."""
    return format(float(x), ".17g")


# ----------------------------------------------------------------------------
# JSON


def to_jsonable(obj):
    """Plain JSON-ready structure for the package's result types."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, MPFR):
        return {"mpfr": _mpfr_str(obj), "bits": obj.precision}
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (AttractorReport, LyapunovSpectrum)):
        return to_jsonable(obj.as_dict())
    if isinstance(obj, Henon3DParams):
        return {"m1": obj.m1, "m2": obj.m2, "b": obj.b}
    if isinstance(obj, RescaledParams):
        return {"M1": obj.M1, "M2": obj.M2, "Bij": obj.Bij}
    if isinstance(obj, MuVector):
        return {"mu1": to_jsonable(obj.mu1), "mu2": to_jsonable(obj.mu2), "mu3": obj.mu3}
    if isinstance(obj, ReturnIndex):
        return [obj.i, obj.j]
    if isinstance(obj, DomainReport):
        return {
            "idx": to_jsonable(obj.idx),
            "target": to_jsonable(obj.target),
            "mu_center": to_jsonable(obj.mu_center),
            "mu_box": to_jsonable(obj.mu_box),
            "mu_corrected": to_jsonable(obj.mu_corrected),
            "diameter": obj.diameter,
            "residual": obj.residual,
            "verification": to_jsonable(obj.verification),
            "confirmed": obj.confirmed,
            "error": obj.error,
        }
    if dataclasses.is_dataclass(obj):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _mpfr_str(x) -> str:
    # gmpy2 prints enough decimal digits to round-trip the binary precision
    return str(x)


def mpfr_from_json(v):
    """Inverse of the mpfr encoding (plain numbers pass through)."""
    if isinstance(v, dict) and "mpfr" in v:
        return gmpy2.mpfr(v["mpfr"], int(v["bits"]))
    return v


def _dump(v, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(v, float):
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        return fmt(v)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(x, indent, level + 1)}" for k, x in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(v, list):
        if not v:
            return "[]"
        if all(not isinstance(x, (dict, list)) for x in v):
            return "[" + ", ".join(_dump(x, indent, level + 1) for x in v) + "]"
        return "[\n" + ",\n".join(pad + _dump(x, indent, level + 1) for x in v) + "\n" + end + "]"
    return json.dumps(v)


def dumps(obj, indent=2) -> str:
    """JSON text with floats at 17 significant digits (non-finite values as
    ``Infinity``/``NaN``, which :func:`json.loads` accepts)."""
    return _dump(to_jsonable(obj), indent, 0) + "\n"


def document(kind: str, payload) -> dict:
    """Schema-versioned envelope for a JSON output."""
    return {"schema_version": OUTPUT_SCHEMA_VERSION, "kind": kind, "data": payload}


# ----------------------------------------------------------------------------
# CSV

SCAN_COLUMNS = ("m1", "m2", "b", "tag", "tag_code", "period", "lambda1", "lambda2", "lambda3", "drift")
TAG_CODES = {tag: k for k, tag in enumerate(Tag)}


def scan_csv(cells: list[ScanCell]) -> str:
    """Long-format CSV, one row per cell in scan order.

    ``tag_code`` is the position of the tag in :class:`~lorenz_forge.dynamics.Tag`
    (for heatmaps); Lyapunov columns are empty when no spectrum was measured.
    """
    out = _io.StringIO()
    out.write(",".join(SCAN_COLUMNS) + "\n")
    for c in cells:
        rep = c.report
        spec = rep.spectrum
        lyap = [fmt(v) for v in spec.exponents] if spec else ["", "", ""]
        drift = fmt(spec.last_window_drift) if spec else ""
        row = [fmt(c.params.m1), fmt(c.params.m2), fmt(c.params.b), rep.tag.value, str(TAG_CODES[rep.tag]),
               "" if rep.period is None else str(rep.period), *lyap, drift]
        out.write(",".join(row) + "\n")
    return out.getvalue()


def orbit_csv(states) -> str:
    out = _io.StringIO()
    out.write("n,x,y,z\n")
    for n, s in enumerate(states, start=1):
        out.write(f"{n},{fmt(s[0])},{fmt(s[1])},{fmt(s[2])}\n")
    return out.getvalue()


# ----------------------------------------------------------------------------
# numerics block

NUMERICS_DEFAULTS = {
    "verify_budget": dataclasses.asdict(VERIFY_BUDGET),
    "residual_halfwidth": 3.0,
    "residual_grid": 7,
    "invert_tol": 1e-10,
}


def resolve_numerics(numerics: dict | None) -> dict:
    """Defaults overridden by a config's ``numerics`` block (validated)."""
    out = json.loads(json.dumps(NUMERICS_DEFAULTS))
    for key, value in (numerics or {}).items():
        if key not in out:
            raise ConfigError(f"numerics.{key}", "unknown key")
        if key == "verify_budget":
            if not isinstance(value, dict):
                raise ConfigError("numerics.verify_budget", "expected an object")
            for k, v in value.items():
                if k not in out[key]:
                    raise ConfigError(f"numerics.verify_budget.{k}", "unknown key")
                out[key][k] = v
        else:
            out[key] = value
    try:
        Budget(**out["verify_budget"])
    except (TypeError, ValueError) as exc:
        raise ConfigError("numerics.verify_budget", str(exc)) from exc
    if not (isinstance(out["residual_grid"], int) and out["residual_grid"] >= 3):
        raise ConfigError("numerics.residual_grid", "must be an integer >= 3")
    for key in ("residual_halfwidth", "invert_tol"):
        if not (isinstance(out[key], (int, float)) and out[key] > 0):
            raise ConfigError(f"numerics.{key}", "must be a positive number")
    return out


# ----------------------------------------------------------------------------
# manifests


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def versions() -> dict:
    return {
        "lorenz_forge": __version__,
        "numpy": np.__version__,
        "gmpy2": gmpy2.version(),
        "mpfr": gmpy2.mpfr_version(),
        "python": platform.python_version(),
        "kernel_backend": kernels.BACKEND,
    }


@dataclass
class RunManifest:
    """What produced an output file, and how to check a re-run against it.

    ``arguments`` are the fully resolved command arguments (defaults filled
    in); ``config`` the model configuration document when one was used;
    ``outputs`` maps file names to SHA-256 digests.
    """

    command: str
    arguments: dict
    config: dict | None = None
    versions: dict = field(default_factory=versions)
    wall_clock: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    schema_version: int = OUTPUT_SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "kind": "RunManifest",
            "command": self.command,
            "arguments": self.arguments,
            "config": self.config,
            "versions": self.versions,
            "wall_clock": self.wall_clock,
            "outputs": self.outputs,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunManifest":
        if doc.get("kind") != "RunManifest":
            raise ConfigError("kind", "not a run manifest")
        if doc.get("schema_version") != OUTPUT_SCHEMA_VERSION:
            raise ConfigError("schema_version", f"unsupported manifest version {doc.get('schema_version')!r}")
        return cls(doc["command"], doc["arguments"], doc.get("config"), doc.get("versions", {}),
                   doc.get("wall_clock", {}), doc.get("outputs", {}))

    @classmethod
    def load(cls, path) -> "RunManifest":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"invalid JSON: {exc.msg}", exc.lineno) from exc
        return cls.from_dict(doc)


def manifest_path(output) -> Path:
    output = Path(output)
    return output.with_name(output.name + MANIFEST_SUFFIX)


def write_artifact(path, text: str, manifest: RunManifest, started: float | None = None) -> Path:
    """Write ``text`` to ``path`` and its manifest next to it."""
    path = Path(path)
    data = text.encode("utf-8")
    path.write_bytes(data)
    manifest.outputs = {path.name: sha256_bytes(data)}
    now = time.time()
    manifest.wall_clock = {
        "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(now)),
        "elapsed_s": None if started is None else round(now - started, 3),
    }
    mpath = manifest_path(path)
    mpath.write_text(dumps(manifest.to_dict()))
    return mpath


__all__ = [
    "MANIFEST_SUFFIX",
    "NUMERICS_DEFAULTS",
    "OUTPUT_SCHEMA_VERSION",
    "RunManifest",
    "SCAN_COLUMNS",
    "document",
    "dumps",
    "fmt",
    "manifest_path",
    "mpfr_from_json",
    "orbit_csv",
    "resolve_numerics",
    "scan_csv",
    "sha256_file",
    "to_jsonable",
    "versions",
    "write_artifact",
]
