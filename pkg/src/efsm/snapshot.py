"""Model persistence as a versioned JSON document.

Floats are serialized with Python's shortest round-trip repr, so a load
followed by a save reproduces the file byte for byte and a loaded model
continues bit-identically to the one that was saved.  Besides the cluster
and transition state the document carries the previous observation and the
membership statistics; both are required to resume the online recursions
exactly where they stopped.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import SnapshotError
from .model import EfsmModel, StateEstimate
from .transitions import ActionCodec

__all__ = ["FORMAT", "VERSION", "to_snapshot", "from_snapshot", "save_model", "load_model", "clone_model"]

FORMAT = "efsm-model"
VERSION = 1


def to_snapshot(model: EfsmModel) -> dict:
    """Serializable dict with the model's complete state."""
    clusters = []
    for i in range(model.n_states):
        clusters.append(
            {
                "id": i + 1,
                "center": model._centers[i].tolist(),
                "potential": float(model._potentials[i]),
                "spread": model._spread(i).tolist(),
                "member_count": int(model._member_counts[i]),
                "member_mean": model._member_means[i].tolist(),
                "member_m2": model._member_m2[i].tolist(),
            }
        )
    return {
        "format": FORMAT,
        "version": VERSION,
        "dim": model.dim,
        "rho": model.rho,
        "eps": model.eps,
        "phi": model.phi,
        "eps_bar": model.eps_bar,
        "spread_floor": model.spread_floor,
        "var_beta": model.var_beta,
        "scale": model.scale.tolist(),
        "offset": model.offset.tolist(),
        "codec": {
            "lo": model.codec.lo,
            "hi": model.codec.hi,
            "width": model.codec.width,
            "q": model.codec.q,
        },
        "accumulators": {
            "b": model._b,
            "col_sums": model._col_sums.tolist(),
            "t": model._count,
        },
        "last_observation": None if model._last_z is None else model._last_z.tolist(),
        "last_estimate": None
        if model.last_estimate is None
        else model.last_estimate.probs.tolist(),
        "clusters": clusters,
        "transitions": {
            "F": model.stack.F.tolist(),
            "F_o": model.stack.F_o.tolist(),
        },
    }


def from_snapshot(doc: dict) -> EfsmModel:
    """Rebuild a model from a snapshot dict, validating structure."""
    try:
        if doc["format"] != FORMAT:
            raise SnapshotError(f"not a model snapshot: format={doc['format']!r}")
        if doc["version"] != VERSION:
            raise SnapshotError(f"unsupported snapshot version {doc['version']!r}")
        codec_doc = doc["codec"]
        codec = ActionCodec(codec_doc["lo"], codec_doc["hi"], codec_doc["width"])
        if codec.q != codec_doc["q"]:
            raise SnapshotError(
                f"codec q={codec_doc['q']} inconsistent with bounds (derived {codec.q})"
            )
        model = EfsmModel(
            dim=doc["dim"],
            codec=codec,
            rho=doc["rho"],
            eps=doc["eps"],
            phi=doc["phi"],
            eps_bar=doc["eps_bar"],
            spread_floor=doc["spread_floor"],
            var_beta=doc["var_beta"],
            scale=doc["scale"],
            offset=doc["offset"],
        )
        dim = model.dim
        clusters = doc["clusters"]
        n = len(clusters)
        centers = np.zeros((n, dim))
        potentials = np.zeros(n)
        counts = np.zeros(n, dtype=np.int64)
        means = np.zeros((n, dim))
        m2 = np.zeros((n, dim))
        for i, c in enumerate(clusters):
            if c["id"] != i + 1:
                raise SnapshotError(f"cluster ids must be 1..n in order, got {c['id']}")
            centers[i] = _vector(c["center"], dim, "center")
            potentials[i] = c["potential"]
            counts[i] = c["member_count"]
            means[i] = _vector(c["member_mean"], dim, "member_mean")
            m2[i] = _vector(c["member_m2"], dim, "member_m2")
        if np.any(potentials <= 0.0) or np.any(counts < 1) or np.any(m2 < 0.0):
            raise SnapshotError("cluster fields violate invariants")
        model._centers = centers
        model._potentials = potentials
        model._member_counts = counts
        model._member_means = means
        model._member_m2 = m2

        F = np.asarray(doc["transitions"]["F"], dtype=float)
        F_o = np.asarray(doc["transitions"]["F_o"], dtype=float)
        if n == 0:
            # tolist() drops trailing zero-size axes, so the empty shapes
            # cannot be checked directly; rebuild them after confirming no
            # mass was smuggled in
            if F.size or F_o.size:
                raise SnapshotError("transition masses present with no states")
            F = np.zeros((codec.q, 0, 0))
            F_o = np.zeros((codec.q, 0))
        elif F.shape != (codec.q, n, n) or F_o.shape != (codec.q, n):
            raise SnapshotError(
                f"transition shapes {F.shape}/{F_o.shape} do not match q={codec.q}, n={n}"
            )
        if n > 0 and (np.any(F < 0.0) or np.any(F_o <= 0.0)):
            raise SnapshotError("transition masses violate invariants")
        model.stack.F = F
        model.stack.F_o = F_o

        acc = doc["accumulators"]
        model._b = float(acc["b"])
        model._col_sums = _vector(acc["col_sums"], dim, "col_sums")
        model._count = int(acc["t"])
        if model._b < 0.0 or model._count < 0:
            raise SnapshotError("accumulators violate invariants")
        last = doc["last_observation"]
        if last is None:
            if model._count > 0:
                raise SnapshotError("last_observation missing with t > 0")
            model._last_z = None
        else:
            model._last_z = _vector(last, dim, "last_observation")
        est = doc["last_estimate"]
        if est is not None:
            p = np.asarray(est, dtype=float)
            if p.shape != (n,):
                raise SnapshotError("last_estimate length does not match state count")
            model.last_estimate = StateEstimate(p)
        return model
    except SnapshotError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotError(f"malformed snapshot: {exc}") from exc


def save_model(model: EfsmModel, path) -> None:
    doc = to_snapshot(model)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path) -> EfsmModel:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"snapshot is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SnapshotError("snapshot root must be an object")
    return from_snapshot(doc)


def clone_model(model: EfsmModel) -> EfsmModel:
    """Independent copy via the snapshot round trip."""
    return from_snapshot(to_snapshot(model))


def _vector(value, dim: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (dim,):
        raise SnapshotError(f"{name} has shape {arr.shape}, expected ({dim},)")
    if not np.isfinite(arr).all():
        raise SnapshotError(f"{name} has non-finite values")
    return arr
