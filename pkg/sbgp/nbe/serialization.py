"""
Weights file format.

A JSON document with a versioned header (layer dims, output activations,
parameter order, summary levels, metadata) and one entry per array holding
its row-major little-endian float64 bytes in base64.
"""

import base64
import binascii
import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from sbgp.exceptions import StructuralError, WeightsFormatError
from sbgp.nbe.network import NetworkWeights

logger = logging.getLogger(__name__)

FORMAT_NAME = "sbgp-nbe-weights"
FORMAT_VERSION = 1
DTYPE = "<f8"


def weights_to_dict(wts: NetworkWeights) -> Dict[str, Any]:
    layers = []
    for name, shape in wts.layer_shapes().items():
        array = np.ascontiguousarray(wts.params[name], dtype=DTYPE)
        layers.append({
            "name": name,
            "shape": list(shape),
            "data": base64.b64encode(array.tobytes(order="C")).decode("ascii"),
        })
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "family": wts.family,
        "param_order": list(wts.param_order),
        "activation_spec": list(wts.activations),
        "layer_dims": {"psi": list(wts.psi_dims), "phi": list(wts.phi_dims)},
        "summary_levels": list(wts.summary_levels),
        "dtype": DTYPE,
        "metadata": wts.metadata,
        "layers": layers,
    }


def save_weights(wts: NetworkWeights, path: Union[str, Path]) -> Path:
    """Write weights to a JSON file and return its path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(weights_to_dict(wts), f, indent=1)
    logger.info(f"Saved {wts.family} weights to {path}")
    return path


def _require(header: Dict[str, Any], key: str):
    if key not in header:
        raise WeightsFormatError(f"Weights header is missing '{key}'")
    return header[key]


def _decode_layer(entry: Dict[str, Any], index: int, expected_shape) -> np.ndarray:
    name = entry.get("name", f"#{index}")
    try:
        raw = base64.b64decode(entry["data"], validate=True)
    except (KeyError, binascii.Error, TypeError) as e:
        raise WeightsFormatError(f"Layer {name} (entry {index}): undecodable data ({e})")
    expected_bytes = int(np.prod(expected_shape)) * 8
    if len(raw) != expected_bytes:
        raise WeightsFormatError(
            f"Layer {name} (entry {index}): data ends at byte offset {len(raw)}, "
            f"expected {expected_bytes} bytes for shape {tuple(expected_shape)}"
        )
    array = np.frombuffer(raw, dtype=DTYPE).reshape(expected_shape).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(array))
    if bad.size:
        raise WeightsFormatError(f"Layer {name} (entry {index}): non-finite value at element offset {bad[0]}")
    return array


def weights_from_dict(doc: Dict[str, Any]) -> NetworkWeights:
    """
    Rebuild weights from a parsed weights document.

    Raises:
        WeightsFormatError: On a wrong format/version, missing keys, bad layer data
    """
    if _require(doc, "format") != FORMAT_NAME:
        raise WeightsFormatError(f"Not a weights file (format '{doc.get('format')}')")
    version = _require(doc, "version")
    if version != FORMAT_VERSION:
        raise WeightsFormatError(f"Unsupported weights version {version}, expected {FORMAT_VERSION}")
    if doc.get("dtype", DTYPE) != DTYPE:
        raise WeightsFormatError(f"Unsupported dtype {doc.get('dtype')}")

    dims = _require(doc, "layer_dims")
    psi_dims = tuple(int(d) for d in dims.get("psi", ()))
    phi_dims = tuple(int(d) for d in dims.get("phi", ()))
    if len(psi_dims) < 2 or len(phi_dims) < 2:
        raise WeightsFormatError(f"Malformed layer_dims {dims}")

    expected = {}
    for prefix, layer_dims in (("psi", psi_dims), ("phi", phi_dims)):
        for i in range(len(layer_dims) - 1):
            expected[f"{prefix}.{i}.weight"] = (layer_dims[i], layer_dims[i + 1])
            expected[f"{prefix}.{i}.bias"] = (layer_dims[i + 1],)

    params: Dict[str, np.ndarray] = {}
    for index, entry in enumerate(_require(doc, "layers")):
        name = entry.get("name")
        if name not in expected:
            raise WeightsFormatError(f"Unexpected layer '{name}' at entry {index}")
        if list(entry.get("shape", [])) != list(expected[name]):
            raise WeightsFormatError(
                f"Layer {name} (entry {index}): shape {entry.get('shape')} does not match layer_dims"
            )
        params[name] = _decode_layer(entry, index, expected[name])
    missing = sorted(set(expected) - set(params))
    if missing:
        raise WeightsFormatError(f"Weights file is missing layers: {', '.join(missing)}")

    try:
        return NetworkWeights(
            params=params,
            psi_dims=psi_dims,
            phi_dims=phi_dims,
            activations=tuple(_require(doc, "activation_spec")),
            family=_require(doc, "family"),
            param_order=tuple(_require(doc, "param_order")),
            summary_levels=tuple(float(q) for q in doc.get("summary_levels", ())),
            metadata=dict(doc.get("metadata", {})),
        )
    except StructuralError as e:
        raise WeightsFormatError(f"Inconsistent weights header: {e}")


def load_weights(path: Union[str, Path]) -> NetworkWeights:
    """
    Read a weights file written by save_weights.

    Raises:
        WeightsFormatError: If the file is not valid JSON or not a valid weights document
    """
    path = Path(path)
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise WeightsFormatError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno} (offset {e.pos})")
    if not isinstance(doc, dict):
        raise WeightsFormatError(f"{path}: expected a JSON object")
    wts = weights_from_dict(doc)
    logger.info(f"Loaded {wts.family} weights from {path}")
    return wts
