"""Coupling-block sources: analytical free-space surrogate and file ingestion.

The surrogate lays both arrays of each layer on a common plane, stacks the
planes along x, and fills every coupling entry with a scalar Friis-style
free-space coefficient. It deliberately ignores element patterns,
polarization, and ground-plane effects; its purpose is to preserve the
distance-driven attenuation between arrays in an analytically checkable way.

File ingestion covers a JSON block schema for complete block sets and a
single-frequency real/imaginary Touchstone v1 subset for raw matrices.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive_int, check_positive_float
from .errors import ParseError, SchemaError
from .model import ScatteringBlocks, SimTopology

__all__ = [
    "ScenarioGeometry",
    "IngestedBlockSet",
    "TouchstoneData",
    "free_space_coefficient",
    "build_scenario",
    "parse_touchstone",
    "write_touchstone",
    "load_blocks_json",
    "save_blocks_json",
]

_FREQ_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}


@dataclass(frozen=True)
class ScenarioGeometry:
    """Free-space scenario layout, all distances in meters.

    Each layer is an elements_y x elements_z planar grid (K = Ny*Nz cells)
    centered on the y-z plane; layer q sits at x = q * layer_spacing_m. The
    transmitter and receiver are linear arrays along y, placed tx_distance_m
    before the first layer and rx_distance_m behind the last one.
    """

    wavelength_m: float
    layer_spacing_m: float
    elements_y: int
    elements_z: int
    element_spacing_y_m: float
    element_spacing_z_m: float
    tx_distance_m: float
    rx_distance_m: float
    tx_count: int
    rx_count: int
    tx_spacing_m: float
    rx_spacing_m: float
    broadside_pattern: bool = False

    def __post_init__(self):
        for name in ("elements_y", "elements_z", "tx_count", "rx_count"):
            check_positive_int(name, getattr(self, name))
        for name in (
            "wavelength_m",
            "layer_spacing_m",
            "element_spacing_y_m",
            "element_spacing_z_m",
            "tx_distance_m",
            "rx_distance_m",
            "tx_spacing_m",
            "rx_spacing_m",
        ):
            check_positive_float(name, getattr(self, name))

    @property
    def cells_per_layer(self):
        return self.elements_y * self.elements_z


@dataclass(frozen=True)
class TouchstoneData:
    """Matrix plus metadata parsed from a Touchstone file."""

    matrix: np.ndarray
    frequency_hz: float
    reference_impedance_ohm: float


@dataclass(frozen=True)
class IngestedBlockSet:
    """Scattering blocks loaded from a file, with provenance metadata."""

    blocks: ScatteringBlocks
    source: str
    format_tag: str
    reference_impedance_ohm: float | None = None
    frequency_hz: float | None = None


def free_space_coefficient(distance_m, wavelength_m):
    """Scalar free-space coupling (lambda / (4 pi d)) * exp(-j 2 pi d / lambda).

    Friis-style amplitude with the propagation phase of the path. Raises for
    non-positive distance; coincident elements are unsupported.
    """
    d = float(distance_m)
    lam = check_positive_float("wavelength_m", wavelength_m)
    if not math.isfinite(d) or d <= 0.0:
        raise ValueError(f"distance_m must be positive, got {distance_m!r}")
    return (lam / (4.0 * math.pi * d)) * np.exp(-2j * math.pi * d / lam)


def _coupling_matrix(dst_pos, src_pos, wavelength_m, broadside):
    """Coupling block with entry (a, b) = coefficient(|dst_a - src_b|)."""
    diff = dst_pos[:, np.newaxis, :] - src_pos[np.newaxis, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    if np.any(dist <= 0.0):
        raise ValueError("coincident source and destination elements")
    block = (wavelength_m / (4.0 * math.pi * dist)) * np.exp(
        -2j * math.pi * dist / wavelength_m
    )
    if broadside:
        # cos(theta) off-broadside taper; theta measured from the stack axis
        block = block * (np.abs(diff[:, :, 0]) / dist)
    return block


def _layer_grid(geom):
    """Cell coordinates (y, z) of one layer, cell index k = iz*Ny + iy."""
    ny, nz = geom.elements_y, geom.elements_z
    iy = np.arange(1, ny + 1, dtype=np.float64)
    iz = np.arange(1, nz + 1, dtype=np.float64)
    y = (iy - (ny + 1) / 2.0) * geom.element_spacing_y_m
    z = (iz - (nz + 1) / 2.0) * geom.element_spacing_z_m
    zz, yy = np.meshgrid(z, y, indexing="ij")
    return yy.ravel(), zz.ravel()


def _linear_array(count, spacing):
    idx = np.arange(1, count + 1, dtype=np.float64)
    return (idx - (count + 1) / 2.0) * spacing


def build_scenario(geom, topo):
    """Populate ScatteringBlocks from the free-space surrogate geometry.

    Reflection blocks and the direct transmitter-receiver path are zero in
    the surrogate; only the inter-layer, transmitter-side, and receiver-side
    transfers are filled.
    """
    if geom.cells_per_layer != topo.cells_per_layer:
        raise ValueError(
            f"geometry gives K={geom.cells_per_layer} cells per layer, "
            f"topology has K={topo.cells_per_layer}"
        )
    if geom.tx_count != topo.tx_ports or geom.rx_count != topo.rx_ports:
        raise ValueError(
            f"geometry gives L={geom.tx_count}, M={geom.rx_count}; "
            f"topology has L={topo.tx_ports}, M={topo.rx_ports}"
        )
    lam = geom.wavelength_m
    d_x = geom.layer_spacing_m
    cell_y, cell_z = _layer_grid(geom)

    def layer_positions(x):
        return np.column_stack([np.full(cell_y.size, x), cell_y, cell_z])

    tx_y = _linear_array(geom.tx_count, geom.tx_spacing_m)
    rx_y = _linear_array(geom.rx_count, geom.rx_spacing_m)
    tx_pos = np.column_stack([np.full(tx_y.size, d_x - geom.tx_distance_m), tx_y, np.zeros(tx_y.size)])
    rx_x = topo.num_layers * d_x + geom.rx_distance_m
    rx_pos = np.column_stack([np.full(rx_y.size, rx_x), rx_y, np.zeros(rx_y.size)])

    # all layers share one grid, so every adjacent pair sees the same block
    adjacent = _coupling_matrix(
        layer_positions(2 * d_x), layer_positions(d_x), lam, geom.broadside_pattern
    )
    inter_layer = [adjacent.copy() for _ in range(topo.num_layers - 1)]
    h_ts = _coupling_matrix(layer_positions(d_x), tx_pos, lam, geom.broadside_pattern)
    h_sr = _coupling_matrix(
        rx_pos, layer_positions(topo.num_layers * d_x), lam, geom.broadside_pattern
    )
    return ScatteringBlocks(inter_layer=inter_layer, h_ts=h_ts, h_sr=h_sr)


# ---------------------------------------------------------------------------
# Touchstone v1 subset (single frequency point, real/imaginary format)
# ---------------------------------------------------------------------------


def parse_touchstone(text):
    """Parse the supported Touchstone v1 subset into a TouchstoneData.

    Supported input: comment lines starting with '!', exactly one option
    line '# <FREQ-UNIT> S RI R <Z0>', and exactly one data record of
    1 + 2*n^2 numeric fields (frequency followed by re/im pairs), possibly
    wrapped across lines. Two-port records use the conventional
    S11 S21 S12 S22 order; other sizes are row-major.
    """
    option = None
    option_line = None
    tokens = []
    token_lines = []
    first_data_line = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            if option is not None:
                raise ParseError("duplicate option line", line=lineno)
            option = line.split()
            option_line = lineno
            continue
        if option is None:
            raise ParseError("data before option line", line=lineno)
        if first_data_line is None:
            first_data_line = lineno
        for tok in line.split():
            tokens.append(tok)
            token_lines.append(lineno)

    if option is None:
        raise ParseError("missing option line")
    if len(option) != 6 or option[0] != "#":
        raise ParseError(
            "malformed option line, expected '# <FREQ-UNIT> S RI R <Z0>'", line=option_line
        )
    unit = option[1].upper()
    if unit not in _FREQ_UNITS:
        raise ParseError(f"unsupported frequency unit {option[1]!r}", line=option_line)
    if option[2].upper() != "S" or option[3].upper() != "RI" or option[4].upper() != "R":
        raise ParseError(
            "unsupported option line, only 'S RI R <Z0>' is accepted", line=option_line
        )
    try:
        z0 = float(option[5])
    except ValueError:
        raise ParseError(f"non-numeric reference impedance {option[5]!r}", line=option_line)

    if not tokens:
        raise ParseError("missing data record", line=option_line)
    values = []
    for tok, lineno in zip(tokens, token_lines):
        try:
            values.append(float(tok))
        except ValueError:
            raise ParseError(f"non-numeric token {tok!r}", line=lineno)

    count = len(values)
    n = _infer_port_count(count)
    if n is None:
        if _looks_like_multiple_records(count):
            raise ParseError("multiple frequency points", line=first_data_line)
        raise ParseError(
            f"inconsistent entry count: {count} fields match no 1 + 2*n^2 record",
            line=first_data_line,
        )
    freq_hz = values[0] * _FREQ_UNITS[unit]
    pairs = np.asarray(values[1:], dtype=np.float64).reshape(n * n, 2)
    flat = pairs[:, 0] + 1j * pairs[:, 1]
    if n == 2:
        matrix = np.array([[flat[0], flat[2]], [flat[1], flat[3]]])
    else:
        matrix = flat.reshape(n, n)
    return TouchstoneData(matrix=matrix, frequency_hz=freq_hz, reference_impedance_ohm=z0)


def _infer_port_count(count):
    n = 1
    while 1 + 2 * n * n <= count:
        if 1 + 2 * n * n == count:
            return n
        n += 1
    return None


def _looks_like_multiple_records(count):
    n = 1
    while 1 + 2 * n * n <= count:
        record = 1 + 2 * n * n
        if count % record == 0 and count // record >= 2:
            return True
        n += 1
    return False


def write_touchstone(matrix, frequency_hz, reference_impedance_ohm=50.0, unit="GHZ"):
    """Serialize a square matrix to the Touchstone subset read by parse_touchstone."""
    mat = np.asarray(matrix, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"matrix must be square, got shape {mat.shape}")
    unit = unit.upper()
    if unit not in _FREQ_UNITS:
        raise ValueError(f"unsupported frequency unit {unit!r}")
    n = mat.shape[0]
    if n == 2:
        ordered = [mat[0, 0], mat[1, 0], mat[0, 1], mat[1, 1]]
    else:
        ordered = list(mat.ravel())
    fields = [repr(frequency_hz / _FREQ_UNITS[unit])]
    fields += [f"{repr(float(v.real))} {repr(float(v.imag))}" for v in ordered]
    lines = [f"! {n}-port single-frequency export", f"# {unit} S RI R {repr(float(reference_impedance_ohm))}"]
    # wrap the record at four complex entries per line, as tools usually do
    lines.append(fields[0] + " " + " ".join(fields[1:5]))
    for start in range(5, len(fields), 4):
        lines.append(" ".join(fields[start : start + 4]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# JSON block schema
# ---------------------------------------------------------------------------


def _matrix_to_json(mat):
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(mat)]


def _matrix_from_json(obj, name, shape=None):
    if not isinstance(obj, list) or not obj:
        raise SchemaError("must be a non-empty nested array of [re, im] pairs", field=name)
    try:
        arr = np.asarray(obj, dtype=np.float64)
    except (ValueError, TypeError):
        raise SchemaError("entries are not numeric [re, im] pairs", field=name)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise SchemaError(
            f"must be a matrix of [re, im] pairs, got array of shape {arr.shape}", field=name
        )
    mat = arr[:, :, 0] + 1j * arr[:, :, 1]
    if shape is not None and mat.shape != shape:
        raise SchemaError(f"must have shape {shape}, got {mat.shape}", field=name)
    return mat


def load_blocks_json(text):
    """Load ScatteringBlocks from the JSON block schema.

    Top-level fields: ``topology`` {Q, K, L, M}, ``wavelength_m``, ``h_ts``,
    ``h_sr``, optional ``s_rt``, ``inter_layer`` (Q-1 matrices), optional
    ``reflections`` {s11, s22, s12} with Q+1 entries each (null allowed),
    optional ``s_ss_dense``. Complex matrices are nested arrays of [re, im]
    pairs, row-major.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}")
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object")
    topo_obj = doc.get("topology")
    if not isinstance(topo_obj, dict):
        raise SchemaError("missing or invalid object", field="topology")
    try:
        topo = SimTopology(
            num_layers=topo_obj.get("Q"),
            cells_per_layer=topo_obj.get("K"),
            tx_ports=topo_obj.get("L"),
            rx_ports=topo_obj.get("M"),
        )
    except ValueError as exc:
        raise SchemaError(str(exc), field="topology")
    q, k = topo.num_layers, topo.cells_per_layer
    ell, m = topo.tx_ports, topo.rx_ports

    if "h_ts" not in doc:
        raise SchemaError("mandatory block missing", field="h_ts")
    if "h_sr" not in doc:
        raise SchemaError("mandatory block missing", field="h_sr")
    h_ts = _matrix_from_json(doc["h_ts"], "h_ts", (k, ell))
    h_sr = _matrix_from_json(doc["h_sr"], "h_sr", (m, k))

    inter_obj = doc.get("inter_layer", [])
    if not isinstance(inter_obj, list):
        raise SchemaError("must be an array of matrices", field="inter_layer")
    if len(inter_obj) != q - 1:
        raise SchemaError(
            f"expected {q - 1} matrices for Q={q} layers, got {len(inter_obj)}",
            field="inter_layer",
        )
    inter_layer = [
        _matrix_from_json(mobj, f"inter_layer[{i}]", (k, k)) for i, mobj in enumerate(inter_obj)
    ]

    s_rt = None
    if doc.get("s_rt") is not None:
        s_rt = _matrix_from_json(doc["s_rt"], "s_rt", (m, ell))

    refl = {"s11": None, "s22": None, "s12": None}
    refl_obj = doc.get("reflections")
    if refl_obj is not None:
        if not isinstance(refl_obj, dict):
            raise SchemaError("must be an object with s11/s22/s12 arrays", field="reflections")
        for key in refl:
            seq = refl_obj.get(key)
            if seq is None:
                continue
            if not isinstance(seq, list) or len(seq) != q + 1:
                raise SchemaError(
                    f"must be an array of {q + 1} entries (null allowed)",
                    field=f"reflections.{key}",
                )
            refl[key] = [
                None
                if entry is None
                else _matrix_from_json(entry, f"reflections.{key}[{u}]", (k, k))
                for u, entry in enumerate(seq)
            ]

    s_ss_dense = None
    if doc.get("s_ss_dense") is not None:
        n = topo.num_sim_ports
        s_ss_dense = _matrix_from_json(doc["s_ss_dense"], "s_ss_dense", (n, n))

    try:
        return ScatteringBlocks(
            inter_layer=inter_layer,
            h_ts=h_ts,
            h_sr=h_sr,
            s_rt=s_rt,
            refl_s11=refl["s11"],
            refl_s22=refl["s22"],
            refl_s12=refl["s12"],
            s_ss_dense=s_ss_dense,
        )
    except ValueError as exc:
        raise SchemaError(str(exc))


def save_blocks_json(blocks, wavelength_m=None):
    """Serialize ScatteringBlocks to the JSON block schema (round-trip safe)."""
    doc = {
        "topology": {
            "Q": blocks.num_layers,
            "K": blocks.cells_per_layer,
            "L": blocks.tx_ports,
            "M": blocks.rx_ports,
        },
        "wavelength_m": wavelength_m,
        "h_ts": _matrix_to_json(blocks.h_ts),
        "h_sr": _matrix_to_json(blocks.h_sr),
        "inter_layer": [_matrix_to_json(m) for m in blocks.inter_layer],
    }
    if blocks.s_rt is not None:
        doc["s_rt"] = _matrix_to_json(blocks.s_rt)
    refl = {}
    for key, attr in (("s11", "refl_s11"), ("s22", "refl_s22"), ("s12", "refl_s12")):
        seq = getattr(blocks, attr)
        if seq is not None:
            refl[key] = [None if m is None else _matrix_to_json(m) for m in seq]
    if refl:
        doc["reflections"] = refl
    if blocks.s_ss_dense is not None:
        doc["s_ss_dense"] = _matrix_to_json(blocks.s_ss_dense)
    return json.dumps(doc, indent=1)
