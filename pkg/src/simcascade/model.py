"""Core domain types for the layered surface stack.

A stack consists of Q layers, each with K unit cells. Every cell joins a
receive antenna and a transmit antenna through a tunable unilateral two-port
(forward gain G, phase shift eta, zero reverse transmission). Ports are
ordered layer-wise: layer q occupies the 2K global ports
[receive 1..K, transmit 1..K], so the stack exposes N = 2*Q*K ports in total.

This module holds the bookkeeping types plus the assembly of the two N x N
matrices that define the stack: the cell interconnection matrix Gamma(eta)
and the inter-array electromagnetic coupling matrix S_ss.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    check_complex_matrix,
    check_nonnegative_float,
    check_positive_int,
    check_real_vector,
    frozen_array,
)

__all__ = [
    "SimTopology",
    "ControlVector",
    "ScatteringBlocks",
    "GlobalScattering",
    "port_index",
    "assemble_layer_gain",
    "assemble_gamma",
    "assemble_sss",
    "assemble_global",
]


@dataclass(frozen=True)
class SimTopology:
    """Layer/cell/port bookkeeping for a stack with external TX and RX arrays.

    Attributes
    ----------
    num_layers : int
        Number of stacked layers Q.
    cells_per_layer : int
        Unit cells K per layer (each cell contributes two ports).
    tx_ports : int
        Transmitter antenna count L.
    rx_ports : int
        Receiver antenna count M.
    """

    num_layers: int
    cells_per_layer: int
    tx_ports: int
    rx_ports: int

    def __post_init__(self):
        for name in ("num_layers", "cells_per_layer", "tx_ports", "rx_ports"):
            object.__setattr__(self, name, check_positive_int(name, getattr(self, name)))

    @property
    def num_sim_ports(self):
        """Total stack port count N = 2*Q*K."""
        return 2 * self.num_layers * self.cells_per_layer

    @property
    def num_phases(self):
        """Number of tunable phases Q*K."""
        return self.num_layers * self.cells_per_layer

    def receive_slice(self, layer):
        """0-based slice of the receive-side ports of 1-based ``layer``."""
        self._check_layer(layer)
        k = self.cells_per_layer
        start = 2 * k * (layer - 1)
        return slice(start, start + k)

    def transmit_slice(self, layer):
        """0-based slice of the transmit-side ports of 1-based ``layer``."""
        self._check_layer(layer)
        k = self.cells_per_layer
        start = 2 * k * (layer - 1) + k
        return slice(start, start + k)

    def layer_phase_slice(self, layer):
        """0-based slice of layer ``layer``'s entries in the flat phase vector."""
        self._check_layer(layer)
        k = self.cells_per_layer
        return slice(k * (layer - 1), k * layer)

    def _check_layer(self, layer):
        if not 1 <= layer <= self.num_layers:
            raise IndexError(f"layer {layer} out of range 1..{self.num_layers}")


def port_index(layer, cell, side, topo):
    """Global 1-based port index of a cell's receive or transmit port.

    Within layer q the receive ports carry local indices 1..K and the
    transmit ports K+1..2K, so the global index is 2K(q-1)+k on the
    receive side and 2K(q-1)+K+k on the transmit side.
    """
    if side not in ("receive", "transmit"):
        raise ValueError(f"side must be 'receive' or 'transmit', got {side!r}")
    if not 1 <= layer <= topo.num_layers:
        raise IndexError(f"layer {layer} out of range 1..{topo.num_layers}")
    if not 1 <= cell <= topo.cells_per_layer:
        raise IndexError(f"cell {cell} out of range 1..{topo.cells_per_layer}")
    k = topo.cells_per_layer
    base = 2 * k * (layer - 1)
    if side == "transmit":
        base += k
    return base + cell


@dataclass(frozen=True, eq=False)
class ControlVector:
    """Tunable state of the stack: flat phase vector plus the shared gain.

    ``phases`` has length Q*K with flat index p = (q-1)*K + k; ``gain`` is the
    linear amplitude gain applied by every cell (not dB).
    """

    phases: np.ndarray
    gain: float

    def __post_init__(self):
        phases = check_real_vector("phases", self.phases)
        object.__setattr__(self, "phases", frozen_array(phases))
        object.__setattr__(self, "gain", check_nonnegative_float("gain", self.gain))

    @property
    def num_phases(self):
        return self.phases.size

    def layer_phases(self, layer, cells_per_layer):
        """Phase sub-vector of 1-based ``layer``."""
        k = cells_per_layer
        if self.phases.size % k:
            raise ValueError("phase vector length is not a multiple of cells_per_layer")
        q_max = self.phases.size // k
        if not 1 <= layer <= q_max:
            raise IndexError(f"layer {layer} out of range 1..{q_max}")
        return self.phases[k * (layer - 1) : k * layer]


def _as_optional_matrix_tuple(name, seq, count, shape):
    """Normalize an optional sequence of optional K x K matrices."""
    if seq is None:
        return None
    seq = tuple(seq)
    if len(seq) != count:
        raise ValueError(f"{name} must have {count} entries, got {len(seq)}")
    out = []
    for i, m in enumerate(seq):
        if m is None:
            out.append(None)
        else:
            out.append(frozen_array(check_complex_matrix(f"{name}[{i}]", m, shape)))
    if all(m is None for m in out):
        return None
    return tuple(out)


@dataclass(frozen=True, eq=False)
class ScatteringBlocks:
    """Electromagnetic coupling blocks of a layered stack.

    ``inter_layer[q-1]`` is the K x K transfer from the transmit array of
    layer q to the receive array of layer q+1 (q = 1..Q-1). ``h_ts`` is the
    K x L transmitter-to-first-layer transfer and ``h_sr`` the M x K
    last-layer-to-receiver transfer. ``s_rt`` is the direct
    transmitter-to-receiver leakage (zero when omitted).

    Optional reflection blocks are indexed by coupling region u = 0..Q:
    ``refl_s11[u]`` is the self-coupling of the transmit array of layer u,
    ``refl_s22[u]`` the self-coupling of the receive array of layer u+1, and
    ``refl_s12[u]`` the reverse coupling from that receive array back to the
    transmit array of layer u. Entries outside a region's valid range are
    ignored. The feed-forward path provably never sees the reflections;
    they are carried so the brute-force solver stays faithful.

    ``s_ss_dense``, when present, replaces the structured inter-array matrix
    with an arbitrary dense N x N coupling (long-range coupling). Only the
    brute-force path accepts such instances.
    """

    inter_layer: tuple
    h_ts: np.ndarray
    h_sr: np.ndarray
    s_rt: np.ndarray | None = None
    refl_s11: tuple | None = None
    refl_s22: tuple | None = None
    refl_s12: tuple | None = None
    s_ss_dense: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        h_ts = check_complex_matrix("h_ts", self.h_ts)
        h_sr = check_complex_matrix("h_sr", self.h_sr)
        k = h_ts.shape[0]
        if h_sr.shape[1] != k:
            raise ValueError(
                f"h_sr has {h_sr.shape[1]} columns but h_ts has {k} rows; "
                "both must equal the cells-per-layer count"
            )
        inter = tuple(
            frozen_array(check_complex_matrix(f"inter_layer[{i}]", m, (k, k)))
            for i, m in enumerate(self.inter_layer)
        )
        q = len(inter) + 1
        object.__setattr__(self, "inter_layer", inter)
        object.__setattr__(self, "h_ts", frozen_array(h_ts))
        object.__setattr__(self, "h_sr", frozen_array(h_sr))
        if self.s_rt is not None:
            s_rt = check_complex_matrix("s_rt", self.s_rt, (h_sr.shape[0], h_ts.shape[1]))
            object.__setattr__(self, "s_rt", frozen_array(s_rt))
        for name in ("refl_s11", "refl_s22", "refl_s12"):
            object.__setattr__(
                self, name, _as_optional_matrix_tuple(name, getattr(self, name), q + 1, (k, k))
            )
        if self.s_ss_dense is not None:
            n = 2 * q * k
            dense = check_complex_matrix("s_ss_dense", self.s_ss_dense, (n, n))
            object.__setattr__(self, "s_ss_dense", frozen_array(dense))

    @property
    def num_layers(self):
        return len(self.inter_layer) + 1

    @property
    def cells_per_layer(self):
        return self.h_ts.shape[0]

    @property
    def tx_ports(self):
        return self.h_ts.shape[1]

    @property
    def rx_ports(self):
        return self.h_sr.shape[0]

    def topology(self):
        return SimTopology(self.num_layers, self.cells_per_layer, self.tx_ports, self.rx_ports)

    def s_rt_or_zero(self):
        if self.s_rt is not None:
            return self.s_rt
        return np.zeros((self.rx_ports, self.tx_ports), dtype=np.complex128)

    def _refl(self, which, region):
        seq = getattr(self, which)
        if seq is None:
            return None
        return seq[region]


@dataclass(frozen=True, eq=False)
class GlobalScattering:
    """Full partitioned scattering description of transmitter, stack, receiver.

    Field ``s_xy`` maps incident waves at the ``y`` ports to reflected waves
    at the ``x`` ports, with T = transmitter (L ports), S = stack (N ports),
    R = receiver (M ports).
    """

    s_tt: np.ndarray
    s_ts: np.ndarray
    s_tr: np.ndarray
    s_st: np.ndarray
    s_ss: np.ndarray
    s_sr: np.ndarray
    s_rt: np.ndarray
    s_rs: np.ndarray
    s_rr: np.ndarray

    def __post_init__(self):
        s_ss = check_complex_matrix("s_ss", self.s_ss)
        n = s_ss.shape[0]
        if s_ss.shape != (n, n):
            raise ValueError("s_ss must be square")
        s_st = check_complex_matrix("s_st", self.s_st)
        if s_st.shape[0] != n:
            raise ValueError(f"s_st must have {n} rows, got {s_st.shape[0]}")
        ell = s_st.shape[1]
        s_rs = check_complex_matrix("s_rs", self.s_rs)
        if s_rs.shape[1] != n:
            raise ValueError(f"s_rs must have {n} columns, got {s_rs.shape[1]}")
        m = s_rs.shape[0]
        checked = {
            "s_tt": check_complex_matrix("s_tt", self.s_tt, (ell, ell)),
            "s_ts": check_complex_matrix("s_ts", self.s_ts, (ell, n)),
            "s_tr": check_complex_matrix("s_tr", self.s_tr, (ell, m)),
            "s_st": s_st,
            "s_ss": s_ss,
            "s_sr": check_complex_matrix("s_sr", self.s_sr, (n, m)),
            "s_rt": check_complex_matrix("s_rt", self.s_rt, (m, ell)),
            "s_rs": s_rs,
            "s_rr": check_complex_matrix("s_rr", self.s_rr, (m, m)),
        }
        for name, arr in checked.items():
            object.__setattr__(self, name, frozen_array(arr))

    @property
    def num_sim_ports(self):
        return self.s_ss.shape[0]

    @property
    def tx_ports(self):
        return self.s_st.shape[1]

    @property
    def rx_ports(self):
        return self.s_rs.shape[0]


def assemble_layer_gain(layer_phases, gain):
    """Diagonal K x K response of one layer: gain * diag(exp(j*eta))."""
    eta = check_real_vector("layer_phases", layer_phases)
    gain = check_nonnegative_float("gain", gain)
    return np.diag(gain * np.exp(1j * eta))


def assemble_gamma(ctrl, topo):
    """Interconnection matrix Gamma(eta) of all unit cells, shape N x N.

    Each cell is unilateral: the only nonzero block of layer q maps the
    reflected waves at its receive ports to the incident waves at its
    transmit ports and equals gain * diag(exp(j*eta_q)).
    """
    if ctrl.num_phases != topo.num_phases:
        raise ValueError(
            f"control vector has {ctrl.num_phases} phases, topology needs {topo.num_phases}"
        )
    n = topo.num_sim_ports
    k = topo.cells_per_layer
    gamma = np.zeros((n, n), dtype=np.complex128)
    for q in range(1, topo.num_layers + 1):
        eta = ctrl.phases[topo.layer_phase_slice(q)]
        rows = topo.transmit_slice(q)
        cols = topo.receive_slice(q)
        gamma[rows, cols] = np.diag(ctrl.gain * np.exp(1j * eta))
    return gamma


def assemble_sss(blocks, topo):
    """Inter-array coupling matrix S_ss in layer-wise port order, shape N x N.

    With nearest-neighbor coupling the only nonzero blocks connect adjacent
    arrays: for region q = 1..Q-1 the forward transfer sits at (receive of
    layer q+1, transmit of layer q) with the optional reverse and
    self-coupling blocks around it; region 0 and region Q contribute only
    the self-coupling of the outermost arrays.

    When the blocks carry a dense override it is returned unchanged (after a
    dimension check), bypassing the structured placement.
    """
    _check_blocks_topology(blocks, topo)
    n = topo.num_sim_ports
    if blocks.s_ss_dense is not None:
        if blocks.s_ss_dense.shape != (n, n):
            raise ValueError(
                f"s_ss_dense has shape {blocks.s_ss_dense.shape}, topology needs ({n}, {n})"
            )
        return np.array(blocks.s_ss_dense)
    q_count = topo.num_layers
    s = np.zeros((n, n), dtype=np.complex128)
    for u in range(1, q_count):
        t_u = topo.transmit_slice(u)
        r_next = topo.receive_slice(u + 1)
        s[r_next, t_u] = blocks.inter_layer[u - 1]
        s12 = blocks._refl("refl_s12", u)
        if s12 is not None:
            s[t_u, r_next] = s12
        s11 = blocks._refl("refl_s11", u)
        if s11 is not None:
            s[t_u, t_u] = s11
        s22 = blocks._refl("refl_s22", u)
        if s22 is not None:
            s[r_next, r_next] = s22
    s22_front = blocks._refl("refl_s22", 0)
    if s22_front is not None:
        r1 = topo.receive_slice(1)
        s[r1, r1] = s22_front
    s11_back = blocks._refl("refl_s11", q_count)
    if s11_back is not None:
        t_q = topo.transmit_slice(q_count)
        s[t_q, t_q] = s11_back
    return s


def assemble_global(blocks, topo):
    """Full GlobalScattering with the stack blocks placed at their port ranges.

    The transmitter couples only into the receive array of layer 1 and the
    receiver only out of the transmit array of layer Q; every other external
    block is zero.
    """
    _check_blocks_topology(blocks, topo)
    n = topo.num_sim_ports
    ell = topo.tx_ports
    m = topo.rx_ports
    s_st = np.zeros((n, ell), dtype=np.complex128)
    s_st[topo.receive_slice(1), :] = blocks.h_ts
    s_rs = np.zeros((m, n), dtype=np.complex128)
    s_rs[:, topo.transmit_slice(topo.num_layers)] = blocks.h_sr
    return GlobalScattering(
        s_tt=np.zeros((ell, ell)),
        s_ts=np.zeros((ell, n)),
        s_tr=np.zeros((ell, m)),
        s_st=s_st,
        s_ss=assemble_sss(blocks, topo),
        s_sr=np.zeros((n, m)),
        s_rt=blocks.s_rt_or_zero(),
        s_rs=s_rs,
        s_rr=np.zeros((m, m)),
    )


def _check_blocks_topology(blocks, topo):
    if blocks.num_layers != topo.num_layers:
        raise ValueError(
            f"blocks describe {blocks.num_layers} layers, topology has {topo.num_layers}"
        )
    if blocks.cells_per_layer != topo.cells_per_layer:
        raise ValueError(
            f"blocks describe {blocks.cells_per_layer} cells per layer, "
            f"topology has {topo.cells_per_layer}"
        )
    if blocks.tx_ports != topo.tx_ports or blocks.rx_ports != topo.rx_ports:
        raise ValueError(
            f"blocks describe L={blocks.tx_ports}, M={blocks.rx_ports}; "
            f"topology has L={topo.tx_ports}, M={topo.rx_ports}"
        )
