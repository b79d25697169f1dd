"""Recursive feed-forward evaluation of the layered stack.

Because every cell is unilateral and coupling is nearest-neighbor, the field
moves strictly forward: the transfer into layer q is
T_c(1) = H_TS, T_c(q) = S21(q-1) G(q-1) T_c(q-1), the transfer out of the
last layer is H2 = G(Q) T_c(Q), and the end-to-end matrix is H_SR H2. No
matrix inversion appears anywhere on this path, and products are associated
right-to-left so each recursion step costs one K x K by K x L product.

Backward transfers T_r(q) map a perturbation injected at the transmit ports
of layer q to the transmit ports of the last layer:
T_r(Q) = I, T_r(q) = T_r(q+1) G(q+1) S21(q). Together with the forward
transfers they factorize the sensitivity of H2 to any single cell.
"""

from dataclasses import dataclass

import numpy as np

from .counting import col_scale, mm, row_scale
from ._validation import frozen_array

__all__ = [
    "TransferSet",
    "gain_diagonals",
    "forward_transfers",
    "backward_transfers",
    "h2",
    "e2e_structured",
]


def _check_structured(blocks):
    if blocks.s_ss_dense is not None:
        raise ValueError(
            "blocks carry a dense coupling override; the feed-forward path "
            "only supports nearest-neighbor coupling (use the oracle path)"
        )


def gain_diagonals(blocks, ctrl):
    """Per-layer diagonal of G(q) as a list of K-vectors gain*exp(j*eta_q)."""
    k = blocks.cells_per_layer
    q = blocks.num_layers
    if ctrl.num_phases != q * k:
        raise ValueError(
            f"control vector has {ctrl.num_phases} phases, blocks need {q * k}"
        )
    return [ctrl.gain * np.exp(1j * ctrl.phases[i * k : (i + 1) * k]) for i in range(q)]


def forward_transfers(blocks, ctrl, counter=None):
    """Forward transfers [T_c(1), ..., T_c(Q)], each K x L."""
    _check_structured(blocks)
    diagonals = gain_diagonals(blocks, ctrl)
    return _forward_from_diagonals(blocks, diagonals, counter)


def _forward_from_diagonals(blocks, diagonals, counter=None):
    tc = [np.asarray(blocks.h_ts)]
    for i, s21 in enumerate(blocks.inter_layer):
        tc.append(mm(s21, row_scale(diagonals[i], tc[-1], counter), counter))
    return tc


def backward_transfers(blocks, ctrl, counter=None):
    """Backward transfers [T_r(1), ..., T_r(Q)], each K x K; T_r(Q) = I."""
    _check_structured(blocks)
    diagonals = gain_diagonals(blocks, ctrl)
    k = blocks.cells_per_layer
    tr = [np.eye(k, dtype=np.complex128)]
    for i in range(blocks.num_layers - 2, -1, -1):
        tr.append(mm(col_scale(tr[-1], diagonals[i + 1], counter), blocks.inter_layer[i], counter))
    tr.reverse()
    return tr


def h2(blocks, ctrl, counter=None):
    """Transfer from the transmitter to the last layer's transmit ports, K x L."""
    _check_structured(blocks)
    diagonals = gain_diagonals(blocks, ctrl)
    tc = _forward_from_diagonals(blocks, diagonals, counter)
    return row_scale(diagonals[-1], tc[-1], counter)


def e2e_structured(blocks, ctrl, counter=None):
    """End-to-end M x L transfer H_SR H2, computed without any inversion.

    Any direct transmitter-receiver leakage in the blocks is ignored here,
    matching the assumption under which the feed-forward form holds.
    """
    return mm(blocks.h_sr, h2(blocks, ctrl, counter), counter)


@dataclass(frozen=True, eq=False)
class TransferSet:
    """Forward/backward transfers, H2, and the end-to-end matrix of one control.

    Built once per control vector; a phase change requires a rebuild. The
    telescoping identity T_r(q) G(q) T_c(q) = H2 holds for every layer q.
    """

    forward: tuple
    backward: tuple
    h2: np.ndarray
    e2e: np.ndarray

    @classmethod
    def build(cls, blocks, ctrl, counter=None):
        _check_structured(blocks)
        diagonals = gain_diagonals(blocks, ctrl)
        tc = _forward_from_diagonals(blocks, diagonals, counter)
        tr = backward_transfers(blocks, ctrl, counter)
        h2_mat = row_scale(diagonals[-1], tc[-1], counter)
        e2e = mm(blocks.h_sr, h2_mat, counter)
        return cls(
            forward=tuple(frozen_array(m) for m in tc),
            backward=tuple(frozen_array(m) for m in tr),
            h2=frozen_array(h2_mat),
            e2e=frozen_array(e2e),
        )
