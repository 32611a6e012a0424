"""Operator 2-norms via power iteration, for dense and convolution layers.

Power iteration runs on W^T W with a deterministic start: the normalized
all-ones vector, widened into a small block by fixed companion directions
(deterministic sine patterns, orthonormalized). The block is the fallback
perturbation generalized: a start orthogonal to the top singular vector or
a nearly degenerate top pair, both of which stall single-vector iteration,
are absorbed by the block's Rayleigh-Ritz estimate. Iteration stops when
the relative change of the norm estimate drops below ``tol`` or after
``ITERATION_CAP`` block steps; the cap raises, carrying the best estimate.
The returned estimate comes with its witness vector and satisfies
value = ||A witness|| / ||witness||, a constructive lower bound on the
true norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConvergenceFailureError, InvalidArgumentError

ITERATION_CAP = 10_000
DEFAULT_TOL = 1e-9
BLOCK_SIZE = 4


@dataclass(frozen=True)
class SpectralEstimate:
    """Power-iteration result: norm estimate plus its Rayleigh witness."""

    value: float
    witness: np.ndarray
    iterations: int


def _start_block(n: int) -> np.ndarray:
    """Deterministic orthonormal start block led by the all-ones direction."""
    b = min(BLOCK_SIZE, n)
    idx = np.arange(1, n + 1, dtype=np.float64)
    cols = [np.ones(n)]
    for k in range(1, b):
        cols.append(np.sin(idx * float(k)))
    q, _ = np.linalg.qr(np.stack(cols, axis=1))
    return q


def _power_iteration(apply_fwd, apply_adj, n_in: int, tol: float) -> SpectralEstimate:
    """Block power iteration on A^T A given column-stacked applications.

    ``apply_fwd``/``apply_adj`` map (n_in, b) -> (n_out, b) and back.
    """
    if not tol > 0.0:
        raise InvalidArgumentError("tol must be positive")
    x = _start_block(n_in)
    previous = None
    for iteration in range(1, ITERATION_CAP + 1):
        z = apply_fwd(x)
        gram = z.T @ z
        evals, evecs = np.linalg.eigh(gram)
        sigma = float(np.sqrt(max(float(evals[-1]), 0.0)))
        if sigma == 0.0:
            # The whole block is in the null space; exact for this witness
            # (and for the operator if it is identically zero).
            return SpectralEstimate(0.0, x[:, 0], iteration)
        if previous is not None and abs(sigma - previous) <= tol * sigma:
            witness = x @ evecs[:, -1]
            witness = witness / np.linalg.norm(witness)
            value = float(np.linalg.norm(apply_fwd(witness[:, None])))
            return SpectralEstimate(value, witness, iteration)
        previous = sigma
        y = apply_adj(z)
        x, _ = np.linalg.qr(y)
    raise ConvergenceFailureError(
        f"power iteration did not converge to tol={tol} within {ITERATION_CAP} iterations",
        best_estimate=previous,
        witness=x[:, 0],
    )


def spectral_norm_dense(w, tol: float = DEFAULT_TOL) -> SpectralEstimate:
    """Largest singular value of a dense matrix by power iteration."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise InvalidArgumentError("expected a 2-D matrix")
    if not np.all(np.isfinite(w)):
        raise InvalidArgumentError("matrix must be finite")
    return _power_iteration(lambda x: w @ x, lambda z: w.T @ z, w.shape[1], tol)


class ConvOperator:
    """The linear map of a strided, zero-padded 2-D convolution layer.

    Weights have shape (out_channels, in_channels, k, k); inputs are
    (in_channels, height, width). ``adjoint`` is the exact transpose of
    ``forward`` (scatter-add of kernel contributions), so the pair drives
    power iteration to the layer's true operator 2-norm.
    """

    def __init__(self, weight: np.ndarray, stride: int, padding: int, input_shape):
        weight = np.asarray(weight, dtype=np.float64)
        if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
            raise InvalidArgumentError("conv weight must have shape (out, in, k, k)")
        if stride < 1 or padding < 0:
            raise InvalidArgumentError("stride must be >= 1 and padding >= 0")
        c, h, w = input_shape
        if weight.shape[1] != c:
            raise InvalidArgumentError(
                f"conv expects {weight.shape[1]} input channels, input has {c}"
            )
        k = weight.shape[2]
        h_out = (h + 2 * padding - k) // stride + 1
        w_out = (w + 2 * padding - k) // stride + 1
        if h_out < 1 or w_out < 1 or k > h + 2 * padding or k > w + 2 * padding:
            raise InvalidArgumentError("kernel does not fit the padded input")
        self.weight = weight
        self.stride = stride
        self.padding = padding
        self.input_shape = (c, h, w)
        self.output_shape = (weight.shape[0], h_out, w_out)

    def forward(self, x: np.ndarray) -> np.ndarray:
        k = self.weight.shape[2]
        s = self.stride
        p = self.padding
        xp = np.pad(x, ((0, 0), (p, p), (p, p)))
        win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::s, ::s]
        win = win[:, : self.output_shape[1], : self.output_shape[2]]
        # (out, in, k, k) x (in, Ho, Wo, k, k) -> (out, Ho, Wo)
        return np.tensordot(self.weight, win, axes=([1, 2, 3], [0, 3, 4]))

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        c, h, w = self.input_shape
        _, h_out, w_out = self.output_shape
        k = self.weight.shape[2]
        s = self.stride
        p = self.padding
        # (out, Ho, Wo) x (out, in, k, k) -> (Ho, Wo, in, k, k)
        contrib = np.tensordot(y, self.weight, axes=([0], [0]))
        grad = np.zeros((c, h + 2 * p, w + 2 * p))
        for i in range(k):
            for j in range(k):
                grad[:, i : i + s * h_out : s, j : j + s * w_out : s] += contrib[
                    :, :, :, i, j
                ].transpose(2, 0, 1)
        return grad[:, p : p + h, p : p + w]

    def materialize(self) -> np.ndarray:
        """Explicit matrix of the operator (for small oracle checks)."""
        n_in = int(np.prod(self.input_shape))
        n_out = int(np.prod(self.output_shape))
        m = np.empty((n_out, n_in))
        basis = np.zeros(n_in)
        for j in range(n_in):
            basis[j] = 1.0
            m[:, j] = self.forward(basis.reshape(self.input_shape)).ravel()
            basis[j] = 0.0
        return m


def spectral_norm_conv(
    weight, stride: int, padding: int, input_shape, tol: float = DEFAULT_TOL
) -> SpectralEstimate:
    """Operator 2-norm of a convolution layer by power iteration.

    This is the exact norm of the strided, zero-padded linear map (up to
    the iteration tolerance), not an analytic kernel-norm bound. Power
    iteration alternates the convolution and its adjoint (transposed
    convolution).
    """
    op = ConvOperator(weight, stride, padding, input_shape)
    if not np.all(np.isfinite(op.weight)):
        raise InvalidArgumentError("conv weight must be finite")
    n_in = int(np.prod(op.input_shape))
    n_out = int(np.prod(op.output_shape))

    def fwd(x_cols):
        out = np.empty((n_out, x_cols.shape[1]))
        for j in range(x_cols.shape[1]):
            out[:, j] = op.forward(x_cols[:, j].reshape(op.input_shape)).ravel()
        return out

    def adj(z_cols):
        out = np.empty((n_in, z_cols.shape[1]))
        for j in range(z_cols.shape[1]):
            out[:, j] = op.adjoint(z_cols[:, j].reshape(op.output_shape)).ravel()
        return out

    est = _power_iteration(fwd, adj, n_in, tol)
    return SpectralEstimate(est.value, est.witness.reshape(op.input_shape), est.iterations)
