"""Schmidt decomposition of a sampled joint amplitude.

The continuum decomposition f(t_i, t_s) = sum_k lambda_k zeta_k(t_i)
xi_k(t_s) is obtained from the singular value decomposition of the
quadrature-weighted value matrix.  Singular values are normalized so the
squared coefficients sum to one; the heralded single-photon purity is
then P = sum_k lambda_k^4 and the Schmidt number its reciprocal.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DecompositionError, DegenerateModeWarning, ParameterError
from .formatting import fmt
from .joint_amplitude import JointAmplitude
from .signal_model import TimeGrid

DEGENERACY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SchmidtResult:
    """Normalized Schmidt spectrum and the leading mode functions.

    ``singular_values`` holds the full normalized spectrum (sum of
    squares equal to one); only the first ``len(signal_modes)`` mode
    functions are stored.  Mode rows are orthonormal under the grid
    quadrature and carry the phase convention that the largest-magnitude
    component of each signal mode is positive real.
    """

    singular_values: np.ndarray
    signal_modes: np.ndarray
    idler_modes: np.ndarray
    purity: float
    schmidt_number: float
    tail_mass: float
    axis_i: TimeGrid
    axis_s: TimeGrid

    def __post_init__(self) -> None:
        total = float((self.singular_values**2).sum())
        if abs(total - 1.0) > 1e-9:
            raise ParameterError("normalized Schmidt coefficients must have unit square sum")


def schmidt_decompose(jta: JointAmplitude, k_max: int = 16) -> SchmidtResult:
    """Decompose a joint amplitude into its Schmidt modes.

    Parameters
    ----------
    jta:
        Joint amplitude in either domain.  Must have nonzero norm.
    k_max:
        Number of mode functions to keep.  The Schmidt spectrum itself is
        always computed in full, so ``purity`` never depends on ``k_max``.
    """
    if k_max < 1:
        raise ParameterError("k_max must be at least 1")
    values = np.asarray(jta.values)
    if not values.any():
        raise ParameterError("cannot decompose a joint amplitude with zero norm")
    if np.iscomplexobj(values) and not values.imag.any():
        values = values.real

    dx_i = jta.axis_i.step
    dx_s = jta.axis_s.step
    weighted = values * math.sqrt(dx_i * dx_s)
    try:
        u, s, vh = np.linalg.svd(weighted, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"singular value decomposition failed: {exc}") from exc

    scale = math.sqrt(float((s**2).sum()))
    coeffs = s / scale
    purity = float((coeffs**4).sum())

    k = min(k_max, coeffs.size)
    signal = np.array(vh[:k]) / math.sqrt(dx_s)
    idler = np.array(u[:, :k].T) / math.sqrt(dx_i)
    for mode in range(k):
        top = np.argmax(np.abs(signal[mode]))
        pivot = signal[mode][top]
        magnitude = abs(pivot)
        if magnitude > 0:
            rotation = np.conj(pivot) / magnitude
            signal[mode] = signal[mode] * rotation
            idler[mode] = idler[mode] * np.conj(rotation)

    return SchmidtResult(
        singular_values=coeffs,
        signal_modes=signal,
        idler_modes=idler,
        purity=purity,
        schmidt_number=1.0 / purity,
        tail_mass=float((coeffs[k:] ** 2).sum()),
        axis_i=jta.axis_i,
        axis_s=jta.axis_s,
    )


def purity_of(jta: JointAmplitude) -> float:
    """Heralded single-photon purity sum_k lambda_k^4 of a joint amplitude."""
    return schmidt_decompose(jta, k_max=1).purity


def fundamental_kernel(result: SchmidtResult) -> np.ndarray:
    """Signal-side fundamental mode, the natural memory read-in kernel.

    When the two leading coefficients are degenerate within 1e-12 the
    choice of fundamental mode is arbitrary; the lower index is returned
    and a :class:`DegenerateModeWarning` is emitted.
    """
    coeffs = result.singular_values
    if coeffs.size >= 2 and abs(float(coeffs[0]) - float(coeffs[1])) < DEGENERACY_TOLERANCE:
        warnings.warn(
            "leading Schmidt coefficients are degenerate; returning the lower mode index",
            DegenerateModeWarning,
            stacklevel=2,
        )
    return result.signal_modes[0]


def schmidt_result_to_dict(result: SchmidtResult, n_values: int | None = None) -> dict:
    """JSON-friendly summary of a Schmidt decomposition."""
    coeffs = result.singular_values
    if n_values is not None:
        coeffs = coeffs[:n_values]
    return {
        "lambda_sq": [float(c) ** 2 for c in coeffs],
        "purity": result.purity,
        "schmidt_number": result.schmidt_number,
        "tail_mass": result.tail_mass,
        "n_modes_stored": int(result.signal_modes.shape[0]),
    }


def write_modes_csv(result: SchmidtResult, path: str, n_modes: int | None = None) -> None:
    """Write the signal-side mode functions as CSV columns."""
    k = result.signal_modes.shape[0] if n_modes is None else min(n_modes, result.signal_modes.shape[0])
    axis = result.axis_s.points
    header = ["t_s"]
    for mode in range(k):
        header.extend([f"mode{mode}_re", f"mode{mode}_im"])
    with open(path, "w", newline="") as handle:
        handle.write(",".join(header) + "\n")
        modes = np.asarray(result.signal_modes[:k], dtype=complex)
        for col, t in enumerate(axis):
            cells = [fmt(t)]
            for mode in range(k):
                cells.append(fmt(modes[mode, col].real))
                cells.append(fmt(modes[mode, col].imag))
            handle.write(",".join(cells) + "\n")
