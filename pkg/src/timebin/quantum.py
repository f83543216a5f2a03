"""Exact two-qubit state algebra for time-bin qubits.

The two qubits are the early/late time bins of the signal and idler
photons, ordered |00>, |01>, |10>, |11> with the signal bin first.
Everything here is plain numpy on 4x4 complex matrices; all functions are
pure and safe to call from multiple threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BASIS_LABELS",
    "DensityMatrix2Q",
    "bell_phi_plus",
    "time_bin_state",
    "pure_to_dm",
    "projector",
    "measurement_operator",
    "concurrence",
    "fidelity_to_pure",
    "chsh_bounds",
    "validate_density_matrix",
]

#: Single-qubit analysis bases: the two time bins and the two
#: equal-weight superpositions (0 and 90 degree interferometer settings).
BASIS_LABELS = ("Z0", "Z1", "X+", "Y+")

_SQ2 = np.sqrt(2.0)

_BASIS_KETS = {
    "Z0": np.array([1.0, 0.0], dtype=complex),
    "Z1": np.array([0.0, 1.0], dtype=complex),
    "X+": np.array([1.0, 1.0], dtype=complex) / _SQ2,
    "Y+": np.array([1.0, 1.0j], dtype=complex) / _SQ2,
}

_SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_YY = np.kron(_SIGMA_Y, _SIGMA_Y)


def bell_phi_plus() -> np.ndarray:
    """Return the maximally entangled state (|00> + |11>)/sqrt(2)."""
    return np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / _SQ2


def time_bin_state(phi_p: float) -> np.ndarray:
    """Two-photon state (|00> + e^{i phi_p}|11>)/sqrt(2).

    ``phi_p`` is the pump interferometer phase in radians; it only enters
    as the relative phase of the late-late amplitude.
    """
    if not np.isfinite(phi_p):
        raise ValueError("phi_p must be finite")
    return np.array([1.0, 0.0, 0.0, np.exp(1j * phi_p)], dtype=complex) / _SQ2


def pure_to_dm(psi: np.ndarray) -> np.ndarray:
    """Outer product |psi><psi| as a 4x4 array."""
    psi = np.asarray(psi, dtype=complex).reshape(4)
    return np.outer(psi, psi.conj())


def projector(label: str) -> np.ndarray:
    """Rank-1 single-qubit projector for one of the four analysis bases."""
    try:
        ket = _BASIS_KETS[label]
    except KeyError:
        raise ValueError(f"unknown basis label {label!r}; expected one of {BASIS_LABELS}")
    return np.outer(ket, ket.conj())


def measurement_operator(basis_s: str, basis_i: str) -> np.ndarray:
    """Tensor-product projector Pi_s (x) Pi_i for a correlation measurement.

    The result is Hermitian, idempotent and has unit trace.
    """
    return np.kron(projector(basis_s), projector(basis_i))


def validate_density_matrix(
    m: np.ndarray,
    herm_atol: float = 1e-12,
    trace_atol: float = 1e-12,
    eig_floor: float = -1e-9,
) -> None:
    """Raise ValueError unless ``m`` is a physical two-qubit density matrix.

    Checks finiteness, Hermiticity, unit trace and positivity, each to the
    given tolerance.  Eigenvalues down to ``eig_floor`` are tolerated as
    numerical rounding; anything lower rejects the matrix.
    """
    m = np.asarray(m)
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise ValueError("density matrix has non-finite entries")
    herm_dev = np.max(np.abs(m - m.conj().T))
    if herm_dev > herm_atol:
        raise ValueError(f"matrix is not Hermitian (max deviation {herm_dev:.3g})")
    tr = np.trace(m)
    if abs(tr - 1.0) > trace_atol:
        raise ValueError(f"trace {tr:.6g} is not 1 within {trace_atol:g}")
    lo = np.linalg.eigvalsh((m + m.conj().T) / 2).min()
    if lo < eig_floor:
        raise ValueError(f"matrix is not positive (smallest eigenvalue {lo:.3g})")


@dataclass(frozen=True)
class DensityMatrix2Q:
    """Validated 4x4 density matrix of the two time-bin qubits.

    Construct via :meth:`from_matrix`, which enforces Hermiticity, unit
    trace and positivity.  ``from_matrix(..., fix=True)`` symmetrizes,
    clamps small negative eigenvalues and renormalizes first, which is the
    appropriate entry point for matrices coming out of floating-point
    pipelines.
    """

    matrix: np.ndarray

    @classmethod
    def from_matrix(cls, m: np.ndarray, fix: bool = False) -> "DensityMatrix2Q":
        m = np.asarray(m, dtype=complex).reshape(4, 4)
        if fix:
            m = (m + m.conj().T) / 2
            vals, vecs = np.linalg.eigh(m)
            vals = np.clip(vals, 0.0, None)
            m = (vecs * vals) @ vecs.conj().T
            m = m / np.trace(m).real
        validate_density_matrix(m)
        m = m.copy()
        m.setflags(write=False)
        return cls(m)

    def to_json(self) -> str:
        """Serialize as a JSON object with ``re`` and ``im`` 4x4 arrays.

        Round-trips bit-exactly for finite doubles (json uses repr).
        """
        return json.dumps({"re": self.matrix.real.tolist(), "im": self.matrix.imag.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix2Q":
        obj = json.loads(text)
        m = np.array(obj["re"], dtype=float) + 1j * np.array(obj["im"], dtype=float)
        return cls.from_matrix(m)


def _as_matrix(rho, validate: bool, trace_atol: float) -> np.ndarray:
    if isinstance(rho, DensityMatrix2Q):
        return rho.matrix
    m = np.asarray(rho, dtype=complex).reshape(4, 4)
    if validate:
        # Experimental matrices reported to limited precision can miss unit
        # trace by ~1e-3; metrics are evaluated on the matrix as given.
        validate_density_matrix(m, herm_atol=1e-9, trace_atol=trace_atol)
    return m


def concurrence(rho, validate: bool = True, trace_atol: float = 0.01) -> float:
    """Wootters concurrence C of a two-qubit density matrix.

    C = max(0, l1 - l2 - l3 - l4) with l_i the decreasing square roots of
    the eigenvalues of rho (sy x sy) rho* (sy x sy).  The intermediate
    product is non-Hermitian, so its eigenvalues are computed directly and
    tiny negative real parts are clamped before the square root.
    """
    m = _as_matrix(rho, validate, trace_atol)
    r = m @ _YY @ m.conj() @ _YY
    vals = np.linalg.eigvals(r).real
    lam = np.sort(np.sqrt(np.clip(vals, 0.0, None)))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def fidelity_to_pure(rho, psi: np.ndarray, validate: bool = True, trace_atol: float = 0.01) -> float:
    """Overlap <psi| rho |psi> of a density matrix with a pure target."""
    m = _as_matrix(rho, validate, trace_atol)
    psi = np.asarray(psi, dtype=complex).reshape(4)
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > 1e-12:
        raise ValueError(f"target state is not normalized (norm {nrm:.6g})")
    return float(np.real(psi.conj() @ m @ psi))


def chsh_bounds(concurrence_value: float) -> tuple[float, float]:
    """Range of the CHSH parameter |S| attainable at a given concurrence.

    Returns (2*sqrt(2)*C, 2*sqrt(1+C^2)): the guaranteed-achievable value
    and the ceiling over all states with concurrence C.  A violation of
    the classical bound 2 is guaranteed whenever C > 1/sqrt(2).
    """
    c = float(concurrence_value)
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"concurrence must lie in [0, 1], got {c}")
    return 2.0 * np.sqrt(2.0) * c, 2.0 * np.sqrt(1.0 + c * c)
