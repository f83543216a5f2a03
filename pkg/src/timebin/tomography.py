"""Two-qubit state reconstruction from coincidence counts.

Sixteen correlation measurements between the bases {Z0, Z1, X+, Y+} on
each arm are assembled from four interferometer phase settings (the
calibrated 0/90-degree dials on signal and idler), reconstructed by
maximum likelihood over a Cholesky parametrization, and error bars are
attached by Monte-Carlo resampling of the counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from . import quantum
from .quantum import BASIS_LABELS, DensityMatrix2Q, measurement_operator

__all__ = [
    "SETTINGS",
    "MeasurementRecord",
    "TomographyResult",
    "counts_from_phase_settings",
    "setting_phases",
    "expected_joint_counts",
    "sample_joint_counts",
    "linear_inversion",
    "project_to_physical",
    "mle_reconstruct",
    "bootstrap_errors",
]

#: The four (signal dial, idler dial) settings in degrees; 0 selects the
#: X+ analysis basis on that arm, 90 selects Y+.
SETTINGS = ((0, 0), (0, 90), (90, 0), (90, 90))

_DIAL_BASIS = {0: "X+", 90: "Y+"}


def setting_phases(dial_s: int, dial_i: int) -> tuple[float, float]:
    """Raw interferometer phases (phi_s, phi_i) realizing a dial setting.

    Dials are calibrated so that (0, 0) sits on the coincidence-fringe
    maximum of the target state; with the fringe law
    1 - V cos(phi_s + phi_i - phi_p) and phi_p = 0 this places the signal
    phase at pi plus the dial.  Under that convention both arms project
    onto X+ (dial 0) or Y+ (dial 90) in the central slot.
    """
    if dial_s not in _DIAL_BASIS or dial_i not in _DIAL_BASIS:
        raise ValueError(f"dials must be 0 or 90 degrees, got {(dial_s, dial_i)}")
    return np.pi + np.deg2rad(dial_s), np.deg2rad(dial_i)


@dataclass(frozen=True)
class MeasurementRecord:
    """The 16 tomography counts with integration metadata.

    ``counts`` maps (signal basis, idler basis) to a non-negative integer;
    all 16 combinations must be present.  ``integration_times`` carries
    the accumulated seconds behind each entry.
    """

    counts: dict
    integration_times: dict = field(default_factory=dict)
    provenance: str = ""

    def __post_init__(self):
        expected = {(a, b) for a in BASIS_LABELS for b in BASIS_LABELS}
        got = set(self.counts)
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise ValueError(f"record must hold all 16 basis pairs exactly once; "
                             f"missing {missing}, unexpected {extra}")
        for key, n in self.counts.items():
            if n < 0 or int(n) != n:
                raise ValueError(f"count for {key} must be a non-negative integer, got {n}")

    def count_vector(self) -> np.ndarray:
        return np.array([self.counts[k] for k in _record_keys()], dtype=float)

    def swapped(self) -> "MeasurementRecord":
        """Record with the signal and idler roles exchanged."""
        return MeasurementRecord(
            counts={(b, a): n for (a, b), n in self.counts.items()},
            integration_times={(b, a): t for (a, b), t in self.integration_times.items()},
            provenance=self.provenance + " (arms swapped)")

    def to_json(self) -> str:
        return json.dumps({
            "counts": {f"{a},{b}": int(n) for (a, b), n in sorted(self.counts.items())},
            "integration_times": {f"{a},{b}": t for (a, b), t
                                  in sorted(self.integration_times.items())},
            "provenance": self.provenance,
        })

    @classmethod
    def from_json(cls, text: str) -> "MeasurementRecord":
        obj = json.loads(text)
        counts = {tuple(k.split(",")): v for k, v in obj["counts"].items()}
        times = {tuple(k.split(",")): v for k, v in obj.get("integration_times", {}).items()}
        return cls(counts=counts, integration_times=times,
                   provenance=obj.get("provenance", ""))


def _record_keys():
    return [(a, b) for a in BASIS_LABELS for b in BASIS_LABELS]


def _operators() -> np.ndarray:
    return np.stack([measurement_operator(a, b) for a, b in _record_keys()])


def counts_from_phase_settings(setting_counts: dict, integration_time: float = 1.0,
                               provenance: str = "") -> MeasurementRecord:
    """Assemble the 16 tomography counts from four phase-setting runs.

    ``setting_counts`` maps each dial setting in :data:`SETTINGS` to the
    3x3 joint-slot coincidence table of that run (slots 0/1/2 = short/
    central/long on each arm).  The slot table factorizes per arm:

    * corner slots measure the time basis (slot 0 -> Z0, slot 2 -> Z1),
    * the central slot measures the dial's superposition basis,

    so slot (0,1) at idler dial 0 contributes to (Z0, X+), slot (1,1) to
    (X+, X+), and so on.  Per-pair slot weights are 1/16 for corner-
    corner, 1/8 for mixed and 1/4 for central-central entries; summing
    corners over all four settings and mixed entries over the two
    settings sharing the relevant dial makes every accumulated entry
    carry the same effective weight, so a single shared normalization
    applies to all 16 counts.
    """
    missing = [s for s in SETTINGS if s not in setting_counts]
    if missing:
        raise ValueError(f"missing slot data for settings {missing}")
    counts = {k: 0 for k in _record_keys()}
    times = {k: 0.0 for k in _record_keys()}
    slot_z = {0: "Z0", 2: "Z1"}
    for (dial_s, dial_i) in SETTINGS:
        joint = np.asarray(setting_counts[(dial_s, dial_i)])
        if joint.shape != (3, 3):
            raise ValueError(f"setting {(dial_s, dial_i)} must provide a 3x3 slot table, "
                             f"got shape {joint.shape}")
        sup_s = _DIAL_BASIS[dial_s]
        sup_i = _DIAL_BASIS[dial_i]
        for s_slot in (0, 2):
            for i_slot in (0, 2):
                counts[(slot_z[s_slot], slot_z[i_slot])] += int(joint[s_slot, i_slot])
                times[(slot_z[s_slot], slot_z[i_slot])] += integration_time
        for s_slot in (0, 2):
            counts[(slot_z[s_slot], sup_i)] += int(joint[s_slot, 1])
            times[(slot_z[s_slot], sup_i)] += integration_time
        for i_slot in (0, 2):
            counts[(sup_s, slot_z[i_slot])] += int(joint[1, i_slot])
            times[(sup_s, slot_z[i_slot])] += integration_time
        counts[(sup_s, sup_i)] += int(joint[1, 1])
        times[(sup_s, sup_i)] += integration_time
    return MeasurementRecord(counts=counts, integration_times=times,
                             provenance=provenance or "four-setting slot data")


def expected_joint_counts(n_pairs: float, dial_s: int, dial_i: int,
                          v0: float = 1.0, accidentals_per_slot: float = 0.0) -> np.ndarray:
    """Mean 3x3 joint-slot table for a fringe-max-calibrated pair source.

    ``n_pairs`` is the number of created pairs reaching the analysis
    stage during the run; the monitored-port weights of the slot
    distribution apply on top.  A flat accidental floor can be added to
    every slot.
    """
    phi_s, phi_i = setting_phases(dial_s, dial_i)
    from .simulate import joint_slot_distribution
    dist = joint_slot_distribution(0.0, phi_s, phi_i, v0)
    return n_pairs * dist.joint + accidentals_per_slot


def sample_joint_counts(rng, n_pairs: float, dial_s: int, dial_i: int,
                        v0: float = 1.0, accidentals_per_slot: float = 0.0) -> np.ndarray:
    """Poisson sample of :func:`expected_joint_counts`."""
    return rng.poisson(expected_joint_counts(n_pairs, dial_s, dial_i, v0,
                                             accidentals_per_slot))


@dataclass(frozen=True)
class TomographyResult:
    """Reconstructed state, figures of merit and optimizer diagnostics."""

    rho: DensityMatrix2Q
    log_likelihood: float
    concurrence: float
    fidelity: float
    chsh_lower: float
    chsh_upper: float
    iterations: int
    converged: bool
    errors: dict | None = None        # metric -> {"mean": .., "std": ..}
    n_replicas: int = 0
    n_replicas_dropped: int = 0
    low_precision: bool = False

    def to_json(self) -> str:
        return json.dumps({
            "rho": json.loads(self.rho.to_json()),
            "log_likelihood": self.log_likelihood,
            "concurrence": self.concurrence,
            "fidelity_phi_plus": self.fidelity,
            "chsh_lower": self.chsh_lower,
            "chsh_upper": self.chsh_upper,
            "diagnostics": {"iterations": self.iterations,
                            "converged": self.converged,
                            "n_replicas": self.n_replicas,
                            "n_replicas_dropped": self.n_replicas_dropped,
                            "low_precision": self.low_precision},
            "errors": self.errors,
        })


def linear_inversion(record: MeasurementRecord) -> np.ndarray:
    """Direct linear solve of tr(rho Pi_k) = n_k / N; may be unphysical.

    The shared scale N/4 equals the summed time-basis counts (the four
    Z x Z projectors sum to the identity).  The 16 projectors are
    informationally complete, so the 16x16 system is well conditioned;
    a singular system falls back to the maximally mixed state.
    """
    n = record.count_vector()
    scale = sum(record.counts[(a, b)] for a in ("Z0", "Z1") for b in ("Z0", "Z1"))
    if scale <= 0:
        return np.eye(4, dtype=complex) / 4.0
    p = n / scale
    ops = _operators()
    # Expand rho over the Hermitian basis made of the operators' real
    # structure: solve for 16 real parameters via vectorized projectors.
    basis = _hermitian_basis()
    design = np.array([[np.real(np.trace(op @ h)) for h in basis] for op in ops])
    try:
        coef, *_ = np.linalg.lstsq(design, p, rcond=None)
    except np.linalg.LinAlgError:
        return np.eye(4, dtype=complex) / 4.0
    rho = sum(c * h for c, h in zip(coef, basis))
    return np.asarray(rho, dtype=complex)


def _hermitian_basis():
    pauli = [np.eye(2, dtype=complex),
             np.array([[0, 1], [1, 0]], dtype=complex),
             np.array([[0, -1j], [1j, 0]], dtype=complex),
             np.array([[1, 0], [0, -1]], dtype=complex)]
    return [np.kron(a, b) / 4.0 for a in pauli for b in pauli]


def project_to_physical(m: np.ndarray) -> np.ndarray:
    """Nearest-physical cleanup: Hermitize, clamp eigenvalues, renormalize."""
    m = (m + m.conj().T) / 2
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    if vals.sum() <= 0:
        return np.eye(4, dtype=complex) / 4.0
    rho = (vecs * vals) @ vecs.conj().T
    return rho / np.trace(rho).real


_TRIL = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)]


def _t_matrix(t: np.ndarray) -> np.ndarray:
    T = np.zeros((4, 4), dtype=complex)
    T[np.diag_indices(4)] = t[:4]
    for k, (r, c) in enumerate(_TRIL):
        T[r, c] = t[4 + 2 * k] + 1j * t[5 + 2 * k]
    return T


def _rho_from_params(t: np.ndarray) -> np.ndarray:
    T = _t_matrix(t)
    rho = T @ T.conj().T
    tr = np.trace(rho).real
    if tr <= 0:
        return np.eye(4, dtype=complex) / 4.0
    return rho / tr


def _params_from_rho(rho: np.ndarray) -> np.ndarray:
    # Ridge keeps the Cholesky factor finite for boundary (rank-deficient)
    # seeds; the optimizer can still walk back to the boundary.
    rho = project_to_physical(rho)
    rho = 0.999 * rho + 0.001 * np.eye(4) / 4.0
    T = np.linalg.cholesky(rho)
    t = np.zeros(16)
    t[:4] = np.real(np.diag(T))
    for k, (r, c) in enumerate(_TRIL):
        t[4 + 2 * k] = T[r, c].real
        t[5 + 2 * k] = T[r, c].imag
    return t


def _poisson_nll(t, ops, counts):
    rho = _rho_from_params(t)
    p = np.einsum("kij,ji->k", ops, rho).real
    p = np.clip(p, 1e-12, None)
    scale = counts.sum() / p.sum()
    mean = scale * p
    return -float(np.sum(counts * np.log(mean) - mean))


def _poisson_nll_and_grad(t, ops, counts):
    """Objective plus its analytic gradient in the 16 Cholesky parameters.

    With the scale profiled out the objective is
    -sum(n_k log p_k) + C log(sum p_k) + const, so the Hermitian gradient
    with respect to rho is sum_k (C/P - n_k/p_k) Pi_k, mapped back through
    rho = T T^dag / tr and the triangular layout of T.
    """
    T = _t_matrix(t)
    a_mat = T @ T.conj().T
    tr = np.trace(a_mat).real
    if tr <= 0:
        return _poisson_nll(t, ops, counts), np.zeros_like(t)
    rho = a_mat / tr
    p_raw = np.einsum("kij,ji->k", ops, rho).real
    p = np.clip(p_raw, 1e-12, None)
    total = counts.sum()
    psum = p.sum()
    nll = -float(np.sum(counts * np.log(total / psum * p) - total / psum * p))

    w = np.where(p_raw > 1e-12, total / psum - counts / p, 0.0)
    h0 = np.einsum("k,kij->ij", w, ops)
    h = (h0 - np.trace(h0 @ rho).real * np.eye(4)) / tr
    m = 2.0 * (h @ T)
    grad = np.zeros_like(t)
    grad[:4] = np.real(np.diag(m))
    for k, (r, c) in enumerate(_TRIL):
        grad[4 + 2 * k] = m[r, c].real
        grad[5 + 2 * k] = m[r, c].imag
    return nll, grad


def mle_reconstruct(record: MeasurementRecord, max_iter: int = 2000) -> TomographyResult:
    """Maximum-likelihood density matrix from a 16-count record.

    rho is parametrized as T T^dag / tr(T T^dag) with T a lower-triangular
    Cholesky factor (16 real parameters), so every candidate is physical
    by construction.
    The objective is the Poisson log-likelihood with the overall scale
    profiled out analytically.  Non-convergence is flagged in the result,
    never silent.
    """
    counts = record.count_vector()
    if counts.sum() <= 0:
        raise ValueError("record has no counts")
    ops = _operators()
    t0 = _params_from_rho(linear_inversion(record))
    res = minimize(_poisson_nll_and_grad, t0, args=(ops, counts), jac=True,
                   method="L-BFGS-B",
                   options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-8})
    rho = DensityMatrix2Q.from_matrix(_rho_from_params(res.x), fix=True)
    c = quantum.concurrence(rho)
    f = quantum.fidelity_to_pure(rho, quantum.bell_phi_plus())
    lo, hi = quantum.chsh_bounds(c)
    return TomographyResult(
        rho=rho,
        log_likelihood=-res.fun,
        concurrence=c,
        fidelity=f,
        chsh_lower=lo,
        chsh_upper=hi,
        iterations=int(res.nit),
        converged=bool(res.success),
    )


def bootstrap_errors(record: MeasurementRecord, n_replicas: int = 200,
                     seed: int = 0, max_iter: int = 2000) -> TomographyResult:
    """Monte-Carlo error bars: Poisson-resample counts, refit, take stats.

    Replicas whose fit does not converge are dropped and counted; more
    than 10% dropped, or fewer than 10 replicas requested, flags the
    result as low precision.  Each replica derives its RNG from
    (seed, replica index), so the run is reproducible and
    order-independent.
    """
    if n_replicas < 2:
        raise ValueError("need at least 2 replicas")
    base = mle_reconstruct(record, max_iter=max_iter)
    counts = record.count_vector()
    keys = _record_keys()
    metrics = {"concurrence": [], "fidelity": [], "chsh_lower": [], "chsh_upper": []}
    dropped = 0
    for k in range(n_replicas):
        rng = np.random.default_rng([seed, k])
        resampled = rng.poisson(counts)
        rec = MeasurementRecord(
            counts={key: int(v) for key, v in zip(keys, resampled)},
            integration_times=record.integration_times,
            provenance=record.provenance)
        fit = mle_reconstruct(rec, max_iter=max_iter)
        if not fit.converged:
            dropped += 1
            continue
        metrics["concurrence"].append(fit.concurrence)
        metrics["fidelity"].append(fit.fidelity)
        metrics["chsh_lower"].append(fit.chsh_lower)
        metrics["chsh_upper"].append(fit.chsh_upper)
    errors = {name: {"mean": float(np.mean(vals)), "std": float(np.std(vals, ddof=1))}
              for name, vals in metrics.items() if len(vals) >= 2}
    low_precision = n_replicas < 10 or dropped > 0.1 * n_replicas
    return replace(base, errors=errors, n_replicas=n_replicas,
                   n_replicas_dropped=dropped, low_precision=low_precision)
