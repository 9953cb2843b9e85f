"""Jones calculus on the |H>/|V> basis (H parallel to the crystal c axis).

States are complex arrays of shape (2,), elements are (2, 2) arrays. Angles
are in radians. Waveplates use the global-phase-free form
``R(-theta) diag(1, exp(i*retardance)) R(theta)``.
"""

import numpy as np

SQRT_HALF = 1.0 / np.sqrt(2.0)

H = np.array([1.0, 0.0], dtype=complex)
V = np.array([0.0, 1.0], dtype=complex)
D = SQRT_HALF * (H + V)
A = SQRT_HALF * (H - V)
SIGMA_PLUS = SQRT_HALF * (H + 1j * V)
SIGMA_MINUS = SQRT_HALF * (H - 1j * V)

IDENTITY = np.eye(2, dtype=complex)


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]], dtype=complex)


def retarder(retardance: float, fast_axis_angle: float) -> np.ndarray:
    core = np.diag([1.0, np.exp(1j * retardance)]).astype(complex)
    return rotation(-fast_axis_angle) @ core @ rotation(fast_axis_angle)


def waveplate(kind: str, fast_axis_angle: float) -> np.ndarray:
    if kind == "half":
        return retarder(np.pi, fast_axis_angle)
    if kind == "quarter":
        return retarder(np.pi / 2, fast_axis_angle)
    raise ValueError(f"unknown waveplate kind {kind!r}")


def polarizer(angle: float) -> np.ndarray:
    """Linear polariser transmitting the axis at ``angle`` from H."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c * c, c * s], [c * s, s * s]], dtype=complex)


def pbs_port(port: str) -> np.ndarray:
    if port == "H":
        return polarizer(0.0)
    if port == "V":
        return polarizer(np.pi / 2)
    raise ValueError(f"PBS port must be 'H' or 'V', got {port!r}")


def phase_plate(phase: float) -> np.ndarray:
    """Relative H/V phase element (the compensating plate before the memory)."""
    return np.diag([1.0, np.exp(1j * phase)]).astype(complex)


def apply_jones(m: np.ndarray, s: np.ndarray) -> np.ndarray:
    return np.asarray(m) @ np.asarray(s)


def chain(*elements: np.ndarray) -> np.ndarray:
    """Compose elements in the order light meets them."""
    out = IDENTITY
    for el in elements:
        out = el @ out
    return out


def is_unitary(m: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.allclose(m.conj().T @ m, IDENTITY, atol=tol, rtol=0))


def state_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 for (unnormalised) pure states."""
    na = np.vdot(a, a).real
    nb = np.vdot(b, b).real
    if na == 0 or nb == 0:
        raise ValueError("fidelity undefined for a zero state")
    return float(abs(np.vdot(a, b)) ** 2 / (na * nb))
