"""Linear state-space scans that aggregate trajectories at each hierarchy.

The recurrence is h(l) = A h(l-1) + B x~(l) with x~ = in_proj(x), readout
y(l) = C h(l), zero initial state, unit step size. ``ssm_scan`` is the
production kernel (vectorized steps, and the tape variant carries a
hand-derived backward recurrence instead of taping every step);
``ssm_scan_oracle`` is the deliberately naive scalar-loop twin every
optimization must keep matching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .numerics import uniform_init
from .numerics.tape import Var
from .retrieval import TrajectorySet


@dataclass
class SsmLayerParams:
    """One scan layer: input projection plus A/B/C kernels."""

    in_proj: np.ndarray  # (d, d_s)
    A: np.ndarray  # (n, n)
    B: np.ndarray  # (n, d_s)
    C: np.ndarray  # (d_s, n)

    def __post_init__(self):
        self.in_proj = np.asarray(self.in_proj, dtype=np.float64)
        self.A = np.asarray(self.A, dtype=np.float64)
        self.B = np.asarray(self.B, dtype=np.float64)
        self.C = np.asarray(self.C, dtype=np.float64)
        n = self.A.shape[0]
        d_s = self.in_proj.shape[1]
        if self.A.shape != (n, n):
            raise DimensionError(f"A must be square, got {self.A.shape}")
        if self.B.shape != (n, d_s):
            raise DimensionError(f"B shape {self.B.shape} != ({n}, {d_s})")
        if self.C.shape != (d_s, n):
            raise DimensionError(f"C shape {self.C.shape} != ({d_s}, {n})")

    @property
    def in_dim(self) -> int:
        return self.in_proj.shape[0]

    @property
    def out_dim(self) -> int:
        return self.in_proj.shape[1]

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))


def init_ssm_params(rng: np.random.Generator, d: int, d_s: int, n: int) -> SsmLayerParams:
    """Stable-at-init layer: A diagonal in (0.5, 0.95), projections 1/sqrt(fan_in)."""
    a = np.diag(rng.uniform(0.5, 0.95, size=n))
    params = SsmLayerParams(
        in_proj=uniform_init(rng, d, (d, d_s)),
        A=a,
        B=uniform_init(rng, d_s, (n, d_s)),
        C=uniform_init(rng, n, (d_s, n)),
    )
    assert params.spectral_radius() < 1.0
    return params


@dataclass
class ScanOutput:
    outputs: np.ndarray  # (T, d_s), row l = C h(l)
    final_state: np.ndarray  # (n,)


def _check_scan_inputs(x: np.ndarray, in_proj: np.ndarray) -> None:
    if x.ndim != 2 or x.shape[0] < 1:
        raise DimensionError(f"scan input must be (T>=1, d), got {x.shape}")
    if x.shape[1] != in_proj.shape[0]:
        raise DimensionError(
            f"scan input dim {x.shape[1]} does not match in_proj {in_proj.shape}"
        )


def _scan_forward(x, in_proj, a, b, c):
    """Shared forward recurrence; returns (x_proj, states, outputs).

    Every row is computed with per-step vector products (never one batched
    matmul) so truncating the input is bitwise prefix-consistent: blocked
    matrix kernels may round differently depending on the total row count.
    """
    steps, n = x.shape[0], a.shape[0]
    d_s = in_proj.shape[1]
    xt = np.empty((steps, d_s), dtype=np.float64)
    states = np.empty((steps, n), dtype=np.float64)
    outputs = np.empty((steps, d_s), dtype=np.float64)
    h = np.zeros(n, dtype=np.float64)
    at, bt, ct = a.T, b.T, c.T
    for l in range(steps):
        xt[l] = x[l] @ in_proj
        h = h @ at + xt[l] @ bt
        states[l] = h
        outputs[l] = h @ ct
    return xt, states, outputs


def ssm_scan(inputs: np.ndarray, params: SsmLayerParams) -> ScanOutput:
    """Run the recurrence over one sequence with zero initial state."""
    x = np.asarray(inputs, dtype=np.float64)
    _check_scan_inputs(x, params.in_proj)
    _, states, outputs = _scan_forward(x, params.in_proj, params.A, params.B, params.C)
    return ScanOutput(outputs=outputs, final_state=states[-1].copy())


def ssm_scan_oracle(inputs: np.ndarray, params: SsmLayerParams) -> ScanOutput:
    """Literal per-element reference: scalar loops, no vectorization.

    Kept as the fixed point for equivalence testing; do not optimize.
    """
    x = np.asarray(inputs, dtype=np.float64)
    _check_scan_inputs(x, params.in_proj)
    w = params.in_proj.tolist()
    a = params.A.tolist()
    b = params.B.tolist()
    c = params.C.tolist()
    steps, d = x.shape
    d_s, n = params.out_dim, params.state_dim
    xl = x.tolist()
    h = [0.0] * n
    outputs = np.empty((steps, d_s), dtype=np.float64)
    for l in range(steps):
        xt = [sum(xl[l][i] * w[i][j] for i in range(d)) for j in range(d_s)]
        h_new = [
            sum(a[p][q] * h[q] for q in range(n)) + sum(b[p][j] * xt[j] for j in range(d_s))
            for p in range(n)
        ]
        h = h_new
        for o in range(d_s):
            outputs[l][o] = sum(c[o][p] * h[p] for p in range(n))
    return ScanOutput(outputs=outputs, final_state=np.asarray(h, dtype=np.float64))


@dataclass
class SsmParamVars:
    """Tape leaves for one scan layer, as registered in a ParamStore."""

    in_proj: Var
    A: Var
    B: Var
    C: Var


def scan_var(x: Var, p: SsmParamVars) -> Var:
    """Tape node for a full scan; backward is the reverse-time recurrence.

    Equivalent to taping every step but one node instead of ~4T, with the
    gradient recurrence dL/dh(l) = direct(l) + dL/dh(l+1) A run in reverse.
    """
    xv = x.value
    _check_scan_inputs(xv, p.in_proj.value)
    win, a, b, c = p.in_proj.value, p.A.value, p.B.value, p.C.value
    xt, states, outputs = _scan_forward(xv, win, a, b, c)
    steps, n = xv.shape[0], a.shape[0]

    def vjp(g: np.ndarray):
        d_c = g.T @ states
        d_states = g @ c
        acc = np.empty_like(states)
        acc[steps - 1] = d_states[steps - 1]
        for l in range(steps - 2, -1, -1):
            acc[l] = d_states[l] + acc[l + 1] @ a
        prev = np.vstack([np.zeros((1, n)), states[:-1]])
        d_a = acc.T @ prev
        d_b = acc.T @ xt
        d_xt = acc @ b
        d_win = xv.T @ d_xt
        d_x = d_xt @ win.T
        return (d_x, d_win, d_a, d_b, d_c)

    return Var(outputs, (x, p.in_proj, p.A, p.B, p.C), vjp)


def aggregate_keyword(traj_set: TrajectorySet, params: SsmLayerParams) -> np.ndarray:
    """Final-step readout per trajectory: one aggregated token per keyword."""
    if len(traj_set) == 0:
        return np.zeros((0, params.out_dim))
    return np.stack([ssm_scan(t.tokens, params).outputs[-1] for t in traj_set.trajectories])


def aggregate_scene(traj_set: TrajectorySet, params: SsmLayerParams) -> np.ndarray:
    """Per-timestep outputs averaged across the attribute trajectories."""
    if len(traj_set) == 0:
        return np.zeros((0, params.out_dim))
    scans = [ssm_scan(t.tokens, params).outputs for t in traj_set.trajectories]
    return np.mean(scans, axis=0)


def aggregate_holistic(branch_tokens: np.ndarray, params: SsmLayerParams) -> np.ndarray:
    """Single scan over a pooled branch sequence; all per-step outputs."""
    return ssm_scan(branch_tokens, params).outputs
