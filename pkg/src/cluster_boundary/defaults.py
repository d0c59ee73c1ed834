"""Default numerical parameters, collected in one place.

The CLI resolves every run configuration against this table, and the
resolved values are written into the header of each output file.
"""

DEFAULTS = {
    # bond dimensions and angles
    "chi": [16],
    "theta": [1.2, 1.45],
    "solver": "vumps",
    "seed": 0,
    # power method
    "power_tol": 1e-12,  # per-site infidelity between consecutive layers
    "power_max_layers": 5000,
    "power_warmup_layers": 40,
    # VUMPS
    "vumps_tol": 1e-10,  # || A_C - A_L C ||
    "vumps_max_iter": 500,
    # critical-point bisection
    "critical_bracket": [1.2, 1.55],
    "critical_resolution": 0.005,
    # transfer-matrix diagnostics
    "transfer_k": 8,
    "pair_tol": 1e-2,
    "correlator_l_max": 100,
    # finite chains
    "finite_n": [20],
    "finite_bc": "periodic",
    "finite_method": "sweep",  # or "uniform" (periodic rings from uniform fixed points)
    "finite_chi": 16,
    "finite_sweeps": 12,
    "finite_tol": 1e-7,  # relative change of |e| between sweeps
    # noisy layers
    "noise_epsilon": 0.01,
    "noise_layers": 200,
    # oracle
    "oracle_max_qubits": 24,
}


def get(key: str):
    value = DEFAULTS[key]
    return list(value) if isinstance(value, list) else value
