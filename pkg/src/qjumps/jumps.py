"""Quantum-jump (photon-counting) unravelling of the damped driven oscillator.

Between detection events the un-normalized state evolves under the
effective non-hermitian generator -i*H(t) - L^dag L / 2; a jump fires when
the squared norm, integrated from the last jump, falls to a uniform random
threshold (the waiting-time formulation, statistically exact in the jump
times).  The jump applies |psi> -> L|psi>/||L|psi>|| and the threshold is
redrawn.  Expectation values are sampled on a fixed grid from the
normalized state.

Randomness is counter-based: trajectory seeds key a Philox generator, so
ensembles are reproducible no matter how trajectories are scheduled.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .errors import DarkStateError, IntegrationError, LeakageError
from .fock import (
    PhysicalParams,
    StateVector,
    build_hamiltonian,
    build_lindblad,
    fock_state,
)

__all__ = [
    "JumpSolverConfig",
    "TrajectoryRecord",
    "evolve_trajectory",
    "run_ensemble",
    "effective_drift",
    "apply_jump",
    "default_dim",
    "write_record",
    "read_record",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class JumpSolverConfig:
    """Numerical knobs of the trajectory integrator.

    t_transient / t_record are in drive periods; the transient is simulated
    and recorded but flagged so analysis can discard it.  sample_interval
    must divide the drive period 2*pi exactly.  rate_scale rescales the
    jump rate and exists only for fault-injection tests (leave at 1.0).
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    norm_bisect_tol: float = 1e-10
    sample_interval: float = TWO_PI / 64.0
    t_transient: float = 50.0
    t_record: float = 500.0
    max_step: float = 0.05
    leakage_bound: float = 1e-6
    leak_tail_fraction: float = 0.05
    rate_scale: float = 1.0

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "norm_bisect_tol", "sample_interval",
                     "max_step", "leakage_bound", "rate_scale"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.t_transient < 0 or self.t_record <= 0:
            raise ValueError("t_transient must be >= 0 and t_record > 0")
        spp = TWO_PI / self.sample_interval
        if abs(spp - round(spp)) > 1e-9 * spp:
            raise ValueError("sample_interval must divide the drive period 2*pi")

    @property
    def samples_per_period(self):
        return int(round(TWO_PI / self.sample_interval))

    def to_dict(self):
        return {
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "norm_bisect_tol": self.norm_bisect_tol,
            "sample_interval": self.sample_interval,
            "t_transient": self.t_transient,
            "t_record": self.t_record,
            "max_step": self.max_step,
            "leakage_bound": self.leakage_bound,
            "leak_tail_fraction": self.leak_tail_fraction,
            "rate_scale": self.rate_scale,
        }


@dataclass
class TrajectoryRecord:
    """One unravelling realisation.

    sample_times are in units of the drive period; jump_times are absolute
    simulation times (the drive period is 2*pi).
    """

    sample_times: np.ndarray
    q_mean: np.ndarray
    p_mean: np.ndarray
    n_mean: np.ndarray
    jump_times: np.ndarray
    leakage_max: float
    norm_dev_max: float
    seed: int
    params: PhysicalParams
    dim: int
    config: JumpSolverConfig

    @property
    def transient_periods(self):
        return self.config.t_transient

    def steady_mask(self):
        """Boolean mask selecting samples after the flagged transient."""
        return self.sample_times >= self.config.t_transient - 1e-12

    def steady_jump_times(self):
        return self.jump_times[self.jump_times >= self.config.t_transient * TWO_PI]

    def jump_count(self):
        return int(self.jump_times.shape[0])


def default_dim(params):
    """Engineering default for the Fock truncation (leakage-monitored)."""
    return 256 if params.sho_mode else 512


def _drift_band_arrays(params, dim):
    """Static drift bands (-i*h_static - gamma*n) and drive bands (-i*h_drive)."""
    parts = build_hamiltonian(params, dim)
    sb = np.zeros((9, dim), dtype=np.complex128)
    for i, off in enumerate(range(-4, 5)):
        sb[i] = -1j * parts.h_static.band(off)
    sb[4] -= params.gamma * np.arange(dim)
    dbm = -1j * parts.h_drive.band(-1)
    dbp = -1j * parts.h_drive.band(+1)
    return np.ascontiguousarray(sb), np.ascontiguousarray(dbm), np.ascontiguousarray(dbp)


def evolve_trajectory(params, cfg, init=None, seed=0, dim=None):
    """Integrate one quantum-jump trajectory.

    Parameters
    ----------
    params : PhysicalParams
    cfg : JumpSolverConfig
    init : StateVector, optional
        Initial state; defaults to the vacuum.  Its length fixes the basis.
    seed : int
        Philox key; identical (seed, cfg, params, dim) reproduce the record
        bit-for-bit on one platform.
    dim : int, optional
        Basis size when init is not given.

    Raises LeakageError / IntegrationError / DarkStateError on the
    corresponding solver failures, each carrying the failure time.
    """
    if dim is None:
        dim = init.dim if init is not None else default_dim(params)
    if init is None:
        init = fock_state(0, dim)
    if init.dim != dim:
        raise ValueError(f"init dim {init.dim} != requested dim {dim}")
    if not init.is_normalized(tol=1e-9):
        raise ValueError("initial state must be normalized")

    sb, dbm, dbp = _drift_band_arrays(params, dim)
    spp = cfg.samples_per_period
    n_periods = cfg.t_transient + cfg.t_record
    n_samples = int(round(n_periods * spp)) + 1

    q_out = np.empty(n_samples)
    p_out = np.empty(n_samples)
    n_out = np.empty(n_samples)
    leak_start = dim - max(1, int(np.ceil(dim * cfg.leak_tail_fraction)))
    rng = np.random.Generator(np.random.Philox(key=seed))

    status, t_fail, jumps, n_jumps, leak_max, norm_dev, _ = _kernel._evolve_jumps(
        sb, dbm, dbp, init.amplitudes.copy(), cfg.sample_interval, n_samples,
        cfg.rel_tol, cfg.abs_tol, cfg.max_step, cfg.norm_bisect_tol,
        leak_start, cfg.leakage_bound, cfg.rate_scale, rng,
        q_out, p_out, n_out, 4096)

    if status == _kernel.FAIL_LEAKAGE:
        raise LeakageError(
            f"truncation tail exceeded {cfg.leakage_bound:g} at t={t_fail:.3f} "
            f"(dim={dim})", time=t_fail)
    if status == _kernel.FAIL_STEP_UNDERFLOW:
        raise IntegrationError(f"step size underflow at t={t_fail:.3f}", time=t_fail)
    if status == _kernel.FAIL_BISECTION:
        raise IntegrationError(
            f"jump-time bisection stalled at t={t_fail:.3f}", time=t_fail)
    if status == _kernel.FAIL_DARK_JUMP:
        raise DarkStateError(f"jump from a dark state at t={t_fail:.3f}")

    sample_times = np.arange(n_samples) * (cfg.sample_interval / TWO_PI)
    return TrajectoryRecord(
        sample_times=sample_times,
        q_mean=q_out,
        p_mean=p_out,
        n_mean=n_out,
        jump_times=jumps[:n_jumps].copy(),
        leakage_max=float(leak_max),
        norm_dev_max=float(norm_dev),
        seed=int(seed),
        params=params,
        dim=dim,
        config=cfg,
    )


def trajectory_seed(master_seed, index):
    """Per-trajectory Philox key derived from (master seed, trajectory index)."""
    return (int(master_seed) << 64) + int(index)


def _ensemble_worker(args):
    params, cfg, dim, init_amp, seed = args
    init = StateVector(init_amp) if init_amp is not None else None
    return evolve_trajectory(params, cfg, init=init, seed=seed, dim=dim)


def run_ensemble(params, cfg, n_traj, master_seed=0, init=None, dim=None, jobs=1):
    """Independent trajectories with per-index seeds; order of results is by
    trajectory index regardless of scheduling."""
    if dim is None:
        dim = init.dim if init is not None else default_dim(params)
    init_amp = init.amplitudes if init is not None else None
    tasks = [(params, cfg, dim, init_amp, trajectory_seed(master_seed, i))
             for i in range(n_traj)]
    if jobs <= 1:
        return [_ensemble_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_ensemble_worker, tasks, chunksize=1))


def effective_drift(state, t, parts, L):
    """d|psi~>/dt = [-i H(t) - L^dag L / 2] |psi~> for the un-normalized state."""
    if state.dim != parts.h_static.dim or state.dim != L.dim:
        raise ValueError("dimension mismatch between state and operators")
    hpsi = parts.at(t).matvec(state.amplitudes)
    ldl = L.dagger().matvec(L.matvec(state.amplitudes))
    return StateVector(-1j * hpsi - 0.5 * ldl)


def apply_jump(state, L):
    """|psi> -> L|psi> / ||L|psi>||; error on vanishing emission rate."""
    if state.dim != L.dim:
        raise ValueError("dimension mismatch between state and operator")
    y = L.matvec(state.amplitudes)
    n2 = float(np.vdot(y, y).real)
    if n2 < 1e-14:
        raise DarkStateError("jump requested from a state with <L^dag L> ~ 0")
    return StateVector(y / np.sqrt(n2))


# -- serialization -----------------------------------------------------------

def write_record(record, basepath):
    """Write <base>.csv, <base>.jumps.csv and <base>.json.

    The sample CSV holds t (drive periods), q_mean, p_mean, n_mean; the
    jumps CSV a single column of absolute jump times.
    """
    basepath = str(basepath)
    with open(basepath + ".csv", "w") as f:
        f.write("t,q_mean,p_mean,n_mean\n")
        for t, q, p, n in zip(record.sample_times, record.q_mean,
                              record.p_mean, record.n_mean):
            f.write(f"{t!r},{q!r},{p!r},{n!r}\n")
    with open(basepath + ".jumps.csv", "w") as f:
        f.write("t_jump\n")
        for t in record.jump_times:
            f.write(f"{t!r}\n")
    meta = {
        "params": record.params.to_dict(),
        "config": record.config.to_dict(),
        "seed": record.seed,
        "dim": record.dim,
        "leakage_max": record.leakage_max,
        "norm_dev_max": record.norm_dev_max,
        "n_jumps": record.jump_count(),
    }
    with open(basepath + ".json", "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    return [basepath + ".csv", basepath + ".jumps.csv", basepath + ".json"]


def read_record(basepath):
    basepath = str(basepath)
    data = np.genfromtxt(basepath + ".csv", delimiter=",", names=True)
    jump_data = np.genfromtxt(basepath + ".jumps.csv", delimiter=",", names=True)
    jumps = np.atleast_1d(jump_data["t_jump"]) if jump_data.size else np.empty(0)
    with open(basepath + ".json") as f:
        meta = json.load(f)
    params = PhysicalParams(**meta["params"])
    cfg = JumpSolverConfig(**meta["config"])
    return TrajectoryRecord(
        sample_times=np.atleast_1d(data["t"]),
        q_mean=np.atleast_1d(data["q_mean"]),
        p_mean=np.atleast_1d(data["p_mean"]),
        n_mean=np.atleast_1d(data["n_mean"]),
        jump_times=jumps,
        leakage_max=meta["leakage_max"],
        norm_dev_max=meta["norm_dev_max"],
        seed=meta["seed"],
        params=params,
        dim=meta["dim"],
        config=cfg,
    )
