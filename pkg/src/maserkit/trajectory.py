"""Monte-Carlo realizations of the monitored maser.

One physical click stream per seed: atoms arrive in a Poisson stream, each
branches according to the omniscient state, and detectors fire with their
efficiencies.  Any number of observers can watch the same stream; each one
conditions only on the clicks it attends to, evolving its own state with its
own no-detection generator in between.  Runs are reproducible bit for bit
from (seed, configuration); the counter-based RNG stream is derived from the
seed alone.
"""

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from . import fock, liouvillian
from .errors import NormalizationUnderflowError
from .micromaser import scully_lamb

RNG_ALGORITHM = "Philox4x64"


@dataclass(frozen=True)
class Observer:
    """An analyst of the click record, possibly ignoring one detector.

    Deliberate ignorance is part of the conditioning: an unattended detector
    contributes nothing to the observer's click operator, so its effective
    efficiency must vanish even if the physical detector works fine.
    """

    name: str
    attend_down: bool
    attend_up: bool
    eta_down_eff: float
    eta_up_eff: float

    def __post_init__(self):
        for attend, eta, label in (
            (self.attend_down, self.eta_down_eff, "down"),
            (self.attend_up, self.eta_up_eff, "up"),
        ):
            if not 0.0 <= eta <= 1.0:
                raise ValueError(f"eta_{label}_eff must lie in [0, 1], got {eta}")
            if not attend and eta != 0.0:
                raise ValueError(
                    f"observer {self.name!r} ignores the {label} detector "
                    f"but has eta_{label}_eff = {eta}"
                )

    @classmethod
    def watching(cls, name, cfg, down, up):
        """Observer who attends the selected detectors at the lab efficiencies."""
        return cls(
            name=name,
            attend_down=down,
            attend_up=up,
            eta_down_eff=cfg.eta_down if down else 0.0,
            eta_up_eff=cfg.eta_up if up else 0.0,
        )


@dataclass(frozen=True)
class ClickRecord:
    """One atom crossing: exit branch and whether its detector fired."""

    time: float
    branch: str
    detected: bool


@dataclass(frozen=True)
class ObserverSeries:
    parity: np.ndarray
    number: np.ndarray


@dataclass(frozen=True)
class TrajectoryResult:
    seed: object
    clicks: tuple
    times: np.ndarray
    series: dict
    rng_algorithm: str = RNG_ALGORITHM


@dataclass(frozen=True)
class EnsembleCurve:
    times: np.ndarray
    mean: dict
    stderr: dict
    n_seeds: int


def _rng_for(seed):
    if isinstance(seed, (tuple, list)):
        entropy = tuple(int(s) for s in seed)
    else:
        entropy = int(seed)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def _diagonal_block(S, dim):
    """Action of S on the population sector, or None if it leaks out of it."""
    idx = np.arange(dim) * (dim + 1)
    cols = S.tocsc()[:, idx].tocoo()
    if cols.row.size and not np.isin(cols.row, idx).all():
        return None
    dense = np.zeros((dim, dim), dtype=complex)
    dense[cols.row // (dim + 1), cols.col] = cols.data
    return dense


_PROPAGATOR_CACHE = {}


class _DyadicPropagator:
    """Binary ladder of cached exponentials of a small dense generator.

    Gaps are rounded to multiples of a time quantum chosen so that the
    rounding error stays inside the composition budget; any gap up to the
    horizon then costs at most one matrix-vector product per ladder level.
    """

    def __init__(self, gen, horizon, budget=1e-9):
        norm = np.linalg.norm(gen, np.inf)
        quantum = float(horizon)
        levels = 1
        while quantum * max(norm, 1.0) > budget and levels < 60:
            quantum /= 2.0
            levels += 1
        self.quantum = quantum
        self.powers = [scipy.linalg.expm(gen * quantum)]
        for _ in range(levels - 1):
            last = self.powers[-1]
            self.powers.append(last @ last)

    def advance(self, state, dt):
        k = int(round(dt / self.quantum))
        j = 0
        while k:
            if k & 1:
                state = self.powers[j] @ state
            k >>= 1
            j += 1
        return state


def _cached_dyadic(gen, horizon):
    key = (hashlib.sha1(gen.tobytes()).hexdigest(), float(horizon))
    prop = _PROPAGATOR_CACHE.get(key)
    if prop is None:
        prop = _DyadicPropagator(gen, horizon)
        if len(_PROPAGATOR_CACHE) > 32:
            _PROPAGATOR_CACHE.clear()
        _PROPAGATOR_CACHE[key] = prop
    return prop


class _DiagState:
    """Population-sector evolution for diagonal-preserving scenarios."""

    def __init__(self, pops, prop, down_blk, up_blk):
        self.pops = pops
        self.prop = prop
        self.blocks = {"down": down_blk, "up": up_blk}
        self.time = 0.0

    def advance_to(self, t):
        if t > self.time:
            self.pops = self.prop.advance(self.pops, t - self.time)
            weight = self.pops.sum().real
            if weight < 1e-300:
                raise NormalizationUnderflowError("no-click weight underflowed")
            self.pops = self.pops / weight
            self.time = t

    def branch_prob_down(self):
        return (self.blocks["down"] @ self.pops).sum().real

    def reduce(self, branch):
        self.pops = self.blocks[branch] @ self.pops
        self.pops = self.pops / self.pops.sum().real

    def expectations(self):
        p = self.pops.real
        m = np.arange(p.size)
        return ((-1.0) ** m @ p, m @ p)

    def validate(self):
        p = self.pops.real
        if abs(p.sum() - 1.0) > 1e-10 or p.min() < -1e-8:
            raise ValueError("population vector left the density-matrix set")

    def state_matrix(self):
        return np.diag(self.pops)


class _FullState:
    """Vectorized density-matrix evolution under a sparse generator."""

    def __init__(self, rho, gen, down_op, up_op):
        self.dim = rho.shape[0]
        self.v = fock.vec(rho)
        self.gen = gen
        self.ops = {"down": down_op, "up": up_op}
        self.time = 0.0
        self._diag_idx = np.arange(self.dim) * (self.dim + 1)

    def advance_to(self, t):
        if t > self.time:
            self.v = spla.expm_multiply(self.gen * (t - self.time), self.v)
            weight = self.v[self._diag_idx].sum().real
            if weight < 1e-300:
                raise NormalizationUnderflowError("no-click weight underflowed")
            self.v = self.v / weight
            self.time = t

    def branch_prob_down(self):
        return (self.ops["down"] @ self.v)[self._diag_idx].sum().real

    def reduce(self, branch):
        self.v = self.ops[branch] @ self.v
        self.v = self.v / self.v[self._diag_idx].sum().real

    def expectations(self):
        p = self.v[self._diag_idx].real
        m = np.arange(self.dim)
        return ((-1.0) ** m @ p, m @ p)

    def validate(self):
        fock.check_density_matrix(self.state_matrix())

    def state_matrix(self):
        return fock.unvec(self.v, self.dim)


def _observer_generator(L0, cfg, kick, obs):
    out = L0
    if obs.eta_down_eff:
        out = out - cfg.rate * obs.eta_down_eff * kick.down
    if obs.eta_up_eff:
        out = out - cfg.rate * obs.eta_up_eff * kick.up
    return out.tocsr()


def simulate(params, kick, cfg, observers, t_end, seed, rho0=None, samples=33,
             validate=False):
    """Run one realization and every observer's account of it.

    Returns the full atom record (with detection flags) and, on a uniform
    grid of ``samples`` times, each observer's parity and photon-number
    expectations alongside the omniscient reference, which applies every
    reduction and decays freely in between.  With ``validate`` each sampled
    state is checked to still be a density matrix.
    """
    if not t_end > 0.0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    names = [obs.name for obs in observers]
    if len(set(names)) != len(names):
        raise ValueError("observer names must be unique")
    dim = kick.dim
    L = liouvillian.liouvillian(params, dim)
    L0 = scully_lamb(params, kick, cfg.rate, dim)
    if rho0 is None:
        rho0 = fock.steady_state(L0)
    gens = {"omniscient": L}
    for obs in observers:
        gens[obs.name] = _observer_generator(L0, cfg, kick, obs)

    blocks = {name: _diagonal_block(g, dim) for name, g in gens.items()}
    down_blk = _diagonal_block(kick.down, dim)
    up_blk = _diagonal_block(kick.up, dim)
    off_diag = np.max(np.abs(rho0 - np.diag(np.diag(rho0))))
    diagonal_path = (
        down_blk is not None
        and up_blk is not None
        and all(b is not None for b in blocks.values())
        and off_diag < 1e-14
    )

    states = {}
    if diagonal_path:
        pops = np.diag(rho0).astype(complex)
        for name, blk in blocks.items():
            prop = _cached_dyadic(blk, t_end)
            states[name] = _DiagState(pops.copy(), prop, down_blk, up_blk)
    else:
        for name, gen in gens.items():
            states[name] = _FullState(rho0.copy(), gen, kick.down, kick.up)

    rng = _rng_for(seed)
    arrivals = []
    t = 0.0
    while True:
        t += rng.exponential(1.0 / cfg.rate)
        if t >= t_end:
            break
        arrivals.append(t)

    grid = np.linspace(0.0, t_end, samples) if samples else np.empty(0)
    eta = {"down": cfg.eta_down, "up": cfg.eta_up}
    attends = {
        obs.name: {"down": obs.attend_down, "up": obs.attend_up} for obs in observers
    }
    records = []
    traces = {name: ([], []) for name in states}

    events = [(s, "sample") for s in grid] + [(t, "atom") for t in arrivals]
    events.sort(key=lambda ev: (ev[0], ev[1] == "atom"))  # sample before same-time atom
    omni = states["omniscient"]
    for when, kind in events:
        if kind == "sample":
            for name, st in states.items():
                st.advance_to(when)
                if validate:
                    st.validate()
                par, num = st.expectations()
                traces[name][0].append(par)
                traces[name][1].append(num)
            continue
        omni.advance_to(when)
        branch = "down" if rng.random() < omni.branch_prob_down() else "up"
        omni.reduce(branch)
        detected = rng.random() < eta[branch]
        records.append(ClickRecord(time=when, branch=branch, detected=detected))
        if detected:
            for obs in observers:
                if attends[obs.name][branch]:
                    st = states[obs.name]
                    st.advance_to(when)
                    st.reduce(branch)

    series = {
        name: ObserverSeries(parity=np.array(par), number=np.array(num))
        for name, (par, num) in traces.items()
    }
    return TrajectoryResult(
        seed=seed, clicks=tuple(records), times=grid, series=series
    )


def ensemble_average(
    params, kick, cfg, observers, t_end, n_seeds,
    master_seed=0, rho0=None, samples=33, observable="number",
):
    """Seed-averaged observable curves with standard errors of the mean."""
    if n_seeds < 2:
        raise ValueError(f"need at least 2 seeds, got {n_seeds}")
    if observable not in ("number", "parity"):
        raise ValueError(f"observable must be 'number' or 'parity', got {observable!r}")
    stacks = None
    times = None
    for i in range(n_seeds):
        res = simulate(
            params, kick, cfg, observers, t_end, (master_seed, i),
            rho0=rho0, samples=samples,
        )
        if stacks is None:
            times = res.times
            stacks = {name: [] for name in res.series}
        for name, ser in res.series.items():
            stacks[name].append(getattr(ser, observable))
    mean, stderr = {}, {}
    for name, rows in stacks.items():
        arr = np.array(rows)
        mean[name] = arr.mean(axis=0)
        stderr[name] = arr.std(axis=0, ddof=1) / np.sqrt(n_seeds)
    return EnsembleCurve(times=times, mean=mean, stderr=stderr, n_seeds=n_seeds)


def replay_clicks(params, kick, cfg, observer, clicks, rho0=None):
    """Push a fixed detected-click list through one observer's update rule.

    ``clicks`` is a sequence of (time, branch) pairs of detected events.
    Returns the no-click probability of every inter-click gap the observer
    conditions on, and the post-reduction states.  Useful for validating the
    conditioning logic against a published click record.
    """
    from .micromaser import propagate_normalized, reduce_state

    dim = kick.dim
    L0 = scully_lamb(params, kick, cfg.rate, dim)
    if rho0 is None:
        rho0 = fock.steady_state(L0)
    gen = _observer_generator(L0, cfg, kick, observer)
    attends = {"down": observer.attend_down, "up": observer.attend_up}
    rho = rho0
    t_prev = 0.0
    weights, reduced = [], []
    for when, branch in clicks:
        if when <= t_prev:
            raise ValueError("click times must be strictly increasing")
        if not attends[branch]:
            continue
        rho, weight = propagate_normalized(gen, rho, when - t_prev)
        rho = reduce_state(rho, branch, kick)
        weights.append(weight)
        reduced.append(rho)
        t_prev = when
    return weights, reduced
