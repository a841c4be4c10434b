"""Declarative scenario configuration.

One TOML document describes a scenario in decay-rate units: every key naming
a physical quantity carries the unit in its name (rate_per_A, t_max_At), and
internally the decay rate is 1.  Validation is aggregated: a bad file reports
every violated precondition at once.
"""

import hashlib
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import micromaser
from .errors import ConfigError
from .liouvillian import OscillatorParams
from .micromaser import DetectionConfig
from .trajectory import Observer

_KICK_TYPES = ("none", "jc", "parity", "one_photon")

_KNOWN = {
    "oscillator": {"omega_per_A", "nbar"},
    "kick": {"type", "phi_rad", "excitation_prob"},
    "detection": {"eta_down", "eta_up", "rate_per_A"},
    "grid": {"fock_dim", "t_max_At", "n_points"},
    "spectrum": {"n_max", "k_max"},
    "steady": {"initial_nbar", "alpha_re", "alpha_im"},
    "counting": {"t_At", "n_max"},
    "kicked": {"period_At", "n_periods", "substeps"},
    "waiting": {"from_branch", "to_branch"},
    "trajectory": {"samples", "observers"},
    "output": {"json_mirror"},
}
_TOP_KEYS = {"seed"}


@dataclass(frozen=True)
class ScenarioConfig:
    oscillator: OscillatorParams
    detection: DetectionConfig
    kick_type: str
    phi_rad: float
    excitation_prob: float
    fock_dim: int
    t_max: float
    n_points: int
    seed: int
    json_mirror: bool
    spectrum_n_max: int
    spectrum_k_max: int
    steady_initial_nbar: float
    steady_alpha: complex
    counting_t: float
    counting_n_max: int
    kicked_period: float
    kicked_periods: int
    kicked_substeps: int
    waiting_from: str
    waiting_to: str
    traj_samples: int
    observers: tuple
    sha256: str = field(default="", compare=False)

    def build_kick(self, dim=None):
        """Kick pair on the configured (or given) space; None for kick-free."""
        dim = self.fock_dim if dim is None else dim
        if self.kick_type == "none":
            return None
        if self.kick_type == "jc":
            return micromaser.jc_kick(self.phi_rad, dim)
        if self.kick_type == "parity":
            return micromaser.parity_kick(dim)
        return micromaser.one_photon_kick(self.excitation_prob, dim)


def _get(raw, section, key, default, kind, errs):
    value = raw.get(section, {}).get(key, default)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        errs.append(f"{section}.{key}: expected {kind.__name__}, got {value!r}")
        return default
    return value


def _check_unknown(raw, errs):
    for section, body in raw.items():
        if section in _TOP_KEYS:
            continue
        if section not in _KNOWN:
            errs.append(f"unknown section [{section}]")
            continue
        if not isinstance(body, dict):
            errs.append(f"[{section}] must be a table")
            continue
        for key in body:
            if key not in _KNOWN[section]:
                errs.append(f"unknown key {section}.{key}")


def from_dict(raw, sha256=""):
    """Validate a parsed document and build the scenario, or raise ConfigError."""
    errs = []
    _check_unknown(raw, errs)

    omega = _get(raw, "oscillator", "omega_per_A", 0.0, float, errs)
    nbar = _get(raw, "oscillator", "nbar", 0.0, float, errs)
    if nbar < 0:
        errs.append(f"oscillator.nbar must be >= 0, got {nbar}")

    kick_type = _get(raw, "kick", "type", "parity", str, errs)
    phi = _get(raw, "kick", "phi_rad", 0.0, float, errs)
    prob = _get(raw, "kick", "excitation_prob", 0.0, float, errs)
    if kick_type not in _KICK_TYPES:
        errs.append(f"kick.type must be one of {_KICK_TYPES}, got {kick_type!r}")
    if kick_type == "jc" and "phi_rad" not in raw.get("kick", {}):
        errs.append("kick.phi_rad is required for kick.type = 'jc'")
    if kick_type == "one_photon":
        if "excitation_prob" not in raw.get("kick", {}):
            errs.append("kick.excitation_prob is required for kick.type = 'one_photon'")
        elif not 0.0 <= prob <= 1.0:
            errs.append(f"kick.excitation_prob must lie in [0, 1], got {prob}")

    eta_down = _get(raw, "detection", "eta_down", 1.0, float, errs)
    eta_up = _get(raw, "detection", "eta_up", 1.0, float, errs)
    rate = _get(raw, "detection", "rate_per_A", 1.0, float, errs)
    for label, eta in (("eta_down", eta_down), ("eta_up", eta_up)):
        if not 0.0 <= eta <= 1.0:
            errs.append(f"detection.{label} must lie in [0, 1], got {eta}")
    if not rate > 0:
        errs.append(f"detection.rate_per_A must be > 0, got {rate}")

    dim = _get(raw, "grid", "fock_dim", 64, int, errs)
    t_max = _get(raw, "grid", "t_max_At", 5.0, float, errs)
    n_points = _get(raw, "grid", "n_points", 101, int, errs)
    if dim < 2:
        errs.append(f"grid.fock_dim must be >= 2, got {dim}")
    if not t_max > 0:
        errs.append(f"grid.t_max_At must be > 0, got {t_max}")
    if n_points < 2:
        errs.append(f"grid.n_points must be >= 2, got {n_points}")

    n_max = _get(raw, "spectrum", "n_max", 5, int, errs)
    k_max = _get(raw, "spectrum", "k_max", 3, int, errs)
    if n_max < 0 or k_max < 0:
        errs.append(f"spectrum.n_max and k_max must be >= 0, got {n_max}, {k_max}")

    s_nbar = _get(raw, "steady", "initial_nbar", 0.0, float, errs)
    alpha = complex(
        _get(raw, "steady", "alpha_re", 0.0, float, errs),
        _get(raw, "steady", "alpha_im", 0.0, float, errs),
    )
    if s_nbar < 0:
        errs.append(f"steady.initial_nbar must be >= 0, got {s_nbar}")

    c_t = _get(raw, "counting", "t_At", 1.0, float, errs)
    c_n = _get(raw, "counting", "n_max", 12, int, errs)
    if not c_t > 0:
        errs.append(f"counting.t_At must be > 0, got {c_t}")
    if c_n < 0:
        errs.append(f"counting.n_max must be >= 0, got {c_n}")

    period = _get(raw, "kicked", "period_At", 0.4, float, errs)
    n_periods = _get(raw, "kicked", "n_periods", 50, int, errs)
    substeps = _get(raw, "kicked", "substeps", 8, int, errs)
    if not period > 0:
        errs.append(f"kicked.period_At must be > 0, got {period}")
    if n_periods < 1 or substeps < 1:
        errs.append(
            f"kicked.n_periods and substeps must be >= 1, got {n_periods}, {substeps}"
        )

    w_from = _get(raw, "waiting", "from_branch", "down", str, errs)
    w_to = _get(raw, "waiting", "to_branch", "down", str, errs)
    for label, branch in (("from_branch", w_from), ("to_branch", w_to)):
        if branch not in ("down", "up"):
            errs.append(f"waiting.{label} must be 'down' or 'up', got {branch!r}")

    samples = _get(raw, "trajectory", "samples", 33, int, errs)
    if samples < 0:
        errs.append(f"trajectory.samples must be >= 0, got {samples}")
    obs_raw = raw.get("trajectory", {}).get(
        "observers", [{"name": "both", "attend_down": True, "attend_up": True}]
    )
    observers = []
    if not isinstance(obs_raw, list) or not obs_raw:
        errs.append("trajectory.observers must be a non-empty array of tables")
    else:
        names = []
        for i, entry in enumerate(obs_raw):
            ok = (
                isinstance(entry, dict)
                and set(entry) == {"name", "attend_down", "attend_up"}
                and isinstance(entry["name"], str)
                and isinstance(entry["attend_down"], bool)
                and isinstance(entry["attend_up"], bool)
            )
            if not ok:
                errs.append(
                    f"trajectory.observers[{i}] needs exactly "
                    "name (string) / attend_down / attend_up (booleans)"
                )
                continue
            names.append(entry["name"])
            observers.append(entry)
        if len(set(names)) != len(names):
            errs.append("trajectory.observers names must be unique")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        errs.append(f"seed must be an integer in [0, 2^64), got {seed!r}")
        seed = 0
    mirror = _get(raw, "output", "json_mirror", True, bool, errs)

    if errs:
        raise ConfigError(errs)

    detection = DetectionConfig(eta_down=eta_down, eta_up=eta_up, rate=rate)
    built_obs = tuple(
        Observer.watching(e["name"], detection, e["attend_down"], e["attend_up"])
        for e in observers
    )
    return ScenarioConfig(
        oscillator=OscillatorParams(omega=omega, decay_rate=1.0, nbar=nbar),
        detection=detection,
        kick_type=kick_type,
        phi_rad=phi,
        excitation_prob=prob,
        fock_dim=dim,
        t_max=t_max,
        n_points=n_points,
        seed=seed,
        json_mirror=mirror,
        spectrum_n_max=n_max,
        spectrum_k_max=k_max,
        steady_initial_nbar=s_nbar,
        steady_alpha=alpha,
        counting_t=c_t,
        counting_n_max=c_n,
        kicked_period=period,
        kicked_periods=n_periods,
        kicked_substeps=substeps,
        waiting_from=w_from,
        waiting_to=w_to,
        traj_samples=samples,
        observers=built_obs,
        sha256=sha256,
    )


def load_scenario(path):
    """Parse and validate a TOML scenario file."""
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        raw = tomllib.loads(blob.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError([f"unparseable config: {exc}"]) from exc
    return from_dict(raw, sha256=hashlib.sha256(blob).hexdigest())
