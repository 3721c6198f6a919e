"""Run parameters, admissibility validation, and initial data.

The solver expects exponents p > 1 and 1 <= q <= 2p/(p+1), positive base
increments tau and h, and bump-shaped initial data: continuous, nonnegative,
symmetric about x = 0, strictly increasing on [-1, 0], zero at both ends,
and with a large sup norm (the adaptive mesh rules degenerate for small
amplitudes).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from cwblowup.state import SolutionState

if TYPE_CHECKING:  # pragma: no cover
    from cwblowup.grid import GridState

# Decimal budget of IEEE double; blow_threshold**p must stay below it.
_MAX_LOG10 = 308.0

_CONFIG_KEYS = (
    "p",
    "q",
    "tau",
    "h",
    "lambda",
    "blow_threshold",
    "max_steps",
    "picard_tol",
    "picard_max_iters",
    "initial",
)


class ConfigError(ValueError):
    """Bad configuration file, key, or parameter combination."""


class InitialDataError(ValueError):
    """Initial data violating the bump-profile requirements."""


@dataclass(frozen=True)
class SimParams:
    """Immutable contract for one run.

    Attributes:
        p: source exponent, must be > 1.
        q: gradient exponent, must satisfy 1 <= q <= 2p/(p+1).
        tau: base time increment; the adaptive step is tau*min(1, sup^(1-p)).
        h: base space increment, 0 < h <= 2 (the domain has length 2).
        lam: amplitude of the sine bump initial profile.
        blow_threshold: sup-norm level at which blow-up is declared.
        max_steps: step budget before giving up.
        picard_tol: sup-norm tolerance for the frozen-sign fallback iteration.
        picard_max_iters: iteration cap for that fallback.
    """

    p: float = 3.0
    q: float = 1.2
    tau: float = 0.1
    h: float = 0.05
    lam: float = 10.0
    blow_threshold: float = 1e12
    max_steps: int = 100_000
    picard_tol: float = 1e-12
    picard_max_iters: int = 50

    @property
    def q_max(self) -> float:
        """Largest admissible gradient exponent, 2p/(p+1)."""
        return 2.0 * self.p / (self.p + 1.0)

    def regime(self) -> str:
        """Classify (p, q) by the known blow-up set behaviour.

        Returns one of:
          * ``"multi-point"``   -- p = 2, q = 1: the peak and both neighbours
            diverge while the second neighbours stay bounded.
          * ``"single-point"``  -- p > 2, q < 2(p-1)/p: only the peak diverges.
          * ``"open-theory"``   -- 1 < p < 2: boundedness off the peak is an
            open question; only empirical evidence is reported.
          * ``"other"``         -- anything else in the admissible range.
        """
        if self.p == 2.0 and self.q == 1.0:
            return "multi-point"
        if self.p > 2.0 and self.q < 2.0 * (self.p - 1.0) / self.p:
            return "single-point"
        if 1.0 < self.p < 2.0:
            return "open-theory"
        return "other"


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate`: one (name, ok, message) row per check."""

    checks: tuple[tuple[str, bool, str], ...]
    adjacent_blowup_h_ok: bool
    regime: str

    @property
    def ok(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def failures(self) -> list[str]:
        return [f"{name}: {msg}" for name, ok, msg in self.checks if not ok]


def validate(params: SimParams) -> ValidationReport:
    """Check a parameter set against the admissibility constraints.

    Total: always returns a report, never raises.  Also flags whether
    h < 1/(1+tau) holds; in the p = 2, q = 1 regime that inequality is what
    makes the nodes adjacent to the peak diverge as well.
    """
    checks: list[tuple[str, bool, str]] = []

    def add(name: str, ok: bool, msg: str) -> None:
        checks.append((name, bool(ok), msg))

    p, q = params.p, params.q
    add("p_range", p > 1.0, f"p must be > 1, got {p}")
    q_hi = 2.0 * p / (p + 1.0) if p > 1.0 else float("nan")
    add(
        "q_range",
        p > 1.0 and 1.0 <= q <= q_hi,
        f"q must lie in [1, 2p/(p+1)] = [1, {q_hi}], got {q}",
    )
    add("tau_positive", params.tau > 0.0, f"tau must be positive, got {params.tau}")
    add(
        "h_range",
        0.0 < params.h <= 2.0,
        f"h must lie in (0, 2], got {params.h}",
    )
    add("lambda_positive", params.lam > 0.0, f"lambda must be positive, got {params.lam}")
    add(
        "blow_threshold_range",
        params.blow_threshold > 1.0,
        f"blow_threshold must exceed 1, got {params.blow_threshold}",
    )
    overflow_ok = (
        params.blow_threshold > 1.0
        and p * math.log10(params.blow_threshold) < _MAX_LOG10
    )
    add(
        "blow_threshold_representable",
        params.blow_threshold <= 1.0 or overflow_ok,
        "blow_threshold**p overflows double precision",
    )
    add("max_steps_nonnegative", params.max_steps >= 0, "max_steps must be >= 0")
    add("picard_tol_positive", params.picard_tol > 0.0, "picard_tol must be positive")
    add(
        "picard_iters_positive",
        params.picard_max_iters >= 1,
        "picard_max_iters must be >= 1",
    )

    h_flag = params.tau > 0.0 and params.h < 1.0 / (1.0 + params.tau)
    return ValidationReport(
        checks=tuple(checks),
        adjacent_blowup_h_ok=bool(h_flag),
        regime=params.regime(),
    )


@dataclass(frozen=True)
class InitialData:
    """Initial profile: the built-in sine bump or a tabulated curve.

    The sine bump is lam * sin(pi/2 * (x + 1)), evaluated as lam * cos(pi*x/2)
    and mirrored about x = 0 so that symmetry is bit-exact on symmetric grids.
    """

    kind: str = "sine"  # "sine" | "table"
    table: np.ndarray | None = None  # shape (k, 2): columns x, u0

    @classmethod
    def sine(cls) -> "InitialData":
        return cls(kind="sine")

    @classmethod
    def from_table(cls, x: np.ndarray, u0: np.ndarray) -> "InitialData":
        x = np.asarray(x, dtype=float)
        u0 = np.asarray(u0, dtype=float)
        if x.ndim != 1 or x.shape != u0.shape or x.size < 3:
            raise InitialDataError("table needs matching 1-d x and u0 with >= 3 rows")
        order = np.argsort(x)
        x, u0 = x[order], u0[order]
        _check_profile(x, u0, context="table")
        return cls(kind="table", table=np.column_stack([x, u0]))

    @classmethod
    def from_csv(cls, path: str | Path) -> "InitialData":
        path = Path(path)
        if not path.exists():
            raise InitialDataError(f"initial data file not found: {path}")
        rows = []
        for raw in path.read_text().splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p for p in line.replace(",", " ").split() if p]
            if parts and parts[0].lower() in ("x", "x,u0"):
                continue
            if len(parts) != 2:
                raise InitialDataError(f"expected two columns (x, u0), got: {raw!r}")
            rows.append((float(parts[0]), float(parts[1])))
        if len(rows) < 3:
            raise InitialDataError("initial data table needs at least 3 rows")
        arr = np.asarray(rows, dtype=float)
        return cls.from_table(arr[:, 0], arr[:, 1])

    def sup_estimate(self, params: SimParams) -> float:
        """Sup norm of the profile, used to size the initial grid."""
        if self.kind == "sine":
            return params.lam
        assert self.table is not None
        return float(self.table[:, 1].max())

    def sample(self, params: SimParams, nodes: np.ndarray, mid: int) -> np.ndarray:
        """Evaluate the profile on grid nodes; boundary entries forced to 0."""
        if self.kind == "sine":
            # Evaluate the left half only and mirror: u0(x) = lam*cos(pi*x/2)
            # is even, and the mirrored copy keeps node pairs bit-identical.
            left = params.lam * np.cos(0.5 * np.pi * nodes[: mid + 1])
            u = np.concatenate([left, left[-2::-1]])
        else:
            assert self.table is not None
            x, u0 = self.table[:, 0], self.table[:, 1]
            if x[0] > nodes[0] or x[-1] < nodes[-1]:
                raise InitialDataError("initial data table must cover [-1, 1]")
            u = np.interp(nodes, x, u0)
        u[0] = 0.0
        u[-1] = 0.0
        return u


def _check_profile(x: np.ndarray, u: np.ndarray, *, context: str) -> None:
    """Enforce the bump-profile requirements on sampled values."""
    scale = float(np.max(np.abs(u))) if u.size else 0.0
    tol = 1e-12 * max(scale, 1.0)
    if np.any(~np.isfinite(u)):
        raise InitialDataError(f"{context}: non-finite values")
    if np.any(u < -tol):
        raise InitialDataError(f"{context}: negative values (profile must be nonnegative)")
    if scale <= 0.0 or np.all(np.abs(u - u[0]) <= tol):
        raise InitialDataError(f"{context}: profile must be nonconstant")
    if abs(u[0]) > tol or abs(u[-1]) > tol:
        raise InitialDataError(f"{context}: profile must vanish at x = -1 and x = 1")
    # Symmetry: every sampled x must have a mirror partner with equal value.
    order = np.argsort(-x)
    if not np.allclose(x, -x[order], atol=1e-9):
        raise InitialDataError(f"{context}: sample points are not symmetric about 0")
    if np.max(np.abs(u - u[order])) > tol:
        raise InitialDataError(f"{context}: values are not symmetric about x = 0")
    # Strict monotonicity on [-1, 0].
    left = u[x <= 1e-15]
    if np.any(np.diff(left) <= 0.0):
        raise InitialDataError(f"{context}: profile must increase strictly on [-1, 0]")
    if scale <= 1.0:
        raise InitialDataError(
            f"{context}: sup norm {scale} <= 1; the adaptive mesh rules degenerate"
        )
    if scale < 10.0:
        warnings.warn(
            f"{context}: sup norm {scale} < 10; the blow-up asymptotics assume a "
            "large amplitude",
            stacklevel=3,
        )


def make_initial(
    params: SimParams,
    grid: "GridState",
    initial: InitialData | None = None,
) -> SolutionState:
    """Sample the initial profile on a grid and wrap it as the t = 0 state."""
    initial = initial if initial is not None else InitialData.sine()
    u = initial.sample(params, grid.nodes, grid.mid)
    _check_profile(grid.nodes, u, context=initial.kind)
    return SolutionState(u=u, t=0.0, n=0, tau_last=0.0)


def load_config(path: str | Path) -> dict[str, str]:
    """Parse a flat key=value config file into a raw string mapping."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got: {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        mapping[key] = value
    return mapping


def apply_overrides(mapping: dict[str, str], overrides: list[str]) -> dict[str, str]:
    """Apply key=value override strings on top of a config mapping."""
    out = dict(mapping)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got: {item!r}")
        key, _, value = item.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown override key {key!r}")
        out[key] = value
    return out


def build_params(
    mapping: dict[str, str], *, base_dir: Path | None = None
) -> tuple[SimParams, InitialData]:
    """Turn a raw config mapping into (SimParams, InitialData).

    Raises ConfigError when a value fails to parse or validation fails.
    """
    kwargs: dict[str, float | int] = {}
    float_keys = {"p", "q", "tau", "h", "blow_threshold", "picard_tol"}
    int_keys = {"max_steps", "picard_max_iters"}
    for key, value in mapping.items():
        if key == "initial":
            continue
        try:
            if key in int_keys:
                kwargs[key] = int(float(value))
            elif key == "lambda":
                kwargs["lam"] = float(value)
            elif key in float_keys:
                kwargs[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    params = SimParams(**kwargs)  # type: ignore[arg-type]
    report = validate(params)
    if not report.ok:
        raise ConfigError("; ".join(report.failures()))

    choice = mapping.get("initial", "sine")
    if choice == "sine":
        initial = InitialData.sine()
    elif choice.startswith("file:"):
        rel = Path(choice[len("file:") :])
        if base_dir is not None and not rel.is_absolute():
            rel = base_dir / rel
        try:
            initial = InitialData.from_csv(rel)
        except InitialDataError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        raise ConfigError(f"initial must be 'sine' or 'file:PATH', got {choice!r}")
    return params, initial


def params_header(params: SimParams, initial: InitialData | None = None) -> str:
    """One-line comment recording the fully resolved parameter set."""
    parts = [
        f"p={params.p!r}",
        f"q={params.q!r}",
        f"tau={params.tau!r}",
        f"h={params.h!r}",
        f"lambda={params.lam!r}",
        f"blow_threshold={params.blow_threshold!r}",
        f"max_steps={params.max_steps}",
        f"picard_tol={params.picard_tol!r}",
        f"picard_max_iters={params.picard_max_iters}",
    ]
    if initial is not None:
        parts.append(f"initial={initial.kind}")
    return "# " + " ".join(parts)
