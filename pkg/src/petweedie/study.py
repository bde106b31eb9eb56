"""Simulation study for the regression fit and grouped-count (frequency table) fits."""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
import math

import numpy as np
from scipy.stats import norm

from .errors import ConvergenceError, DomainError, EvaluationError, RankDeficiencyError
from .estimating import RegressionData, chaser_fit, mean_vector, pmf_until, pool_cells
from .pet import DEFAULT_DRAWS, PetParams, grouped_log_likelihood, logpmf, sample_pet_means
from .seeding import DEFAULT_SEED, substream

STUDY_COLUMNS = ("scenario", "p", "phi", "n", "parameter", "bias", "coverage", "excluded")


@dataclass(frozen=True)
class FrequencyTable:
    counts: dict

    def __post_init__(self):
        clean = {}
        for y, f in self.counts.items():
            if int(y) != y or y < 0:
                raise DomainError(f"count value {y!r} is not a non-negative integer")
            if f < 0:
                raise DomainError(f"negative frequency {f} at y={y}")
            clean[int(y)] = f
        object.__setattr__(self, "counts", dict(sorted(clean.items())))

    @property
    def total(self):
        return sum(self.counts.values())

    @property
    def mean(self):
        return sum(y * f for y, f in self.counts.items()) / self.total

    def arrays(self):
        ys = np.fromiter(self.counts, dtype=np.int64)
        return ys, np.array([self.counts[y] for y in ys], dtype=float)


def swiss_accidents():
    """Accident counts per insurance policy (119853 policies)."""
    text = resources.files("petweedie").joinpath("data/swiss_accidents.csv").read_text()
    rows = [line.split(",") for line in text.strip().splitlines()[1:]]
    return FrequencyTable({int(y): int(c) for y, c in rows})


# covariate design ---------------------------------------------------------------

def generate_design(n, x2_order="permuted", seed=DEFAULT_SEED):
    """Intercept plus two covariates on the equally spaced grid from -1 to 1.

    ``x2_order="paired"`` uses the grid as is for both covariates, which makes
    them identical and the design singular; ``"permuted"`` (default) applies a
    fixed permutation to the second copy so the coefficients are identified.
    """
    if n < 2:
        raise DomainError("design needs n >= 2")
    grid = np.linspace(-1.0, 1.0, int(n))
    if x2_order == "paired":
        x2 = grid.copy()
    elif x2_order == "permuted":
        x2 = substream(seed, "design", int(n)).permutation(grid)
    else:
        raise DomainError(f"unknown x2 order {x2_order!r}")
    return np.column_stack([np.ones(int(n)), grid, x2])


# simulation study ------------------------------------------------------------------

@dataclass(frozen=True)
class SimStudyDesign:
    beta: tuple = (1.0, -1.0, -0.9)
    p_values: tuple = (1.01, 1.5, 2.0, 3.0)
    phi_values: tuple = (0.5, 1.0, 1.5)
    sample_sizes: tuple = (500, 1000, 5000)
    replicates: int = 200
    nominal_coverage: float = 0.95
    seed: int = DEFAULT_SEED
    x2_order: str = "permuted"
    fit_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if not 0.0 < self.nominal_coverage < 1.0:
            raise DomainError("nominal coverage must lie in (0, 1)")
        if len(self.beta) != 3:
            raise DomainError("the study design has an intercept and two covariates")
        for p in self.p_values:
            for phi in self.phi_values:
                PetParams(p, 1.0, phi)
                if not phi > 0.0:
                    raise DomainError("sampling needs phi > 0")

    def scenarios(self):
        return [(p, phi, n) for p in self.p_values for phi in self.phi_values
                for n in self.sample_sizes]


def reference_design(full=False, **overrides):
    """The full 36-scenario grid; ``full`` uses 1000 replicates instead of 200."""
    return SimStudyDesign(replicates=1000 if full else 200, **overrides)


PARAMETER_NAMES = ("beta0", "beta1", "beta2", "phi", "p")


def _replicate(args):
    design, index, rep = args
    p, phi, n = design.scenarios()[index]
    X = generate_design(n, design.x2_order, design.seed)
    beta = np.asarray(design.beta, dtype=float)
    truth = np.concatenate([beta, [phi, p]])
    rng = substream(design.seed, "simstudy", index, rep)
    try:
        y = sample_pet_means(p, mean_vector(beta, X), phi, rng)
        fit = chaser_fit(RegressionData(y, X, PARAMETER_NAMES[:3]), **design.fit_options)
    except (DomainError, RankDeficiencyError, ConvergenceError, EvaluationError,
            np.linalg.LinAlgError):
        return None
    if not fit.converged:
        return "p_at_bound" if fit.p_at_bound else None
    est = fit.theta
    se = fit.std_errors
    if not (np.all(np.isfinite(est)) and np.all(np.isfinite(se))):
        return None
    z = norm.ppf(0.5 + design.nominal_coverage / 2.0)
    return est - truth, np.abs(est - truth) <= z * se


@dataclass
class StudyResult:
    design: SimStudyDesign
    rows: list

    def cell(self, p, phi, n, parameter):
        for r in self.rows:
            if (r["p"], r["phi"], r["n"], r["parameter"]) == (p, phi, n, parameter):
                return r
        raise KeyError((p, phi, n, parameter))

    def as_dict(self):
        d = asdict(self.design)
        return {"design": d, "rows": self.rows}


def run_simulation_study(design, workers=1):
    """Bias and Wald coverage of the estimating-function fit per scenario.

    Replicate ``r`` of scenario ``s`` draws from substream ``(seed, s, r)``;
    non-converged or failed fits are excluded and counted. Exclusions where p
    stalled on a bound (no Pearson root inside ``p_bounds``) are counted apart.
    """
    tasks = [(design, s, r) for s in range(len(design.scenarios()))
             for r in range(design.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_replicate, tasks, chunksize=8))
    else:
        results = [_replicate(t) for t in tasks]
    rows = []
    for s, (p, phi, n) in enumerate(design.scenarios()):
        chunk = results[s * design.replicates:(s + 1) * design.replicates]
        ok = [c for c in chunk if isinstance(c, tuple)]
        excluded = len(chunk) - len(ok)
        at_bound = sum(1 for c in chunk if c == "p_at_bound")
        errs = np.array([c[0] for c in ok]).reshape(len(ok), len(PARAMETER_NAMES))
        cover = np.array([c[1] for c in ok]).reshape(len(ok), len(PARAMETER_NAMES))
        k = len(ok)
        for j, name in enumerate(PARAMETER_NAMES):
            bias = float(errs[:, j].mean()) if k else math.nan
            bias_se = float(errs[:, j].std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan
            cov = float(cover[:, j].mean()) if k else math.nan
            cov_se = math.sqrt(cov * (1.0 - cov) / k) if k else math.nan
            rows.append({"scenario": s, "p": p, "phi": phi, "n": n, "parameter": name,
                         "bias": bias, "bias_se": bias_se, "coverage": cov,
                         "coverage_se": cov_se, "excluded": excluded,
                         "excluded_p_at_bound": at_bound})
    return StudyResult(design, rows)


# frequency tables -----------------------------------------------------------------------

@dataclass
class ProfileResult:
    p: float
    phi: float
    m: float
    p_grid: np.ndarray
    phi_grid: np.ndarray
    loglik: np.ndarray
    std_error: np.ndarray

    def at(self, p, phi):
        i = int(np.argmin(np.abs(self.p_grid - p)))
        j = int(np.argmin(np.abs(self.phi_grid - phi)))
        return float(self.loglik[i, j]), float(self.std_error[i, j])

    @property
    def max_loglik(self):
        return float(np.max(self.loglik))


def fit_frequency_table_profile(table, p_grid, phi_grid, method="quad", draws=DEFAULT_DRAWS,
                                seed=DEFAULT_SEED):
    """Log-likelihood over a (p, phi) grid with the mean fixed at the table mean.

    Grid point ``(i, j)`` uses substream ``(seed, i, j)`` under MC.
    """
    p_grid = np.atleast_1d(np.asarray(p_grid, dtype=float))
    phi_grid = np.atleast_1d(np.asarray(phi_grid, dtype=float))
    if p_grid.size == 0 or phi_grid.size == 0:
        raise DomainError("grids must be non-empty")
    m = table.mean
    ys, freq = table.arrays()
    keep = freq > 0
    ys, freq = ys[keep], freq[keep]
    ll = np.empty((p_grid.size, phi_grid.size))
    se = np.zeros_like(ll)
    for i, p in enumerate(p_grid):
        for j, phi in enumerate(phi_grid):
            sub = int(substream(seed, "profile", i, j).integers(0, 2 ** 63))
            v, var = grouped_log_likelihood(PetParams(float(p), m, float(phi)), ys, freq,
                                            method=method, draws=draws, seed=sub)
            ll[i, j] = v
            se[i, j] = math.sqrt(var)
    i, j = np.unravel_index(int(np.argmax(ll)), ll.shape)
    return ProfileResult(float(p_grid[i]), float(phi_grid[j]), m, p_grid, phi_grid, ll, se)


@dataclass(frozen=True)
class ExpectedTable:
    cells: tuple
    expected: np.ndarray


def expected_frequencies(total, params, y_max=None, pooling=5.0, method="quad", **settings):
    """``total * pmf(y)`` for y = 0..y_max followed by the pooled tail ``> y_max``.

    Without ``y_max`` the tail is pooled at the first cell whose expectation,
    or that of the remaining tail, falls below ``pooling``.
    """
    if total < 0:
        raise DomainError("total must be non-negative")
    if y_max is None:
        probs = pmf_until(params, max(total, 1.0), pooling, method=method, **settings)
        k, tails = pool_cells(probs, total, pooling)
    else:
        lp, _ = logpmf(params, np.arange(int(y_max) + 1), method=method, **settings)
        probs = np.exp(lp)
        k = int(y_max) + 1
        tails = np.maximum(1.0 - np.concatenate([[0.0], np.cumsum(probs)]), 0.0)
    values = np.concatenate([total * probs[:k], [total * tails[k]]])
    cells = tuple(str(y) for y in range(k)) + (f"{k}+",)
    return ExpectedTable(cells, values)
