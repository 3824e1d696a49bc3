"""Noise bounds, resource formulas, classical baselines, and study protocols.

The depolarizing-noise attenuation factor and the derived error bounds are
evaluated as closed-form expressions; the log in the attenuation exponent
is base 2 (two-qubit gate count for preparing a rank-R superposition), with
log2(1) = 0. The correlated-noise constant and correlation strength have no
canonical values and must be supplied by the caller.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from dvqa._validation import check_positive_int, check_probability
from dvqa.hamiltonian import Hamiltonian, Partition, build_hamiltonian, is_diagonal
from dvqa.problems import synth_graph, maxcut_hamiltonian
from dvqa.trainer import TrainConfig, optimize

__all__ = [
    "NoiseBoundParams",
    "fidelity_factor",
    "iid_noise_bound",
    "correlated_noise_bound",
    "total_noise_bound",
    "ShotPlan",
    "shot_budget",
    "ResourceEstimate",
    "resource_estimate",
    "brute_force",
    "simulated_annealing",
    "approximation_ratio",
    "BenchRecord",
    "parse_kv_config",
    "NoiseStudyConfig",
    "ScalingStudyConfig",
    "BenchConfig",
    "run_noise_study",
    "run_scaling_study",
    "run_benchmark",
]

MAX_BRUTE_QUBITS = 24
_BRUTE_CHUNK = 1 << 20


# --- closed-form noise bounds -------------------------------------------------


@dataclass(frozen=True)
class NoiseBoundParams:
    """Inputs of the depolarizing-noise error bounds."""

    p1: float
    p2: float
    depth: int
    width: int
    max_rank: int = 1
    locality: int = 2
    e_ref: float = 1.0
    c_b: float = 1.0
    eps_c: float = 0.0

    def __post_init__(self):
        check_probability(self.p1, "p1")
        check_probability(self.p2, "p2")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        check_positive_int(self.width, "width")
        check_positive_int(self.max_rank, "max_rank")
        check_positive_int(self.locality, "locality")


def fidelity_factor(params: NoiseBoundParams) -> float:
    """Per-subsystem attenuation (1-p1)^(4 + D*d) * (1-p2)^(log2 R + D*(d-1))."""
    e1 = 4 + params.depth * params.width
    e2 = math.log2(params.max_rank) + params.depth * (params.width - 1)
    return (1.0 - params.p1) ** e1 * (1.0 - params.p2) ** e2


def iid_noise_bound(params: NoiseBoundParams) -> float:
    """Bound on |energy shift| under i.i.d. depolarizing noise."""
    f = fidelity_factor(params)
    return (1.0 - f**params.locality) * abs(params.e_ref)


def correlated_noise_bound(params: NoiseBoundParams) -> float:
    """First-order correction for correlated noise of strength eps_c."""
    f = fidelity_factor(params)
    return f ** (params.locality - 1) * params.locality * params.c_b * params.depth * params.eps_c


def total_noise_bound(params: NoiseBoundParams) -> float:
    return iid_noise_bound(params) + correlated_noise_bound(params)


# --- sampling and circuit resources -------------------------------------------


@dataclass(frozen=True)
class ShotPlan:
    w_l1: float
    c_l1: float
    epsilon: float
    shots: int = field(init=False, default=0)

    def __post_init__(self):
        object.__setattr__(self, "shots", shot_budget(self.w_l1, self.c_l1, self.epsilon))


def shot_budget(w_l1: float, c_l1: float, epsilon: float) -> int:
    """Samples needed for additive error epsilon: ceil(w1^2 c1^4 / eps^2)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return max(1, math.ceil(w_l1**2 * c_l1**4 / epsilon**2))


@dataclass(frozen=True)
class ResourceEstimate:
    circuit_variants: int
    circuit_variants_formula: float
    contraction_cost: float


def resource_estimate(h: Hamiltonian, part: Partition, bond_dim: int = 1) -> ResourceEstimate:
    """Exact sampled-circuit count plus the formula-based scaling estimates.

    ``circuit_variants`` counts the distinct (subsystem, term, alpha, beta,
    real/imag) circuits a sampled evaluation issues: 2 R_k^2 per non-identity
    local factor; identity factors are handled analytically and issue none.
    """
    from dvqa.hamiltonian import partition_terms
    from dvqa.engine import is_identity

    m = len(h.terms)
    count = 0
    for term in partition_terms(h, part):
        for k, factor in enumerate(term.factors):
            if not is_identity(factor):
                count += 2 * part.ranks[k] ** 2
    r = part.max_rank
    p = h.locality
    formula = m * float(r) ** (4 * p)
    contraction = (
        part.num_subsystems * r * m * bond_dim**3
        + p * r**2 * m * bond_dim**2
    )
    return ResourceEstimate(count, formula, float(contraction))


# --- classical baselines -------------------------------------------------------


def _term_masks(h: Hamiltonian) -> tuple[np.ndarray, np.ndarray]:
    n = h.num_qubits
    masks = np.array(
        [sum(1 << (n - 1 - j) for j, c in enumerate(s) if c == "Z") for _, s in h.terms],
        dtype=np.uint64,
    )
    return masks, h.weights


def _parity(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        v ^= v >> np.uint64(shift)
    return (v & np.uint64(1)).astype(np.int8)


def brute_force(h: Hamiltonian) -> tuple[str, float]:
    """Exhaustive minimum of the diagonal energy; ties break to the lowest bitstring."""
    if not is_diagonal(h):
        raise ValueError("brute force requires a diagonal Hamiltonian")
    n = h.num_qubits
    if n > MAX_BRUTE_QUBITS:
        raise ValueError(f"brute force limited to {MAX_BRUTE_QUBITS} qubits, got {n}")
    masks, weights = _term_masks(h)
    best_val = math.inf
    best_idx = 0
    for start in range(0, 2**n, _BRUTE_CHUNK):
        stop = min(start + _BRUTE_CHUNK, 2**n)
        idx = np.arange(start, stop, dtype=np.uint64)
        energies = np.full(idx.shape[0], h.offset)
        for mask, w in zip(masks, weights):
            energies += w * (1.0 - 2.0 * _parity(idx & mask))
        local = int(np.argmin(energies))
        if energies[local] < best_val:
            best_val = float(energies[local])
            best_idx = start + local
    return format(best_idx, f"0{n}b"), best_val


def simulated_annealing(h: Hamiltonian, sweeps: int, seed,
                        t_start: float | None = None,
                        t_end: float | None = None) -> tuple[str, float]:
    """Single-spin-flip Metropolis with a geometric temperature schedule.

    Defaults: start at max|w| and end at 0.01 * min nonzero |w|. Returns the
    best state ever visited (the random initial state included).
    """
    if not is_diagonal(h):
        raise ValueError("simulated annealing requires a diagonal Hamiltonian")
    check_positive_int(sweeps, "sweeps")
    n = h.num_qubits
    rng = np.random.default_rng(seed)
    z = rng.choice(np.array([1.0, -1.0]), size=n)
    if not h.terms:
        return "0" * n, float(h.offset)
    weights = h.weights
    supports = [[j for j, c in enumerate(s) if c == "Z"] for _, s in h.terms]
    per_spin = [np.array([i for i, sup in enumerate(supports) if j in sup], dtype=np.intp)
                for j in range(n)]
    prod = np.array([np.prod(z[sup]) if sup else 1.0 for sup in supports])
    energy = float(h.offset + weights @ prod)
    abs_w = np.abs(weights[weights != 0.0])
    t0 = t_start if t_start is not None else float(abs_w.max())
    tf = t_end if t_end is not None else 0.01 * float(abs_w.min())
    t0 = max(t0, 1e-12)
    tf = min(max(tf, 1e-12), t0)
    best_energy = energy
    best_z = z.copy()
    for sweep in range(sweeps):
        frac = sweep / (sweeps - 1) if sweeps > 1 else 0.0
        temp = t0 * (tf / t0) ** frac
        accept_draws = rng.random(n)
        for j in range(n):
            idx = per_spin[j]
            delta = -2.0 * float(weights[idx] @ prod[idx])
            if delta <= 0.0 or accept_draws[j] < math.exp(-delta / temp):
                z[j] = -z[j]
                prod[idx] = -prod[idx]
                energy += delta
                if energy < best_energy:
                    best_energy = energy
                    best_z = z.copy()
    bits = ((1.0 - best_z) / 2.0).astype(np.uint8)
    return "".join(str(b) for b in bits), float(best_energy)


def approximation_ratio(opt: float, achieved: float) -> float:
    """OPT / achieved for minimization with negative values; 1.0 is optimal."""
    if opt >= 0.0 or achieved >= 0.0:
        raise ValueError(
            "approximation ratio assumes negative optimum and achieved values "
            f"(got opt={opt}, achieved={achieved})"
        )
    return opt / achieved


# --- study configuration --------------------------------------------------------


def parse_kv_config(path) -> dict[str, str]:
    """Flat key=value text file; blank lines and '#' comments ignored."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{line_no}: expected key=value, got {stripped!r}")
            key, value = stripped.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


@dataclass(frozen=True)
class NoiseStudyConfig:
    """Noise-study protocol; each run reports the best-of-``restarts`` final loss.

    Restarts damp optimizer variance so the emitted deviation reflects the
    noise channel rather than occasional bad basins of the rank-1 landscape.
    """

    num_qubits: int = 10
    k_values: tuple[int, ...] = (2, 5, 10)
    runs: int = 10
    p1: float = 0.01
    p2: float = 0.2
    depth: int = 6
    iterations: int = 150
    restarts: int = 3
    learning_rate: float = 0.05
    seed: int = 0
    case: str = "qubo"  # qubo | twobody
    threads: int = 1

    @staticmethod
    def from_mapping(kv: dict) -> "NoiseStudyConfig":
        base = NoiseStudyConfig()
        return NoiseStudyConfig(
            num_qubits=int(kv.get("num_qubits", base.num_qubits)),
            k_values=_ints(kv["k_values"]) if "k_values" in kv else base.k_values,
            runs=int(kv.get("runs", base.runs)),
            p1=float(kv.get("p1", base.p1)),
            p2=float(kv.get("p2", base.p2)),
            depth=int(kv.get("depth", base.depth)),
            iterations=int(kv.get("iterations", base.iterations)),
            restarts=int(kv.get("restarts", base.restarts)),
            learning_rate=float(kv.get("learning_rate", base.learning_rate)),
            seed=int(kv.get("seed", base.seed)),
            case=kv.get("case", base.case),
            threads=int(kv.get("threads", base.threads)),
        )


@dataclass(frozen=True)
class ScalingStudyConfig:
    sizes: tuple[int, ...] = (10, 60, 120)
    runs: int = 20
    large_size: int | None = 1000
    large_runs: int = 1
    subsystem_size: int = 6
    rank: int = 1
    depth: int = 6
    iterations: int = 200
    learning_rate: float = 0.05
    avg_degree: float = 6.0
    sa_sweeps: int = 200
    opt_sa_runs: int = 10
    opt_sa_sweeps: int = 3000
    seed: int = 0
    threads: int = 1

    @staticmethod
    def from_mapping(kv: dict) -> "ScalingStudyConfig":
        base = ScalingStudyConfig()
        large = kv.get("large_size", base.large_size)
        return ScalingStudyConfig(
            sizes=_ints(kv["sizes"]) if "sizes" in kv else base.sizes,
            runs=int(kv.get("runs", base.runs)),
            large_size=None if large in (None, "", "none") else int(large),
            large_runs=int(kv.get("large_runs", base.large_runs)),
            subsystem_size=int(kv.get("subsystem_size", base.subsystem_size)),
            rank=int(kv.get("rank", base.rank)),
            depth=int(kv.get("depth", base.depth)),
            iterations=int(kv.get("iterations", base.iterations)),
            learning_rate=float(kv.get("learning_rate", base.learning_rate)),
            avg_degree=float(kv.get("avg_degree", base.avg_degree)),
            sa_sweeps=int(kv.get("sa_sweeps", base.sa_sweeps)),
            opt_sa_runs=int(kv.get("opt_sa_runs", base.opt_sa_runs)),
            opt_sa_sweeps=int(kv.get("opt_sa_sweeps", base.opt_sa_sweeps)),
            seed=int(kv.get("seed", base.seed)),
            threads=int(kv.get("threads", base.threads)),
        )


@dataclass(frozen=True)
class BenchConfig:
    problem: str = "maxcut"
    instances: tuple[str, ...] = ()
    runs: int = 20
    subsystems: int = 2
    rank: int = 1
    depth: int = 6
    iterations: int = 200
    learning_rate: float = 0.05
    mode: str = "exact"
    shots: int = 1000
    p1: float = 0.0
    p2: float = 0.0
    sa_sweeps: int = 200
    opt_sa_runs: int = 10
    opt_sa_sweeps: int = 3000
    seed: int = 0
    threads: int = 1

    @staticmethod
    def from_mapping(kv: dict) -> "BenchConfig":
        base = BenchConfig()
        instances = tuple(t for t in kv.get("instances", "").replace(",", " ").split() if t)
        return BenchConfig(
            problem=kv.get("problem", base.problem),
            instances=instances,
            runs=int(kv.get("runs", base.runs)),
            subsystems=int(kv.get("subsystems", base.subsystems)),
            rank=int(kv.get("rank", base.rank)),
            depth=int(kv.get("depth", base.depth)),
            iterations=int(kv.get("iterations", base.iterations)),
            learning_rate=float(kv.get("learning_rate", base.learning_rate)),
            mode=kv.get("mode", base.mode),
            shots=int(kv.get("shots", base.shots)),
            p1=float(kv.get("p1", base.p1)),
            p2=float(kv.get("p2", base.p2)),
            sa_sweeps=int(kv.get("sa_sweeps", base.sa_sweeps)),
            opt_sa_runs=int(kv.get("opt_sa_runs", base.opt_sa_runs)),
            opt_sa_sweeps=int(kv.get("opt_sa_sweeps", base.opt_sa_sweeps)),
            seed=int(kv.get("seed", base.seed)),
            threads=int(kv.get("threads", base.threads)),
        )


@dataclass(frozen=True)
class BenchRecord:
    instance: str
    method: str
    run: int
    achieved: float
    opt: float
    ratio: float
    wall_time: float
    opt_is_proxy: bool = False
    c_norm_error: float = 0.0
    imag_residual: float = 0.0


# --- noise study -----------------------------------------------------------------


def _random_qubo(n: int, seed: int) -> Hamiltonian:
    """Dense random QUBO: linear and pairwise Z weights uniform in [-1, 1]."""
    rng = np.random.default_rng(seed)
    terms = []
    for i in range(n):
        letters = ["I"] * n
        letters[i] = "Z"
        terms.append((rng.uniform(-1.0, 1.0), "".join(letters)))
    for i in range(n):
        for j in range(i + 1, n):
            letters = ["I"] * n
            letters[i] = "Z"
            letters[j] = "Z"
            terms.append((rng.uniform(-1.0, 1.0), "".join(letters)))
    return build_hamiltonian(n, terms)


def _two_body_instance(n: int) -> Hamiltonian:
    letters = ["I"] * n
    letters[0] = "Z"
    letters[-1] = "Z"
    return build_hamiltonian(n, [(1.0, "".join(letters))])


def noise_study_instance(config: NoiseStudyConfig) -> Hamiltonian:
    if config.case == "qubo":
        return _random_qubo(config.num_qubits, config.seed)
    if config.case == "twobody":
        return _two_body_instance(config.num_qubits)
    raise ValueError(f"unknown noise-study case {config.case!r}")


def _noise_cell_run(h: Hamiltonian, k: int, run: int, config: NoiseStudyConfig,
                    e_ground: float) -> dict:
    part = Partition.even(config.num_qubits, k, ranks=1)
    train = TrainConfig(
        iterations=config.iterations,
        learning_rate=config.learning_rate,
        depth=config.depth,
        mode="noisy",
        p1=config.p1,
        p2=config.p2,
        restarts=config.restarts,
        select_by="loss",
        seed=int(np.random.SeedSequence([config.seed, k, run]).generate_state(1)[0]),
    )
    t0 = time.perf_counter()
    result = optimize(h, part, train)
    e_sim = float(result.loss_trace[-1])
    return {
        "k": k,
        "run": run,
        "e_sim": e_sim,
        "delta": abs(e_sim - e_ground),
        "wall_time": time.perf_counter() - t0,
        "c_norm_error": result.max_c_norm_error,
        "imag_residual": result.max_imag_residual,
    }


def run_noise_study(config: NoiseStudyConfig) -> tuple[list[dict], list[dict]]:
    """Noisy-mode optimization per subsystem count, with the closed-form bound.

    Returns (per-run records, per-K summary rows). Summary columns:
    k, runs, mean, std, bound, time. The error reference for the bound is
    the exact ground energy of the instance.
    """
    h = noise_study_instance(config)
    for k in config.k_values:
        if config.num_qubits % k != 0:
            raise ValueError(f"K={k} does not divide N={config.num_qubits}")
    _, e_ground = brute_force(h)
    tasks = [(k, run) for k in config.k_values for run in range(config.runs)]
    results = Parallel(n_jobs=config.threads)(
        delayed(_noise_cell_run)(h, k, run, config, e_ground) for k, run in tasks
    )
    records = sorted(results, key=lambda rec: (rec["k"], rec["run"]))
    summary = []
    for k in config.k_values:
        cell = [rec for rec in records if rec["k"] == k]
        deltas = np.array([rec["delta"] for rec in cell])
        params = NoiseBoundParams(
            p1=config.p1, p2=config.p2, depth=config.depth,
            width=config.num_qubits // k, max_rank=1,
            locality=max(h.locality, 1), e_ref=e_ground,
        )
        summary.append({
            "k": k,
            "runs": len(cell),
            "mean": float(deltas.mean()),
            "std": float(deltas.std(ddof=0)),
            "bound": iid_noise_bound(params),
            "time": float(np.sum([rec["wall_time"] for rec in cell])),
        })
    return records, summary


# --- scaling study ----------------------------------------------------------------


def _chunked_partition(n: int, width: int, rank: int) -> Partition:
    sizes = [width] * (n // width)
    if n % width:
        sizes.append(n % width)
    return Partition(sizes, rank)


def _scaling_opt(h: Hamiltonian, config: ScalingStudyConfig) -> tuple[float, bool]:
    """Reference optimum: exact below the brute-force cap, long-SA proxy above."""
    if h.num_qubits <= MAX_BRUTE_QUBITS:
        return brute_force(h)[1], False
    best = math.inf
    for run in range(config.opt_sa_runs):
        _, energy = simulated_annealing(
            h, config.opt_sa_sweeps, [config.seed, h.num_qubits, 7, run]
        )
        best = min(best, energy)
    return best, True


def _scaling_cell(size: int, run: int, method: str, config: ScalingStudyConfig,
                  opt: float, proxy: bool) -> BenchRecord:
    graph = synth_graph(size, min(1.0, config.avg_degree / max(size - 1, 1)),
                        [config.seed, size, 11])
    h = maxcut_hamiltonian(graph)
    t0 = time.perf_counter()
    if method == "dvqa":
        part = _chunked_partition(size, config.subsystem_size, config.rank)
        train = TrainConfig(
            iterations=config.iterations,
            learning_rate=config.learning_rate,
            depth=config.depth,
            seed=int(np.random.SeedSequence([config.seed, size, 13, run]).generate_state(1)[0]),
        )
        result = optimize(h, part, train)
        achieved = result.best_energy
        extra = {"c_norm_error": result.max_c_norm_error,
                 "imag_residual": result.max_imag_residual}
    else:
        _, achieved = simulated_annealing(h, config.sa_sweeps, [config.seed, size, 17, run])
        extra = {}
    wall = time.perf_counter() - t0
    return BenchRecord(
        instance=f"maxcut-n{size}",
        method=method,
        run=run,
        achieved=achieved,
        opt=opt,
        ratio=approximation_ratio(opt, achieved),
        wall_time=wall,
        opt_is_proxy=proxy,
        **extra,
    )


def run_scaling_study(config: ScalingStudyConfig) -> tuple[list[BenchRecord], list[dict]]:
    """MaxCut scaling protocol over the configured sizes.

    Returns (per-run records, per-(size, method) summary rows). Summary
    columns: size, method, runs, median_ratio, q1_ratio, q3_ratio,
    median_time, opt, opt_is_proxy.
    """
    points = [(size, config.runs) for size in config.sizes]
    if config.large_size:
        points.append((config.large_size, config.large_runs))
    records: list[BenchRecord] = []
    for size, runs in points:
        graph = synth_graph(size, min(1.0, config.avg_degree / max(size - 1, 1)),
                            [config.seed, size, 11])
        h = maxcut_hamiltonian(graph)
        opt, proxy = _scaling_opt(h, config)
        cells = [(size, run, method) for method in ("dvqa", "sa") for run in range(runs)]
        out = Parallel(n_jobs=config.threads)(
            delayed(_scaling_cell)(size, run, method, config, opt, proxy)
            for size, run, method in cells
        )
        records.extend(sorted(out, key=lambda rec: (rec.method, rec.run)))
    summary = []
    for size, _ in points:
        for method in ("dvqa", "sa"):
            cell = [r for r in records if r.method == method and r.instance == f"maxcut-n{size}"]
            ratios = np.array([r.ratio for r in cell])
            times = np.array([r.wall_time for r in cell])
            summary.append({
                "size": size,
                "method": method,
                "runs": len(cell),
                "median_ratio": float(np.median(ratios)),
                "q1_ratio": float(np.percentile(ratios, 25)),
                "q3_ratio": float(np.percentile(ratios, 75)),
                "median_time": float(np.median(times)),
                "opt": cell[0].opt,
                "opt_is_proxy": cell[0].opt_is_proxy,
            })
    return records, summary


# --- benchmark protocol -------------------------------------------------------------


def _load_bench_instance(config: BenchConfig, path: str) -> Hamiltonian:
    from dvqa.problems import load_graph, load_portfolio, portfolio_hamiltonian

    if config.problem == "maxcut":
        return maxcut_hamiltonian(load_graph(path))
    if config.problem == "po":
        return portfolio_hamiltonian(load_portfolio(path))
    raise ValueError(f"unknown problem {config.problem!r}")


def _bench_cell(config: BenchConfig, path: str, method: str, run: int,
                opt: float, proxy: bool) -> BenchRecord:
    h = _load_bench_instance(config, path)
    t0 = time.perf_counter()
    if method == "dvqa":
        part = Partition.even(h.num_qubits, config.subsystems, config.rank)
        train = TrainConfig(
            iterations=config.iterations,
            learning_rate=config.learning_rate,
            depth=config.depth,
            mode=config.mode,
            shots=config.shots,
            p1=config.p1,
            p2=config.p2,
            seed=int(np.random.SeedSequence([config.seed, run, 23]).generate_state(1)[0]),
        )
        result = optimize(h, part, train)
        achieved = result.best_energy
        extra = {"c_norm_error": result.max_c_norm_error,
                 "imag_residual": result.max_imag_residual}
    else:
        _, achieved = simulated_annealing(h, config.sa_sweeps, [config.seed, run, 29])
        extra = {}
    wall = time.perf_counter() - t0
    return BenchRecord(
        instance=path,
        method=method,
        run=run,
        achieved=achieved,
        opt=opt,
        ratio=approximation_ratio(opt, achieved),
        wall_time=wall,
        opt_is_proxy=proxy,
        **extra,
    )


def run_benchmark(config: BenchConfig) -> list[BenchRecord]:
    """Box-statistics protocol: ``runs`` repetitions per instance and method."""
    if not config.instances:
        raise ValueError("benchmark needs at least one instance file")
    records: list[BenchRecord] = []
    for path in config.instances:
        h = _load_bench_instance(config, path)
        if h.num_qubits <= MAX_BRUTE_QUBITS:
            opt, proxy = brute_force(h)[1], False
        else:
            opt = min(
                simulated_annealing(h, config.opt_sa_sweeps, [config.seed, 31, run])[1]
                for run in range(config.opt_sa_runs)
            )
            proxy = True
        cells = [(path, method, run) for method in ("dvqa", "sa") for run in range(config.runs)]
        out = Parallel(n_jobs=config.threads)(
            delayed(_bench_cell)(config, path, method, run, opt, proxy)
            for path, method, run in cells
        )
        records.extend(sorted(out, key=lambda rec: (rec.method, rec.run)))
    return records
