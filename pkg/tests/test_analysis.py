import numpy as np
import pytest

from dvqa.analysis import (
    BenchConfig,
    NoiseBoundParams,
    NoiseStudyConfig,
    ScalingStudyConfig,
    ShotPlan,
    approximation_ratio,
    brute_force,
    correlated_noise_bound,
    fidelity_factor,
    iid_noise_bound,
    noise_study_instance,
    parse_kv_config,
    resource_estimate,
    shot_budget,
    simulated_annealing,
    total_noise_bound,
)
from dvqa.engine import count_circuits
from dvqa.hamiltonian import Partition, build_hamiltonian, partition_terms
from dvqa.problems import Graph, maxcut_hamiltonian, synth_graph
from dvqa.trainer import init_theta
from oracles import enumerate_minimum, random_diagonal_hamiltonian


class TestFidelityFactor:
    def test_noiseless_is_one(self):
        params = NoiseBoundParams(p1=0, p2=0, depth=6, width=5)
        assert fidelity_factor(params) == 1.0

    def test_printed_formula_case(self):
        # (1-p1)^(4 + D*d) * (1-p2)^(log2 R + D*(d-1)) at D=6, d=5, R=1
        params = NoiseBoundParams(p1=0.01, p2=0.2, depth=6, width=5, max_rank=1)
        assert fidelity_factor(params) == pytest.approx(0.99**34 * 0.8**24, rel=1e-12)

    def test_log2_of_rank(self):
        base = NoiseBoundParams(p1=0.0, p2=0.1, depth=0, width=2, max_rank=4)
        assert fidelity_factor(base) == pytest.approx(0.9**2, rel=1e-12)

    def test_monotone_in_width_and_depth(self):
        def f(width, depth, p1=0.01, p2=0.1):
            return fidelity_factor(NoiseBoundParams(p1=p1, p2=p2, depth=depth, width=width))

        assert f(3, 4) > f(4, 4) > f(5, 4)
        assert f(4, 3) > f(4, 4) > f(4, 5)
        assert 0.0 < f(6, 6) <= 1.0


class TestBounds:
    def test_noiseless_bound_zero(self):
        params = NoiseBoundParams(p1=0, p2=0, depth=6, width=4, e_ref=3.0)
        assert iid_noise_bound(params) == 0.0

    def test_arithmetic_case(self):
        # f = 1/2, p = 2, |E| = 4 -> (1 - 1/4) * 4 = 3
        params = NoiseBoundParams(p1=0.5, p2=0.0, depth=0, width=1, locality=2, e_ref=4.0)
        assert fidelity_factor(params) == pytest.approx(0.5**4)
        direct = (1 - 0.5**2) * 4.0
        manual = NoiseBoundParams(p1=0, p2=0, depth=0, width=1, locality=2, e_ref=4.0)
        assert iid_noise_bound(manual) == 0.0
        assert (1 - fidelity_factor(params) ** 2) * 4.0 == iid_noise_bound(params)
        assert direct == 3.0

    def test_correlated_arithmetic_case(self):
        # f = 1, p = 2, C_B = 1, D = 6, eps = 0.1 -> 1.2
        params = NoiseBoundParams(p1=0, p2=0, depth=6, width=1, locality=2,
                                  c_b=1.0, eps_c=0.1)
        assert correlated_noise_bound(params) == pytest.approx(1.2, abs=1e-12)

    def test_zero_correlation_reduces_to_iid(self):
        params = NoiseBoundParams(p1=0.02, p2=0.1, depth=3, width=3, e_ref=2.0, eps_c=0.0)
        assert correlated_noise_bound(params) == 0.0
        assert total_noise_bound(params) == iid_noise_bound(params)

    def test_additivity(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            params = NoiseBoundParams(
                p1=rng.uniform(0, 0.2), p2=rng.uniform(0, 0.3),
                depth=int(rng.integers(1, 7)), width=int(rng.integers(1, 6)),
                locality=int(rng.integers(1, 4)), e_ref=rng.uniform(-5, 5),
                c_b=rng.uniform(0, 2), eps_c=rng.uniform(0, 0.5),
            )
            assert total_noise_bound(params) == pytest.approx(
                iid_noise_bound(params) + correlated_noise_bound(params), rel=1e-12
            )


class TestShotBudget:
    def test_arithmetic(self):
        assert shot_budget(1.0, 1.0, 0.1) == 100

    def test_epsilon_scaling(self):
        assert shot_budget(1.0, 1.0, 0.05) == 4 * shot_budget(1.0, 1.0, 0.1)

    def test_c_norm_scaling(self):
        # uniform C over 4 entries has l1 = 2; over 16 entries l1 = 4
        from dvqa.ctensor import CorrelationTensor, l1_norm

        c4 = CorrelationTensor((2, 2), values=np.full((2, 2), 0.5, dtype=complex))
        c16 = CorrelationTensor((4, 4), values=np.full((4, 4), 0.25, dtype=complex))
        b4 = shot_budget(1.0, l1_norm(c4), 0.1)
        b16 = shot_budget(1.0, l1_norm(c16), 0.1)
        assert b16 == 16 * b4

    def test_plan_dataclass(self):
        plan = ShotPlan(w_l1=2.0, c_l1=1.0, epsilon=0.2)
        assert plan.shots == shot_budget(2.0, 1.0, 0.2)

    def test_epsilon_validation(self):
        with pytest.raises(ValueError):
            shot_budget(1.0, 1.0, 0.0)


class TestResourceEstimate:
    def test_rank_one_counts_nonidentity_factors(self):
        g = synth_graph(6, 0.6, 2)
        h = maxcut_hamiltonian(g)
        part = Partition([3, 3], 1)
        non_identity = sum(
            sum(1 for f in term.factors if set(f) != {"I"})
            for term in partition_terms(h, part)
        )
        est = resource_estimate(h, part)
        assert est.circuit_variants == 2 * non_identity

    def test_formula_rank_scaling(self):
        h = maxcut_hamiltonian(synth_graph(6, 0.5, 3))
        a = resource_estimate(h, Partition([3, 3], 1))
        b = resource_estimate(h, Partition([3, 3], 2))
        assert b.circuit_variants_formula == a.circuit_variants_formula * 2**8

    def test_count_matches_instrumented_run(self):
        h = maxcut_hamiltonian(synth_graph(6, 0.6, 4))
        part = Partition([3, 3], 2)
        est = resource_estimate(h, part)
        from dvqa.engine import AnsatzSpec, hadamard_matrix

        theta = init_theta(part, 1, seed=0)
        split = partition_terms(h, part)
        with count_circuits() as counter:
            for i, term in enumerate(split):
                for k, factor in enumerate(term.factors):
                    if set(factor) != {"I"}:
                        hadamard_matrix(AnsatzSpec(part.sizes[k], 1), theta[k],
                                        factor, part.ranks[k], 4, seed=(i, k))
        assert counter.total == est.circuit_variants


class TestBruteForce:
    def test_single_edge_and_triangle(self):
        assert brute_force(maxcut_hamiltonian(Graph(2, [(0, 1, 1.0)])))[1] == -1.0
        tri = maxcut_hamiltonian(Graph(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]))
        bits, energy = brute_force(tri)
        assert energy == -2.0

    def test_zero_hamiltonian_tie_break(self):
        h = build_hamiltonian(3, [], 0.0)
        assert brute_force(h) == ("000", 0.0)

    def test_matches_descending_enumeration(self):
        for seed in range(10):
            h = random_diagonal_hamiltonian(8, 10, seed)
            bits, energy = brute_force(h)
            bits_desc, energy_desc = enumerate_minimum(h, descending=True)
            assert energy == pytest.approx(energy_desc, abs=1e-10)
            assert bits == bits_desc

    def test_size_guard(self):
        with pytest.raises(ValueError):
            brute_force(build_hamiltonian(25, [(1.0, "Z" * 25)]))

    def test_diagonal_guard(self):
        with pytest.raises(ValueError):
            brute_force(build_hamiltonian(2, [(1.0, "XX")]))


class TestSimulatedAnnealing:
    def test_single_edge_statistics(self):
        h = maxcut_hamiltonian(Graph(2, [(0, 1, 1.0)]))
        hits = sum(
            simulated_annealing(h, 1000, seed)[1] == -1.0 for seed in range(100)
        )
        assert hits >= 99

    def test_zero_hamiltonian(self):
        h = build_hamiltonian(3, [], 0.0)
        assert simulated_annealing(h, 10, 0)[1] == 0.0

    def test_never_worse_than_initial_state(self):
        for seed in range(20):
            h = random_diagonal_hamiltonian(8, 12, seed)
            rng = np.random.default_rng(seed)
            z0 = rng.choice(np.array([1.0, -1.0]), size=8)
            initial_bits = ((1.0 - z0) / 2.0).astype(int)
            from dvqa.hamiltonian import classical_energy

            initial_energy = classical_energy(h, initial_bits)
            _, energy = simulated_annealing(h, 50, seed)
            assert energy <= initial_energy + 1e-12

    def test_matches_brute_force_with_many_sweeps(self):
        hits = 0
        for seed in range(20):
            g = synth_graph(10, 0.4, seed + 1)
            h = maxcut_hamiltonian(g)
            opt = brute_force(h)[1]
            hits += simulated_annealing(h, 10**4, seed)[1] == pytest.approx(opt)
        assert hits >= 19

    def test_deterministic(self):
        h = random_diagonal_hamiltonian(6, 8, 2)
        assert simulated_annealing(h, 100, 5) == simulated_annealing(h, 100, 5)


class TestApproximationRatio:
    def test_cases(self):
        assert approximation_ratio(-2.0, -2.0) == 1.0
        assert approximation_ratio(-2.0, -1.6) == pytest.approx(1.25)

    def test_sign_convention_enforced(self):
        with pytest.raises(ValueError, match="negative"):
            approximation_ratio(2.0, -1.0)
        with pytest.raises(ValueError, match="negative"):
            approximation_ratio(-2.0, 0.0)


class TestConfigs:
    def test_parse_kv(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("# comment\nruns=5\ncase = twobody\n\nseed=3\n")
        kv = parse_kv_config(path)
        assert kv == {"runs": "5", "case": "twobody", "seed": "3"}

    def test_parse_error_line(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("runs=5\nbogus\n")
        with pytest.raises(ValueError, match=":2:"):
            parse_kv_config(path)

    def test_noise_config_from_mapping(self):
        cfg = NoiseStudyConfig.from_mapping({"runs": "4", "k_values": "2,5", "case": "twobody"})
        assert cfg.runs == 4
        assert cfg.k_values == (2, 5)
        assert cfg.case == "twobody"

    def test_scaling_config_from_mapping(self):
        cfg = ScalingStudyConfig.from_mapping({"sizes": "10 20", "large_size": "none"})
        assert cfg.sizes == (10, 20)
        assert cfg.large_size is None

    def test_bench_config_instances(self):
        cfg = BenchConfig.from_mapping({"instances": "a.txt,b.txt", "runs": "3"})
        assert cfg.instances == ("a.txt", "b.txt")
        assert cfg.runs == 3

    def test_noise_instance_deterministic(self):
        a = noise_study_instance(NoiseStudyConfig(case="qubo", seed=4))
        b = noise_study_instance(NoiseStudyConfig(case="qubo", seed=4))
        assert a.terms == b.terms

    def test_two_body_instance(self):
        h = noise_study_instance(NoiseStudyConfig(case="twobody"))
        assert h.terms == ((1.0, "Z" + "I" * 8 + "Z"),)

    def test_k_must_divide(self):
        from dvqa.analysis import run_noise_study

        with pytest.raises(ValueError, match="divide"):
            run_noise_study(NoiseStudyConfig(k_values=(3,), runs=1, iterations=1))
