import math

import numpy as np
import pytest

from hypermatch.counting import PMOracle
from hypermatch.entropy import (
    EdgeWeights,
    as_verified,
    convex_combine,
    max_entropy_fpm,
    vertex_sums,
    well_distributed_factor,
)
from hypermatch.errors import InvalidArgumentError
from hypermatch.hypergraph import DiracParams, Hypergraph, gen_complete, gen_random_dirac
from hypermatch.seeds import rng_from
from hypermatch.shifting import (
    AnnealParams,
    anneal_and_shift,
    apply_shift,
    auto_anneal_params,
    find_good_configuration,
    find_shifting_structure,
    shift_gain_lower_bound,
    well_distributed_fpm,
)


def pm_indicator(G, pm):
    w = np.zeros(G.num_edges)
    w[list(pm)] = 1.0
    return as_verified(G, EdgeWeights.from_weights(G, w))


class TestFindStructure:
    def test_k8_pairs_first_candidate(self):
        G = gen_complete(8, 2)
        s = find_shifting_structure(G, G.edge_id([0, 1]), G.edge_id([0, 2]))
        assert s.U_sets == ((3,),)
        assert G.edges[s.e_ids[1]] == (2, 3) and G.edges[s.f_ids[1]] == (1, 3)
        s.check(G)

    def test_k9_triples_lexicographic(self):
        G = gen_complete(9, 3)
        s = find_shifting_structure(G, G.edge_id([0, 1, 2]), G.edge_id([0, 3, 4]))
        assert s.U_sets == ((5, 6), (7, 8))
        s.check(G)

    def test_requires_single_shared_vertex(self):
        G = Hypergraph(3, 6, [(0, 1, 2), (3, 4, 5)])
        with pytest.raises(InvalidArgumentError):
            find_shifting_structure(G, 0, 1)

    def test_filters_can_exhaust_candidates(self):
        G = gen_complete(8, 2)
        s = find_shifting_structure(G, 0, 1, e_edge_ok=lambda eid: False)
        assert s is None

    def test_min_degree_check(self):
        sparse = Hypergraph(2, 8, [(0, 1), (0, 2), (1, 3), (2, 3)])
        with pytest.raises(InvalidArgumentError):
            find_shifting_structure(sparse, 0, 1, min_degree_check=True)


def worked_example():
    """k=2 example: e-side edges at 0.5, f-side at 0.1, elsewhere 0."""
    G = gen_complete(8, 2)
    s = find_shifting_structure(G, G.edge_id([0, 1]), G.edge_id([0, 2]))
    w = np.zeros(G.num_edges)
    for eid in s.e_ids:
        w[eid] = 0.5
    for fid in s.f_ids:
        w[fid] = 0.1
    return G, s, EdgeWeights.from_weights(G, w)


class TestApplyShift:
    def test_zero_delta_is_identity(self):
        G, s, x = worked_example()
        assert apply_shift(x, s, 0.0).weights.tolist() == x.weights.tolist()

    def test_worked_example_weights_and_entropy(self):
        G, s, x = worked_example()
        assert x.entropy == pytest.approx(1.153664, abs=1e-5)
        shifted = apply_shift(x, s, 0.2)
        touched = set(s.e_ids) | set(s.f_ids)
        assert all(shifted.weights[i] == pytest.approx(0.3) for i in touched)
        assert shifted.entropy == pytest.approx(1.444767, abs=1e-5)

    def test_vertex_sums_conserved(self):
        G = gen_complete(9, 3)
        x_star, _ = max_entropy_fpm(G)
        x = convex_combine(x_star, pm_indicator(G, PMOracle(G).sample(rng_from(2))), 0.3)
        s = find_shifting_structure(G, G.edge_id([0, 1, 2]), G.edge_id([0, 3, 4]))
        delta = 0.4 * float(min(x.weights[i] for i in s.e_ids))
        before = vertex_sums(G, x.weights)
        after = vertex_sums(G, apply_shift(x, s, delta).weights)
        assert float(np.abs(after - before).max()) <= 1e-12

    def test_precondition_violations_name_the_edge(self):
        G, s, x = worked_example()
        with pytest.raises(InvalidArgumentError) as err:
            apply_shift(x, s, 0.6)
        assert "e_" in str(err.value)
        with pytest.raises(InvalidArgumentError):
            apply_shift(x, s, -0.1)


class TestGainBound:
    def test_worked_example_bound(self):
        G, s, x = worked_example()
        bound = shift_gain_lower_bound(x, s, 0.2, eta=0.3)
        assert bound == pytest.approx(0.2 * math.log(0.5 * 0.2 / (2 * 0.09)), abs=1e-9)
        assert bound == pytest.approx(-0.11756, abs=1e-4)
        gain = apply_shift(x, s, 0.2).entropy - x.entropy
        assert gain == pytest.approx(0.291103, abs=1e-5)
        assert gain >= bound

    def test_zero_at_balance_point(self):
        # x[e1] * delta^{k-1} == 2 eta^k exactly: 0.9 * 0.2 == 2 * 0.3^2
        G = gen_complete(8, 2)
        s = find_shifting_structure(G, 0, 1)
        w = np.zeros(G.num_edges)
        w[s.e_ids[0]] = 0.9
        w[s.e_ids[1]] = 0.5
        x = EdgeWeights.from_weights(G, w)
        assert shift_gain_lower_bound(x, s, 0.2, eta=0.3) == pytest.approx(0.0, abs=1e-12)

    def test_hypothesis_violation_rejected(self):
        G, s, x = worked_example()
        with pytest.raises(InvalidArgumentError):
            shift_gain_lower_bound(x, s, 0.3, eta=0.35)  # x[e_i] < 2 delta
        with pytest.raises(InvalidArgumentError):
            shift_gain_lower_bound(x, s, 0.2, eta=0.25)  # x[f_i] > eta - delta

    def test_gain_clears_bound_randomised(self):
        G = gen_complete(9, 3)
        x_star, _ = max_entropy_fpm(G)
        oracle = PMOracle(G)
        rng = rng_from(55)
        done = 0
        while done < 100:
            x = convex_combine(x_star, pm_indicator(G, oracle.sample(rng)), 0.5 * float(rng.random()))
            e_id = int(rng.integers(0, G.num_edges))
            partners = [
                fid
                for v in G.edges[e_id]
                for fid in G.incident(v)
                if fid != e_id and len(set(G.edges[e_id]) & set(G.edges[fid])) == 1
            ]
            if not partners:
                continue
            s = find_shifting_structure(G, e_id, partners[int(rng.integers(0, len(partners)))])
            if s is None:
                continue
            min_e = float(min(x.weights[i] for i in s.e_ids))
            max_f = float(max(x.weights[i] for i in s.f_ids))
            if min_e <= 0 or max_f + 0.5 * min_e > 1:
                continue
            delta = 0.45 * min_e
            eta = max_f + delta + 1e-3
            bound = shift_gain_lower_bound(x, s, delta, eta)
            assert apply_shift(x, s, delta).entropy - x.entropy >= bound - 1e-9
            done += 1


class TestGoodConfiguration:
    def k9_params(self, D_target=10.0, gamma=0.5, C=2.0):
        G = gen_complete(9, 3)
        eps = D_target ** (-1.0 / (3 * G.k))
        return G, AnnealParams.for_graph(G, gamma, eps, C)

    def test_uniform_has_no_high_weight_edge(self):
        G, params = self.k9_params()
        x, _ = max_entropy_fpm(G)
        assert find_good_configuration(G, x, params).status == "no-high-weight-edge"

    def test_pm_mixture_yields_configuration(self):
        G, params = self.k9_params()
        x_star, _ = max_entropy_fpm(G)
        x = convex_combine(pm_indicator(G, PMOracle(G).sample(rng_from(7))), x_star, 0.1)
        result = find_good_configuration(G, x, params)
        assert result.status == "found"
        cfg = result.config
        cfg.structure.check(G)
        assert cfg.e1_weight >= params.high_threshold(G)
        assert cfg.min_e_weight >= 2 * params.delta
        assert cfg.max_f_weight <= params.eta - params.delta

    def test_search_exhausted_when_no_partner_exists(self):
        G = Hypergraph(3, 6, [(0, 1, 2), (3, 4, 5)])
        x = pm_indicator(G, (0, 1))
        params = AnnealParams.for_graph(G, gamma=0.5, epsilon=0.8, C=2.0)
        assert find_good_configuration(G, x, params).status == "search-exhausted"

    def test_deterministic_scan(self):
        G, params = self.k9_params()
        x_star, _ = max_entropy_fpm(G)
        x = convex_combine(pm_indicator(G, PMOracle(G).sample(rng_from(7))), x_star, 0.1)
        a = find_good_configuration(G, x, params)
        b = find_good_configuration(G, x, params)
        assert a.config.structure == b.config.structure


class TestAnnealParams:
    def test_fields_follow_the_formulas(self):
        G = gen_complete(9, 3)
        p = AnnealParams.for_graph(G, gamma=0.5, epsilon=0.5, C=3.0)
        assert p.eta == pytest.approx((4 / 0.5) / math.comb(8, 2))
        assert p.delta == pytest.approx(0.5 / (2 * 9 * 81))
        assert p.D == pytest.approx(0.5 ** -9)

    def test_degenerate_eta_is_a_hard_violation(self):
        G = gen_complete(6, 3)
        p = AnnealParams.for_graph(G, gamma=0.05, epsilon=0.5, C=2.0)
        assert any("eta" in v for v in p.hard_violations(G))
        x, _ = max_entropy_fpm(G)
        with pytest.raises(InvalidArgumentError):
            anneal_and_shift(G, x, x, p)

    def test_auto_params_validate(self):
        G = gen_complete(9, 3)
        p = auto_anneal_params(G, gamma=0.5, epsilon=0.9, C=3.0)
        assert not p.hard_violations(G)
        assert p.no_new_heavy(G) and p.floor_consistent(G)
        strict = auto_anneal_params(G, gamma=0.5, epsilon=0.9, C=3.0, require_positive_gain=True)
        assert strict.gain_ratio(G) >= 1.0


class TestAnneal:
    def adversarial(self, seed=11):
        G = gen_random_dirac(9, 3, DiracParams(2, 0.2), density=0.95, seed=seed)
        x_star, _ = max_entropy_fpm(G)
        oracle = PMOracle(G)
        adv = convex_combine(pm_indicator(G, oracle.sample(rng_from(seed))), x_star, 0.05)
        x_hat, _ = well_distributed_fpm(G, DiracParams(2, 0.2), seed=seed + 1, trials=2000)
        C = max(1.0, well_distributed_factor(G, x_hat))
        return G, adv, x_hat, C

    def test_well_distributed_start_takes_zero_steps(self):
        G = gen_complete(9, 3)
        x, _ = max_entropy_fpm(G)
        params = auto_anneal_params(G, gamma=0.5, epsilon=0.9, C=2.0)
        final, log = anneal_and_shift(G, x, x, params)
        assert log.termination == "no-high-weight-edge" and not log.steps
        mix = convex_combine(x, x, params.epsilon / params.C)
        assert final.weights.tolist() == mix.weights.tolist()

    def test_active_run_contract_on_k9_mixture(self):
        G, adv, x_hat, C = self.adversarial()
        params = auto_anneal_params(G, gamma=0.5, epsilon=0.9, C=C, max_steps=30000)
        final, log = anneal_and_shift(G, adv, x_hat, params)
        assert log.termination in ("no-high-weight-edge", "search-exhausted")
        assert float(final.weights.min()) >= params.delta - 1e-15
        if log.termination == "no-high-weight-edge":
            assert well_distributed_factor(G, final) <= params.D
        assert log.final_entropy >= log.start_entropy - 1e-12
        for step in log.steps:
            assert step.entropy_after - step.entropy_before >= step.bound - 1e-9

    def test_monotone_in_validated_regime(self):
        G, adv, x_hat, C = self.adversarial(seed=13)
        params = auto_anneal_params(G, gamma=0.5, epsilon=0.9, C=C, require_positive_gain=True)
        _, log = anneal_and_shift(G, adv, x_hat, params)
        assert all(s.entropy_after >= s.entropy_before - 1e-12 for s in log.steps)

    def test_step_budget_when_bounds_are_large(self):
        # whenever every accepted step's bound cleared delta ln(D)/2, the
        # entropy budget caps the step count at eps n / (delta ln(D)/2) + 1
        G, adv, x_hat, C = self.adversarial(seed=19)
        params = auto_anneal_params(G, gamma=0.5, epsilon=0.9, C=C, max_steps=30000)
        _, log = anneal_and_shift(G, adv, x_hat, params)
        per_step = params.delta * math.log(params.D) / 2.0
        if log.steps and all(s.bound >= per_step for s in log.steps):
            assert len(log.steps) <= params.epsilon * G.n / per_step + 1

    def test_trace_csv_round_trip(self, tmp_path):
        G, adv, x_hat, C = self.adversarial()
        params = auto_anneal_params(G, gamma=0.5, epsilon=0.9, C=C, max_steps=500)
        _, log = anneal_and_shift(G, adv, x_hat, params)
        path = tmp_path / "trace.csv"
        log.write_csv(str(path))
        lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
        header = lines[0].split(",")
        assert header[:1] == ["step"] and header[-4:] == [
            "delta", "entropy_before", "entropy_after", "bound",
        ]
        assert len(lines) == len(log.steps) + 1


class TestWellDistributedFPM:
    def test_k6_marginals_near_uniform(self):
        G = gen_complete(6, 3)
        x, report = well_distributed_fpm(G, DiracParams(1, 0.1), seed=5, trials=100000)
        assert float(np.abs(x.weights - 0.1).max()) <= 0.02
        assert report["resamples"] == 0

    def test_projection_hits_unit_sums(self):
        G = gen_random_dirac(9, 3, DiracParams(2, 0.2), density=0.95, seed=17)
        x, report = well_distributed_fpm(G, DiracParams(2, 0.2), seed=18, trials=2000)
        assert report["projection_residual"] <= 1e-8
        assert x.verified

    @pytest.mark.parametrize("n,seed", [(9, 31), (12, 32), (15, 33)])
    def test_factor_bounded_on_dirac_instances(self, n, seed):
        G = gen_random_dirac(n, 3, DiracParams(2, 0.2), density=0.95, seed=seed)
        _, report = well_distributed_fpm(G, DiracParams(2, 0.2), seed=seed + 100, trials=4000)
        assert report["well_distributed_factor"] <= 10.0
