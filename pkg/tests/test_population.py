import json

import numpy as np
import pytest

from wildgraph import (
    Cell,
    Membership,
    ParametricAugmentation,
    Population,
    PopulationError,
    PopulationSpec,
    ToyVariant,
    NaturalExample,
    build_parametric_population,
    build_toy_population,
    load_population_config,
    sample_wild_mixture,
    transformation_matrix,
)
from wildgraph.population import mixture_counts


class TestToyPopulation:
    def test_case_a_first_row(self):
        rho, alpha, beta, gamma = 0.9, 0.2, 0.1, 0.05
        _, model = build_toy_population(ToyVariant.CASE_A, rho, alpha, beta, gamma)
        np.testing.assert_allclose(model.matrix[0], [rho, beta, alpha, gamma, gamma])

    def test_case_b_third_row(self):
        rho, alpha, beta, gamma = 0.9, 0.2, 0.1, 0.05
        _, model = build_toy_population(ToyVariant.CASE_B, rho, alpha, beta, gamma)
        np.testing.assert_allclose(model.matrix[2], [alpha, gamma, rho, beta, beta])

    def test_all_cross_probabilities_zero_gives_diagonal(self):
        _, model = build_toy_population(ToyVariant.CASE_A, 0.7, 0.0, 0.0, 0.0)
        np.testing.assert_array_equal(model.matrix, 0.7 * np.eye(5))

    def test_ordering_and_memberships(self):
        population, _ = build_toy_population(ToyVariant.CASE_A, 1.0, 0.1, 0.1, 0.01)
        kinds = [ex.membership for ex in population.examples]
        assert kinds == [
            Membership.LABELED_ID,
            Membership.LABELED_ID,
            Membership.WILD_COVARIATE,
            Membership.WILD_COVARIATE,
            Membership.WILD_SEMANTIC,
        ]
        assert population.examples[4].class_label not in population.classes

    def test_case_b_shares_covariate_domain(self):
        pop_a, _ = build_toy_population(ToyVariant.CASE_A, 1.0, 0.1, 0.1, 0.01)
        pop_b, _ = build_toy_population(ToyVariant.CASE_B, 1.0, 0.1, 0.1, 0.01)
        assert pop_a.examples[4].domain_label not in (0, 1)
        assert pop_b.examples[4].domain_label == pop_b.examples[2].domain_label


TOY_SPEC = PopulationSpec(
    classes=(0, 1),
    domains=(0, 1, 2),
    cells=(
        Cell(0, 0, Membership.LABELED_ID, 1),
        Cell(1, 0, Membership.LABELED_ID, 1),
        Cell(0, 1, Membership.WILD_COVARIATE, 1),
        Cell(1, 1, Membership.WILD_COVARIATE, 1),
        Cell(2, 2, Membership.WILD_SEMANTIC, 1),
    ),
)


class TestParametricPopulation:
    def test_reduces_to_toy(self):
        params = ParametricAugmentation(1.0, 0.3, 0.2, 0.1)
        _, model = build_parametric_population(TOY_SPEC, params)
        _, toy_model = build_toy_population(ToyVariant.CASE_A, 1.0, 0.3, 0.2, 0.1)
        np.testing.assert_array_equal(model.matrix, toy_model.matrix)

    def test_13_node_grid_against_entrywise_rule(self):
        cells = []
        for cls in (0, 1):
            for dom in (0, 1):
                member = Membership.LABELED_ID if dom == 0 else Membership.WILD_COVARIATE
                cells.append(Cell(cls, dom, member, 3))
        cells.append(Cell(5, 2, Membership.WILD_SEMANTIC, 1))
        spec = PopulationSpec(classes=(0, 1), domains=(0, 1, 2), cells=tuple(cells))
        params = ParametricAugmentation(1.0, 0.25, 0.15, 0.05)
        population, model = build_parametric_population(spec, params)
        assert model.matrix.shape == (13, 13)
        cls = population.class_labels()
        dom = population.domain_labels()
        for i in range(13):
            for j in range(13):
                if cls[i] == cls[j] and dom[i] == dom[j]:
                    expected = params.rho
                elif cls[i] == cls[j]:
                    expected = params.alpha
                elif dom[i] == dom[j]:
                    expected = params.beta
                else:
                    expected = params.gamma
                assert model.matrix[i, j] == expected

    def test_empty_classes_rejected(self):
        with pytest.raises(PopulationError):
            PopulationSpec(classes=(), domains=(0,), cells=())

    def test_empty_domains_rejected(self):
        with pytest.raises(PopulationError):
            PopulationSpec(classes=(0,), domains=(), cells=())

    def test_matrix_symmetric_and_four_valued(self):
        params = ParametricAugmentation(0.8, 0.3, 0.2, 0.1)
        _, model = build_parametric_population(TOY_SPEC, params)
        np.testing.assert_array_equal(model.matrix, model.matrix.T)
        assert set(np.unique(model.matrix)) <= {0.8, 0.3, 0.2, 0.1}


class TestAugmentationValidation:
    def test_strict_regime_accepts_ordered_parameters(self):
        ParametricAugmentation(1.0, 0.1, 0.05, 0.01, strict=True)

    def test_strict_regime_rejects_rho_below_alpha(self):
        with pytest.raises(PopulationError):
            ParametricAugmentation(0.05, 0.1, 0.05, 0.01, strict=True)

    def test_strict_regime_rejects_zero_gap_to_gamma(self):
        with pytest.raises(PopulationError):
            ParametricAugmentation(1.0, 0.1, 0.01, 0.01, strict=True)

    def test_negative_parameter_rejected(self):
        with pytest.raises(PopulationError):
            ParametricAugmentation(1.0, -0.1, 0.05, 0.0)

    def test_lax_mode_allows_any_nonnegative(self):
        ParametricAugmentation(0.1, 0.5, 0.9, 0.2)


class TestPopulationInvariants:
    def test_semantic_must_be_novel(self):
        with pytest.raises(PopulationError):
            Population(
                examples=(NaturalExample(0, 0, 0, Membership.WILD_SEMANTIC),),
                classes=(0,),
                domains=(0,),
                id_domain=0,
            )

    def test_novel_must_be_semantic(self):
        with pytest.raises(PopulationError):
            Population(
                examples=(NaturalExample(0, 7, 0, Membership.WILD_ID),),
                classes=(0,),
                domains=(0,),
                id_domain=0,
            )

    def test_labeled_must_live_in_id_domain(self):
        with pytest.raises(PopulationError):
            Population(
                examples=(NaturalExample(0, 0, 1, Membership.LABELED_ID),),
                classes=(0,),
                domains=(0, 1),
                id_domain=0,
            )


WILD_SPEC = PopulationSpec(
    classes=(0, 1),
    domains=(0, 1),
    cells=(
        Cell(0, 0, Membership.LABELED_ID, 4),
        Cell(1, 0, Membership.LABELED_ID, 4),
        Cell(0, 0, Membership.WILD_ID, 100),
    ),
    pi_c=0.5,
    pi_s=0.1,
)


class TestWildMixture:
    def test_reference_mixture_counts(self):
        population = sample_wild_mixture(WILD_SPEC, seed=3)
        wild = [ex for ex in population.examples if ex.membership is not Membership.LABELED_ID]
        assert len(wild) == 100
        counts = {
            kind: sum(1 for ex in wild if ex.membership is kind)
            for kind in (Membership.WILD_COVARIATE, Membership.WILD_SEMANTIC, Membership.WILD_ID)
        }
        assert counts[Membership.WILD_COVARIATE] == 50
        assert counts[Membership.WILD_SEMANTIC] == 10
        assert counts[Membership.WILD_ID] == 40

    def test_zero_fractions_give_all_wild_id(self):
        spec = PopulationSpec(
            classes=(0,),
            domains=(0,),
            cells=(
                Cell(0, 0, Membership.LABELED_ID, 2),
                Cell(0, 0, Membership.WILD_ID, 30),
            ),
        )
        population = sample_wild_mixture(spec, seed=0)
        wild = [ex for ex in population.examples if ex.membership is not Membership.LABELED_ID]
        assert all(ex.membership is Membership.WILD_ID for ex in wild)

    def test_same_seed_reproduces_population(self):
        assert sample_wild_mixture(WILD_SPEC, seed=11) == sample_wild_mixture(WILD_SPEC, seed=11)

    def test_different_seed_changes_population(self):
        assert sample_wild_mixture(WILD_SPEC, seed=1) != sample_wild_mixture(WILD_SPEC, seed=2)

    def test_overflowing_fractions_rejected(self):
        with pytest.raises(PopulationError):
            PopulationSpec(
                classes=(0,),
                domains=(0, 1),
                cells=(Cell(0, 0, Membership.WILD_ID, 10),),
                pi_c=0.7,
                pi_s=0.4,
            )

    @pytest.mark.parametrize("m", [1, 3, 7, 10, 33, 101])
    def test_fractions_within_one_example(self, m):
        m_c, m_s, m_id = mixture_counts(m, 0.5, 0.1)
        assert abs(m_c - 0.5 * m) <= 0.5
        assert abs(m_s - 0.1 * m) <= 0.5
        assert m_c + m_s + m_id == m

    def test_half_tie_goes_to_covariate(self):
        # 0.5 * 3 = 1.5 rounds up for covariate, 0.5 * 3 = 1.5 rounds down for semantic
        m_c, m_s, _ = mixture_counts(3, 0.5, 0.5)
        assert (m_c, m_s) == (2, 1)


class TestConfigLoading:
    CONFIG = {
        "classes": [0, 1],
        "domains": [0, 1, 2],
        "cells": [
            {"class": 0, "domain": 0, "membership": "labeled_id", "count": 1},
            {"class": 1, "domain": 0, "membership": "labeled_id", "count": 1},
            {"class": 0, "domain": 1, "membership": "wild_covariate", "count": 1},
            {"class": 1, "domain": 1, "membership": "wild_covariate", "count": 1},
            {"class": 2, "domain": 2, "membership": "wild_semantic", "count": 1},
        ],
        "augmentation": {"rho": 1.0, "alpha": 0.3, "beta": 0.2, "gamma": 0.1},
        "pi_c": 0.0,
        "pi_s": 0.0,
    }

    def test_round_trip_matches_toy(self, tmp_path):
        path = tmp_path / "pop.json"
        path.write_text(json.dumps(self.CONFIG))
        spec, model = load_population_config(path)
        population, explicit = build_parametric_population(spec, model)
        _, toy_model = build_toy_population(ToyVariant.CASE_A, 1.0, 0.3, 0.2, 0.1)
        np.testing.assert_array_equal(explicit.matrix, toy_model.matrix)

    def test_explicit_matrix_alternative(self):
        config = dict(self.CONFIG)
        del config["augmentation"]
        config["augmentation_matrix"] = np.eye(5).tolist()
        _, model = load_population_config(config)
        np.testing.assert_array_equal(model.matrix, np.eye(5))

    def test_missing_key_names_offender(self):
        config = {k: v for k, v in self.CONFIG.items() if k != "cells"}
        with pytest.raises(PopulationError, match="cells"):
            load_population_config(config)

    def test_bad_membership_rejected(self):
        config = json.loads(json.dumps(self.CONFIG))
        config["cells"][0]["membership"] = "mystery"
        with pytest.raises(PopulationError):
            load_population_config(config)

    def test_explicit_matrix_must_match_population(self):
        config = dict(self.CONFIG)
        del config["augmentation"]
        config["augmentation_matrix"] = np.eye(4).tolist()
        spec, model = load_population_config(config)
        from wildgraph import enumerate_population

        with pytest.raises(PopulationError):
            transformation_matrix(model, enumerate_population(spec))
