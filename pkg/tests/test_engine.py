"""Tests for the fit configuration, sample stream, online driver and oracle."""

import logging

import numpy as np
import pytest

from src.datasets.matrix import DatasetMatrix
from src.datasets.splitting import train_test_split
from src.datasets.synthetic import SyntheticSpec, generate_synthetic
from src.engine.config import Algorithm, FitConfig
from src.engine.driver import OnlineFactorizer, fit
from src.engine.oracle import alternate_minimization_oracle
from src.engine.stream import SampleStream
from src.errors import DimensionMismatchError, DomainError, NonFiniteValueError
from src.factorization import flops as flop_terms
from src.factorization.estimators import EstimatorVariant
from src.factorization.proximal import ElasticNetParams
from src.factorization.subsampling import make_streams
from src.factorization.surrogate import empirical_objective, sample_loss


@pytest.mark.unit
class TestFitConfig:
    """Test suite for FitConfig validation and derived values."""

    def test_defaults(self):
        """Test defaults."""
        cfg = FitConfig(k=4)
        assert cfg.batch_size == 4
        assert cfg.variant == EstimatorVariant.EXACT_GRAM
        assert cfg.algorithm == Algorithm.SOMF
        assert (cfg.u, cfg.v) == (0.917, 0.751)

    def test_omf_forces_full_masks(self):
        """Test OMF forces full masks."""
        cfg = FitConfig(k=2, algorithm="omf", reduction=6.0, variant="averaged",
                        final_reduction=2.0, reduction_switch_epoch=1.0)
        assert cfg.reduction == 1.0
        assert cfg.variant == EstimatorVariant.MASKED
        assert cfg.final_reduction is None

    def test_params(self):
        """Test params."""
        params = FitConfig(k=2, lambda_=0.3, nu=0.2, mu=0.5, positive_code=True).params
        assert params == ElasticNetParams(nu=0.2, mu=0.5, lambda_=0.3, positive_code=True)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"k": 0},
            {"k": 2, "batch_size": 0},
            {"k": 2, "reduction": 0.5},
            {"k": 2, "nu": 2.0},
            {"k": 2, "lambda_": -1.0},
            {"k": 2, "n_epochs": None},
            {"k": 2, "n_epochs": 0.0},
            {"k": 2, "max_iter": 0},
            {"k": 2, "final_reduction": 2.0},
            {"k": 2, "final_reduction": 0.5, "reduction_switch_epoch": 1.0},
        ],
    )
    def test_invalid(self, kwargs):
        """Test invalid."""
        with pytest.raises(DomainError):
            FitConfig(**kwargs)

    def test_weight_exponents_only_warn(self, caplog):
        """Test weight exponents only warn."""
        with caplog.at_level(logging.WARNING):
            cfg = FitConfig(k=2, u=0.5, variant="averaged")
        assert cfg.u == 0.5
        assert "u=0.5" in caplog.text

    def test_total_iterations(self):
        """Test total iterations."""
        assert FitConfig(k=3, n_epochs=2.0).total_iterations(10) == 7
        assert FitConfig(k=3, max_iter=5).total_iterations(10) == 5

    def test_reduction_schedule(self):
        """Test reduction schedule."""
        cfg = FitConfig(k=2, reduction=8.0, final_reduction=2.0, reduction_switch_epoch=3.0)
        assert cfg.reduction_at(0.0) == 8.0
        assert cfg.reduction_at(2.99) == 8.0
        assert cfg.reduction_at(3.0) == 2.0

    def test_replace(self):
        """Test replace."""
        cfg = FitConfig(k=2).replace(reduction=4.0)
        assert cfg.reduction == 4.0
        assert cfg.k == 2


@pytest.mark.unit
class TestSampleStream:
    """Test suite for SampleStream."""

    def test_epoch_coverage(self):
        """Test epoch coverage."""
        stream = SampleStream(7, 3, make_streams(0)["order"])
        counts = np.zeros(7, dtype=int)
        for _ in range(10):
            np.add.at(counts, stream.next_batch(), 1)
        assert set(counts.tolist()) <= {4, 5}
        assert counts.sum() == 30

    def test_each_epoch_is_a_permutation(self):
        """Test each epoch is a permutation."""
        stream = SampleStream(6, 2, make_streams(1)["order"])
        first = np.concatenate([stream.next_batch() for _ in range(3)])
        second = np.concatenate([stream.next_batch() for _ in range(3)])
        assert sorted(first.tolist()) == list(range(6))
        assert sorted(second.tolist()) == list(range(6))
        assert stream.completed_epochs == 1

    def test_batch_straddles_epochs(self):
        """Test batch straddles epochs."""
        stream = SampleStream(5, 3, make_streams(2)["order"])
        stream.next_batch()
        batch = stream.next_batch()
        assert batch.size == 3
        assert stream.epoch == pytest.approx(6 / 5)

    def test_deterministic(self):
        """Test deterministic."""
        first = SampleStream(9, 4, make_streams(3)["order"])
        second = SampleStream(9, 4, make_streams(3)["order"])
        for _ in range(5):
            np.testing.assert_array_equal(first.next_batch(), second.next_batch())

    @pytest.mark.parametrize("n,batch_size", [(0, 1), (3, 0)])
    def test_invalid(self, n, batch_size):
        """Test invalid."""
        with pytest.raises(DomainError):
            SampleStream(n, batch_size, make_streams(0)["order"])


@pytest.mark.unit
class TestFit:
    """Test suite for the online factorization driver."""

    def test_single_iteration_trace(self):
        """Test single iteration trace."""
        # p = 2, n = 1, k = 1: the only column seeds the atom, projected onto the unit l2 ball
        x = np.array([3.0, 4.0])
        cfg = FitConfig(k=1, lambda_=0.1, algorithm="omf", max_iter=1)
        report = fit(DatasetMatrix(x.reshape(2, 1)), cfg=cfg)

        d0 = x * np.sqrt(2.0) / 5.0
        alpha = (d0 @ x - 0.1) / (d0 @ d0)
        params = ElasticNetParams(lambda_=0.1)

        assert [c.iter for c in report.checkpoints] == [0, 1]
        assert report.checkpoints[0].train_surrogate is None
        assert report.checkpoints[0].flops == 0
        final = report.checkpoints[1]
        assert final.epoch == 1.0
        assert final.train_surrogate == pytest.approx(sample_loss(x, d0, np.array([alpha]), params), rel=1e-9)
        # code inputs 8, two CD sweeps 4, surrogate 6, dictionary 16
        assert final.flops == 34
        np.testing.assert_allclose(report.dictionary[:, 0], d0, atol=1e-12)

    def test_omf_matches_unreduced_masked_somf(self, small_matrix):
        """Test OMF matches unreduced masked SOMF."""
        omf = fit(small_matrix, cfg=FitConfig(k=5, algorithm="omf", max_iter=100, seed=3))
        somf = fit(small_matrix, cfg=FitConfig(k=5, reduction=1.0, variant="masked", max_iter=100, seed=3))
        np.testing.assert_array_equal(omf.dictionary, somf.dictionary)

    @pytest.mark.parametrize("variant", list(EstimatorVariant))
    def test_deterministic(self, small_matrix, variant):
        """Test deterministic."""
        cfg = FitConfig(k=4, reduction=3.0, variant=variant, max_iter=40, seed=8)
        first = fit(small_matrix, cfg=cfg)
        second = fit(small_matrix, cfg=cfg)
        np.testing.assert_array_equal(first.dictionary, second.dictionary)
        assert first.checkpoints[-1].flops == second.checkpoints[-1].flops

    def test_checkpoints(self, low_rank_instance):
        """Test checkpoints."""
        X, _, _ = low_rank_instance
        X_train, X_test = X.columns(range(100)), X.columns(range(100, 120))
        seen = []
        report = fit(X_train, X_test, FitConfig(k=4, reduction=2.0, max_iter=23), checkpoint_every=10,
                     callback=seen.append)
        iters = [c.iter for c in report.checkpoints]
        assert iters == [0, 10, 20, 23]
        assert seen == report.checkpoints
        flops = [c.flops for c in report.checkpoints]
        assert flops == sorted(flops)
        assert all(np.isfinite(c.test_objective) for c in report.checkpoints)
        assert report.final_test_objective == report.checkpoints[-1].test_objective
        assert report.n_iter == 23

    def test_profile(self, small_matrix):
        """Test profile."""
        report = fit(small_matrix, cfg=FitConfig(k=3, reduction=2.0, max_iter=10))
        assert set(report.step_seconds) == {"code", "surrogate", "dictionary"}
        assert sum(report.flops_by_step.values()) == report.checkpoints[-1].flops

    def test_objective_improves(self, low_rank_instance):
        """Test objective improves."""
        X, _, _ = low_rank_instance
        X_train, X_test = X.columns(range(100)), X.columns(range(100, 120))
        report = fit(X_train, X_test, FitConfig(k=2, lambda_=0.05, n_epochs=5.0, seed=1))
        assert report.checkpoints[-1].test_objective <= report.checkpoints[0].test_objective

    def test_exact_rank_excess_objective_shrinks(self):
        """Test that 20 epochs on noiseless rank-k data remove 99% of the excess over the batch floor."""
        X, _, _ = generate_synthetic(SyntheticSpec(p=30, n=500, true_k=4, code_sparsity=0.5, seed=9))
        X_train, X_test = train_test_split(X, 0.1, seed=0)
        cfg = FitConfig(k=4, lambda_=0.05, algorithm=Algorithm.OMF, n_epochs=20.0, seed=2)
        report = fit(X_train, X_test, cfg)
        oracle = alternate_minimization_oracle(X_train, cfg, outer_tol=1e-9, max_outer=500)
        floor = empirical_objective(X_test.values, oracle.dictionary, cfg.params)
        initial = report.checkpoints[0].test_objective
        final = report.checkpoints[-1].test_objective
        assert initial > floor
        assert final - floor <= 0.01 * (initial - floor)

    def test_surrogate_trace_non_increasing(self, small_matrix):
        """Test surrogate trace non increasing."""
        cfg = FitConfig(k=4, reduction=4.0, variant="averaged", max_iter=60, track_surrogate=True)
        report = fit(small_matrix, cfg=cfg)
        assert len(report.surrogate_trace) == 60
        for before, after in report.surrogate_trace:
            assert after <= before + 1e-12

    @pytest.mark.parametrize("variant", ["masked", "exact_gram"])
    def test_parallel_matches_sequential(self, small_matrix, variant):
        """Test parallel matches sequential."""
        cfg = FitConfig(k=4, reduction=3.0, variant=variant, max_iter=30, seed=2)
        sequential = fit(small_matrix, cfg=cfg)
        parallel = fit(small_matrix, cfg=cfg.replace(parallel=True))
        np.testing.assert_array_equal(parallel.dictionary, sequential.dictionary)
        assert parallel.checkpoints[-1].flops == sequential.checkpoints[-1].flops

    def test_exact_gram_is_maintained(self, small_matrix):
        """Test exact gram is maintained."""
        factorizer = OnlineFactorizer(small_matrix, FitConfig(k=4, reduction=4.0, max_iter=50))
        for _ in range(50):
            factorizer.step()
            D = factorizer.state.D
            assert np.linalg.norm(factorizer.state.gram - D.T @ D) < 1e-10
        factorizer.close()

    def test_subsampling_reduces_dictionary_flops(self, rng):
        """Test subsampling reduces dictionary FLOPs."""
        X = rng.standard_normal((2000, 40))
        full = fit(X, cfg=FitConfig(k=5, variant="masked", max_iter=20, seed=0))
        reduced = fit(X, cfg=FitConfig(k=5, reduction=4.0, variant="masked", max_iter=20, seed=0))
        assert reduced.flops_by_step["dictionary"] <= (1 / 4 + 0.1) * full.flops_by_step["dictionary"]

    def test_code_inputs_scale_with_mask(self, rng):
        """Test code inputs scale with mask."""
        X = rng.standard_normal((2000, 40))

        def code_input_flops(**kwargs):
            factorizer = OnlineFactorizer(X, FitConfig(k=5, variant="masked", max_iter=20, **kwargs))
            for _ in range(20):
                factorizer.step()
            factorizer.close()
            return factorizer.flops.by_category()[flop_terms.CODE_INPUTS]

        full = code_input_flops()
        assert code_input_flops(reduction=4.0) <= (1 / 4 + 0.1) * full
        assert code_input_flops(reduction=4.0, code_subsampling=False) == full

    def test_nonnegative_mode(self, nonnegative_instance):
        """Test nonnegative mode."""
        X, _, _ = nonnegative_instance
        cfg = FitConfig(k=3, reduction=2.0, variant="averaged", positive_code=True, positive_dict=True,
                        lambda_=0.05, max_iter=60)
        factorizer = OnlineFactorizer(X, cfg)
        for _ in range(60):
            factorizer.step()
            assert np.all(factorizer.state.D >= 0.0)
            assert np.all(factorizer.cache.codes >= 0.0)
        factorizer.close()

    def test_dead_atoms_reinitialized(self, small_matrix):
        """Test dead atoms reinitialized."""
        cfg = FitConfig(k=3, lambda_=100.0, max_iter=5, reinit_dead_atoms=True)
        report = fit(small_matrix, cfg=cfg)
        assert np.all(np.linalg.norm(report.dictionary, axis=0) > 0.0)
        assert report.state.max_constraint_violation() <= 1e-12

    def test_shuffled_coordinates(self, small_matrix):
        """Test shuffled coordinates."""
        report = fit(small_matrix, cfg=FitConfig(k=3, max_iter=10, shuffle_coordinates=True))
        assert np.all(np.isfinite(report.dictionary))

    def test_non_finite_input(self):
        """Test non finite input."""
        X = np.ones((3, 4))
        X[0, 0] = np.nan
        with pytest.raises(NonFiniteValueError):
            fit(X, cfg=FitConfig(k=2, max_iter=1))

    def test_test_rows_checked(self, small_matrix):
        """Test test rows checked."""
        with pytest.raises(DimensionMismatchError):
            fit(small_matrix, np.ones((3, 2)), FitConfig(k=2, max_iter=1))

    def test_too_many_atoms(self):
        """Test too many atoms."""
        with pytest.raises(DomainError):
            fit(np.ones((3, 2)), cfg=FitConfig(k=3, max_iter=1))

    def test_checkpoint_every_positive(self, small_matrix):
        """Test checkpoint every positive."""
        with pytest.raises(DomainError):
            fit(small_matrix, cfg=FitConfig(k=2, max_iter=1), checkpoint_every=0)


@pytest.mark.unit
class TestOracle:
    """Test suite for the alternate-minimization oracle."""

    def test_exact_factorization(self, rng):
        """Test exact factorization."""
        Q, _ = np.linalg.qr(rng.standard_normal((6, 3)))
        result = alternate_minimization_oracle(Q, FitConfig(k=3, lambda_=0.0))
        assert result.objective < 1e-12

    def test_monotone_trace(self, small_matrix):
        """Test monotone trace."""
        result = alternate_minimization_oracle(small_matrix, FitConfig(k=4, lambda_=0.1), max_outer=30)
        trace = np.array(result.trace)
        assert np.all(np.diff(trace) <= 1e-10 * np.abs(trace[:-1]))
        # One extra entry when the cap is hit: the objective of the returned state
        assert len(trace) - result.n_outer in (0, 1)

    def test_objective_matches_empirical_risk(self, small_matrix):
        """Test objective matches empirical risk."""
        cfg = FitConfig(k=4, lambda_=0.1)
        result = alternate_minimization_oracle(small_matrix, cfg, max_outer=20)
        assert result.objective >= empirical_objective(small_matrix, result.dictionary, cfg.params) - 1e-6

    def test_objective_matches_returned_state_at_cap(self, small_matrix):
        """Test that hitting max_outer reports the objective of the returned dictionary."""
        cfg = FitConfig(k=4, lambda_=0.1)
        result = alternate_minimization_oracle(small_matrix, cfg, outer_tol=1e-15, max_outer=2)
        assert result.n_outer == 2
        assert len(result.trace) == 3
        assert result.trace[2] <= result.trace[1]
        expected = empirical_objective(small_matrix, result.dictionary, cfg.params)
        assert result.objective == pytest.approx(expected, rel=1e-6)

    def test_invalid_tolerance(self, small_matrix):
        """Test invalid tolerance."""
        with pytest.raises(DomainError):
            alternate_minimization_oracle(small_matrix, FitConfig(k=2), outer_tol=0.0)
