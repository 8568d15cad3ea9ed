import numpy as np
import pytest

from hypkernels.diff import ParamVector, materialize
from hypkernels.kernels import KernelConfig, RadialCoeffs
from hypkernels.learning import (
    Episode,
    LabeledSet,
    Projection,
    RunConfig,
    euclidean_baseline_score,
    evaluate,
    fsl_loss,
    gen_tree_dataset,
    init_params,
    params_to_kernel_config,
    sample_episode,
    shuffle_labels,
    sts_loss,
    train,
    zsl_loss,
)


@pytest.fixture(scope="module")
def dataset():
    return gen_tree_dataset(seed=0, depth=3, branching=3, dim=8,
                            noise_sigma=0.35, samples_per_leaf=12)


@pytest.fixture(scope="module")
def kconfig():
    p = ParamVector(0.1 * np.ones((2, 8)), np.zeros(2),
                    np.array([0.7, 0.5, 0.3]))
    params, radial, _ = materialize(p)
    return KernelConfig("ahrad", params=params, radial=radial)


class TestProjection:
    def test_default_is_exp0(self):
        assert Projection().kind == "exp0"

    def test_clip_requires_parameters(self):
        with pytest.raises(ValueError):
            Projection("clip")
        with pytest.raises(ValueError):
            Projection("clip", beta=2.0, eps=0.1)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Projection("stereographic")

    def test_apply_stays_in_ball(self):
        for proj in (Projection(), Projection("clip", beta=0.9, eps=0.2)):
            out = proj.apply([10.0, -3.0], 1.0)
            assert sum(x * x for x in out) < 1.0


class TestTreeDataset:
    def test_shape_and_classes(self, dataset):
        assert dataset.features.shape == (27 * 12, 8)
        assert dataset.classes.size == 27

    def test_deterministic(self, dataset):
        again = gen_tree_dataset(0, 3, 3, 8, 0.35, 12)
        np.testing.assert_array_equal(dataset.features, again.features)
        np.testing.assert_array_equal(dataset.labels, again.labels)

    def test_seed_changes_data(self, dataset):
        other = gen_tree_dataset(1, 3, 3, 8, 0.35, 12)
        assert not np.array_equal(dataset.features, other.features)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            gen_tree_dataset(0, 1, 3, 8, 0.35, 12)
        with pytest.raises(ValueError):
            gen_tree_dataset(0, 3, 3, 8, -0.1, 12)

    def test_shuffle_labels_keeps_features(self, dataset):
        shuffled = shuffle_labels(dataset, seed=1)
        np.testing.assert_array_equal(shuffled.features, dataset.features)
        assert not np.array_equal(shuffled.labels, dataset.labels)
        assert sorted(shuffled.labels) == sorted(dataset.labels)


class TestEpisodes:
    def test_shapes(self, dataset):
        rng = np.random.default_rng(0)
        ep = sample_episode(rng, dataset, 5, 2, 3)
        assert ep.support.shape == (5, 2, 8)
        assert ep.query.shape == (5, 3, 8)
        assert len(set(ep.class_ids)) == 5

    def test_support_query_disjoint(self, dataset):
        rng = np.random.default_rng(1)
        ep = sample_episode(rng, dataset, 4, 2, 2)
        sup = {tuple(r) for r in ep.support.reshape(-1, 8)}
        qry = {tuple(r) for r in ep.query.reshape(-1, 8)}
        assert not sup & qry

    def test_too_many_ways(self, dataset):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            sample_episode(rng, dataset, 28, 1, 1)

    def test_episode_validation(self):
        with pytest.raises(ValueError):
            Episode(np.zeros((2, 1, 3)), np.zeros((3, 1, 3)), (0, 1))


class TestLosses:
    def test_fsl_finite_positive(self, dataset, kconfig):
        rng = np.random.default_rng(2)
        ep = sample_episode(rng, dataset, 5, 1, 3)
        val = fsl_loss(kconfig, ep)
        assert np.isfinite(val) and val > 0

    def test_fsl_similarity_mode(self, dataset, kconfig):
        rng = np.random.default_rng(2)
        ep = sample_episode(rng, dataset, 5, 1, 3)
        assert np.isfinite(fsl_loss(kconfig, ep, mode="similarity"))

    def test_fsl_easy_episode_has_low_loss(self, kconfig):
        # Widely separated classes with tiny noise: loss far below ln(2).
        easy = gen_tree_dataset(0, 2, 2, 4, 0.01, 8, step_length=2.0)
        rng = np.random.default_rng(0)
        ep = sample_episode(rng, easy, 2, 3, 3)
        assert fsl_loss(kconfig_for(dim=4), ep) < np.log(2.0)

    def test_zsl_finite(self, dataset, kconfig):
        semantics = np.stack(
            [dataset.features[dataset.labels == c].mean(axis=0)
             for c in dataset.classes[:4]]
        )
        feats = dataset.features[:6]
        labels = dataset.labels[:6] % 4
        lin = np.hstack([np.eye(8), np.zeros((8, 1))])
        val = zsl_loss(kconfig, semantics, (feats, labels), lin)
        assert np.isfinite(val) and val > 0

    def test_zsl_label_bounds(self, kconfig):
        with pytest.raises(ValueError):
            zsl_loss(kconfig, np.zeros((2, 8)),
                     (np.zeros((1, 8)), np.array([5])),
                     np.hstack([np.eye(8), np.zeros((8, 1))]))

    def test_sts_finite(self, dataset, kconfig):
        a = dataset.features[:4]
        p = dataset.features[4:8]
        n = dataset.features[8:12]
        val = sts_loss(kconfig, a, p, n, temperature=0.5)
        assert np.isfinite(val) and val > 0

    def test_sts_validation(self, kconfig):
        with pytest.raises(ValueError):
            sts_loss(kconfig, np.zeros((2, 8)), np.zeros((3, 8)),
                     np.zeros((2, 8)), 0.5)
        with pytest.raises(ValueError):
            sts_loss(kconfig, np.zeros((2, 8)), np.zeros((2, 8)),
                     np.zeros((2, 8)), 0.0)


class TestBaselines:
    def test_euclidean_score(self):
        s = euclidean_baseline_score(np.array([1.0, 0.0]), np.array([0.0, 0.0]))
        assert s == pytest.approx(-1.0)

    def test_geodesic_needs_curvature(self):
        with pytest.raises(ValueError):
            euclidean_baseline_score(np.array([0.1]), np.array([0.2]),
                                     mode="geodesic")

    def test_geodesic_score(self):
        from hypkernels.geometry import Curvature

        s = euclidean_baseline_score(np.array([0.0]), np.array([0.5]),
                                     mode="geodesic", curvature=Curvature(1.0))
        assert s == pytest.approx(-2.0 * np.arctanh(0.5))


class TestEvaluate:
    def test_kernel_better_than_chance(self, dataset, kconfig):
        res = evaluate(kconfig, dataset, 5, 1, 3, episodes=50, seed=0)
        assert res.accuracy > 0.3
        assert res.mean_loss is not None and np.isfinite(res.mean_loss)

    def test_baseline_mode(self, dataset):
        res = evaluate(None, dataset, 5, 1, 3, episodes=50, seed=0,
                       baseline="euclidean")
        assert 0.2 < res.accuracy <= 1.0
        assert res.mean_loss is None

    def test_deterministic(self, dataset, kconfig):
        a = evaluate(kconfig, dataset, 5, 1, 3, episodes=20, seed=3)
        b = evaluate(kconfig, dataset, 5, 1, 3, episodes=20, seed=3)
        assert a == b

    def test_ci_shrinks_with_episodes(self, dataset):
        few = evaluate(None, dataset, 5, 1, 3, 20, 0, baseline="euclidean")
        many = evaluate(None, dataset, 5, 1, 3, 200, 0, baseline="euclidean")
        assert many.ci_halfwidth < few.ci_halfwidth


class TestTrain:
    def test_run_config_validation(self):
        with pytest.raises(ValueError):
            RunConfig(task="regression")
        with pytest.raises(ValueError):
            RunConfig(steps=-1)

    def test_init_params_shapes(self):
        config = RunConfig(m=3, truncation=5, dim=8)
        p = init_params(config)
        assert p.pole_raws.shape == (3, 8)
        assert p.radial_raws.size == 6
        assert p.affine is None

    def test_zsl_gets_affine(self):
        p = init_params(RunConfig(task="zsl", dim=8))
        assert p.affine.shape == (8, 9)

    def test_short_fsl_run_improves_loss(self):
        config = RunConfig(steps=15, truncation=6, eval_episodes=30,
                           lr=0.05)
        run = train(config)
        assert len(run.loss_trace) == 15
        assert all(np.isfinite(v) for v in run.loss_trace)
        assert run.final_eval.mean_loss < run.initial_eval.mean_loss

    def test_zero_lr_keeps_params(self):
        config = RunConfig(steps=3, truncation=4, eval_episodes=5, lr=0.0)
        run = train(config)
        np.testing.assert_array_equal(run.final_params.pole_raws,
                                      init_params(config).pole_raws)

    def test_deterministic_replay(self):
        config = RunConfig(steps=5, truncation=4, eval_episodes=10)
        a = train(config)
        b = train(config)
        assert a.loss_trace == b.loss_trace
        np.testing.assert_array_equal(a.final_params.radial_raws,
                                      b.final_params.radial_raws)
        assert a.final_eval == b.final_eval

    @pytest.mark.parametrize("task", ["zsl", "sts"])
    def test_other_tasks_run(self, task):
        config = RunConfig(task=task, steps=3, truncation=4, eval_episodes=5)
        run = train(config)
        assert all(np.isfinite(v) for v in run.loss_trace)

    def test_params_to_kernel_config(self):
        config = RunConfig(variant="ahrbf", bandwidth=1.0, truncation=4)
        kc = params_to_kernel_config(config, init_params(config))
        assert kc.variant == "ahrbf" and kc.bandwidth == 1.0


def kconfig_for(dim):
    p = ParamVector(0.1 * np.ones((2, dim)), np.zeros(2),
                    np.array([0.7, 0.5, 0.3]))
    params, radial, _ = materialize(p)
    return KernelConfig("ahrad", params=params, radial=radial)
