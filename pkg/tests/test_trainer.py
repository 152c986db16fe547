import numpy as np
import pytest

from fewtag.core import Episode, SupportSet
from fewtag.embedding import EmbeddingConfig, EncoderParams
from fewtag.synthetic import overfit_episode
from fewtag.trainer import AdamState, TrainConfig, adam_step, save_history, train

from helpers import seq_from


def overfit_setup(scorer="mn", **overrides):
    episode, lookup = overfit_episode()
    defaults = dict(
        batch_size=1,
        learning_rate=1e-2,
        max_epochs=200,
        early_stop_patience_epochs=200,
        rng_seed=42,
        scorer=scorer,
        use_pairwise=False,
    )
    defaults.update(overrides)
    config = TrainConfig(**defaults)
    embed = EmbeddingConfig(dim=16, mode="independent", source="static_lookup")
    return episode, config, embed, EncoderParams(lookup=lookup)


class TestAdamStep:
    def test_zero_gradient_leaves_params_unchanged(self):
        params = {"w": np.array([1.0, -2.0])}
        state = AdamState()
        adam_step(params, {"w": np.zeros(2)}, state, lr=0.1)
        assert np.allclose(params["w"], [1.0, -2.0])

    def test_first_step_matches_hand_computation(self):
        lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
        g = np.array([0.3, -1.7, 0.0001])
        params = {"w": np.zeros(3)}
        adam_step(params, {"w": g.copy()}, AdamState(), lr=lr, beta1=b1, beta2=b2, eps=eps)
        m_hat = (1 - b1) * g / (1 - b1)
        v_hat = (1 - b2) * g * g / (1 - b2)
        expected = -lr * m_hat / (np.sqrt(v_hat) + eps)
        assert np.allclose(params["w"], expected)
        # bias-corrected first step has magnitude ~ lr in each coordinate
        assert np.allclose(np.abs(params["w"]), lr, rtol=1e-3)
        assert np.all(np.sign(params["w"]) == -np.sign(g))

    def test_constant_gradient_updates_are_monotone(self):
        params = {"w": np.array(5.0)}
        state = AdamState()
        values = [float(params["w"])]
        for _ in range(50):
            adam_step(params, {"w": np.array(1.0)}, state, lr=0.01)
            values.append(float(params["w"]))
        assert all(b < a for a, b in zip(values, values[1:]))


class TestTrainOverfit:
    def test_single_episode_convergence_and_exact_decode(self):
        episode, config, embed, encoder = overfit_setup()
        result = train([episode], [], config, embed, encoder)
        losses = [h[1] for h in result.history]
        assert len(losses) == 200
        assert losses[-1] < 0.01
        # monotone on average: late mean well under early mean
        assert np.mean(losses[-10:]) < np.mean(losses[:10])
        pred = result.model.decode(episode, decoder="viterbi")
        assert pred == list(episode.query.tags)

    def test_losses_nonnegative(self):
        episode, config, embed, encoder = overfit_setup(max_epochs=20)
        result = train([episode], [], config, embed, encoder)
        assert all(h[1] >= 0 for h in result.history)

    def test_fifty_step_windows_decrease_at_small_lr(self):
        episode, config, embed, encoder = overfit_setup(
            learning_rate=1e-3, max_epochs=120
        )
        result = train([episode], [], config, embed, encoder)
        losses = [h[1] for h in result.history]
        for i in range(len(losses) - 50):
            assert losses[i + 50] < losses[i]


class TestAblationFlags:
    def test_no_dependency_transfer_keeps_table_zero(self):
        episode, config, embed, encoder = overfit_setup(
            max_epochs=20, use_dependency_transfer=False
        )
        result = train([episode], [], config, embed, encoder)
        assert np.all(result.model.table.entries == 0.0)
        assert result.model.default_decoder == "argmax"

    def test_fixed_lambda_stays_fixed(self):
        episode, config, embed, encoder = overfit_setup(
            max_epochs=20, learnable_lambda=False, lambda_init=0.75
        )
        result = train([episode], [], config, embed, encoder)
        assert result.model.lam == 0.75

    def test_fully_frozen_model_has_constant_losses(self):
        episode, config, embed, encoder = overfit_setup(
            max_epochs=5,
            use_dependency_transfer=False,
            learnable_lambda=False,
            lambda_init=0.5,
        )
        dev_episode, _ = overfit_episode()
        dev_episode = Episode(
            query=dev_episode.query, support=dev_episode.support, domain_name="dev"
        )
        result = train([episode], [dev_episode], config, embed, encoder)
        train_losses = {round(h[1], 12) for h in result.history}
        dev_losses = {round(h[2], 12) for h in result.history}
        assert len(train_losses) == 1 and len(dev_losses) == 1

    def test_projection_flag_trains_projection(self):
        episode, config, embed, encoder = overfit_setup(max_epochs=30)
        embed_proj = EmbeddingConfig(dim=16, mode="independent", source="static_lookup", projection=True)
        result = train([episode], [], config, embed_proj, encoder)
        assert result.model.projection is not None
        assert not np.allclose(result.model.projection, np.eye(16))


class TestContracts:
    def test_empty_training_set_errors(self):
        _, config, embed, encoder = overfit_setup()
        with pytest.raises(ValueError, match="empty"):
            train([], [], config, embed, encoder)

    def test_overlapping_train_dev_domains_rejected(self):
        episode, config, embed, encoder = overfit_setup()
        with pytest.raises(ValueError, match="disjoint"):
            train([episode], [episode], config, embed, encoder)

    def test_same_seed_bit_identical_histories(self):
        episode, config, embed, encoder = overfit_setup(max_epochs=25)
        a = train([episode], [], config, embed, encoder)
        b = train([episode], [], config, embed, encoder)
        assert a.history == b.history

    def test_different_seeds_differ(self):
        episode, config, embed, encoder = overfit_setup(max_epochs=10)
        a = train([episode], [], config, embed, encoder)
        episode, config2, embed, encoder = overfit_setup(max_epochs=10, rng_seed=7)
        b = train([episode], [], config2, embed, encoder)
        assert a.history != b.history


def conflicting_dev_episode():
    """Same tokens as the overfit query but contradictory gold tags."""
    query = seq_from("on:B-x alpha:O amb0:O amb1:O done:B-y beta:O")
    support = SupportSet(pairs=(seq_from("on:B-x done:B-y alpha:O"),), shot=1)
    return Episode(query=query, support=support, domain_name="conflict")


class TestEarlyStopping:
    def test_stops_when_dev_worsens(self):
        episode, config, embed, encoder = overfit_setup(
            max_epochs=100, early_stop_patience_epochs=2
        )
        result = train([episode], [conflicting_dev_episode()], config, embed, encoder)
        assert len(result.history) < 100
        dev_losses = [h[2] for h in result.history]
        assert result.best_dev_loss == pytest.approx(min(dev_losses))

    def test_best_checkpoint_is_best_dev_epoch(self):
        episode, config, embed, encoder = overfit_setup(
            max_epochs=60, early_stop_patience_epochs=3
        )
        result = train([episode], [conflicting_dev_episode()], config, embed, encoder)
        dev_losses = [h[2] for h in result.history]
        best_epoch = int(np.argmin(dev_losses))
        # the stored best params cannot be the final ones if dev worsened after
        if best_epoch < len(dev_losses) - 1:
            final = result.trainer_state["params"]["lambda"]
            best = result.trainer_state["best_params"]["lambda"]
            assert final != best


class TestResume:
    def test_resume_reproduces_uninterrupted_run(self):
        episode, config, embed, encoder = overfit_setup(max_epochs=12)
        full = train([episode], [], config, embed, encoder)

        episode, config_a, embed, encoder = overfit_setup(max_epochs=5)
        first = train([episode], [], config_a, embed, encoder)
        episode, config_b, embed, encoder = overfit_setup(max_epochs=12)
        second = train(
            [episode], [], config_b, embed, encoder, resume_state=first.trainer_state
        )
        assert second.history == full.history
        assert np.allclose(
            second.model.table.entries, full.model.table.entries
        )
        assert second.model.lam == full.model.lam


def test_save_history_format(tmp_path):
    path = tmp_path / "loss.csv"
    save_history(str(path), [(1, 0.5, 0.25), (2, 0.125, 0.0625)])
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,dev_loss"
    assert lines[1] == "1,0.5,0.25"
    assert len(lines) == 3
