import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from diffplan.doorkey import EnvConfig
from diffplan.estimators import PolicyAgent, RuleWeightLearner
from diffplan.experiments import loop_train_task
from diffplan.validation import check_observations, check_targets, check_tasks


def test_rule_learner_fits_loop_task():
    task = loop_train_task()
    model = RuleWeightLearner(n_slots=4, n_steps=300).fit([task])
    assert model.W_.shape == (4, 4)
    assert model.loss_curve_[-1] < model.loss_curve_[0]
    assert model.predict_proba([task])[0] >= 0.9
    assert model.predict([task]).tolist() == [1]
    assert model.score([task]) > -0.1


def test_rule_learner_target_override_and_clone():
    task = loop_train_task()
    model = RuleWeightLearner(n_slots=2, n_steps=50)
    low = clone(model).fit([task], y=[0.0])
    high = clone(model).fit([task], y=[1.0])
    assert low.predict_proba([task])[0] < high.predict_proba([task])[0]
    assert clone(model).get_params() == model.get_params()


def test_rule_learner_requires_fit():
    with pytest.raises(NotFittedError):
        RuleWeightLearner().predict_proba([loop_train_task()])


def test_policy_agent_smoke():
    agent = PolicyAgent(total_frames=1024, random_state=3).fit(EnvConfig(8))
    obs = np.zeros((2, 15))
    probs = agent.predict_proba(obs)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)
    assert agent.predict(obs).shape == (2,)
    assert 0.0 <= agent.score(episodes=2) <= 1.0
    with pytest.raises(ValueError):
        agent.predict_proba(np.zeros((1, 3)))


def test_validation_helpers():
    task = loop_train_task()
    assert check_tasks(task) == [task]
    with pytest.raises(ValueError):
        check_tasks([])
    with pytest.raises(TypeError):
        check_tasks([1, 2])
    with pytest.raises(ValueError):
        check_targets([0.5, 2.0], 2)
    with pytest.raises(ValueError):
        check_targets([0.5], 2)
    assert check_observations(np.zeros(15), 15).shape == (1, 15)
