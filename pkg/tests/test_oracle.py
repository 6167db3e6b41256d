import numpy as np
import pytest

from sgail import (
    ConvergenceError,
    MalformedTableError,
    TabularMDP,
    TaskVariable,
    bfs_shortest_path,
    default_grid_world,
    grid_mdp,
    mutual_information_exact,
    soft_advantage,
    soft_value_iteration,
    uniform_policy_success_probability,
    value_iteration,
)

WORLD = default_grid_world()
TASKS = [TaskVariable(0), TaskVariable(1)]


@pytest.mark.parametrize("omega", [1.0, 0.3])
def test_soft_value_iteration_reaches_its_fixed_point(omega):
    mdp, _ = grid_mdp(WORLD, TASKS[0], 0.95, omega)
    solution = soft_value_iteration(mdp)
    assert solution.residual <= 1e-10
    np.testing.assert_allclose(solution.policy.sum(axis=1), 1.0, rtol=0, atol=1e-9)
    np.testing.assert_allclose(soft_advantage(solution.value, solution.q, omega), omega * np.log(solution.policy),
                               atol=1e-9)


def test_goal_is_absorbing_with_the_entropy_bonus_as_its_value():
    mdp, cells = grid_mdp(WORLD, TASKS[1])
    solution = soft_value_iteration(mdp)
    goal = cells.index((10, 10))
    assert solution.value[goal] == pytest.approx(np.log(4) / 0.05, rel=1e-9)
    np.testing.assert_allclose(solution.policy[goal], 0.25)


def test_hard_values_decay_with_the_shortest_path_length():
    gamma = 0.9
    mdp, cells = grid_mdp(WORLD, TASKS[0], gamma)
    v, _ = value_iteration(mdp)
    for i, cell in enumerate(cells):
        if cell == (0, 0):
            assert v[i] == 0.0
        else:
            distance, _ = bfs_shortest_path(WORLD, cell, (0, 0))
            assert v[i] == pytest.approx(gamma ** (distance - 1), rel=1e-12)


def test_soft_iteration_gives_up_after_its_budget():
    mdp, _ = grid_mdp(WORLD, TASKS[0])
    with pytest.raises(ConvergenceError):
        soft_value_iteration(mdp, max_iterations=1)
    with pytest.raises(ValueError):
        soft_value_iteration(mdp, tol=0.0)


def test_malformed_mdps_are_rejected():
    with pytest.raises(MalformedTableError):
        TabularMDP(np.full((2, 1, 2), 0.4), np.zeros((2, 1)))
    with pytest.raises(MalformedTableError):
        TabularMDP(np.ones((2, 1, 1)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        TabularMDP(np.ones((1, 1, 1)), np.zeros((1, 1)), gamma=1.0)


def test_shortest_path_between_the_goals():
    length, path = bfs_shortest_path(WORLD, (0, 0), (10, 10))
    assert length == 20 and len(path) == 21
    assert path[0] == (0, 0) and path[-1] == (10, 10)
    for a, b in zip(path, path[1:]):
        assert abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1
        assert b not in WORLD.puddles


def test_shortest_path_needs_free_cells():
    with pytest.raises(ValueError):
        bfs_shortest_path(WORLD, (5, 5), (0, 0))


def test_mutual_information_values():
    assert mutual_information_exact([[0.4, 0.1], [0.1, 0.4]]) == pytest.approx(0.192745, abs=1e-6)
    assert mutual_information_exact([[0.5, 0.0], [0.0, 0.5]]) == pytest.approx(np.log(2))
    assert mutual_information_exact(np.outer([0.3, 0.7], [0.2, 0.5, 0.3])) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("joint", [[[0.6, 0.6], [-0.1, -0.1]], [[0.2, 0.2], [0.2, 0.2]], [0.5, 0.5]])
def test_malformed_joint_tables(joint):
    with pytest.raises(MalformedTableError):
        mutual_information_exact(joint)


def test_uniform_walk_probabilities():
    task = TASKS[0]
    assert uniform_policy_success_probability(WORLD, task, (1, 0), horizon=0) == 0.0
    assert uniform_policy_success_probability(WORLD, task, (1, 0), horizon=1) == 0.25
    assert uniform_policy_success_probability(WORLD, task, (10, 10), horizon=1) == 0.0
    probabilities = [uniform_policy_success_probability(WORLD, task, (3, 2), horizon=h) for h in range(0, 80, 10)]
    assert all(a <= b for a, b in zip(probabilities, probabilities[1:]))
    assert 0.0 < probabilities[-1] < 1.0
