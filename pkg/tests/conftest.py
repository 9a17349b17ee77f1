"""Shared fixtures: toy topologies/graphs and a parameter gradient checker."""

import numpy as np
import pytest

from trg import tensor as tt
from trg.spatial import SkeletonTopology
from trg.tensor import finite_diff_check


def get_by_path(module, path):
    obj = module
    for part in path.split("."):
        obj = obj[int(part)] if part.isdigit() else getattr(obj, part)
    return obj


def set_by_path(module, path, value):
    parts = path.split(".")
    parent = get_by_path(module, ".".join(parts[:-1])) if len(parts) > 1 else module
    if parts[-1].isdigit():
        parent[int(parts[-1])] = value
    else:
        setattr(parent, parts[-1], value)


def fd_param_check(model, forward_scalar, names, tol=1e-4):
    """Finite-difference check the scalar forward against each named parameter.

    forward_scalar(model) must be deterministic (seed any dropout inside).
    The parameter tensor is temporarily swapped for the probe leaf.
    """
    worst = {}
    for name in names:
        original = get_by_path(model, name)

        def f(leaf, _name=name):
            set_by_path(model, _name, leaf)
            return forward_scalar(model)

        try:
            err = finite_diff_check(f, original.data)
        finally:
            set_by_path(model, name, original)
        worst[name] = err
        assert err < tol, f"{name}: rel err {err:.3e}"
    return worst


def scalar_readout(out, seed=0):
    """Project any output tensor to a scalar with a fixed random weighting."""
    w = np.random.default_rng(seed).standard_normal(out.shape)
    return tt.tsum(tt.mul(out, tt.Tensor(w)))


@pytest.fixture
def chain4():
    return SkeletonTopology(joints=("hip", "spine", "neck", "head"),
                            edges=((0, 1), (1, 2), (2, 3)))


@pytest.fixture
def star5():
    return SkeletonTopology(joints=("c", "a", "b", "d", "e"),
                            edges=((0, 1), (0, 2), (0, 3), (0, 4)))


def random_graph(v, seed=0):
    """A valid relational-graph matrix: symmetric, [0,1], unit diagonal."""
    rng = np.random.default_rng(seed)
    m = rng.random((v, v))
    m = (m + m.T) / 2
    np.fill_diagonal(m, 1.0)
    return m
