import json

import numpy as np
import pytest

from ssnet.topology import default_topology, parse_topology

MICRO_TREE = {"root": 0, "children": {"0": [1, 2], "1": [3], "3": [4]}}

SMALL_TREE = {
    "root": 0,
    "children": {
        "0": [1, 8],
        "1": [2, 3],
        "2": [4],
        "4": [5],
        "3": [6],
        "6": [7],
        "8": [9],
        "9": [10, 11],
        "10": [12],
    },
}


@pytest.fixture(scope="session")
def micro_topology():
    """5-joint tree used by the gradient-fidelity and oracle tests."""
    return parse_topology(json.dumps(MICRO_TREE))


@pytest.fixture(scope="session")
def small_topology():
    """13-joint tree used by synthetic end-to-end tests."""
    return parse_topology(json.dumps(SMALL_TREE))


@pytest.fixture(scope="session")
def kinect_topology():
    return default_topology()


def chain_topology(n: int):
    """Path graph: every node has one (left) child."""
    doc = {"root": 0, "children": {str(i): [i + 1] for i in range(n - 1)}}
    return parse_topology(json.dumps(doc))


def full_binary_topology(height: int):
    """Full binary tree in heap order, `height` levels."""
    n = 2**height - 1
    children = {str(i): [2 * i + 1, 2 * i + 2] for i in range((n - 1) // 2)}
    return parse_topology(json.dumps({"root": 0, "children": children}))


def random_bodies(rng: np.random.Generator, joint_count: int, n: int = 1):
    return rng.normal(0.0, 1.0, size=(n, 3 * joint_count))
