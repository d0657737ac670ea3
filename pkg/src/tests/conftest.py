import os
import tempfile

# Keep test runs out of the repository log tree; must happen before src.utils.logger is imported
os.environ.setdefault("LOGS_DIR", os.path.join(tempfile.gettempdir(), "danrl_test_logs"))

import numpy as np
import pytest

from src.graph.graph_io import AttributedGraph, generate_sbm_attributed


@pytest.fixture
def triangle():
    return AttributedGraph.from_pairs(3, [(0, 1), (1, 2), (0, 2)], np.eye(3))


@pytest.fixture
def path3():
    return AttributedGraph.from_pairs(3, [(0, 1), (1, 2)], np.eye(3))


@pytest.fixture
def sbm_graph():
    """2-block SBM, 60 nodes, the homophily fixture used throughout the suite."""
    return generate_sbm_attributed(30, 2, 0.3, 0.02, 50, 0.1, seed=0)
