import numpy as np
import pytest

from pepco.data import generate_synthetic, split_dataset
from pepco.training import TrainConfig, train


def central_diff(fn, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Independent central-difference gradient of a scalar numpy function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x = x.ravel()
    flat_g = grad.ravel()
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + eps
        fp = fn(x)
        flat_x[i] = orig - eps
        fm = fn(x)
        flat_x[i] = orig
        flat_g[i] = (fp - fm) / (2 * eps)
    return grad


def rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.abs(analytic), np.abs(numeric)) + 1.0
    return float(np.max(np.abs(analytic - numeric) / denom))


TINY = dict(task="regression", fusion="repcon", epochs=6, batch_size=16,
            hidden_dim=16, heads=2, seq_layers=1, ff_dim=32, graph_layers=2,
            predictor_hidden=(16,), max_len=8, seed=5, lambda_=1e-3)


@pytest.fixture(scope="session")
def tiny_split():
    records = generate_synthetic(240, 8, seed=11)
    return split_dataset(records, (0.8, 0.1, 0.1), seed=11)


@pytest.fixture(scope="session")
def tiny_model(tiny_split):
    """A small trained co-model shared by attribution/metric tests."""
    model, curve = train(tiny_split, TrainConfig(**TINY))
    return model
