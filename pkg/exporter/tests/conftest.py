import numpy as np
import pytest

import depara as dp


def write_fixture_net(rng, path, dims, activations):
    """Random dense DEPN fixture written with the analysis toolkit."""
    layers = []
    for k in range(1, len(dims)):
        scale = 1.0 / np.sqrt(dims[k - 1])
        layers.append((rng.normal(size=(dims[k], dims[k - 1])) * scale,
                       rng.normal(size=dims[k]) * 0.1,
                       activations[k - 1]))
    net = dp.dense_net(layers)
    dp.save_refnet(net, path)
    return net


def write_probe_dir(rng, directory, n, d_input):
    directory.mkdir(parents=True, exist_ok=True)
    probe = rng.normal(size=(n, d_input)).astype(np.float32)
    for i, row in enumerate(probe):
        np.save(directory / f"item{i:03d}.npy", row)
    return probe


@pytest.fixture
def rng():
    return np.random.default_rng(77)
