import numpy as np
import pytest

from depara import Layer, ProbeBundle, RefNet


def make_bundle(rng, n=5, d_embed=4, d_input=6, probe_id="probe", model_id="model",
                layer_id="layer"):
    """Random valid bundle; embeddings bounded away from zero rows."""
    emb = rng.normal(size=(n, d_embed))
    attr = rng.normal(size=(n, d_input))
    return ProbeBundle(model_id=model_id, layer_id=layer_id, probe_id=probe_id,
                       embeddings=emb, attributions=attr)


def random_net(rng, dims, activations=None):
    """Random dense net with layer widths ``dims[0] -> dims[1] -> ...``."""
    layers = []
    for k in range(1, len(dims)):
        act = activations[k - 1] if activations else "tanh"
        scale = 1.0 / np.sqrt(dims[k - 1])
        layers.append(Layer(rng.normal(size=(dims[k], dims[k - 1])) * scale,
                            rng.normal(size=dims[k]) * 0.1, act))
    return RefNet(tuple(layers))


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
