import numpy as np
import pytest

from smeta.models import Architecture, Variant, build_bundle
from smeta.signals import AlignedSignal, Label, Side

SMALL = Architecture(input_dim=12, hidden_dim=6, latent_dim=4, subject_hidden_dim=3)


def random_signals(rng, n_subjects=6, per_subject=12, dim=12, both_sides=False):
    """Aligned signals with values in [0, 1]; labels alternate over subjects."""
    out = []
    for k in range(n_subjects):
        for j in range(per_subject):
            side = Side(j % 2) if both_sides else Side((k // 2) % 2)
            out.append(AlignedSignal(rng.uniform(0, 1, dim), f"S{k:02d}", side, Label(k % 2)))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def ae_bundle(rng):
    return build_bundle(rng, SMALL, Variant.AE)


@pytest.fixture
def sae_bundle(rng):
    return build_bundle(rng, SMALL, Variant.SAE)


@pytest.fixture
def signals(rng):
    return random_signals(rng)
