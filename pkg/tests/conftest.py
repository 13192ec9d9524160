"""Shared fixtures: small seeded encoders, token tables, and concept specs."""

import numpy as np
import pytest

from proxyclust.concepts import ConceptSpec
from proxyclust.embedding import PromptTemplate, TokenTable, normalize
from proxyclust.encoder import BuiltinEncoder


VOCAB = ["fruit", "with", "the", "color", "of", "red", "yellow", "green",
         "orange", "purple", "blue", "species"]


@pytest.fixture(scope="session")
def table8():
    return TokenTable.random(VOCAB, dim=8, seed=7)


@pytest.fixture(scope="session")
def backend8():
    return BuiltinEncoder(dim=8, seed=0)


@pytest.fixture(scope="session")
def color_spec():
    return ConceptSpec(
        concept_word="color",
        prompt_template=PromptTemplate.parse("fruit with the color of {}"),
        candidates=("red", "yellow", "green", "orange", "purple", "blue"),
        contrastive_concepts=("color", "species"),
    )


def random_unit(rng, d):
    return normalize(rng.normal(size=d))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
