import pytest

import acceptance_log
from docforest.matcher import init_model, train
from docforest.synth import GenConfig, generate_corpus


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(GenConfig(num_docs=30, entities_per_doc=(15, 30), seed=7))


@pytest.fixture(scope="session")
def small_model(small_corpus):
    model, _ = train(small_corpus, init_model(emb_dim=16, hidden_dim=32, seed=3), epochs=5, seed=3)
    return model


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
