import pytest

from adrtag.synthetic import fixture_corpus, write_fixture_corpus

# Small hyperparameters so full pipeline runs finish in seconds.
FAST_INI = """\
[embeddings]
dim = 16
epochs = 2
clusters = 8

[crf]
max_iters = 40

[blstm]
hidden_size = 12
epochs = 4
patience = 2
learning_rate = 0.01
"""


@pytest.fixture(scope="session")
def fixture_docs():
    return fixture_corpus()


@pytest.fixture
def corpus_dir(tmp_path):
    path = tmp_path / "corpus"
    write_fixture_corpus(path)
    return path


@pytest.fixture
def fast_ini(tmp_path):
    path = tmp_path / "fast.ini"
    path.write_text(FAST_INI, encoding="utf-8")
    return path


def pytest_terminal_summary(terminalreporter):
    import helpers

    if helpers.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in helpers.ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
