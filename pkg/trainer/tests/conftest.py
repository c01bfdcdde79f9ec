from pathlib import Path

import pytest

from seqtrainer.data import generate_synthetic, load_csv_sequences

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    generate_synthetic(out, n=240, num_classes=3, seed=1, seq_len=12,
                       feature_dims=(3, 3), num_folds=4)
    return out


@pytest.fixture(scope="session")
def synth_dataset(synth_dir):
    return load_csv_sequences(synth_dir)


@pytest.fixture(scope="session")
def tiny_dataset():
    return load_csv_sequences(GOLDEN / "tiny_synth")
