"""
Pytest configuration
"""

import pytest
import sys
from pathlib import Path

import numpy as np

# Add project root to path
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))


@pytest.fixture(autouse=True)
def reset_singletons(tmp_path, monkeypatch):
    """Reset singleton instances between tests"""
    monkeypatch.setenv("SPECTRAN_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setenv("SPECTRAN_USE_RICH", "false")

    # Clear settings cache
    from src.config.settings import get_settings
    get_settings.cache_clear()

    # Reset global cache
    from src.utils import caching
    caching._global_cache = None

    from src.numkit.matrix import set_deterministic
    set_deterministic(True)

    yield

    get_settings.cache_clear()
    caching._global_cache = None


@pytest.fixture
def rng():
    """Fixed generator for test data"""
    return np.random.default_rng(1234)


@pytest.fixture
def small_semantic(rng):
    """30 x 16 semantic matrix of full rank"""
    return rng.standard_normal((30, 16))


@pytest.fixture
def small_factors(small_semantic):
    from src.layers.spectral import svd_decompose
    return svd_decompose(small_semantic)


@pytest.fixture
def handmade_factors():
    """6-item basis with r = 8 > N; U need not be orthonormal for the adapter graph"""
    from src.layers.spectral import SvdFactors

    gen = np.random.default_rng(7)
    return SvdFactors(
        U=gen.standard_normal((6, 8)) / np.sqrt(6),
        sigma=np.array([4.0, 3.0, 2.5, 2.0, 1.5, 1.0, 0.5, 0.25]),
        Vt=gen.standard_normal((8, 5)),
    )


@pytest.fixture
def toy_log():
    """12 users, 10 items, 5-7 interactions each, distinct final timestamps"""
    from src.layers.ingestion import build_interaction_log

    gen = np.random.default_rng(3)
    users, items, stamps = [], [], []
    for user in range(12):
        length = 5 + user % 3
        for t in range(length):
            users.append(100 + user)
            items.append(int(gen.integers(0, 10)) * 10)
            stamps.append(1000 * user + t)
    return build_interaction_log(np.array(users), np.array(items), np.array(stamps), min_interactions=1)


@pytest.fixture
def toy_dataset(toy_log):
    from src.layers.splitting import chronological_split
    return chronological_split(toy_log, max_len=4)


@pytest.fixture
def write_run_config(tmp_path):
    """Write a small synthetic-benchmark run configuration and return its path"""

    def _write(out_dir: Path, transform: str = "spectran", d: int = 4, extra_train: str = "", **run_fields) -> Path:
        run_lines = "\n".join(f'{key} = "{value}"' for key, value in run_fields.items())
        text = f"""
[run]
output_dir = "{out_dir.as_posix()}"
seed = 11
min_interactions = 1
max_len = 5
{run_lines}

[model]
transform = "{transform}"
d = {d}
blocks = 1
mlp_hidden = [8]

[train]
batch_size = 16
num_negatives = 8
max_epochs = 2
patience = 1
lr = 0.01
{extra_train}

[synth]
n_items = 40
n_users = 30
dim = 16
rank = 8
min_seq_len = 5
max_seq_len = 8
"""
        path = tmp_path / f"run_{transform}_{d}_{out_dir.name}.toml"
        path.write_text(text, encoding="utf-8")
        return path

    return _write
