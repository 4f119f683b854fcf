from __future__ import annotations

import importlib.util
import sys
from pathlib import Path

import numpy as np
import pytest

from sfcrime.features import FeatureMatrix

REPO_ROOT = Path(__file__).resolve().parent.parent


def load_script(name: str):
    """Import a scripts/ file as a module (they are not a package)."""
    path = REPO_ROOT / "scripts" / f"{name}.py"
    spec = importlib.util.spec_from_file_location(name, path)
    module = importlib.util.module_from_spec(spec)
    sys.modules[name] = module
    spec.loader.exec_module(module)
    return module


@pytest.fixture(scope="session")
def datagen():
    return load_script("generate_synthetic_data")


@pytest.fixture(scope="session")
def synthetic_csv(tmp_path_factory, datagen) -> Path:
    """A 2,500-row synthetic incident CSV with 2 sentinel and 2 dirty rows."""
    path = tmp_path_factory.mktemp("data") / "synthetic.csv"
    datagen.main(["--rows", "2500", "--seed", "11", "--out", str(path),
                  "--sentinel-coords", "2", "--dirty-rows", "2"])
    return path


def random_matrix(rng: np.random.Generator, n: int, d: int, k: int,
                  separation: float = 1.5) -> FeatureMatrix:
    """Random k-class matrix with class-dependent means."""
    labels = rng.integers(0, k, size=n)
    centers = rng.normal(0.0, separation, size=(k, d))
    values = centers[labels] + rng.normal(0.0, 1.0, size=(n, d))
    return FeatureMatrix(values, tuple(f"f{i}" for i in range(d)), labels)
