import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from afford3d.bench import fixtures
from afford3d.bench.manifest import Manifest
from afford3d.cloudstore import load_store
from afford3d.engine import EngineConfig, build_engine
from afford3d.service import _default_image_loader


@pytest.fixture(scope="session")
def fixture_store():
    return fixtures.build_fixture_store()


@pytest.fixture(scope="session")
def fixture_manifest(fixture_store):
    return fixtures.build_fixture_manifest(fixture_store)


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """Materialized on-disk fixture: manifest.json, images/, store/."""
    root = tmp_path_factory.mktemp("fixture")
    manifest_path, store_dir = fixtures.materialize_fixture(root)
    return {"root": root, "manifest": manifest_path, "store": store_dir}


@pytest.fixture(scope="session")
def oracle_engine(fixture_manifest, fixture_store):
    return build_engine(
        fixture_manifest,
        fixture_store,
        EngineConfig(backend="oracle", segmentation="oracle"),
    )


@pytest.fixture(scope="session")
def disk_engine(fixture_dir):
    manifest = Manifest.load(fixture_dir["manifest"])
    store = load_store(fixture_dir["store"])
    return build_engine(
        manifest,
        store,
        EngineConfig(backend="oracle", segmentation="oracle"),
        image_loader=_default_image_loader(manifest),
    )
