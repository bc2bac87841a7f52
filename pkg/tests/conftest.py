"""Shared fixtures: the two synthetic scenes, rendered once per session."""

from __future__ import annotations

import pytest

from scaleforge.formats import load_scene
from scaleforge.qagen import annotate_scene, build_qa
from scaleforge.synthetic import build_room_scene, build_tabletop_scene


@pytest.fixture(scope="session")
def scene_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("scenes")
    build_tabletop_scene(root / "desk01")
    build_room_scene(root / "room01")
    return root


@pytest.fixture(scope="session")
def desk_bundle(scene_root):
    return load_scene(scene_root / "desk01")


@pytest.fixture(scope="session")
def room_bundle(scene_root):
    return load_scene(scene_root / "room01")


@pytest.fixture(scope="session")
def desk_ann(desk_bundle):
    return annotate_scene(desk_bundle)


@pytest.fixture(scope="session")
def room_ann(room_bundle):
    return annotate_scene(room_bundle)


@pytest.fixture(scope="session")
def desk_qa(desk_ann):
    records, skips = build_qa(desk_ann, master_seed=0)
    return records, skips


@pytest.fixture(scope="session")
def room_qa(room_ann):
    records, skips = build_qa(room_ann, master_seed=0)
    return records, skips
