"""Shared fixtures: small meshes are expensive enough to build once."""

import pytest

from wgcurl.mesh import generate_hex_mesh, generate_tet_mesh


@pytest.fixture(scope="session")
def hex1():
    return generate_hex_mesh(1)


@pytest.fixture(scope="session")
def hex2():
    return generate_hex_mesh(2)


@pytest.fixture(scope="session")
def tet1():
    return generate_tet_mesh(1)


@pytest.fixture(scope="session")
def tet2():
    return generate_tet_mesh(2)


@pytest.fixture(scope="session")
def mesh_pair(hex2, tet1):
    return {"hex": hex2, "tet": tet1}
