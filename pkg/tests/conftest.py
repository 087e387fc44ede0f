import json
from importlib import resources

import pytest

from metldpc.ensemble import parse_ensemble

DATA = resources.files("metldpc").joinpath("data")


def load_bundled(name: str):
    text = DATA.joinpath("ensembles", name).read_text(encoding="utf-8")
    return parse_ensemble(text)


def bundled_text(kind: str, name: str) -> str:
    return DATA.joinpath(kind, name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def benchmarks():
    return json.loads(DATA.joinpath("benchmarks.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def dvb():
    return load_bundled("dvb_rate_half.ens")


@pytest.fixture(scope="session")
def rate_half_reference():
    return load_bundled("rate_half_reference.ens")


@pytest.fixture(scope="session")
def rate_half_bec_dd():
    return load_bundled("rate_half_bec_dd.ens")


@pytest.fixture(scope="session")
def rate_tenth_bec_joint():
    return load_bundled("rate_tenth_bec_joint.ens")
