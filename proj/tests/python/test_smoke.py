import json
import math
from pathlib import Path

import numpy as np
import pytest

import sparselets as sl

DATA = Path(__file__).resolve().parents[2] / "data"


@pytest.fixture(scope="module")
def bank():
    return sl.LogGaborBank(sl.BankParams(), 64)


@pytest.fixture(scope="module")
def image():
    rng = np.random.default_rng(3)
    return sl.preprocess(rng.normal(size=(64, 64)))


def test_version():
    assert sl.__version__ == "0.1.0"


def test_preprocess_is_zero_mean(image):
    assert image.shape == (64, 64)
    assert abs(image.mean()) < 1e-12
    assert image[0, 0] == 0.0


def test_bank_layout(bank):
    assert bank.n_scales == 5
    assert bank.n_orientations == 24
    assert sl.analyze(np.zeros((64, 64)), bank).shape == (bank.coefficient_count,)


def test_atom_round_trip(bank):
    a = sl.Address(scale=1, orientation=3, x=16, y=20)
    atom = bank.synthesize_atom(a, 0.5 - 0.25j)
    assert np.linalg.norm(atom) == pytest.approx(abs(0.5 - 0.25j), rel=1e-9)
    assert bank.inner_product(atom, a) == pytest.approx(0.5 - 0.25j, abs=1e-8)


def test_extract_energy_identity(bank, image):
    p = sl.PursuitParams()
    p.max_edges = 200
    p.energy_threshold = 0.0
    edges = sl.extract(image, bank, p)
    assert edges.step_count == 200
    residual = image - sl.reconstruct(edges, bank)
    curve = edges.energy_curve()
    assert np.sum(residual**2) / np.sum(image**2) == pytest.approx(curve[-1], rel=1e-6)
    assert all(b <= a + 1e-12 for a, b in zip(curve, curve[1:]))


def test_edges_json_round_trip(bank, image):
    p = sl.PursuitParams()
    p.max_edges = 20
    edges = sl.extract(image, bank, p)
    again = sl.EdgeList.from_json(edges.to_json())
    assert again.to_json() == edges.to_json()
    assert json.loads(edges.to_json())


def test_chevron_and_guided_pursuit(bank, image):
    p = sl.PursuitParams()
    p.max_edges = 64
    corpus = [sl.extract(image, bank, p)]
    h = sl.chevron_stats(corpus)
    m = h.ratio_map()
    assert m.shape == (h.bins.n_theta, h.bins.n_psi)
    assert h.pair_count > 0
    off = sl.CoocParams()
    off.eta = 0.0
    assert sl.extract_with_prior(image, bank, h, p, off).to_json() == corpus[0].to_json()
    assert len(sl.equalize_orientations(corpus, 12)) == 12


def test_shl_learns_unit_norm_atoms():
    rng = np.random.default_rng(0)
    images = [sl.whiten(rng.normal(size=(64, 64))) for _ in range(2)]
    p = sl.SHLParams()
    p.patch_side = 6
    p.n_atoms = 16
    p.n_steps = 20
    p.l0_target = 3
    d = sl.learn(images, p)
    assert d.atoms.shape == (36, 16)
    assert np.allclose(np.linalg.norm(d.atoms, axis=0), 1.0)
    code = sl.code_mp(d, d.atoms[:, 5], 1)
    assert code[5] == pytest.approx(1.0)


def test_kurtosis_and_bits():
    x = np.array([0.0, 0.0, 0.0, 4.0])
    c = x - x.mean()
    assert sl.kurtosis(list(x)) == pytest.approx(np.mean(c**4) / np.mean(c**2) ** 2 - 3)
    assert sl.edges_to_reach([1.0, 0.5, 0.25], 0.5) == pytest.approx(1.0)
    assert math.isfinite(sl.bits_per_pixel(100, 10_000, 64))


def test_errors_become_python_exceptions(bank):
    with pytest.raises(ValueError):
        sl.extract(np.zeros((32, 32)), bank)
    with pytest.raises((RuntimeError, ValueError)):
        sl.load_image(DATA / "does-not-exist.pgm", 64)
