import copy

import numpy as np
import pytest
import torch

from lmenrich.data_io import generate_scene
from lmenrich.enrichment import initialize_enriched
from lmenrich.exceptions import ConfigurationError
from lmenrich.patches import NO_AUGMENT, FaceImage
from lmenrich.quality import QualityModel
from lmenrich.regressor import OffsetNet, OffsetRegressor, index_embed, refine, smooth_l1, soft_argmax, weighted_loss
from lmenrich.regressor.artifact import load_model, read_header, save_model

D64 = torch.float64


def feats(b=1, m=4, h=2, w=3):
    return torch.arange(b * m * h * w, dtype=D64).reshape(b, m, h, w)


# -- index embedding ---------------------------------------------------------

@pytest.mark.parametrize("t", [0, 1, 2, 3])
def test_embed_integer_identity(t):
    f = feats()
    out = index_embed(f, torch.tensor([float(t)], dtype=D64), 4)
    assert torch.equal(out[0, 0], f[0, t])


def test_embed_half_average():
    f = feats()
    out = index_embed(f, torch.tensor([1.5], dtype=D64), 4)
    assert torch.equal(out[0, 0], 0.5 * f[0, 1] + 0.5 * f[0, 2])


def test_embed_wrap():
    f = feats()
    out = index_embed(f, torch.tensor([3.5], dtype=D64), 4)
    assert torch.equal(out[0, 0], 0.5 * f[0, 3] + 0.5 * f[0, 0])


def test_embed_fraction_and_blocks():
    f = feats(b=2, m=6, h=1, w=2)  # k=2, n=3
    out = index_embed(f, torch.tensor([0.25, 2.0], dtype=D64), 3)
    assert out.shape == (2, 2, 1, 2)
    assert torch.allclose(out[0, 0], 0.75 * f[0, 0] + 0.25 * f[0, 1], rtol=0, atol=1e-12)
    assert torch.allclose(out[0, 1], 0.75 * f[0, 3] + 0.25 * f[0, 4], rtol=0, atol=1e-12)
    assert torch.equal(out[1, 1], f[1, 5])


def test_embed_rejects_bad_channels():
    with pytest.raises(ConfigurationError):
        index_embed(feats(m=5), torch.tensor([0.0]), 4)


# -- soft argmax / loss --------------------------------------------------------

def test_soft_argmax_one_hot():
    w = 8
    for x in range(w):
        h = torch.full((1, w), -1e4, dtype=D64)
        h[0, x] = 0.0
        assert soft_argmax(h).item() == pytest.approx(x - (w - 1) / 2)


def test_soft_argmax_center_and_symmetry():
    h = torch.full((1, 9), -1e4, dtype=D64)
    h[0, 4] = 0
    assert soft_argmax(h).item() == pytest.approx(0.0, abs=1e-12)
    sym = torch.tensor([[0.0, 5.0, 0.0, 0.0, 0.0, 0.0, 5.0, 0.0]], dtype=D64)
    assert soft_argmax(sym).item() == pytest.approx(0.0, abs=1e-12)


def test_loss_examples():
    one = torch.tensor([1.0], dtype=D64)
    assert weighted_loss(torch.tensor([0.5], dtype=D64), torch.tensor([0.0], dtype=D64), one).item() == 0.125
    o = torch.tensor([1.0, -3.0, 2.0], dtype=D64)
    assert weighted_loss(o, o, torch.ones(3, dtype=D64)).item() == 0.0
    assert weighted_loss(o, o + 5, torch.zeros(3, dtype=D64)).item() == 0.0
    assert smooth_l1(torch.tensor(3.0), torch.tensor(0.0)).item() == 2.5
    with pytest.raises(ValueError):
        weighted_loss(o, o[:2], torch.ones(3))


# -- network ---------------------------------------------------------------------

def test_zero_head_gives_zero_offset():
    net = OffsetNet(n_anchors=4, patch_size=16).double()
    net.zero_head()
    o, h = net(torch.rand(5, 16, 16, dtype=D64), torch.tensor([0.0, 1.2, 2.5, 3.9, 3.0], dtype=D64))
    assert torch.all(o == 0) and torch.all(h == 0)


def test_forward_deterministic():
    torch.manual_seed(0)
    net = OffsetNet(n_anchors=4, patch_size=16).double()
    p, t = torch.rand(3, 16, 16, dtype=D64), torch.tensor([0.5, 1.0, 3.7], dtype=D64)
    assert torch.equal(net(p, t)[0], net(p, t)[0])


def flat_params(net):
    return [p for p in net.parameters()]


def test_gradient_check():
    torch.manual_seed(1)
    net = OffsetNet(n_anchors=4, patch_size=16, k=2, widths=(4, 6), hidden=8).double()
    g = torch.Generator().manual_seed(2)
    patches = torch.rand(6, 16, 16, dtype=D64, generator=g)
    t = torch.tensor([0.0, 0.3, 1.5, 2.25, 3.5, 3.9], dtype=D64)
    target = torch.empty(6, dtype=D64).uniform_(-2, 2, generator=g)
    weight = torch.rand(6, dtype=D64, generator=g)

    def loss():
        return weighted_loss(net(patches, t)[0], target, weight)

    net.zero_grad()
    loss().backward()
    analytic = torch.cat([p.grad.flatten() for p in net.parameters()])
    numeric = []
    h = 1e-6
    with torch.no_grad():
        for p in net.parameters():
            flat = p.view(-1)
            for i in range(flat.numel()):
                old = flat[i].item()
                flat[i] = old + h
                up = loss().item()
                flat[i] = old - h
                down = loss().item()
                flat[i] = old
                numeric.append((up - down) / (2 * h))
    numeric = torch.tensor(numeric, dtype=D64)
    rel = torch.linalg.norm(analytic - numeric) / torch.linalg.norm(numeric)
    assert rel < 1e-4


# -- estimator -----------------------------------------------------------------

def test_training_is_bit_reproducible():
    scenes = [generate_scene(900 + i) for i in range(2)]
    X, y = [s.image for s in scenes], [s.anchors for s in scenes]
    a = OffsetRegressor(epochs=2, batch_size=34, seed=4).fit(X, y)
    b = OffsetRegressor(epochs=2, batch_size=34, seed=4).fit(X, y)
    assert a.batch_losses_ == b.batch_losses_
    assert a.loss_history_ == b.loss_history_


def test_get_params_roundtrip():
    m = OffsetRegressor(epochs=3, k=2)
    params = m.get_params()
    assert params["epochs"] == 3 and params["k"] == 2
    assert OffsetRegressor(**params).config_hash() == m.config_hash()


def test_invalid_config():
    with pytest.raises(ConfigurationError):
        OffsetRegressor(batch_size=0).fit([np.zeros((10, 10))], [np.zeros((68, 2))])
    with pytest.raises(ConfigurationError):
        OffsetRegressor().fit([], [])


def test_artifact_roundtrip(tmp_path, tiny_model):
    path = tmp_path / "m.bin"
    save_model(path, tiny_model)
    back = load_model(path)
    for (ka, va), (kb, vb) in zip(tiny_model.network_.state_dict().items(), back.network_.state_dict().items()):
        assert ka == kb and va.dtype == vb.dtype and torch.equal(va, vb)
    np.testing.assert_array_equal(back.quality_model_.scores_, tiny_model.quality_model_.scores_)
    assert back.config_hash() == tiny_model.config_hash() == read_header(path)["config_hash"]
    p = np.random.default_rng(0).random((5, 64, 64))
    np.testing.assert_array_equal(back.predict(p, 3.2), tiny_model.predict(p, 3.2))
    save_model(tmp_path / "again.bin", back)
    assert (tmp_path / "again.bin").read_bytes() == path.read_bytes()


def test_artifact_rejects_garbage(tmp_path):
    bad = tmp_path / "x.bin"
    bad.write_bytes(b"not a model at all, sorry")
    with pytest.raises(ValueError):
        load_model(bad)


def constant_quality(value):
    """Quality model mapping every finite score to ``value`` (0 or 1)."""
    return QualityModel().fit([1e300] if value == 0 else [-1e300])


def test_refine_zero_confidence_identity(scheme68, scene, tiny_model):
    model = copy.copy(tiny_model)
    model.quality_model_ = constant_quality(0)
    e = initialize_enriched(scene.anchors, scheme68, 5)
    out = refine(e, scene.image, model)
    np.testing.assert_array_equal(out.points, e.points)
    assert np.all(out.confidence == 0)


def test_refine_unit_confidence_moves_along_normal(scheme68, scene, tiny_model):
    model = copy.copy(tiny_model)
    model.quality_model_ = constant_quality(1)
    model.predict = lambda patches, t: np.full(len(patches), 2.0)
    e = initialize_enriched(scene.anchors, scheme68, 2)
    image = FaceImage(scene.image, face_size=1024)
    out = refine(e, image, model)
    np.testing.assert_allclose(out.points - e.points, 2.0 * e.normals, atol=1e-12)


def test_refine_wrong_scheme(scheme98, tiny_model):
    from conftest import wflw_like_anchors

    e = initialize_enriched(wflw_like_anchors(), scheme98, 2)
    with pytest.raises(ConfigurationError):
        refine(e, np.zeros((300, 300)), tiny_model)
