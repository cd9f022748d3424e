"""
WCamNet graph, components, baselines and checkpoints
"""
import pytest
import torch

from app.errors import CheckpointMismatchError, RegistryError, ShapeError
from app.models.dataset import Normalization
from app.models.network import BackboneSpec, ModelConfig
from app.models.training import TrainConfig
from app.networks.backbones import BackboneAdapter, backbone_extract
from app.networks.layers import HDBranch, RegressionHead, SEGate, SEResidualBlock, bounded_sigmoid, fuse
from app.networks.registry import build_model, count_parameters, registered_architectures, trainable_parameters
from app.networks.wcamnet import WCamNet
from app.services.checkpoints import load_checkpoint, save_checkpoint
from app.services.trainer import build_optimizer, mse_loss


def _images(batch: int, size: int, seed: int = 0) -> torch.Tensor:
    return torch.rand(batch, 3, size, size, generator=torch.Generator().manual_seed(seed))


# ============ WCamNet ============

def test_wcamnet_prediction_shape_and_range(tiny_config):
    model = WCamNet(tiny_config).eval()
    with torch.no_grad():
        pred = model(_images(3, 56))
    assert pred.shape == (3,)
    assert torch.all(pred > 0) and torch.all(pred < 1)


def test_forward_features_shapes(tiny_config):
    model = WCamNet(tiny_config).eval()
    with torch.no_grad():
        out = model.forward_features(_images(2, 56))
    assert out["tokens"].shape == (2, 16, 4, 4)
    assert out["hd"].shape == (2, 64, 4, 4)
    assert out["fused"].shape == (2, 80, 4, 4)
    assert out["refined"].shape == (2, 80, 4, 4)
    assert torch.allclose(out["prediction"], model(_images(2, 56)))


def test_full_resolution_grid_is_43():
    hd = HDBranch(602)
    assert hd.output_size == 43
    with torch.no_grad():
        assert hd.eval()(torch.zeros(1, 3, 602, 602)).shape == (1, 64, 43, 43)


def _base_config(**update) -> ModelConfig:
    config = ModelConfig(backbone=BackboneSpec.tiny(embed_dim=768), image_size=602, scale="tiny", pretrained=False)
    return config.model_copy(update=update)


@pytest.mark.parametrize("batch", [1, pytest.param(16, marks=pytest.mark.slow)])
def test_base_dimension_shapes(batch):
    model = WCamNet(_base_config()).eval()
    with torch.no_grad():
        out = model.forward_features(_images(batch, 602))
    assert out["tokens"].shape == (batch, 768, 43, 43)
    assert out["hd"].shape == (batch, 64, 43, 43)
    assert out["fused"].shape == (batch, 832, 43, 43)
    assert out["refined"].shape == (batch, 832, 43, 43)
    assert out["prediction"].shape == (batch,)


def test_ablation_widths_at_base_dimension():
    no_hd = WCamNet(_base_config(use_hd_branch=False))
    assert no_hd.hd_branch is None
    assert no_hd.se_blocks[0].channels == 768
    assert no_hd.head.fc.in_features == 768

    no_se = WCamNet(_base_config(use_se_blocks=False))
    assert isinstance(no_se.se_blocks, torch.nn.Identity)
    assert no_se.head.fc.in_features == 832


def test_ablated_models_run_forward(tiny_config):
    for update in ({"use_hd_branch": False}, {"use_se_blocks": False}):
        model = WCamNet(tiny_config.model_copy(update=update)).eval()
        with torch.no_grad():
            out = model.forward_features(_images(2, 56))
        width = 16 if "use_hd_branch" in update else 80
        assert out["refined"].shape == (2, width, 4, 4)
        assert out["prediction"].shape == (2,)


def test_hd_branch_parameter_count():
    assert count_parameters(HDBranch(602)) == 60480


def test_hd_branch_rejects_misaligned_size():
    with pytest.raises(ShapeError):
        HDBranch(50)


def test_wrong_input_size_raises(tiny_config):
    model = WCamNet(tiny_config)
    with pytest.raises(ShapeError):
        model(_images(1, 70))


def test_image_size_must_be_multiple_of_patch():
    with pytest.raises(ValueError):
        ModelConfig(image_size=600)


def test_fuse_puts_tokens_first():
    tokens = torch.ones(2, 5, 3, 3)
    hd = torch.zeros(2, 4, 3, 3)
    fused = fuse(tokens, hd)
    assert fused.shape == (2, 9, 3, 3)
    assert torch.all(fused[:, :5] == 1) and torch.all(fused[:, 5:] == 0)
    assert fuse(tokens, None) is tokens


def test_fuse_rejects_grid_mismatch():
    with pytest.raises(ShapeError):
        fuse(torch.ones(2, 5, 3, 3), torch.ones(2, 4, 4, 4))


def test_backbone_is_frozen_and_excluded_from_optimizer(tiny_config):
    model = WCamNet(tiny_config)
    backbone_ids = {id(p) for p in model.backbone.parameters()}
    assert backbone_ids
    assert not backbone_ids & {id(p) for p in trainable_parameters(model)}

    optimizer = build_optimizer(model, TrainConfig(model=tiny_config))
    optimized = {id(p) for group in optimizer.param_groups for p in group["params"]}
    assert not backbone_ids & optimized

    def snapshot(module):
        return [p.detach().clone() for p in module.parameters()]

    parts = {
        "hd_branch": model.hd_branch,
        "se_block_1": model.se_blocks[0],
        "se_block_2": model.se_blocks[1],
        "head": model.head,
    }
    backbone_before = snapshot(model.backbone)
    parts_before = {name: snapshot(part) for name, part in parts.items()}

    model.train()
    images, labels = _images(4, 56), torch.full((4,), 0.3)
    for _ in range(10):
        optimizer.zero_grad()
        mse_loss(model(images), labels).backward()
        optimizer.step()

    assert all(p.grad is None for p in model.backbone.parameters())
    assert all(torch.equal(a, b) for a, b in zip(backbone_before, model.backbone.parameters()))
    assert not model.backbone.model.training
    for name, part in parts.items():
        moved = [not torch.equal(a, b) for a, b in zip(parts_before[name], part.parameters())]
        assert any(moved), f"{name} did not change"


def test_backbone_extract_row_major_grid():
    spec = BackboneSpec.tiny(embed_dim=8, seed=1)
    adapter = BackboneAdapter(spec, 28)
    images = _images(1, 28)
    grid = backbone_extract(images, adapter)
    raw = adapter.model.forward_features(images)["x_norm_patchtokens"][0]
    # token k sits at row k // 2, column k % 2
    assert torch.allclose(grid.tokens[0, :, 1, 0], raw[2])
    assert torch.allclose(grid.tokens[0, :, 0, 1], raw[1])
    assert grid.class_token.shape == (1, 8)


# ============ SE blocks and head ============

def test_se_block_preserves_shape():
    block = SEResidualBlock(16, reduction=8).eval()
    x = torch.randn(2, 16, 5, 5)
    assert block(x).shape == x.shape
    gates = block.gates(x)
    assert gates.shape == (2, 16, 1, 1)
    assert torch.all(gates > 0) and torch.all(gates < 1)


def test_se_bottleneck_never_below_one_channel():
    assert SEGate(4, reduction=8).squeezed_channels == 1
    assert SEGate(80, reduction=8).squeezed_channels == 10


def test_se_block_rejects_channel_mismatch():
    with pytest.raises(ShapeError):
        SEResidualBlock(16)(torch.randn(1, 8, 4, 4))


def test_head_is_pool_linear_sigmoid():
    head = RegressionHead(4)
    x = torch.randn(3, 4, 2, 2)
    expected = torch.sigmoid(head.fc(x.mean(dim=(2, 3)))).squeeze(-1)
    assert torch.allclose(head(x), expected)


def test_se_block_with_zero_residual_is_identity():
    block = SEResidualBlock(8).eval()
    with torch.no_grad():
        for conv in (block.residual[0], block.residual[3]):
            conv.weight.zero_()
            conv.bias.zero_()
    x = torch.randn(2, 8, 5, 5)
    assert torch.equal(block(x), x)


def test_se_block_with_saturated_gates_adds_full_residual():
    block = SEResidualBlock(8).eval()
    with torch.no_grad():
        last = block.se.excitation[2]
        last.weight.zero_()
        last.bias.fill_(50.0)
    x = torch.randn(2, 8, 5, 5)
    assert torch.all(block.gates(x) == 1.0)
    assert torch.allclose(block(x), x + block.residual(x))


def test_head_with_zero_weights_predicts_half():
    head = RegressionHead(6)
    with torch.no_grad():
        head.fc.weight.zero_()
        head.fc.bias.zero_()
    assert torch.all(head(torch.randn(3, 6, 4, 4)) == 0.5)


def test_head_pools_constant_map_to_its_constants():
    constants = torch.arange(1.0, 5.0)
    x = constants.view(1, 4, 1, 1).expand(2, 4, 3, 3)
    assert torch.allclose(RegressionHead.pool(x), constants.expand(2, 4))


@pytest.mark.parametrize("weight", [10.0, -10.0, 1e4, -1e4])
def test_head_stays_inside_unit_interval_for_extreme_weights(weight):
    head = RegressionHead(4)
    with torch.no_grad():
        head.fc.weight.fill_(weight)
    pred = head(torch.ones(2, 4, 3, 3))
    assert torch.all(pred > 0) and torch.all(pred < 1)


def test_bounded_sigmoid_never_reaches_the_bounds():
    for dtype in (torch.float32, torch.float64):
        out = bounded_sigmoid(torch.tensor([-1e6, -40.0, 0.0, 40.0, 1e6], dtype=dtype))
        assert torch.all(out > 0) and torch.all(out < 1)
        assert out[2] == 0.5


def test_baseline_heads_stay_inside_unit_interval(tiny_config):
    model = build_model(tiny_config.model_copy(update={"architecture": "backbone-linear-head"})).eval()
    with torch.no_grad():
        model.fc.weight.fill_(1e3)
        pred = model(_images(2, 56))
    assert torch.all(pred > 0) and torch.all(pred < 1)


def test_se_blocks_and_head_gradients_match_finite_differences():
    torch.manual_seed(0)
    blocks = torch.nn.Sequential(SEResidualBlock(16), SEResidualBlock(16), RegressionHead(16)).double().eval()
    x = torch.randn(2, 16, 8, 8, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(lambda t: blocks(t), (x,), eps=1e-6, atol=1e-5)

    # Sampled parameter coordinates against central differences
    weight = blocks[0].residual[0].weight
    loss = blocks(x).sum()
    (grad,) = torch.autograd.grad(loss, weight)
    with torch.no_grad():
        for idx in [(0, 0, 1, 1), (3, 7, 0, 2), (15, 15, 2, 0)]:
            original = weight[idx].item()
            weight[idx] = original + 1e-6
            up = blocks(x).sum().item()
            weight[idx] = original - 1e-6
            down = blocks(x).sum().item()
            weight[idx] = original
            assert (up - down) / 2e-6 == pytest.approx(grad[idx].item(), abs=1e-6)


def test_overfits_small_batch(tiny_config):
    model = WCamNet(tiny_config)
    images = _images(32, 56, seed=5)
    labels = torch.linspace(0.05, 0.95, 32)
    optimizer = build_optimizer(model, TrainConfig(model=tiny_config, base_lr=0.05, weight_decay=0.0))
    model.train()

    initial = mse_loss(model(images), labels).item()
    for _ in range(200):
        optimizer.zero_grad()
        loss = mse_loss(model(images), labels)
        loss.backward()
        optimizer.step()
    final = mse_loss(model(images), labels).item()
    assert final <= initial / 10

    model.eval()
    with torch.no_grad():
        mae = (model(images) - labels).abs().mean().item()
    assert mae < 0.05


# ============ Ablations and baselines ============

def test_ablations_change_parameter_counts(tiny_config):
    base = count_parameters(build_model(tiny_config), trainable_only=True)
    no_se = count_parameters(build_model(tiny_config.model_copy(update={"use_se_blocks": False})), trainable_only=True)
    no_hd = count_parameters(build_model(tiny_config.model_copy(update={"use_hd_branch": False})), trainable_only=True)
    assert no_se < base
    assert no_hd < base


def test_unknown_architecture_lists_valid_names():
    with pytest.raises(RegistryError) as info:
        build_model("alexnet-style")
    for name in registered_architectures():
        assert name in str(info.value)


@pytest.mark.parametrize("architecture", [
    "resnet50-style",
    "resnet152-style",
    "vgg19-style",
    "backbone-linear-head",
    "vit-full-finetune",
])
def test_tiny_baselines_predict_in_unit_interval(tiny_config, architecture):
    model = build_model(tiny_config.model_copy(update={"architecture": architecture})).eval()
    with torch.no_grad():
        pred = model(_images(2, 56))
    assert pred.shape == (2,)
    assert torch.all(pred > 0) and torch.all(pred < 1)


def test_linear_head_sees_every_token_and_class_token(tiny_config):
    model = build_model(tiny_config.model_copy(update={"architecture": "backbone-linear-head"}))
    assert model.in_features == 4 * 4 * 16 + 16
    assert count_parameters(model, trainable_only=True) == model.in_features + 1


def test_vit_finetune_trains_backbone(tiny_config):
    model = build_model(tiny_config.model_copy(update={"architecture": "vit-full-finetune"}))
    assert any(p.requires_grad for p in model.backbone.parameters())


# ============ Checkpoints ============

def test_checkpoint_round_trip(tmp_path, tiny_config):
    model = WCamNet(tiny_config).eval()
    norm = Normalization(mean=(0.4, 0.5, 0.6), std=(0.2, 0.2, 0.2))
    path = save_checkpoint(tmp_path / "m.pt", model, tiny_config, norm, {"epoch": 3})

    loaded, config, loaded_norm, metadata = load_checkpoint(path, expected_config=tiny_config)
    images = _images(2, 56)
    with torch.no_grad():
        assert torch.equal(model(images), loaded(images))
    assert config == tiny_config
    assert loaded_norm == norm
    assert metadata == {"epoch": 3}


def test_checkpoint_config_mismatch(tmp_path, tiny_config):
    path = save_checkpoint(tmp_path / "m.pt", WCamNet(tiny_config), tiny_config, Normalization())
    other = tiny_config.model_copy(update={"use_se_blocks": False})
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(path, expected_config=other)


def test_checkpoint_schema_version_checked(tmp_path, tiny_config):
    path = tmp_path / "old.pt"
    torch.save({"schema_version": 0, "state_dict": {}}, path)
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(path)
