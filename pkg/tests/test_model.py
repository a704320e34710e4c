import numpy as np
import pytest
import torch
import torch.nn as nn

from ensd.errors import DataError, InvalidArity, ShapeError, VocabError
from ensd.model import (
    MAX_SYMBOLS_PER_FRAME,
    TransducerModel,
    WeighterModel,
    arch_dict,
    beam_decode,
    forward_backward,
    greedy_decode,
    load_checkpoint,
    nbest_decode,
    normalized_score,
    read_checkpoint,
    save_checkpoint,
    weighter_forward,
)
from ensd.rnnt import rnnt_loss
from ensd.utils import TRANSDUCER, WEIGHTER


def _features(num_frames, dim=3, seed=0):
    return torch.tensor(np.random.default_rng(seed).standard_normal((num_frames, dim)))


@pytest.fixture
def model(tokenizer, transducer_args):
    torch.manual_seed(0)
    return TransducerModel(transducer_args, tokenizer, feature_dim=3)


@pytest.fixture
def weighter(tokenizer, weighter_args):
    torch.manual_seed(0)
    return WeighterModel(weighter_args, tokenizer, feature_dim=3, num_experts=3)


def _blank_biased(model, bias):
    with torch.no_grad():
        model.output.weight.zero_()
        model.output.bias.zero_()
        model.output.bias[model.blank_id] = bias
    return model


def test_tanh_derivative_at_zero():
    x = torch.zeros(1, requires_grad=True)
    value, (grad,) = forward_backward(lambda: torch.tanh(x).sum(), [x])
    assert value.item() == 0.0
    assert grad.item() == pytest.approx(1.0)


def test_softmax_jacobian_rows_sum_to_zero():
    x = torch.full((4,), 0.5, requires_grad=True)
    for i in range(4):
        _, (grad,) = forward_backward(lambda: torch.softmax(x, dim=0)[i], [x])
        assert grad.sum().item() == pytest.approx(0.0, abs=1e-12)


def test_forward_backward_shape_errors():
    a = torch.zeros(2, 3, requires_grad=True)
    b = torch.zeros(2, 3)

    def mismatched():
        return (a @ b).sum()

    with pytest.raises(ShapeError, match="mismatched"):
        forward_backward(mismatched, [a])
    with pytest.raises(ShapeError):
        forward_backward(lambda: a * 2, [a])


def test_unused_parameters_get_zero_gradients():
    a = torch.ones(2, requires_grad=True)
    b = torch.ones(3, requires_grad=True)
    _, grads = forward_backward(lambda: a.sum(), [a, b])
    torch.testing.assert_close(grads[1], torch.zeros(3))


def test_lattice_shape(transducer_args):
    from ensd.tokenizer import Tokenizer

    model = TransducerModel(transducer_args, Tokenizer(["a", "b", "c", "d", "e"]), feature_dim=3)
    assert model(_features(7), [1, 2, 3]).shape == (7, 4, 6)


def test_zero_model_is_uniform(model):
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    probs = torch.softmax(model(_features(3), [1, 2]), dim=-1)
    torch.testing.assert_close(probs, torch.full_like(probs, 1 / model.num_classes))


@pytest.mark.parametrize("probs,expected", [
    ((1 / 3, 1 / 3, 1 / 3), np.log(27 / 2)),
    ((1 / 2, 1 / 4, 1 / 4), np.log(8.0)),
])
def test_two_frame_one_token_loss(transducer_args, probs, expected):
    from ensd.tokenizer import Tokenizer

    model = TransducerModel(transducer_args, Tokenizer(["a", "b"]), feature_dim=3)
    with torch.no_grad():
        model.output.weight.zero_()
        model.output.bias.copy_(torch.log(torch.tensor(probs)))
    lattice = model(_features(2, seed=5), [2])
    assert lattice.shape == (2, 2, 3)
    torch.testing.assert_close(torch.softmax(lattice, dim=-1), torch.tensor(probs).expand(2, 2, 3))
    # emit then two blanks, or blank, emit, blank: 2 * p(token) * p(blank)^2
    assert rnnt_loss(lattice, [2]).item() == pytest.approx(expected, abs=1e-12)


def test_transducer_errors(model):
    with pytest.raises(VocabError):
        model(_features(3), [0])
    with pytest.raises(VocabError):
        model(_features(3), [model.num_classes])
    with pytest.raises(ShapeError):
        model(_features(3, dim=4), [1])
    with pytest.raises(DataError):
        model.encode(torch.zeros(0, 3))


def test_transducer_gradcheck(model):
    features = _features(3).requires_grad_(True)
    tokens = [1, 3]
    assert torch.autograd.gradcheck(lambda f: rnnt_loss(model(f, tokens), tokens), (features,),
                                    eps=1e-6, atol=1e-6, rtol=1e-4)


def test_transducer_deterministic(tokenizer, transducer_args):
    params = []
    for _ in range(2):
        torch.manual_seed(7)
        model = TransducerModel(transducer_args, tokenizer, feature_dim=3)
        optimizer = torch.optim.Adam(model.parameters(), lr=1e-2)
        for _ in range(3):
            optimizer.zero_grad()
            rnnt_loss(model(_features(4), [1, 2]), [1, 2]).backward()
            optimizer.step()
        params.append([p.detach().clone() for p in model.parameters()])
    for a, b in zip(*params):
        assert torch.equal(a, b)


def test_untrained_weighter_is_uniform(weighter):
    weights = weighter(_features(4), [[1, 2], [3], []], [0.1, 2.3, 2.3])
    torch.testing.assert_close(weights, torch.full((3,), 1 / 3))


def test_weighter_outputs_lie_on_the_simplex(weighter):
    nn.init.normal_(weighter.score.weight)
    rng = np.random.default_rng(0)
    for i in range(1000):
        transcripts = [rng.integers(1, 5, size=rng.integers(0, 5)).tolist() for _ in range(3)]
        weights = weighter_forward(weighter, _features(int(rng.integers(1, 6)), seed=i), transcripts,
                                   rng.uniform(0, 2.3, size=3).tolist())
        assert (weights >= 0).all()
        assert abs(weights.sum().item() - 1.0) < 1e-9


def test_weighter_gradcheck(weighter):
    nn.init.normal_(weighter.score.weight)
    features = _features(3).requires_grad_(True)
    transcripts = [[1, 2], [3], [2, 2, 4]]
    assert torch.autograd.gradcheck(lambda f: weighter(f, transcripts, [0.2, 1.0, 0.5])[0], (features,),
                                    eps=1e-6, atol=1e-6, rtol=1e-4)


def test_weighter_errors(weighter):
    with pytest.raises(InvalidArity):
        weighter(_features(3), [[1], [2]], [0.1, 0.2])
    with pytest.raises(InvalidArity):
        weighter(_features(3), [[1], [2], [3]])
    with pytest.raises(ShapeError):
        weighter(_features(3, dim=2), [[1], [2], [3]], [0.1, 0.2, 0.3])


@pytest.mark.parametrize("pooling", ["mean", "max"])
def test_weighter_pooling_without_entropy(tokenizer, weighter_args, pooling):
    weighter_args.pooling = pooling
    weighter_args.use_entropy = False
    model = WeighterModel(weighter_args, tokenizer, feature_dim=3, num_experts=2)
    weights = model(_features(3), [[1], [2, 3]])
    assert weights.shape == (2,)


def test_blank_model_decodes_nothing(model):
    _blank_biased(model, 50.0)
    assert greedy_decode(model, _features(4)) == []
    assert beam_decode(model, _features(4), beam=4)[0].tokens == ()


def test_greedy_emission_cap(model):
    with torch.no_grad():
        model.output.weight.zero_()
        model.output.bias.zero_()
        model.output.bias[2] = 50.0
    assert greedy_decode(model, _features(3)) == [2] * (3 * MAX_SYMBOLS_PER_FRAME)


def test_beam_top_agrees_with_greedy(model):
    _blank_biased(model, 3.0)
    for seed in range(5):
        features = _features(3, seed=seed)
        (best,) = nbest_decode(model, features, n=1, beam=4)
        assert list(best.tokens) == greedy_decode(model, features)


def test_nbest_contract(model):
    hyps = nbest_decode(model, _features(4), n=10, beam=16)
    assert 1 <= len(hyps) <= 10
    scores = [h.score for h in hyps]
    assert scores == sorted(scores, reverse=True)
    assert all(0 < s <= 1 for s in scores)
    assert len({h.tokens for h in hyps}) == len(hyps)


def test_normalized_score():
    assert normalized_score(np.log(0.25) * 4, num_frames=3, num_tokens=1) == pytest.approx(0.25)
    assert normalized_score(-1e6, num_frames=1, num_tokens=0) > 0


def test_checkpoint_restores_model(tmp_path, model, tokenizer, transducer_args):
    path = tmp_path / "expert1.ensd"
    save_checkpoint(path, model, TRANSDUCER, arch_dict(transducer_args, feature_dim=3), tokenizer, seed=5, step=12)
    restored, restored_tokenizer, header = load_checkpoint(path)

    assert header["seed"] == 5 and header["step"] == 12
    assert restored_tokenizer.tokens == tokenizer.tokens
    assert not restored.training
    features = _features(4)
    torch.testing.assert_close(restored(features, [1, 2]), model(features, [1, 2]))


def test_weighter_checkpoint(tmp_path, weighter, tokenizer, weighter_args):
    path = tmp_path / "weighter.ensd"
    arch = arch_dict(weighter_args, feature_dim=3, num_experts=3)
    save_checkpoint(path, weighter, WEIGHTER, arch, tokenizer, seed=1, step=0)
    restored, _, _ = load_checkpoint(path)
    assert isinstance(restored, WeighterModel)
    assert restored.num_experts == 3


def test_checkpoint_rejects_corruption(tmp_path, model, tokenizer, transducer_args):
    path = tmp_path / "expert1.ensd"
    save_checkpoint(path, model, TRANSDUCER, arch_dict(transducer_args, feature_dim=3), tokenizer, seed=5, step=1)
    data = path.read_bytes()

    (tmp_path / "trailing.ensd").write_bytes(data + b"\0" * 8)
    with pytest.raises(DataError, match="trailing"):
        read_checkpoint(tmp_path / "trailing.ensd")

    (tmp_path / "magic.ensd").write_bytes(b"XXXX1" + data[5:])
    with pytest.raises(DataError):
        read_checkpoint(tmp_path / "magic.ensd")
