import numpy as np

from mricnn.config import MAXPOOL, RELU, BATCHNORM, ModelConfig, conv, sepconv
from mricnn.network import Network

from oracles import numerical_gradient, relative_error


def tiny_config(dtype="float64", seed=0):
    """Two blocks on an 8x8 input with two classes."""
    return ModelConfig(
        input_shape=(1, 8, 8),
        num_classes=2,
        blocks=[
            [conv(2, 3), RELU, MAXPOOL],
            [sepconv(3, 3), RELU, BATCHNORM, MAXPOOL],
        ],
        head=[{"units": 5, "batchnorm": True}, {"units": 2}],
        strict=False,
        dtype=dtype,
        seed=seed,
    )


def network_gradient_errors(cfg, batch=4, seed=0):
    """Relative errors of the analytic gradient of the full network vs central differences."""
    from mricnn.optim import softmax_cross_entropy
    from mricnn.training import build_model

    state = build_model(cfg)
    g = np.random.default_rng(seed)
    x = g.normal(size=(batch, *cfg.input_shape))
    y = np.eye(cfg.num_classes)[g.integers(0, cfg.num_classes, size=batch)]
    net = state.network
    for k in state.params:  # move off the init so biases/gammas are not trivially 0/1
        state.params[k] += g.normal(scale=0.1, size=state.params[k].shape)

    def loss():
        logits, _ = net.forward(state.params, dict(state.buffers), x, "train", update_running=False)
        return softmax_cross_entropy(logits, y)[0]

    logits, caches = net.forward(state.params, dict(state.buffers), x, "train", update_running=False)
    _, _, dlogits = softmax_cross_entropy(logits, y)
    grads = net.backward(state.params, dlogits, caches)
    errors = {name: relative_error(grads[name], numerical_gradient(loss, p)) for name, p in state.params.items()}
    errors["input"] = relative_error(grads["input"], numerical_gradient(loss, x))
    return errors


def allocated_counts(cfg):
    net = Network(cfg)
    params, buffers = net.init_params(cfg.seed)
    trainable = sum(p.size for p in params.values())
    non_trainable = sum(b.size for b in buffers.values())
    return trainable + non_trainable, trainable, non_trainable


def random_config(gen):
    """A random valid strict config (five blocks, four dense layers) for small inputs."""
    blocks = []
    c = int(gen.integers(1, 6))
    for b in range(5):
        block = []
        for _ in range(int(gen.integers(0, 3))):
            kind = "conv2d" if gen.random() < 0.5 else "separable_conv2d"
            k = [int(gen.integers(1, 4)), int(gen.integers(1, 4))]
            block.append({"type": kind, "filters": int(gen.integers(1, 9)), "kernel": k})
            if gen.random() < 0.5:
                block.append(RELU)
        if gen.random() < 0.6:
            block.append(BATCHNORM)
        block.insert(int(gen.integers(0, len(block) + 1)), MAXPOOL)
        blocks.append(block)
    head = [{"units": int(gen.integers(1, 20)), "batchnorm": bool(gen.random() < 0.5)} for _ in range(3)]
    head.append({"units": 4})
    return ModelConfig(input_shape=(c, 40, 48), blocks=blocks, head=head, seed=int(gen.integers(0, 1000)))
