"""One task's private generative module.

Three networks per module: an encoder mapping concat(features, attributes)
to a diagonal Gaussian code, a decoder mapping concat(code sample,
attributes) back to feature space, and an auxiliary head reading the
reconstruction and emitting class logits next to a predicted attribute
vector. Conditioning uses attributes only, so the decoder can synthesize
classes that contributed no training data: their attribute vector is all
it needs.

The logits width covers every class of the benchmark, not just the
module's own task, so heads never resize as tasks arrive.

Checkpoint container (single file):

    bytes 0..7   magic ``CVAECK01``
    bytes 8..11  header length, little-endian uint32
    header       JSON: task_id, owned_classes, feature_dim, attr_dim,
                 num_classes, z_dim, frozen
    payload      three nn checkpoints (encoder, decoder, aux), each
                 prefixed by its byte length as little-endian uint64
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from czsl import nn
from czsl.kernels import softmax_vjp
from czsl.seeding import derive_seed, rng_for

MAGIC = b"CVAECK01"


@dataclass
class CvaeModule:
    task_id: int
    owned_classes: list
    encoder: nn.MlpParams
    decoder: nn.MlpParams
    aux: nn.MlpParams
    z_dim: int
    feature_dim: int
    attr_dim: int
    num_classes: int
    frozen: bool = False


@dataclass
class GaussianCode:
    mu: np.ndarray
    logvar: np.ndarray


@dataclass
class LossBreakdown:
    """Scalar loss components of one batch.

    vae is recon + kl. cross_entropy drives the class logits, label_mse
    pulls softmax probabilities toward the one-hot target, embed_mse pulls
    the predicted attribute vector toward the conditioning one.
    """

    recon: float
    kl: float
    vae: float
    cross_entropy: float
    label_mse: float
    embed_mse: float


def cvae_init(task_id, owned_classes, feature_dim, attr_dim, num_classes,
              z_dim=50, enc_hidden=(512,), dec_hidden=(512,), aux_hidden=(256,),
              seed=0) -> CvaeModule:
    if min(feature_dim, attr_dim, num_classes, z_dim) <= 0:
        raise ValueError("all dims must be positive")
    enc_dims = [feature_dim + attr_dim] + list(enc_hidden) + [2 * z_dim]
    dec_dims = [z_dim + attr_dim] + list(dec_hidden) + [feature_dim]
    aux_dims = [feature_dim] + list(aux_hidden) + [num_classes + attr_dim]
    acts = lambda dims: ["relu"] * (len(dims) - 2) + ["identity"]
    return CvaeModule(
        task_id=int(task_id),
        owned_classes=[int(c) for c in owned_classes],
        encoder=nn.mlp_init(enc_dims, acts(enc_dims), derive_seed(seed, task_id, 0)),
        decoder=nn.mlp_init(dec_dims, acts(dec_dims), derive_seed(seed, task_id, 1)),
        aux=nn.mlp_init(aux_dims, acts(aux_dims), derive_seed(seed, task_id, 2)),
        z_dim=int(z_dim),
        feature_dim=int(feature_dim),
        attr_dim=int(attr_dim),
        num_classes=int(num_classes),
    )


def _check(m: CvaeModule, x=None, e=None, z=None):
    if x is not None and x.shape[1] != m.feature_dim:
        raise ValueError("features have %d columns, module expects %d"
                         % (x.shape[1], m.feature_dim))
    if e is not None and e.shape[1] != m.attr_dim:
        raise ValueError("attributes have %d columns, module expects %d"
                         % (e.shape[1], m.attr_dim))
    if z is not None and z.shape[1] != m.z_dim:
        raise ValueError("codes have %d columns, module expects %d"
                         % (z.shape[1], m.z_dim))


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def encode(m: CvaeModule, x, e) -> GaussianCode:
    x, e = _f64(x), _f64(e)
    _check(m, x=x, e=e)
    if x.shape[0] != e.shape[0]:
        raise ValueError("batch mismatch: %d features vs %d attribute rows"
                         % (x.shape[0], e.shape[0]))
    out = nn.mlp_forward(m.encoder, np.concatenate([x, e], axis=1))
    return GaussianCode(mu=out[:, :m.z_dim], logvar=out[:, m.z_dim:])


def decode(m: CvaeModule, z, e):
    z, e = _f64(z), _f64(e)
    _check(m, z=z, e=e)
    return nn.mlp_forward(m.decoder, np.concatenate([z, e], axis=1))


def aux_forward(m: CvaeModule, x_hat):
    x_hat = _f64(x_hat)
    _check(m, x=x_hat)
    out = nn.mlp_forward(m.aux, x_hat)
    return out[:, :m.num_classes], out[:, m.num_classes:]


def _forward_graph(m: CvaeModule, x, y, e, noise):
    x, e, noise = _f64(x), _f64(e), _f64(noise)
    _check(m, x=x, e=e)
    if noise.shape != (x.shape[0], m.z_dim):
        raise ValueError("noise must be %r, got %r"
                         % ((x.shape[0], m.z_dim), noise.shape))
    y = np.ascontiguousarray(y, dtype=np.int64)

    enc_out, enc_cache = nn.forward_cached(m.encoder, np.concatenate([x, e], axis=1))
    mu, logvar = enc_out[:, :m.z_dim], enc_out[:, m.z_dim:]
    zs = nn.reparameterize(mu, logvar, noise)
    dec_out, dec_cache = nn.forward_cached(m.decoder, np.concatenate([zs, e], axis=1))
    aux_out, aux_cache = nn.forward_cached(m.aux, dec_out)
    logits, e_hat = aux_out[:, :m.num_classes], aux_out[:, m.num_classes:]

    recon, d_xhat_recon = nn.mse(dec_out, x)
    kl, d_mu_kl, d_logvar_kl = nn.gaussian_kl(mu, logvar)
    ce, d_logits_ce = nn.softmax_cross_entropy(logits, y)
    probs = nn.softmax(logits)
    onehot = np.zeros_like(logits)
    onehot[np.arange(y.shape[0]), y] = 1.0
    label_mse, d_probs = nn.mse(probs, onehot)
    d_logits_label = softmax_vjp(probs, d_probs)
    embed_mse, d_ehat = nn.mse(e_hat, e)

    losses = LossBreakdown(recon=recon, kl=kl, vae=recon + kl,
                           cross_entropy=ce, label_mse=label_mse,
                           embed_mse=embed_mse)
    internals = dict(
        mu=mu, logvar=logvar, noise=noise,
        enc_cache=enc_cache, dec_cache=dec_cache, aux_cache=aux_cache,
        d_xhat_recon=d_xhat_recon, d_mu_kl=d_mu_kl, d_logvar_kl=d_logvar_kl,
        d_logits_ce=d_logits_ce, d_logits_label=d_logits_label, d_ehat=d_ehat,
    )
    return losses, internals


def cvae_losses(m: CvaeModule, x, y, e, noise) -> LossBreakdown:
    """All loss components of one batch; noise is the B x z_dim sample."""
    losses, _ = _forward_graph(m, x, y, e, noise)
    return losses


def cvae_backward(m: CvaeModule, x, y, e, noise, weights):
    """Losses plus gradients of the weighted total for all three networks.

    weights = (w_ce, w_vae, w_label, w_embed) scales the components as
    total = w_ce*cross_entropy + w_vae*(recon + kl)
          + w_label*label_mse + w_embed*embed_mse.
    Returns (losses, total, enc_grads, dec_grads, aux_grads).
    """
    w_ce, w_vae, w_label, w_embed = (float(w) for w in weights)
    losses, g = _forward_graph(m, x, y, e, noise)
    total = (w_ce * losses.cross_entropy + w_vae * losses.vae
             + w_label * losses.label_mse + w_embed * losses.embed_mse)

    d_logits = w_ce * g["d_logits_ce"] + w_label * g["d_logits_label"]
    d_aux_out = np.concatenate([d_logits, w_embed * g["d_ehat"]], axis=1)
    d_xhat_aux, aux_grads = nn.mlp_backward(m.aux, g["aux_cache"], d_aux_out)

    d_xhat = w_vae * g["d_xhat_recon"] + d_xhat_aux
    d_ze, dec_grads = nn.mlp_backward(m.decoder, g["dec_cache"], d_xhat)
    d_z = d_ze[:, :m.z_dim]

    # z = mu + exp(logvar/2) * noise
    d_mu = d_z + w_vae * g["d_mu_kl"]
    d_logvar = (d_z * g["noise"] * 0.5 * np.exp(0.5 * g["logvar"])
                + w_vae * g["d_logvar_kl"])
    d_enc_out = np.concatenate([d_mu, d_logvar], axis=1)
    _, enc_grads = nn.mlp_backward(m.encoder, g["enc_cache"], d_enc_out)

    return losses, total, enc_grads, dec_grads, aux_grads


def generate(m: CvaeModule, class_id, class_embedding, n, seed):
    """Decode n standard-normal codes under one class embedding.

    Returns (features[n x d], labels[n] all class_id); deterministic in seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1, got %d" % n)
    emb = _f64(np.asarray(class_embedding).reshape(1, -1))
    if emb.shape[1] != m.attr_dim:
        raise ValueError("embedding has %d entries, module expects %d"
                         % (emb.shape[1], m.attr_dim))
    z = rng_for(seed).standard_normal((int(n), m.z_dim))
    feats = decode(m, z, np.repeat(emb, int(n), axis=0))
    return feats, np.full(int(n), int(class_id), dtype=np.int64)


def freeze(m: CvaeModule) -> CvaeModule:
    """Make the module immutable; its checkpoint hash is stable from here on."""
    m.frozen = True
    for params in (m.encoder, m.decoder, m.aux):
        for arr in list(params.weights) + list(params.biases):
            arr.flags.writeable = False
    return m


def module_to_bytes(m: CvaeModule) -> bytes:
    header = json.dumps(
        {"task_id": m.task_id, "owned_classes": list(m.owned_classes),
         "feature_dim": m.feature_dim, "attr_dim": m.attr_dim,
         "num_classes": m.num_classes, "z_dim": m.z_dim, "frozen": bool(m.frozen)},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    parts = [MAGIC, np.uint32(len(header)).tobytes(), header]
    for params in (m.encoder, m.decoder, m.aux):
        blob = nn.params_to_bytes(params)
        parts.append(np.uint64(len(blob)).tobytes())
        parts.append(blob)
    return b"".join(parts)


def module_from_bytes(buf: bytes) -> CvaeModule:
    if buf[:8] != MAGIC:
        raise ValueError("bad magic at byte 0: %r" % buf[:8])
    hlen = int(np.frombuffer(buf[8:12], dtype="<u4")[0])
    header = json.loads(buf[12:12 + hlen].decode("utf-8"))
    off = 12 + hlen
    nets = []
    for _ in range(3):
        if len(buf) < off + 8:
            raise ValueError("truncated container at byte %d" % off)
        blen = int(np.frombuffer(buf[off:off + 8], dtype="<u8")[0])
        off += 8
        if len(buf) < off + blen:
            raise ValueError("truncated network blob at byte %d" % off)
        params, _ = nn.params_from_bytes(buf[off:off + blen])
        nets.append(params)
        off += blen
    if off != len(buf):
        raise ValueError("trailing bytes at %d" % off)
    m = CvaeModule(
        task_id=int(header["task_id"]),
        owned_classes=[int(c) for c in header["owned_classes"]],
        encoder=nets[0], decoder=nets[1], aux=nets[2],
        z_dim=int(header["z_dim"]), feature_dim=int(header["feature_dim"]),
        attr_dim=int(header["attr_dim"]), num_classes=int(header["num_classes"]),
        frozen=bool(header["frozen"]),
    )
    if m.frozen:
        freeze(m)
    return m


def save_module(path, m: CvaeModule) -> None:
    with open(path, "wb") as f:
        f.write(module_to_bytes(m))


def load_module(path) -> CvaeModule:
    with open(path, "rb") as f:
        return module_from_bytes(f.read())


def module_fingerprint(m: CvaeModule) -> str:
    return hashlib.sha256(module_to_bytes(m)).hexdigest()
