"""Training losses over label distributions, with analytic logit gradients.

Every loss maps a label vector ``y`` and raw network outputs ``kappa`` to a
scalar value plus the gradient of that value with respect to ``kappa``,
differentiated through the paired output activation where one applies:

* ``ce``      cross entropy, softmax pairing; only sees classes with label mass.
* ``bce``     binary cross entropy, softmax or sigmoid; global receptive field.
* ``mse``     squared error on the activated prediction.
* ``nlae``    negative log absolute error, -sum log(1 - |y - yhat|); behaves
              like BCE on binary labels but reaches zero on soft labels.
* ``mse_wo``  squared error applied directly to the raw outputs, no
              activation; predictions are clamped to [0, 1] only at decode time.
* ``wd``      Wasserstein distance between label and softmax prediction.

Inputs may be single vectors or ``(batch, classes)`` matrices; batches
reduce by the mean, so the returned gradient is the gradient of the mean.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, IncompatibleEncodingError
from .label_codec import LabelDistribution, OutputSpace, encode_glc, encode_uld

# Arguments of every log are clamped below at this floor: the losses are
# undefined at saturated predictions and clamping preserves the gradient
# direction there.
LOG_FLOOR = 1e-12

LOSS_NAMES = ("ce", "bce", "mse", "wd", "nlae", "mse_wo")

SUM_TO_ONE_LOSSES = frozenset({"ce", "wd"})
SUM_TO_ONE_ENCODINGS = frozenset({"one_hot", "uld", "sld"})


class ActivationKind(str, enum.Enum):
    """Output-layer activation pairing."""

    SOFTMAX = "softmax"
    SIGMOID = "sigmoid"
    CLAMP = "clamp"


@dataclass
class LossResult:
    """Scalar loss value and its gradient with respect to the raw logits."""

    value: float
    grad_wrt_logits: np.ndarray


def _as_array(x) -> np.ndarray:
    if isinstance(x, LabelDistribution):
        return np.asarray(x.values, dtype=float)
    return np.asarray(x, dtype=float)


def _prep(y, kappa) -> tuple[np.ndarray, np.ndarray, int]:
    """Broadcast label/logit pair; returns (y, kappa, batch) with batch=0 for vectors."""
    ya, ka = _as_array(y), _as_array(kappa)
    if ka.ndim == 1:
        batch = 0
    elif ka.ndim == 2:
        batch = ka.shape[0]
    else:
        raise DomainError(f"logits must be 1-D or 2-D, got shape {ka.shape}")
    ya = np.broadcast_to(ya, ka.shape)
    return ya, ka, batch


def _reduce(per_sample: np.ndarray, grad: np.ndarray, batch: int) -> LossResult:
    if batch:
        return LossResult(value=float(per_sample.mean()), grad_wrt_logits=grad / batch)
    return LossResult(value=float(per_sample), grad_wrt_logits=grad)


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------


def softmax(kappa) -> np.ndarray:
    k = _as_array(kappa)
    shifted = k - k.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(kappa) -> np.ndarray:
    k = _as_array(kappa)
    out = np.empty_like(k)
    pos = k >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-k[pos]))
    ez = np.exp(k[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def clamp01(kappa) -> np.ndarray:
    return np.clip(_as_array(kappa), 0.0, 1.0)


def activate(kind: ActivationKind, kappa) -> np.ndarray:
    """Apply an output activation to raw logits."""
    if kind == ActivationKind.SOFTMAX:
        return softmax(kappa)
    if kind == ActivationKind.SIGMOID:
        return sigmoid(kappa)
    if kind == ActivationKind.CLAMP:
        return clamp01(kappa)
    raise ConfigurationError(f"unknown activation {kind!r}")


def _chain_to_logits(kind: ActivationKind, kappa, yhat, dL_dyhat) -> np.ndarray:
    """Pull a gradient on the activated prediction back to the raw logits."""
    if kind == ActivationKind.SOFTMAX:
        inner = (dL_dyhat * yhat).sum(axis=-1, keepdims=True)
        return yhat * (dL_dyhat - inner)
    if kind == ActivationKind.SIGMOID:
        return dL_dyhat * yhat * (1.0 - yhat)
    if kind == ActivationKind.CLAMP:
        return dL_dyhat * ((kappa > 0) & (kappa < 1))
    raise ConfigurationError(f"unknown activation {kind!r}")


def _require_sum_to_one(y: np.ndarray, loss_name: str) -> None:
    sums = y.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise IncompatibleEncodingError(
            f"{loss_name} requires labels that sum to 1; got total mass "
            f"{np.atleast_1d(sums)[0]:.6f} (Gaussian label coding is not applicable)"
        )


def _require_kind(kind: ActivationKind, allowed, loss_name: str) -> None:
    if kind not in allowed:
        raise ConfigurationError(
            f"{loss_name} pairs with {[a.value for a in allowed]}, got {kind.value!r}"
        )


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def loss_ce(y, kappa) -> LossResult:
    """Cross entropy with softmax: -sum y_i log yhat_i.

    The gradient with respect to the logits reduces to ``yhat - y``.  On a
    soft label the minimum over predictions is the label entropy, which is
    strictly positive.
    """
    ya, ka, batch = _prep(y, kappa)
    _require_sum_to_one(ya, "ce")
    yhat = softmax(ka)
    per_sample = -(ya * np.log(np.maximum(yhat, LOG_FLOOR))).sum(axis=-1)
    return _reduce(per_sample, yhat - ya, batch)


def loss_bce(y, kappa, kind: ActivationKind = ActivationKind.SOFTMAX) -> LossResult:
    """Binary cross entropy, summed over all classes.

    Unlike ``ce`` the second term penalizes mass on every incorrect class,
    so sidelobes and spurious peaks in the prediction raise the loss even
    when the true-class probability is unchanged.
    """
    _require_kind(kind, (ActivationKind.SOFTMAX, ActivationKind.SIGMOID), "bce")
    ya, ka, batch = _prep(y, kappa)
    yhat = activate(kind, ka)
    p = np.maximum(yhat, LOG_FLOOR)
    q = np.maximum(1.0 - yhat, LOG_FLOOR)
    per_sample = -(ya * np.log(p) + (1.0 - ya) * np.log(q)).sum(axis=-1)
    dL_dyhat = -ya / p + (1.0 - ya) / q
    return _reduce(per_sample, _chain_to_logits(kind, ka, yhat, dL_dyhat), batch)


def loss_mse(y, kappa, kind: ActivationKind = ActivationKind.SOFTMAX) -> LossResult:
    """Squared error on the activated prediction: sum (y_i - yhat_i)^2."""
    ya, ka, batch = _prep(y, kappa)
    yhat = activate(kind, ka)
    per_sample = ((ya - yhat) ** 2).sum(axis=-1)
    dL_dyhat = 2.0 * (yhat - ya)
    return _reduce(per_sample, _chain_to_logits(kind, ka, yhat, dL_dyhat), batch)


def loss_nlae(y, kappa, kind: ActivationKind = ActivationKind.SOFTMAX) -> LossResult:
    """Negative log absolute error: -sum log(1 - |y_i - yhat_i|).

    Reaches zero exactly when the prediction matches the label, including
    soft labels, while keeping the steep penalty of a log on large
    per-class deviations.  On binary labels it coincides with ``bce``.
    """
    _require_kind(kind, (ActivationKind.SOFTMAX, ActivationKind.SIGMOID), "nlae")
    ya, ka, batch = _prep(y, kappa)
    yhat = activate(kind, ka)
    diff = yhat - ya
    # Branchwise 1 - |diff| so that binary labels reproduce the BCE terms
    # bit for bit (1 - yhat + 0 and 1 - 1 + yhat evaluate exactly).
    arg = np.where(diff >= 0, 1.0 - yhat + ya, 1.0 - ya + yhat)
    arg = np.maximum(arg, LOG_FLOOR)
    per_sample = -np.log(arg).sum(axis=-1)
    dL_dyhat = np.sign(diff) / arg
    return _reduce(per_sample, _chain_to_logits(kind, ka, yhat, dL_dyhat), batch)


def loss_mse_wo(y, kappa) -> LossResult:
    """Squared error directly on the raw outputs: sum (y_i - kappa_i)^2.

    No activation is involved, so the gradient is linear everywhere and
    never vanishes at saturated predictions.  Clamping to [0, 1] happens
    only when the raw outputs are later decoded as a distribution.
    """
    ya, ka, batch = _prep(y, kappa)
    per_sample = ((ya - ka) ** 2).sum(axis=-1)
    return _reduce(per_sample, 2.0 * (ka - ya), batch)


def loss_wd(y, kappa) -> LossResult:
    """Wasserstein distance between the label and the softmax prediction.

    One-dimensional closed form: the sum of absolute differences of the two
    cumulative distributions, in class units.  At cumulative-difference zero
    crossings the subgradient sign(0) = 0 is used.
    """
    ya, ka, batch = _prep(y, kappa)
    _require_sum_to_one(ya, "wd")
    yhat = softmax(ka)
    cdf_diff = np.cumsum(yhat - ya, axis=-1)
    per_sample = np.abs(cdf_diff).sum(axis=-1)
    signs = np.sign(cdf_diff)
    # dL/dyhat_j accumulates the signs of every cumulative term from j on.
    dL_dyhat = np.flip(np.cumsum(np.flip(signs, axis=-1), axis=-1), axis=-1)
    return _reduce(per_sample, _chain_to_logits(ActivationKind.SOFTMAX, ka, yhat, dL_dyhat), batch)


def loss_combined(
    space: OutputSpace,
    alpha: float,
    p,
    kappa,
    base: str,
    *,
    glc_sigma: float = 8.0,
    kind: ActivationKind = ActivationKind.SIGMOID,
) -> LossResult:
    """Weighted sum of a base loss against ULD and GLC targets for the same angle.

    Computes ``alpha * base(uld(p), kappa) + (1 - alpha) * base(glc(p), kappa)``;
    values and gradients combine linearly.  Zero-weight branches are skipped,
    so ``alpha = 1`` is exactly the pure ULD loss and ``alpha = 0`` the pure
    GLC loss.

    Raises:
        IncompatibleEncodingError: when the base loss requires unit-mass
            labels and the GLC branch has nonzero weight.
    """
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    if base in SUM_TO_ONE_LOSSES and alpha < 1.0:
        raise IncompatibleEncodingError(
            f"{base} cannot take the Gaussian label coding branch (labels do not sum to 1)"
        )
    ka = _as_array(kappa)
    positions = np.atleast_1d(np.asarray(p, dtype=float))
    expected = ka.shape[0] if ka.ndim == 2 else 1
    if len(positions) != expected:
        raise DomainError(
            f"{len(positions)} target angles for {expected} logit rows"
        )

    def branch(encoder):
        rows = np.stack([encoder(space, float(pi)).values for pi in positions])
        target = rows if ka.ndim == 2 else rows[0]
        return evaluate_loss(base, target, ka, kind)

    value = 0.0
    grad = np.zeros_like(ka)
    if alpha > 0.0:
        res = branch(encode_uld)
        value += alpha * res.value
        grad += alpha * res.grad_wrt_logits
    if alpha < 1.0:
        res = branch(lambda s, pi: encode_glc(s, pi, glc_sigma))
        value += (1.0 - alpha) * res.value
        grad += (1.0 - alpha) * res.grad_wrt_logits
    return LossResult(value=value, grad_wrt_logits=grad)


def evaluate_loss(name: str, y, kappa, kind: ActivationKind = ActivationKind.SOFTMAX) -> LossResult:
    """Dispatch a loss by its selector name ("ce", "bce", "mse", "wd", "nlae", "mse_wo")."""
    if name == "ce":
        return loss_ce(y, kappa)
    if name == "bce":
        return loss_bce(y, kappa, kind)
    if name == "mse":
        return loss_mse(y, kappa, kind)
    if name == "wd":
        return loss_wd(y, kappa)
    if name == "nlae":
        return loss_nlae(y, kappa, kind)
    if name == "mse_wo":
        return loss_mse_wo(y, kappa)
    raise ConfigurationError(f"unknown loss {name!r}; expected one of {LOSS_NAMES}")


def prediction_from_logits(loss_name: str, kind: ActivationKind, kappa) -> np.ndarray:
    """Raw logits -> distribution used for decoding and accuracy.

    ``mse_wo`` trains on raw outputs, so its decode path clamps them to
    [0, 1]; every other loss decodes its paired activation output.
    """
    if loss_name == "mse_wo":
        return clamp01(kappa)
    if loss_name in SUM_TO_ONE_LOSSES:
        return softmax(kappa)
    return activate(kind, kappa)


def resolve_activation(loss_name: str, encoding: str, requested: ActivationKind | None = None) -> ActivationKind:
    """Pick (or check) the output activation for a loss/encoding pair.

    ``ce`` and ``wd`` always pair with softmax and ``mse_wo`` with the
    decode-time clamp; the remaining losses default to softmax for
    unit-mass encodings and sigmoid for GLC.
    """
    if loss_name in SUM_TO_ONE_LOSSES:
        if requested not in (None, ActivationKind.SOFTMAX):
            raise ConfigurationError(f"{loss_name} pairs with softmax, got {requested.value!r}")
        return ActivationKind.SOFTMAX
    if loss_name == "mse_wo":
        if requested not in (None, ActivationKind.CLAMP):
            raise ConfigurationError(f"mse_wo uses no training activation (clamp at decode), got {requested.value!r}")
        return ActivationKind.CLAMP
    if requested is None:
        sums_to_one = encoding in SUM_TO_ONE_ENCODINGS or encoding == "combined"
        return ActivationKind.SOFTMAX if sums_to_one else ActivationKind.SIGMOID
    if requested == ActivationKind.CLAMP:
        raise ConfigurationError(f"{loss_name} cannot train through the clamp activation")
    return requested


def align_ascending(targets) -> list[float]:
    """Sort multi-source target angles ascending (the head-alignment rule)."""
    targets = list(targets)
    if len(targets) < 1:
        raise DomainError("at least one target is required")
    return sorted(float(t) for t in targets)


def sidelobe_archetypes(space: OutputSpace) -> list[np.ndarray]:
    """Four predicted-distribution archetypes with equal true-class probability.

    All four place probability 0.4 on class 0 (the true class) and differ
    only in where the remaining 0.6 sits, ordered from benign to
    pathological:

    0. diffuse floor over every other class;
    1. sidelobes decaying next to the peak (0.3, 0.2, 0.1);
    2. one sidelobe (0.2) plus a distant spurious peak tied with the true
       peak (0.4);
    3. one sidelobe (0.1) plus a distant spurious peak that dominates the
       true peak (0.5).

    Because the true-class probability is identical, a loss that only sees
    label-mass classes (``ce``) scores them equally, while a global
    receptive field (``bce``) scores them in strictly increasing order.
    """
    n = space.num_classes
    if n < 8:
        raise DomainError("archetypes need at least 8 classes")
    far = space.num_cells // 2

    diffuse = np.full(n, 0.6 / space.num_cells)
    diffuse[0] = 0.4

    sidelobes = np.zeros(n)
    sidelobes[:4] = (0.4, 0.3, 0.2, 0.1)

    tied_peak = np.zeros(n)
    tied_peak[0], tied_peak[1], tied_peak[far] = 0.4, 0.2, 0.4

    dominant_peak = np.zeros(n)
    dominant_peak[0], dominant_peak[1], dominant_peak[far] = 0.4, 0.1, 0.5

    return [diffuse, sidelobes, tied_peak, dominant_peak]
