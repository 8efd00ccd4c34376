"""Linear readout over node embeddings, with post-hoc score calibration.

The readout is a logistic model fit by penalized maximum likelihood; it is
the only trained part of the embedding pipeline. Its raw sigmoid outputs
are then remapped on a held-out split by a two-parameter logistic
calibration, so that downstream quantifiers can treat scores as posterior
probabilities.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit


class ReadoutError(ValueError):
    """Raised for invalid training inputs or malformed model files."""


class CalibrationWarning(UserWarning):
    """The fitted calibration map decreases in the raw score.

    This happens when raw scores are anti-correlated with the positive
    class on the calibration split, which usually signals a degenerate
    readout or a label problem.
    """


@dataclass(frozen=True)
class LinearReadout:
    weights: np.ndarray
    bias: float
    regularization: float


@dataclass(frozen=True)
class CalibrationParams:
    a: float
    b: float


@dataclass(frozen=True)
class CalibratedClassifier:
    readout: LinearReadout
    calibration: CalibrationParams

    def raw_scores(self, embeddings):
        return predict_raw(self.readout, embeddings)

    def posteriors(self, embeddings):
        return calibrate(self.calibration, self.raw_scores(embeddings))


def _check_training_pair(embeddings, labels):
    x = np.ascontiguousarray(embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ReadoutError("embeddings must be a 2-D matrix")
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise ReadoutError("labels must match the embedding rows")
    if not np.all(np.isin(y, (0, 1))):
        raise ReadoutError("labels must be 0 or 1")
    y = y.astype(np.float64)
    if y.min() == y.max():
        raise ReadoutError(
            "training labels contain a single class; collect labeled nodes "
            "of both classes before fitting"
        )
    return x, y


def train_readout(embeddings, labels, regularization=1e-2, max_steps=500):
    """Fit logistic weights by penalized maximum likelihood.

    Minimizes mean binary cross-entropy plus an L2 penalty on the weights
    (never on the bias). The objective is smooth and convex, so the
    quasi-Newton solve is deterministic for fixed inputs.
    """
    x, y = _check_training_pair(embeddings, labels)
    lam = float(regularization)
    if lam < 0:
        raise ReadoutError("regularization must be non-negative")
    d = x.shape[1]
    m = x.shape[0]

    def objective(theta):
        w = theta[:d]
        b = theta[d]
        z = x @ w + b
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * lam * float(w @ w)
        residual = (expit(z) - y) / m
        grad = np.empty(d + 1)
        grad[:d] = x.T @ residual + lam * w
        grad[d] = residual.sum()
        return loss, grad

    result = minimize(
        objective,
        np.zeros(d + 1),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": int(max_steps), "gtol": 1e-9, "ftol": 1e-15},
    )
    weights = np.ascontiguousarray(result.x[:d])
    weights.setflags(write=False)
    return LinearReadout(weights=weights, bias=float(result.x[d]),
                         regularization=lam)


def predict_raw(readout, embeddings):
    """Sigmoid scores for one embedding vector or a matrix of them."""
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != readout.weights.shape[0]:
            raise ReadoutError("embedding width does not match the readout")
        return float(expit(x @ readout.weights + readout.bias))
    if x.ndim != 2 or x.shape[1] != readout.weights.shape[0]:
        raise ReadoutError("embedding width does not match the readout")
    return expit(x @ readout.weights + readout.bias)


def fit_calibration(scores, labels, max_steps=200):
    """Fit the two-parameter logistic recalibration map by maximum likelihood.

    The map is ``p(s) = 1 / (1 + exp(a * s + b))``; note that the natural
    orientation (larger score, larger probability) corresponds to negative
    `a`. Constant score vectors carry no ranking information, so they map
    to the base rate of the calibration labels. Separable score sets have
    no finite likelihood maximizer; the solver then stops at a very steep
    map, which is the intended behavior.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1:
        raise ReadoutError("scores must be a 1-D array")
    if s.size and (s.min() < 0.0 or s.max() > 1.0):
        raise ReadoutError("raw scores must lie in [0, 1]")
    _, y = _check_training_pair(s.reshape(-1, 1), labels)
    base_rate = float(np.mean(y))
    if float(np.ptp(s)) < 1e-12:
        return CalibrationParams(a=0.0, b=float(np.log((1.0 - base_rate) / base_rate)))

    m = s.shape[0]

    def objective(theta):
        a, b = theta
        z = -(a * s + b)
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        dz = (expit(z) - y) / m
        return loss, np.array([-(dz @ s), -dz.sum()])

    result = minimize(
        objective,
        np.zeros(2),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": int(max_steps), "gtol": 1e-10, "ftol": 1e-15},
    )
    a, b = (float(v) for v in result.x)
    if a > 0:
        warnings.warn(
            "calibration slope is positive: calibrated probabilities decrease "
            "as the raw score increases",
            CalibrationWarning,
            stacklevel=2,
        )
    return CalibrationParams(a=a, b=b)


def calibrate(params, scores):
    """Apply the calibration map to a scalar or array of raw scores."""
    s = np.asarray(scores, dtype=np.float64)
    if s.size and (s.min() < 0.0 or s.max() > 1.0):
        raise ReadoutError("raw scores must lie in [0, 1]")
    out = expit(-(params.a * s + params.b))
    return float(out) if np.isscalar(scores) or s.ndim == 0 else out


def save_classifier(classifier, path):
    """Write a calibrated classifier as plain-text key-value lines."""
    readout = classifier.readout
    lines = [
        "dim %d" % readout.weights.shape[0],
        "weights " + " ".join("%.17g" % v for v in readout.weights),
        "bias %.17g" % readout.bias,
        "a %.17g" % classifier.calibration.a,
        "b %.17g" % classifier.calibration.b,
        "regularization %.17g" % readout.regularization,
    ]
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def load_classifier(path):
    """Read a classifier written by `save_classifier`.

    The `regularization` line is optional and defaults to zero, so files
    holding only the five core keys load fine.
    """
    entries = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            key, _, rest = line.partition(" ")
            if not rest:
                raise ReadoutError("%s:%d: expected 'key value...'" % (path, lineno))
            entries[key] = rest
    missing = [k for k in ("dim", "weights", "bias", "a", "b") if k not in entries]
    if missing:
        raise ReadoutError("%s: missing keys: %s" % (path, ", ".join(missing)))
    try:
        dim = int(entries["dim"])
        weights = np.array([float(v) for v in entries["weights"].split()])
        bias = float(entries["bias"])
        a = float(entries["a"])
        b = float(entries["b"])
        lam = float(entries.get("regularization", "0"))
    except ValueError as exc:
        raise ReadoutError("%s: malformed numeric field (%s)" % (path, exc)) from exc
    if weights.shape[0] != dim:
        raise ReadoutError(
            "%s: dim says %d weights but %d are present" % (path, dim, weights.shape[0])
        )
    weights.setflags(write=False)
    return CalibratedClassifier(
        readout=LinearReadout(weights=weights, bias=bias, regularization=lam),
        calibration=CalibrationParams(a=a, b=b),
    )
