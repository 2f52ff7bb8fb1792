"""Cross-validation splits, the logistic-regression baseline and reporting."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import log_softmax, softmax

from .errors import (
    ChanceIsCertainty,
    ConfigError,
    EmptyManifest,
    MissingClass,
    NonFiniteLoss,
    TooFewSubjects,
)

N_CLASSES = 3
CHANCE_3CLASS = 33.33


def cohens_kappa(p_cl: float, p_ch: float = CHANCE_3CLASS) -> float:
    """Chance-corrected accuracy ``(p_cl - p_ch) / (100 - p_ch)``, both in percent."""
    if not (0 <= p_cl <= 100):
        raise ConfigError(f"classifier accuracy {p_cl} outside [0, 100]")
    if not (0 <= p_ch <= 100):
        raise ConfigError(f"chance accuracy {p_ch} outside [0, 100]")
    if p_ch == 100:
        raise ChanceIsCertainty("chance accuracy of 100% leaves kappa undefined")
    return (p_cl - p_ch) / (100.0 - p_ch)


# --------------------------------------------------------------------- splits


@dataclass
class SplitPlan:
    scheme: str
    folds: list[tuple[list[int], list[int]]]
    seed: int = 0
    k: int | None = None

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "k": self.k,
            "seed": self.seed,
            "folds": [{"train": list(map(int, tr)), "test": list(map(int, te))} for tr, te in self.folds],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitPlan":
        return cls(d["scheme"], [(list(f["train"]), list(f["test"])) for f in d["folds"]], d.get("seed", 0), d.get("k"))


def _entries(manifest) -> list[dict]:
    entries = manifest["entries"] if isinstance(manifest, dict) else list(manifest)
    return [e for e in entries if e.get("status", "ok") == "ok"]


def make_splits(manifest, scheme: str = "loso", seed: int = 0, k: int = 10) -> SplitPlan:
    """Fold plan over the ``ok`` entries of ``manifest`` (indices into that list).

    ``kfold``: stratified by label; each class is shuffled with ``seed`` and the
    classes are dealt round-robin onto the folds, so fold sizes differ by at most
    one. ``loso``: one fold per subject, in sorted subject order.
    """
    entries = _entries(manifest)
    if not entries:
        raise EmptyManifest("manifest has no usable entries")
    n = len(entries)
    if scheme == "kfold":
        if k < 2:
            raise ConfigError(f"kfold needs k >= 2, got {k}")
        if n < k:
            raise EmptyManifest(f"{n} items cannot fill {k} folds")
        rng = np.random.default_rng(seed)
        labels = np.array([int(e["label"]) for e in entries])
        order = []
        for c in np.unique(labels):
            idx = np.flatnonzero(labels == c)
            order.extend(rng.permutation(idx).tolist())
        buckets = [[] for _ in range(k)]
        for pos, i in enumerate(order):
            buckets[pos % k].append(i)
        everything = set(range(n))
        folds = [(sorted(everything - set(b)), sorted(b)) for b in buckets]
        return SplitPlan("kfold", folds, seed, k)
    if scheme == "loso":
        subjects = np.array([str(e["subject_id"]) for e in entries])
        uniq = sorted(set(subjects.tolist()))
        if len(uniq) < 2:
            raise TooFewSubjects(f"LOSO needs >= 2 subjects, got {len(uniq)}")
        folds = []
        for s in uniq:
            test = np.flatnonzero(subjects == s).tolist()
            train = np.flatnonzero(subjects != s).tolist()
            folds.append((train, test))
        return SplitPlan("loso", folds, seed, None)
    raise ConfigError(f"unknown split scheme {scheme!r}")


# ------------------------------------------------------------------ baseline


@dataclass
class Hyper:
    # None picks 1 / (Lipschitz bound of the loss gradient)
    learning_rate: float | None = None
    l2: float = 1e-3
    epochs: int = 300


@dataclass
class BaselineModel:
    weights: np.ndarray  # n_classes x (d + 1), last column is the bias
    mean: np.ndarray
    scale: np.ndarray
    hyper: Hyper
    loss_history: list[float] = field(default_factory=list)

    def decision(self, x) -> np.ndarray:
        z = _standardize(x, self.mean, self.scale)
        return z @ self.weights[:, :-1].T + self.weights[:, -1]

    def predict_proba(self, x) -> np.ndarray:
        return softmax(self.decision(x), axis=1)

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.decision(x), axis=1)


def _flatten(images) -> np.ndarray:
    x = np.asarray(images, dtype=np.float64)
    return x.reshape(x.shape[0], -1)


def _standardize(x, mean, scale):
    return (_flatten(x) - mean) / scale


def train_baseline(images, labels, hyper: Hyper = Hyper(), seed: int = 0) -> BaselineModel:
    """Multinomial logistic regression by full-batch gradient descent.

    Features are flattened and standardised with training statistics
    (zero-variance features get unit scale). The bias is not penalised. With
    the default step size the loss is non-increasing.
    """
    x = _flatten(images)
    y = np.asarray(labels, dtype=np.int64)
    missing = sorted(set(range(N_CLASSES)) - set(y.tolist()))
    if missing:
        raise MissingClass(f"training set lacks classes {missing}")
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    z = (x - mean) / scale
    n, d = z.shape
    za = np.hstack([z, np.ones((n, 1))])
    onehot = np.eye(N_CLASSES)[y]

    lr = hyper.learning_rate
    if lr is None:
        # softmax cross-entropy Hessian is bounded by 0.5 * Z^T Z / n
        smax = np.linalg.norm(za, 2)
        lr = 1.0 / (0.5 * smax**2 / n + hyper.l2)
    rng = np.random.default_rng(seed)
    w = 1e-3 * rng.standard_normal((N_CLASSES, d + 1))
    mask = np.ones_like(w)
    mask[:, -1] = 0.0

    @np.errstate(over="ignore", invalid="ignore")
    def loss_grad(w):
        logits = za @ w.T
        logp = log_softmax(logits, axis=1)
        loss = -np.sum(onehot * logp) / n + 0.5 * hyper.l2 * np.sum((w * mask) ** 2)
        grad = (np.exp(logp) - onehot).T @ za / n + hyper.l2 * w * mask
        return loss, grad

    history = []
    for _ in range(hyper.epochs):
        loss, grad = loss_grad(w)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"loss became {loss} (learning rate {lr:g} too large?)")
        history.append(float(loss))
        w = w - lr * grad
    loss, _ = loss_grad(w)
    if not np.isfinite(loss) or not np.all(np.isfinite(w)):
        raise NonFiniteLoss(f"loss became {loss} (learning rate {lr:g} too large?)")
    history.append(float(loss))
    return BaselineModel(w, mean, scale, Hyper(lr, hyper.l2, hyper.epochs), history)


# ------------------------------------------------------------------- reports


@dataclass
class EvaluationReport:
    scheme: str
    per_fold_accuracy: list[float]
    mean_accuracy: float
    std_accuracy: float
    kappa: float
    confusion: list[list[int]]
    chance_accuracy: float = CHANCE_3CLASS
    fold_sizes: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def summary(self) -> str:
        return (
            f"{self.scheme}: {len(self.per_fold_accuracy)} folds, "
            f"accuracy {self.mean_accuracy:.1f}% +/- {self.std_accuracy:.1f}%, kappa {self.kappa:.3f}"
        )


def summarize(scheme: str, per_fold: list[float], confusion, fold_sizes=(), chance: float = CHANCE_3CLASS) -> EvaluationReport:
    acc = np.asarray(per_fold, dtype=np.float64)
    mean = float(acc.mean())
    return EvaluationReport(
        scheme=scheme,
        per_fold_accuracy=[float(a) for a in acc],
        mean_accuracy=mean,
        std_accuracy=float(acc.std(ddof=0)),
        kappa=cohens_kappa(mean, chance),
        confusion=np.asarray(confusion, dtype=int).tolist(),
        chance_accuracy=chance,
        fold_sizes=[int(s) for s in fold_sizes],
    )


def evaluate(plan: SplitPlan, images, labels, hyper: Hyper = Hyper(), seed: int = 0) -> EvaluationReport:
    """Train on each fold's train side, score its test side, aggregate.

    Fold ``f`` trains with seed ``seed + f``. The confusion matrix (rows = true
    class) is pooled over folds; kappa is taken from the mean fold accuracy.
    """
    x = np.asarray(images, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    per_fold = []
    sizes = []
    for f, (train, test) in enumerate(plan.folds):
        train = np.asarray(train, dtype=np.int64)
        test = np.asarray(test, dtype=np.int64)
        if test.size == 0:
            raise EmptyManifest(f"fold {f} has an empty test set")
        model = train_baseline(x[train], y[train], hyper, seed + f)
        pred = model.predict(x[test])
        np.add.at(confusion, (y[test], pred), 1)
        per_fold.append(100.0 * float(np.mean(pred == y[test])))
        sizes.append(test.size)
    return summarize(plan.scheme, per_fold, confusion, sizes)
