"""Language/property embeddings trained as a binary co-occurrence discriminator.

Every language and every property token (``"<feature>: <value>"``) gets a
dense vector.  A logistic output over the concatenated pair — an affine part
plus the dot product of the two embeddings — is trained to tell true
language–property pairs from uniformly sampled fake ones; at prediction time
the candidate value whose token the discriminator rates highest wins.  All
optimization is plain numpy: per-example Adam steps that only touch the
embedding rows involved in the example.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .base import TypologyPredictor
from .data import Dataset, LanguageRecord
from .errors import DataFormatError, DataValidationError, TrainingDivergedError
from .geo import NEURAL_PROFILE, CoordClustering, GeoZoning, cluster_dataset, derive_features
from .predictions import ScoredPrediction, System
from .validation import check_dataset, check_positive_int

INIT_SCALE = 0.05
PROB_FLOOR = 1e-15

GRID_CLUSTERS = (1, 10, 50, 100, 150, 300, 500, 1000)
GRID_DIMS = (128, 512, 1024)
GRID_DROPOUTS = (0.0, 0.3, 0.5)


def make_token(feature: str, value: str) -> str:
    return f"{feature}: {value}"


@dataclass(frozen=True)
class HyperParams:
    dim: int = 512
    dropout: float = 0.5
    clusters: int = 300
    epochs: int = 200
    lr: float = 0.001

    def __post_init__(self):
        check_positive_int(self.dim, "dim")
        check_positive_int(self.clusters, "clusters")
        check_positive_int(self.epochs, "epochs")
        if not 0.0 <= self.dropout < 1.0:
            raise DataValidationError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lr <= 0:
            raise DataValidationError(f"learning rate must be positive, got {self.lr}")


def default_grid() -> tuple[HyperParams, ...]:
    """The 72 hyperparameter combinations searched by ``grid-search``."""
    return tuple(
        HyperParams(dim=dim, dropout=dropout, clusters=clusters)
        for clusters in GRID_CLUSTERS
        for dim in GRID_DIMS
        for dropout in GRID_DROPOUTS
    )


@dataclass(frozen=True, eq=False)
class Vocabulary:
    """Id spaces for languages and property tokens, plus lookup side-tables."""

    langs: tuple[str, ...]
    tokens: tuple[str, ...]
    lang_ids: dict[str, int]
    token_ids: dict[str, int]
    #: feature name -> sorted values observed for it (prediction candidates).
    feature_values: dict[str, tuple[str, ...]]
    #: token -> the feature it belongs to.
    token_feature: dict[str, str]
    #: language code -> family (for labelled embedding exports).
    lang_families: dict[str, str]

    @property
    def n_langs(self) -> int:
        return len(self.langs)

    @property
    def n_tokens(self) -> int:
        return len(self.tokens)

    def to_json_dict(self) -> dict:
        return {
            "langs": list(self.langs),
            "tokens": list(self.tokens),
            "feature_values": {f: list(v) for f, v in self.feature_values.items()},
            "token_feature": dict(self.token_feature),
            "lang_families": dict(self.lang_families),
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "Vocabulary":
        langs = tuple(payload["langs"])
        tokens = tuple(payload["tokens"])
        return cls(
            langs=langs,
            tokens=tokens,
            lang_ids={code: i for i, code in enumerate(langs)},
            token_ids={tok: i for i, tok in enumerate(tokens)},
            feature_values={f: tuple(v) for f, v in payload["feature_values"].items()},
            token_feature=dict(payload["token_feature"]),
            lang_families=dict(payload["lang_families"]),
        )


def build_vocab(
    dataset: Dataset, zoning: GeoZoning, clustering: CoordClustering
) -> Vocabulary:
    """Collect the language and token id spaces from a dataset."""
    check_dataset(dataset, non_empty=True)
    tokens: set[str] = set()
    feature_values: dict[str, set[str]] = {}
    token_feature: dict[str, str] = {}
    lang_families: dict[str, str] = {}
    for record in dataset:
        lang_families[record.wals_code] = record.family
        for feature, value in derive_features(
            record, zoning, clustering, profile=NEURAL_PROFILE
        ):
            token = make_token(feature, value)
            tokens.add(token)
            token_feature[token] = feature
            feature_values.setdefault(feature, set()).add(value)
    langs = tuple(sorted(rec.wals_code for rec in dataset))
    token_list = tuple(sorted(tokens))
    return Vocabulary(
        langs=langs,
        tokens=token_list,
        lang_ids={code: i for i, code in enumerate(langs)},
        token_ids={tok: i for i, tok in enumerate(token_list)},
        feature_values={f: tuple(sorted(v)) for f, v in sorted(feature_values.items())},
        token_feature=token_feature,
        lang_families=lang_families,
    )


def training_pairs(
    vocab: Vocabulary,
    dataset: Dataset,
    zoning: GeoZoning,
    clustering: CoordClustering,
) -> list[tuple[int, int]]:
    """All true ``(lang_id, token_id)`` pairs, in dataset order."""
    pairs = []
    for record in dataset:
        lang = vocab.lang_ids[record.wals_code]
        for feature, value in derive_features(
            record, zoning, clustering, profile=NEURAL_PROFILE
        ):
            pairs.append((lang, vocab.token_ids[make_token(feature, value)]))
    return pairs


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


class _AdamState:
    """First/second moment buffers for one parameter array.

    Rows of embedding matrices are updated sparsely: a row's moments decay
    only when the row is touched, while bias correction always uses the
    global step count.
    """

    def __init__(self, shape):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)

    def update(self, param, grad, step, *, row=None, lr, beta1, beta2, eps):
        m = self.m if row is None else self.m[row]
        v = self.v if row is None else self.v[row]
        target = param if row is None else param[row]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        m_hat = m / (1.0 - beta1**step)
        v_hat = v / (1.0 - beta2**step)
        target -= lr * m_hat / (np.sqrt(v_hat) + eps)


class EmbeddingModel:
    """The trainable parameters: embedding tables plus the logistic layer."""

    def __init__(self, vocab: Vocabulary, hyper: HyperParams, rng):
        rng = np.random.default_rng(rng)
        d = hyper.dim
        self.vocab = vocab
        self.hyper = hyper
        self.lang_emb = rng.uniform(-INIT_SCALE, INIT_SCALE, (vocab.n_langs, d))
        self.tok_emb = rng.uniform(-INIT_SCALE, INIT_SCALE, (vocab.n_tokens, d))
        self.w = rng.uniform(-INIT_SCALE, INIT_SCALE, 2 * d)
        self.b = np.zeros(1)

    def logit(self, lang_id: int, tok_id: int) -> float:
        # The dot product of the two halves is the score's interaction term;
        # the affine part alone would rank every token identically for all
        # languages and could never tell languages apart.
        l = self.lang_emb[lang_id]
        t = self.tok_emb[tok_id]
        d = self.hyper.dim
        return float(self.w[:d] @ l + self.w[d:] @ t + l @ t + self.b[0])

    def prob(self, lang_id: int, tok_id: int) -> float:
        """Discriminator probability, clamped away from exactly 0 and 1."""
        p = _sigmoid(self.logit(lang_id, tok_id))
        return min(max(p, PROB_FLOOR), 1.0 - PROB_FLOOR)

    def loss_and_grads(self, lang_id: int, tok_id: int, label: float, mask=None):
        """Log loss of one example and its gradients.

        ``mask`` is the (inverted-scaling) dropout mask over the concatenated
        input; ``None`` disables dropout.  Returns ``(loss, grads)`` with
        gradient arrays keyed ``lang``, ``tok``, ``w``, ``b``.
        """
        d = self.hyper.dim
        z = np.concatenate([self.lang_emb[lang_id], self.tok_emb[tok_id]])
        h = z if mask is None else z * mask
        h_l = h[:d]
        h_t = h[d:]
        logit = float(self.w @ h + h_l @ h_t + self.b[0])
        # softplus(logit) - label * logit == -log p(label | logit), stably
        loss = float(np.logaddexp(0.0, logit) - label * logit)
        d_logit = _sigmoid(logit) - label
        d_h = d_logit * (self.w + np.concatenate([h_t, h_l]))
        d_z = d_h if mask is None else d_h * mask
        grads = {
            "lang": d_z[:d],
            "tok": d_z[d:],
            "w": d_logit * h,
            "b": np.array([d_logit]),
        }
        return loss, grads


def train_model(
    model: EmbeddingModel,
    pairs: list[tuple[int, int]],
    *,
    epochs: int | None = None,
    rng,
    lr: float | None = None,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    log=None,
) -> list[float]:
    """Run the discriminator training loop; returns the mean loss per epoch.

    Each epoch shuffles the true pairs.  For every pair a fair coin decides
    between presenting it as a positive example or replacing its token with a
    uniformly sampled one the language does not actually have (label 0).
    """
    if not pairs:
        raise DataValidationError("no training pairs")
    rng = np.random.default_rng(rng)
    epochs = model.hyper.epochs if epochs is None else check_positive_int(epochs, "epochs")
    lr = model.hyper.lr if lr is None else lr
    dropout = model.hyper.dropout
    n_tokens = model.vocab.n_tokens

    true_tokens: dict[int, set[int]] = {}
    for lang, tok in pairs:
        true_tokens.setdefault(lang, set()).add(tok)
    for lang, owned in true_tokens.items():
        if len(owned) >= n_tokens:
            raise DataValidationError(
                f"language id {lang} has every token; negative sampling is impossible"
            )

    adam = {
        "lang": _AdamState(model.lang_emb.shape),
        "tok": _AdamState(model.tok_emb.shape),
        "w": _AdamState(model.w.shape),
        "b": _AdamState(model.b.shape),
    }
    two_d = 2 * model.hyper.dim
    step = 0
    history = []
    for epoch in range(epochs):
        order = rng.permutation(len(pairs))
        total = 0.0
        for idx in order:
            lang, tok = pairs[idx]
            if rng.random() < 0.5:
                label = 1.0
            else:
                label = 0.0
                owned = true_tokens[lang]
                while True:
                    tok = int(rng.integers(n_tokens))
                    if tok not in owned:
                        break
            mask = None
            if dropout > 0.0:
                mask = (rng.random(two_d) >= dropout) / (1.0 - dropout)
            loss, grads = model.loss_and_grads(lang, tok, label, mask)
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch + 1}, step {step + 1}"
                )
            total += loss
            step += 1
            kw = dict(step=step, lr=lr, beta1=beta1, beta2=beta2, eps=eps)
            adam["lang"].update(model.lang_emb, grads["lang"], row=lang, **kw)
            adam["tok"].update(model.tok_emb, grads["tok"], row=tok, **kw)
            adam["w"].update(model.w, grads["w"], **kw)
            adam["b"].update(model.b, grads["b"], **kw)
        history.append(total / len(pairs))
        if log is not None:
            log("epoch %d/%d: mean loss %.4f", epoch + 1, epochs, history[-1])
    return history


def predict_feature_neural(
    model: EmbeddingModel, vocab: Vocabulary, lang_code: str, feature: str
) -> ScoredPrediction | None:
    """Pick the candidate value whose token the discriminator rates highest.

    Candidates are the values the feature showed anywhere in the fitted data.
    Returns ``None`` when the language or the feature was never seen.
    """
    lang_id = vocab.lang_ids.get(lang_code)
    candidates = vocab.feature_values.get(feature)
    if lang_id is None or not candidates:
        return None
    best_value = None
    best_prob = -1.0
    for value in candidates:
        tok_id = vocab.token_ids[make_token(feature, value)]
        p = model.prob(lang_id, tok_id)
        if p > best_prob:
            best_prob, best_value = p, value
    return ScoredPrediction(
        feature=feature, value=best_value, score=best_prob, system=System.NEURAL
    )


def save_model(model: EmbeddingModel, path) -> None:
    np.savez_compressed(
        path,
        lang_emb=model.lang_emb,
        tok_emb=model.tok_emb,
        w=model.w,
        b=model.b,
        vocab=np.array(json.dumps(model.vocab.to_json_dict(), ensure_ascii=False)),
        hyper=np.array(json.dumps(asdict(model.hyper))),
    )


def load_model(path) -> EmbeddingModel:
    try:
        with np.load(path, allow_pickle=False) as archive:
            vocab = Vocabulary.from_json_dict(json.loads(str(archive["vocab"])))
            hyper = HyperParams(**json.loads(str(archive["hyper"])))
            model = EmbeddingModel(vocab, hyper, rng=0)
            model.lang_emb = archive["lang_emb"]
            model.tok_emb = archive["tok_emb"]
            model.w = archive["w"]
            model.b = archive["b"]
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: malformed embedding model: {exc}") from exc
    if model.lang_emb.shape != (vocab.n_langs, hyper.dim) or model.tok_emb.shape != (
        vocab.n_tokens,
        hyper.dim,
    ):
        raise DataFormatError(f"{path}: embedding shapes do not match the vocabulary")
    return model


def export_embeddings(model: EmbeddingModel, path, kind: str = "lang") -> None:
    """Write embeddings as TSV: label, group, then the vector components.

    Languages are grouped by family, tokens by their feature, so the file
    drops straight into external projector/plotting tools.
    """
    vocab = model.vocab
    if kind == "lang":
        rows = (
            (code, vocab.lang_families.get(code, ""), model.lang_emb[i])
            for i, code in enumerate(vocab.langs)
        )
    elif kind == "token":
        rows = (
            (tok, vocab.token_feature.get(tok, ""), model.tok_emb[i])
            for i, tok in enumerate(vocab.tokens)
        )
    else:
        raise DataValidationError(f"unknown embedding kind {kind!r}")
    with open(path, "w", encoding="utf-8") as fh:
        for label, group, vec in rows:
            fh.write("\t".join([label, group, *(repr(float(x)) for x in vec)]))
            fh.write("\n")


class NeuralPredictor(TypologyPredictor):
    """Estimator wrapper around the embedding discriminator.

    Fitting clusters the coordinates, builds the vocabulary, initializes the
    model and runs the full training loop; everything is driven by ``seed``,
    so two fits with equal inputs are bit-identical.
    """

    def __init__(
        self,
        dim: int = 512,
        dropout: float = 0.5,
        clusters: int = 300,
        epochs: int = 200,
        lr: float = 0.001,
        seed: int = 0,
        zoning: GeoZoning | None = None,
    ):
        self.dim = dim
        self.dropout = dropout
        self.clusters = clusters
        self.epochs = epochs
        self.lr = lr
        self.seed = seed
        self.zoning = zoning

    def _hyper(self) -> HyperParams:
        return HyperParams(
            dim=self.dim,
            dropout=self.dropout,
            clusters=self.clusters,
            epochs=self.epochs,
            lr=self.lr,
        )

    def fit(self, dataset: Dataset, clustering: CoordClustering | None = None, log=None):
        """Train on a dataset; pass ``clustering`` to reuse a precomputed one."""
        check_dataset(dataset, non_empty=True)
        hyper = self._hyper()
        init_seed, train_seed = np.random.SeedSequence(self.seed).spawn(2)
        self.zoning_ = self.zoning or GeoZoning()
        if clustering is None:
            clustering = cluster_dataset(dataset, hyper.clusters, self.seed)
        elif clustering.k != hyper.clusters:
            raise DataValidationError(
                f"clustering has k={clustering.k} but the model wants {hyper.clusters}"
            )
        self.clustering_ = clustering
        self.vocab_ = build_vocab(dataset, self.zoning_, clustering)
        pairs = training_pairs(self.vocab_, dataset, self.zoning_, clustering)
        self.model_ = EmbeddingModel(self.vocab_, hyper, rng=init_seed)
        self.losses_ = train_model(self.model_, pairs, rng=train_seed, log=log)
        return self

    def _predict_cell(self, record: LanguageRecord, feature: str) -> ScoredPrediction | None:
        return predict_feature_neural(self.model_, self.vocab_, record.wals_code, feature)

    def save(self, path) -> None:
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self)
        save_model(self.model_, path)

    @classmethod
    def from_file(cls, path) -> "NeuralPredictor":
        """A fitted predictor backed by a previously saved model file."""
        model = load_model(path)
        h = model.hyper
        predictor = cls(
            dim=h.dim, dropout=h.dropout, clusters=h.clusters, epochs=h.epochs, lr=h.lr
        )
        predictor.model_ = model
        predictor.vocab_ = model.vocab
        predictor.zoning_ = GeoZoning()
        return predictor


@dataclass(frozen=True)
class GridResult:
    hyper: HyperParams
    accuracy: float


def _evaluate_config(
    dataset: Dataset,
    gold: Dataset,
    hyper: HyperParams,
    seed: int,
    clustering: CoordClustering,
) -> float:
    from .evaluation import accuracy

    predictor = NeuralPredictor(
        dim=hyper.dim,
        dropout=hyper.dropout,
        clusters=hyper.clusters,
        epochs=hyper.epochs,
        lr=hyper.lr,
        seed=seed,
    )
    predictor.fit(dataset, clustering=clustering)
    return accuracy(gold, predictor.predict(dataset), masked=dataset)


def _grid_worker(args):
    return _evaluate_config(*args)


def grid_search(
    dataset: Dataset,
    gold: Dataset,
    grid: tuple[HyperParams, ...] | None = None,
    *,
    seed: int = 0,
    jobs: int = 1,
    log=None,
) -> list[GridResult]:
    """Score every configuration on the masked cells covered by ``gold``.

    ``dataset`` is the (merged) training data containing the masked cells;
    ``gold`` supplies their true values.  Coordinate clusterings are computed
    once per distinct cluster count and shared across configurations.
    Results come back in grid order with ties resolved by that order; the
    caller picks ``max(results, key=lambda r: r.accuracy)``.
    """
    grid = default_grid() if grid is None else tuple(grid)
    if not grid:
        raise DataValidationError("empty hyperparameter grid")
    clusterings = {
        k: cluster_dataset(dataset, k, seed) for k in sorted({h.clusters for h in grid})
    }
    tasks = [(dataset, gold, h, seed, clusterings[h.clusters]) for h in grid]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            scores = list(pool.map(_grid_worker, tasks))
    else:
        scores = []
        for i, task in enumerate(tasks):
            scores.append(_grid_worker(task))
            if log is not None:
                h = grid[i]
                log(
                    "grid %d/%d: clusters=%d dim=%d dropout=%g -> %.2f%%",
                    i + 1,
                    len(grid),
                    h.clusters,
                    h.dim,
                    h.dropout,
                    100.0 * scores[-1],
                )
    return [GridResult(hyper=h, accuracy=s) for h, s in zip(grid, scores)]


def best_config(results: list[GridResult]) -> GridResult:
    """Highest accuracy; earlier grid order wins ties."""
    if not results:
        raise DataValidationError("no grid results")
    best = results[0]
    for result in results[1:]:
        if result.accuracy > best.accuracy:
            best = result
    return best


__all__ = [
    "EmbeddingModel",
    "GridResult",
    "HyperParams",
    "NeuralPredictor",
    "Vocabulary",
    "best_config",
    "build_vocab",
    "default_grid",
    "export_embeddings",
    "grid_search",
    "load_model",
    "make_token",
    "predict_feature_neural",
    "save_model",
    "train_model",
    "training_pairs",
]
