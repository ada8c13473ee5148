"""Latent-variable CRF over hybrid trees: objective, gradient, training.

The per-instance loss is logZ(unclamped) - logZ(clamped); its gradient is
the difference of the unclamped and clamped feature expectations.  L2
regularization applies to the linear weights.  Training is batch L-BFGS or
per-instance SGD; the bilinear tensors ride along in either optimizer.
"""

from __future__ import annotations

import io
import json
import logging
import zipfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .chart import NoDerivationError, inside_clamped, inside_unclamped
from .corpus import Instance
from .features import FeatureFlags, FeatureIndex
from .funql import SemanticGrammar, SemanticType, SemanticUnit
from .neural import BilinearBank, EmbeddingTable
from .scoring import LinearScorer

log = logging.getLogger(__name__)

NEG_INF = float("-inf")


class TrainingError(Exception):
    pass


class DivergedLossError(TrainingError):
    pass


@dataclass
class ModelConfig:
    depth_cap: int = 20
    l2: float = 0.03
    feature_spec: str = "full"
    use_embedding_features: bool = False
    neural: bool = False
    embedding_dim: int = 64
    lr: float = 0.05
    epochs: int = 20
    max_iterations: int = 500
    seed: int = 0
    threads: int = 1

    def flags(self) -> FeatureFlags:
        return FeatureFlags.from_spec(self.feature_spec).with_embedding(
            self.use_embedding_features)


class Model:
    def __init__(self, grammar: SemanticGrammar, config: ModelConfig,
                 index=None, weights=None, bank=None, embeddings=None):
        self.grammar = grammar
        self.config = config
        self.flags = config.flags()
        self.index = index if index is not None else FeatureIndex()
        self.weights = (weights if weights is not None
                        else np.zeros(len(self.index)))
        self.embeddings = embeddings
        if bank is None and config.neural:
            if embeddings is None:
                raise TrainingError("the neural variant needs embeddings")
            bank = BilinearBank.init_random(
                [u.uid for u in grammar.units], embeddings.dim,
                seed=config.seed)
        self.bank = bank
        self.skipped: list[str] = []

    # ---------------------------------------------------------------- scoring

    def scorer(self) -> LinearScorer:
        return LinearScorer(self.flags, self.index, self.weights,
                            bank=self.bank, embeddings=self.embeddings)

    def build_index(self, corpus):
        """Register every feature reachable on the training set, then freeze."""
        if self.index.frozen:
            return
        scorer = self.scorer()
        for inst in corpus:
            inside_unclamped(inst.sentence, self.grammar, scorer,
                             self.config.depth_cap)
            inside_clamped(inst.sentence, inst.gold, scorer,
                           self.config.depth_cap, grammar=self.grammar)
        self.index.freeze()
        grown = len(self.index) - len(self.weights)
        if grown > 0:
            self.weights = np.concatenate([self.weights, np.zeros(grown)])

    # ------------------------------------------------------------- objective

    def _instance_terms(self, inst: Instance, want_gradient):
        scorer = self.scorer()
        clamped = inside_clamped(inst.sentence, inst.gold, scorer,
                                 self.config.depth_cap, grammar=self.grammar)
        if clamped.log_z == NEG_INF:
            return None
        unclamped = inside_unclamped(inst.sentence, self.grammar, scorer,
                                     self.config.depth_cap)
        loss = unclamped.log_z - clamped.log_z
        if not want_gradient:
            return loss, None, None
        e_unc, mass_unc = unclamped.expectations()
        e_cl, mass_cl = clamped.expectations()
        grad = np.zeros(len(self.weights))
        for fid, v in e_unc.items():
            grad[fid] += v
        for fid, v in e_cl.items():
            grad[fid] -= v
        bank_grad = None
        if self.bank is not None:
            bank_grad = {uid: np.zeros((self.bank.dim, self.bank.dim))
                         for uid in self.bank.matrices}
            for sign, mass in ((1.0, mass_unc), (-1.0, mass_cl)):
                for (uid, head, mod), p in mass.items():
                    if uid not in bank_grad:
                        continue
                    e_p = self.embeddings.lookup(inst.sentence.word(head))
                    e_c = self.embeddings.lookup(inst.sentence.word(mod))
                    bank_grad[uid] += sign * p * np.outer(e_p, e_c)
        return loss, grad, bank_grad

    def _map_instances(self, corpus, want_gradient):
        if self.config.threads > 1:
            with ThreadPoolExecutor(self.config.threads) as pool:
                return list(pool.map(
                    lambda inst: self._instance_terms(inst, want_gradient),
                    corpus))
        return [self._instance_terms(inst, want_gradient) for inst in corpus]

    def objective(self, corpus) -> float:
        total = self.config.l2 * float(self.weights @ self.weights)
        for inst, terms in zip(corpus, self._map_instances(corpus, False)):
            if terms is None:
                self._warn_skip(inst)
                continue
            total += terms[0]
        return total

    def objective_and_gradient(self, corpus):
        """Returns (loss, gradient over weights, gradient per bilinear tensor)."""
        loss = self.config.l2 * float(self.weights @ self.weights)
        grad = 2.0 * self.config.l2 * self.weights
        bank_grad = (None if self.bank is None else
                     {uid: np.zeros((self.bank.dim, self.bank.dim))
                      for uid in self.bank.matrices})
        for inst, terms in zip(corpus, self._map_instances(corpus, True)):
            if terms is None:
                self._warn_skip(inst)
                continue
            inst_loss, inst_grad, inst_bank = terms
            loss += inst_loss
            grad += inst_grad
            if bank_grad is not None:
                for uid, g in inst_bank.items():
                    bank_grad[uid] += g
        return loss, grad, bank_grad

    def _warn_skip(self, inst):
        message = (f"gold tree unreachable under depth cap "
                   f"{self.config.depth_cap}: "
                   f"{' '.join(inst.sentence.tokens)}")
        if message not in self.skipped:
            self.skipped.append(message)
            log.warning(message)

    # -------------------------------------------------------------- training

    def _pack(self):
        parts = [self.weights]
        if self.bank is not None:
            for uid in sorted(self.bank.matrices):
                parts.append(self.bank.matrices[uid].ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    def _unpack(self, x):
        k = len(self.weights)
        self.weights = x[:k].copy()
        if self.bank is not None:
            d = self.bank.dim
            offset = k
            for uid in sorted(self.bank.matrices):
                self.bank.matrices[uid] = (
                    x[offset:offset + d * d].reshape(d, d).copy())
                offset += d * d

    def train_lbfgs(self, corpus, tol=1e-6):
        """Batch training until convergence; returns the per-iteration loss trace."""
        self.build_index(corpus)
        cache = {}

        def fun(x):
            key = x.tobytes()
            if key in cache:
                return cache[key]
            self._unpack(x)
            loss, grad, bank_grad = self.objective_and_gradient(corpus)
            if not np.isfinite(loss):
                raise DivergedLossError(f"objective became {loss}")
            parts = [grad]
            if bank_grad is not None:
                for uid in sorted(self.bank.matrices):
                    parts.append(bank_grad[uid].ravel())
            g = np.concatenate(parts)
            if len(cache) > 8:
                cache.clear()
            cache[key] = (loss, g)
            return loss, g

        trace = []

        def record(xk):
            trace.append(float(fun(np.asarray(xk))[0]))

        x0 = self._pack()
        trace.append(float(fun(x0)[0]))
        result = minimize(fun, x0, jac=True, method="L-BFGS-B",
                          callback=record,
                          options={"maxcor": 10,
                                   "maxiter": self.config.max_iterations,
                                   "ftol": tol})
        self._unpack(result.x)
        return trace

    def train_sgd(self, corpus, lr=None, epochs=None):
        """Plain per-instance SGD with per-epoch reshuffling; returns the
        per-epoch loss trace."""
        self.build_index(corpus)
        lr = self.config.lr if lr is None else lr
        epochs = self.config.epochs if epochs is None else epochs
        rng = np.random.RandomState(self.config.seed)
        corpus = list(corpus)
        n = max(len(corpus), 1)
        trace = []
        for _epoch in range(epochs):
            order = rng.permutation(len(corpus))
            for i in order:
                terms = self._instance_terms(corpus[i], True)
                if terms is None:
                    self._warn_skip(corpus[i])
                    continue
                _loss, grad, bank_grad = terms
                grad = grad + (2.0 * self.config.l2 / n) * self.weights
                self.weights = self.weights - lr * grad
                if not np.all(np.isfinite(self.weights)):
                    raise DivergedLossError("weights diverged during SGD")
                if bank_grad is not None:
                    for uid, g in bank_grad.items():
                        self.bank.matrices[uid] -= lr * g
            trace.append(self.objective(corpus))
            if not np.isfinite(trace[-1]):
                raise DivergedLossError(f"objective became {trace[-1]}")
        return trace

    def train(self, corpus, optimizer="lbfgs"):
        if optimizer == "lbfgs":
            return self.train_lbfgs(corpus)
        if optimizer == "sgd":
            return self.train_sgd(corpus)
        raise TrainingError(f"unknown optimizer {optimizer!r}")

    # -------------------------------------------------------------- decoding

    def decode(self, sentence):
        """MAP decode; returns (meaning representation, tree, score) or None
        when no derivation covers the sentence."""
        try:
            chart = inside_unclamped(sentence, self.grammar, self.scorer(),
                                     self.config.depth_cap)
            return chart.viterbi()[1], chart.viterbi()[0], chart.viterbi()[2]
        except NoDerivationError:
            return None

    # --------------------------------------------------------- serialization

    def save(self, path):
        manifest = {
            "format": "depsem-model",
            "version": 1,
            "root_type": self.grammar.root_type.name,
            "config": {
                "depth_cap": self.config.depth_cap,
                "l2": self.config.l2,
                "feature_spec": self.config.feature_spec,
                "use_embedding_features": self.config.use_embedding_features,
                "neural": self.config.neural,
                "embedding_dim": self.config.embedding_dim,
                "lr": self.config.lr,
                "epochs": self.config.epochs,
                "max_iterations": self.config.max_iterations,
                "seed": self.config.seed,
                "threads": self.config.threads,
            },
        }
        unit_lines = []
        for u in self.grammar.units:
            args = ",".join(t.name for t in u.arg_types)
            unit_lines.append(f"{u.uid}\t{u.return_type.name}\t{u.function}\t{args}")
        feat_lines = [f"{key}\t{fid}\t{float(self.weights[fid])!r}"
                      for key, fid in self.index.items()]

        def write(zf, name, data):
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, data)

        with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
            write(zf, "manifest.json",
                  json.dumps(manifest, indent=2, sort_keys=True))
            write(zf, "units.tsv", "\n".join(unit_lines) + "\n")
            write(zf, "features.tsv", "\n".join(feat_lines) + "\n")
            if self.bank is not None:
                for uid in sorted(self.bank.matrices):
                    buf = io.BytesIO()
                    np.save(buf, self.bank.matrices[uid].astype("<f8"))
                    write(zf, f"bank/{uid}.npy", buf.getvalue())

    @classmethod
    def load(cls, path, embeddings: EmbeddingTable | None = None) -> "Model":
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            config = ModelConfig(**manifest["config"])
            units = []
            for line in zf.read("units.tsv").decode().splitlines():
                uid, ret, function, args = line.split("\t")
                arg_types = tuple(SemanticType(a) for a in args.split(",") if a)
                units.append(SemanticUnit(SemanticType(ret), function,
                                          arg_types, uid=int(uid)))
            grammar = SemanticGrammar(units, SemanticType(manifest["root_type"]))
            for u in units:
                if grammar.uid(u) != u.uid:
                    raise TrainingError("unit ids in the model file are stale")
            index = FeatureIndex()
            rows = []
            for line in zf.read("features.tsv").decode().splitlines():
                key, fid, weight = line.rsplit("\t", 2)
                rows.append((int(fid), key, float(weight)))
            weights = np.zeros(len(rows))
            for fid, key, weight in sorted(rows):
                if index.add(key) != fid:
                    raise TrainingError("feature ids in the model file are stale")
                weights[fid] = weight
            index.freeze()
            bank = None
            bank_names = [n for n in zf.namelist() if n.startswith("bank/")]
            if bank_names:
                mats = {}
                for name in bank_names:
                    uid = int(name.split("/")[1].split(".")[0])
                    mats[uid] = np.load(io.BytesIO(zf.read(name)))
                bank = BilinearBank(mats, config.embedding_dim)
        model = cls(grammar, config, index=index, weights=weights,
                    bank=bank, embeddings=embeddings)
        return model
