"""Paired-corpus ingestion and evaluation.

Corpus files are pre-tokenized: each record is a sentence line followed by
its FunQL line, records separated by blank lines.  Evaluation is exact
structural match of the meaning representation, with precision/recall/F1
accounting for abstentions.
"""

from __future__ import annotations

from dataclasses import dataclass

from .funql import FunqlError, MeaningRepresentation, parse_mr, serialize_mr
from .hybridtree import Sentence


class CorpusError(Exception):
    pass


class LengthMismatchError(CorpusError):
    pass


@dataclass(frozen=True)
class Instance:
    sentence: Sentence
    gold: MeaningRepresentation
    language: str = "en"


def load_corpus(path, table, language="en"):
    """Parse a corpus file.

    Returns (instances, errors); each error is (line number, message) for a
    malformed record, which is skipped rather than fatal.
    """
    records = []
    current: list[tuple[int, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped:
                if current:
                    records.append(current)
                    current = []
                continue
            current.append((lineno, stripped))
    if current:
        records.append(current)

    instances = []
    errors = []
    for record in records:
        if len(record) != 2:
            errors.append((record[0][0],
                           f"expected 2 lines per record, got {len(record)}"))
            continue
        (sent_no, sent_line), (mr_no, mr_line) = record
        try:
            gold = parse_mr(mr_line, table)
        except FunqlError as exc:
            errors.append((mr_no, str(exc)))
            continue
        try:
            sentence = Sentence.from_text(sent_line)
        except ValueError as exc:
            errors.append((sent_no, str(exc)))
            continue
        instances.append(Instance(sentence, gold, language))
    return instances, errors


def save_corpus(path, instances):
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(" ".join(inst.sentence.tokens) + "\n")
            fh.write(serialize_mr(inst.gold) + "\n\n")


def save_predictions(path, predictions):
    """One FunQL string per line; an empty line marks an abstention."""
    with open(path, "w", encoding="utf-8") as fh:
        for pred in predictions:
            fh.write(("" if pred is None else serialize_mr(pred)) + "\n")


def load_predictions(path, table):
    predictions = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            predictions.append(parse_mr(line, table) if line else None)
    return predictions


def evaluate(predictions, golds):
    """Exact-match accuracy plus precision/recall/F1 over abstentions.

    A prediction of None is an abstention: it cannot be correct but does not
    count as produced output.
    """
    if len(predictions) != len(golds):
        raise LengthMismatchError(
            f"{len(predictions)} predictions vs {len(golds)} references")
    total = len(golds)
    produced = sum(1 for p in predictions if p is not None)
    correct = sum(1 for p, g in zip(predictions, golds)
                  if p is not None and p == g)
    accuracy = correct / total if total else 0.0
    precision = correct / produced if produced else 0.0
    recall = correct / total if total else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return {"accuracy": accuracy, "precision": precision, "recall": recall,
            "f1": f1, "n": total}


def prolog_query(m: MeaningRepresentation) -> str:
    """Render the meaning representation as a Prolog-style conjunction.

    Purely structural: every unit becomes a predicate over fresh variables,
    constants become const/2 goals.  The string is emitted for downstream
    tooling and never executed here.
    """
    counter = [0]

    def fresh():
        i = counter[0]
        counter[0] += 1
        name = ""
        while True:
            name = chr(ord("A") + i % 26) + name
            i = i // 26 - 1
            if i < 0:
                break
        return name

    def conv(node, var):
        unit = node.unit
        if unit.function.startswith("'"):
            return [f"const({var},{unit.function})"]
        functor = unit.function
        if functor.endswith("(all)"):
            functor = functor[:-len("(all)")]
        child_vars = [fresh() for _ in node.children]
        head = f"{functor}({','.join([var] + child_vars)})"
        goals = [head]
        for child, cv in zip(node.children, child_vars):
            goals.extend(conv(child, cv))
        return goals

    root_var = fresh()
    return ",".join(conv(m.root, root_var))
