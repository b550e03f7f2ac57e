"""Line-oriented text formats: CRP datasets, trained models, discriminator sets.

All writers emit LF line endings and no trailing blank line; reals use 17
significant digits so values round-trip exactly.
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .learners import LogisticRegression, NeuralNetwork, RandomForest
from .learners.forest import Tree
from .puf import Arch, CrpDataset

PathLike = Union[str, "os.PathLike[str]"]


class FormatError(ValueError):
    """A file does not follow its declared format; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def fmt_real(x) -> str:
    return format(float(x), ".17g")


def _write_lines(path: PathLike, lines: Iterable[str]) -> None:
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))


def _read_lines(path: PathLike) -> list[str]:
    text = Path(path).read_bytes().decode("ascii")
    if "\r" in text:
        raise FormatError("CR characters are not allowed; use LF line endings")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def parse_header(line: str, magic: str, lineno: int = 1) -> dict[str, str]:
    parts = line.split(" ")
    if len(parts) < 2 or " ".join(parts[:2]) != magic:
        raise FormatError(f"expected header starting with {magic!r}", lineno)
    fields = {}
    for token in parts[2:]:
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise FormatError(f"malformed header field {token!r}", lineno)
        fields[key] = value
    return fields


def file_checksum(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- CRP datasets ------------------------------------------------------------

def format_crps(data: CrpDataset) -> list[str]:
    header = (f"pufcrp v1 arch={data.arch.value} stages={data.stages} k={data.k} "
              f"count={len(data)} seed={data.seed}")
    bits = (data.challenges + ord("0")).astype(np.uint8)
    body = [row.tobytes().decode("ascii") + (" +1" if r > 0 else " -1") for row, r in zip(bits, data.responses)]
    return [header] + body


def write_crps(data: CrpDataset, path: PathLike) -> None:
    _write_lines(path, format_crps(data))


def read_crps(path: PathLike) -> CrpDataset:
    lines = _read_lines(path)
    if not lines:
        raise FormatError("empty file", 1)
    h = parse_header(lines[0], "pufcrp v1")
    try:
        arch = Arch.parse(h["arch"])
        stages, k, count, seed = (int(h[key]) for key in ("stages", "k", "count", "seed"))
    except KeyError as e:
        raise FormatError(f"header is missing {e.args[0]!r}", 1) from None
    except ValueError as e:
        raise FormatError(str(e), 1) from None
    body = lines[1:]
    if len(body) != count:
        raise FormatError(f"header declares count={count} but the file has {len(body)} data lines",
                          len(lines) + (1 if len(body) < count else 0))
    challenges = np.empty((count, stages), dtype=np.uint8)
    responses = np.empty(count, dtype=np.int8)
    for i, line in enumerate(body):
        lineno = i + 2
        bits, sep, resp = line.partition(" ")
        if not sep or len(bits) != stages or set(bits) - {"0", "1"}:
            raise FormatError(f"expected {stages} challenge bits followed by a response", lineno)
        if resp not in ("+1", "-1"):
            raise FormatError(f"response must be +1 or -1, got {resp!r}", lineno)
        challenges[i] = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
        responses[i] = 1 if resp == "+1" else -1
    return CrpDataset(stages, arch, k, challenges, responses, seed)


# -- trained learners ----------------------------------------------------------

def _row(values) -> str:
    return " ".join(fmt_real(v) for v in np.ravel(values))


def _matrix_block(name: str, M) -> list[str]:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    return [f"matrix {name} {M.shape[0]} {M.shape[1]}"] + [_row(r) for r in M]


def _vector_block(name: str, v) -> list[str]:
    v = np.ravel(np.asarray(v, dtype=np.float64))
    return [f"vector {name} {len(v)}", _row(v)]


def format_model(model, encoding: str | None = None) -> list[str]:
    classes = ",".join(str(c) for c in model.classes_)
    header = f"pufmodel v1 kind={model.kind} dim={model.n_features_in_} classes={classes}"
    if encoding:
        header += f" encoding={encoding}"
    lines = [header]
    if isinstance(model, LogisticRegression):
        if model.n_classes_ == 2:
            lines.append("weights " + _row(np.append(model.coef_, model.intercept_)))
        else:
            lines += _matrix_block("W", model.coef_) + _vector_block("b", model.intercept_)
    elif isinstance(model, NeuralNetwork):
        lines += _matrix_block("W1", model.coefs_[0]) + _vector_block("b1", model.intercepts_[0])
        lines += _matrix_block("W2", model.coefs_[1]) + _vector_block("b2", model.intercepts_[1])
    elif isinstance(model, RandomForest):
        lines.append(f"trees {len(model.estimators_)}")
        for tree in model.estimators_:
            lines.append(f"tree {tree.node_count}")
            for i in range(tree.node_count):
                if tree.feature[i] < 0:
                    v = tree.value[i]
                    lines.append("leaf " + (fmt_real(v[1]) if len(v) == 2 else _row(v)))
                else:
                    lines.append(f"node {tree.feature[i]} {fmt_real(tree.threshold[i])} "
                                 f"{tree.left[i]} {tree.right[i]}")
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    return lines


def save_model(model, path: PathLike, encoding: str | None = None) -> None:
    _write_lines(path, format_model(model, encoding))


class _Cursor:
    def __init__(self, lines):
        self.lines = lines
        self.i = 1

    def next(self) -> tuple[int, list[str]]:
        if self.i >= len(self.lines):
            raise FormatError("unexpected end of file", len(self.lines) + 1)
        self.i += 1
        return self.i, self.lines[self.i - 1].split(" ")

    def reals(self, tokens, lineno, expected=None) -> np.ndarray:
        try:
            out = np.array([float(t) for t in tokens])
        except ValueError:
            raise FormatError("expected decimal numbers", lineno) from None
        if expected is not None and len(out) != expected:
            raise FormatError(f"expected {expected} values, got {len(out)}", lineno)
        return out

    def matrix(self, name):
        lineno, tok = self.next()
        if len(tok) != 4 or tok[:2] != ["matrix", name]:
            raise FormatError(f"expected 'matrix {name} <rows> <cols>'", lineno)
        rows, cols = int(tok[2]), int(tok[3])
        return np.array([self.reals(self.next()[1], self.i, cols) for _ in range(rows)]).reshape(rows, cols)

    def vector(self, name):
        lineno, tok = self.next()
        if len(tok) != 3 or tok[:2] != ["vector", name]:
            raise FormatError(f"expected 'vector {name} <len>'", lineno)
        n = int(tok[2])
        return self.reals(self.next()[1], self.i, n)


def _parse_classes(text: str) -> np.ndarray:
    items = text.split(",")
    try:
        return np.array([int(c) for c in items])
    except ValueError:
        return np.array(items)


def parse_model(lines: list[str]):
    """Return ``(model, encoding)``; encoding is ``None`` when not recorded."""
    if not lines:
        raise FormatError("empty file", 1)
    h = parse_header(lines[0], "pufmodel v1")
    try:
        kind, dim = h["kind"], int(h["dim"])
    except (KeyError, ValueError):
        raise FormatError("header needs kind=<lr|rf|nn> and dim=<d>", 1) from None
    classes = _parse_classes(h.get("classes", "-1,1"))
    K = len(classes)
    cur = _Cursor(lines)
    if kind == "lr":
        model = LogisticRegression()
        if K == 2:
            lineno, tok = cur.next()
            if tok[0] != "weights":
                raise FormatError("expected 'weights' line", lineno)
            params = cur.reals(tok[1:], lineno, dim + 1)
            model.coef_, model.intercept_ = params[:-1], float(params[-1])
        else:
            model.coef_ = cur.matrix("W")
            model.intercept_ = cur.vector("b")
    elif kind == "nn":
        model = NeuralNetwork()
        W1, b1 = cur.matrix("W1"), cur.vector("b1")
        W2, b2 = cur.matrix("W2"), cur.vector("b2")
        model.coefs_, model.intercepts_ = [W1, W2], [b1, b2]
    elif kind == "rf":
        model = RandomForest()
        lineno, tok = cur.next()
        if tok[0] != "trees":
            raise FormatError("expected 'trees <count>'", lineno)
        model.estimators_ = []
        for _ in range(int(tok[1])):
            lineno, tok = cur.next()
            if tok[0] != "tree":
                raise FormatError("expected 'tree <node_count>'", lineno)
            n = int(tok[1])
            feature = np.full(n, -1, dtype=np.intp)
            threshold = np.zeros(n)
            left = np.full(n, -1, dtype=np.intp)
            right = np.full(n, -1, dtype=np.intp)
            value = np.zeros((n, K))
            for i in range(n):
                lineno, tok = cur.next()
                if tok[0] == "node" and len(tok) == 5:
                    feature[i], threshold[i], left[i], right[i] = int(tok[1]), float(tok[2]), int(tok[3]), int(tok[4])
                elif tok[0] == "leaf":
                    v = cur.reals(tok[1:], lineno)
                    value[i] = [1.0 - v[0], v[0]] if K == 2 and len(v) == 1 else v
                else:
                    raise FormatError("expected 'node <feat> <thresh> <left> <right>' or 'leaf <p>'", lineno)
            model.estimators_.append(Tree(feature, threshold, left, right, value))
    else:
        raise FormatError(f"unknown model kind {kind!r}", 1)
    if cur.i != len(lines):
        raise FormatError("trailing content after model parameters", cur.i + 1)
    model.classes_ = classes
    model.n_features_in_ = dim
    return model, h.get("encoding")


def load_model(path: PathLike):
    return parse_model(_read_lines(path))


# -- discriminator datasets ----------------------------------------------------

def format_disc(vectors: np.ndarray, labels: np.ndarray) -> list[str]:
    vectors = np.asarray(vectors)
    lines = [f"pufdisc v1 width={vectors.shape[1]} count={len(vectors)}"]
    for v, y in zip(vectors, labels):
        lines.append(",".join("+1" if x > 0 else "-1" for x in v) + (" authentic" if y > 0 else " cloned"))
    return lines


def write_disc(vectors, labels, path: PathLike) -> None:
    _write_lines(path, format_disc(vectors, labels))


def read_disc(path: PathLike) -> tuple[np.ndarray, np.ndarray]:
    lines = _read_lines(path)
    if not lines:
        raise FormatError("empty file", 1)
    h = parse_header(lines[0], "pufdisc v1")
    try:
        width, count = int(h["width"]), int(h["count"])
    except (KeyError, ValueError):
        raise FormatError("header needs width=<w> and count=<m>", 1) from None
    body = lines[1:]
    if len(body) != count:
        raise FormatError(f"header declares count={count} but the file has {len(body)} data lines", len(lines))
    vectors = np.empty((count, width), dtype=np.int8)
    labels = np.empty(count, dtype=np.int8)
    for i, line in enumerate(body):
        vec, sep, label = line.partition(" ")
        items = vec.split(",")
        if not sep or len(items) != width or set(items) - {"+1", "-1"}:
            raise FormatError(f"expected {width} comma-separated +1/-1 values and a label", i + 2)
        if label not in ("authentic", "cloned"):
            raise FormatError(f"label must be 'authentic' or 'cloned', got {label!r}", i + 2)
        vectors[i] = [1 if x == "+1" else -1 for x in items]
        labels[i] = 1 if label == "authentic" else -1
    return vectors, labels
