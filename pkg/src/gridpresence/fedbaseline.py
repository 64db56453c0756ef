"""Federated-averaged logistic regression over the non-fiber clients.

Row-wise detector on the leak-safe feature subset: standardized local link
indicators, phase proxies, and their neighbor-averaged counterparts.
Training and evaluation are restricted to active rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import rng
from .config import FedParams
from .dataset_io import Dataset

LOCAL_FEATURES = ("SNR", "C_db", "PER", "L_ewma", "phase_sin", "phase_cos", "dphase")
FEATURE_COLUMNS = LOCAL_FEATURES + tuple(f"avg_neighbor_{c}" for c in LOCAL_FEATURES)
BLACKLIST = ("shadow_db", "interf_db", "tx_count", "L")


@dataclass
class ClientData:
    node_id: int
    x: np.ndarray  # (rows, len(FEATURE_COLUMNS))
    y: np.ndarray  # (rows,) in {0, 1}


@dataclass
class FedModel:
    weights: np.ndarray
    bias: float
    feature_columns: tuple[str, ...] = FEATURE_COLUMNS

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return _sigmoid(x @ self.weights + self.bias)


def build_client_datasets(
    dataset: Dataset, standardizer=None
) -> dict[str, dict[int, ClientData]]:
    """Active-row feature matrices per split for the non-fiber clients."""
    if standardizer is None:
        standardizer = dataset.standardizer()
    nodes = dataset.nodes()
    client_ids = [
        int(r["id"]) for _, r in nodes.iterrows() if r["tech"] != "Fiber"
    ]
    out: dict[str, dict[int, ClientData]] = {}
    for split in rng.SPLITS:
        per_client = {}
        for node_id in client_ids:
            table = dataset.node_table(node_id, split)
            active = table[table["tx_count"] > 0].reset_index(drop=True)
            x = np.empty((len(active), len(FEATURE_COLUMNS)), dtype=np.float64)
            for j, column in enumerate(FEATURE_COLUMNS):
                if column == "C_db":
                    raw = 20.0 * np.log10(active["C"].to_numpy(dtype=np.float64))
                else:
                    raw = active[column].to_numpy(dtype=np.float64)
                mean, std = standardizer.mean_std(node_id, column)
                x[:, j] = (raw - mean) / std
            y = active["attack_label"].to_numpy(dtype=np.float64)
            per_client[node_id] = ClientData(node_id=node_id, x=x, y=y)
        out[split] = per_client
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def class_weights(y: np.ndarray) -> np.ndarray:
    """Balanced per-sample weights; uniform if the client is one-class."""
    n = len(y)
    n_pos = float(y.sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        return np.ones(n)
    w = np.where(y > 0, n / (2.0 * n_pos), n / (2.0 * n_neg))
    return w


def logistic_loss_and_grad(
    weights: np.ndarray,
    bias: float,
    x: np.ndarray,
    y: np.ndarray,
    sample_weights: np.ndarray,
) -> tuple[float, np.ndarray, float]:
    """Weighted-mean logistic loss and its gradient (weights, bias)."""
    z = x @ weights + bias
    p = _sigmoid(z)
    wsum = float(sample_weights.sum())
    # log-loss via logaddexp for numerical stability
    nll = np.logaddexp(0.0, z) - y * z
    loss = float((sample_weights * nll).sum() / wsum)
    residual = sample_weights * (p - y)
    grad_w = x.T @ residual / wsum
    grad_b = float(residual.sum() / wsum)
    return loss, grad_w, grad_b


def _local_train(
    client: ClientData,
    weights: np.ndarray,
    bias: float,
    params: FedParams,
    stream: np.random.Generator,
) -> tuple[np.ndarray, float]:
    w = weights.copy()
    b = bias
    sw = class_weights(client.y)
    n = len(client.y)
    for _ in range(params.local_epochs):
        order = stream.permutation(n)
        for start in range(0, n, params.batch_size):
            idx = order[start : start + params.batch_size]
            _, gw, gb = logistic_loss_and_grad(
                w, b, client.x[idx], client.y[idx], sw[idx]
            )
            w -= params.learning_rate * gw
            b -= params.learning_rate * gb
    return w, b


def fedavg_train(
    clients: dict[int, ClientData], params: FedParams, train_seed: int | None = None
) -> FedModel:
    """Synchronous federated averaging weighted by client row counts."""
    if train_seed is None:
        train_seed = params.train_seed
    total_pos = sum(c.y.sum() for c in clients.values())
    total_neg = sum(len(c.y) - c.y.sum() for c in clients.values())
    if total_pos == 0 or total_neg == 0:
        raise ValueError("training data must contain both classes overall")
    dim = next(iter(clients.values())).x.shape[1]
    weights = np.zeros(dim)
    bias = 0.0
    counts = {i: len(c.y) for i, c in clients.items()}
    total = sum(counts.values())
    for rnd in range(params.rounds):
        acc_w = np.zeros(dim)
        acc_b = 0.0
        for node_id in sorted(clients):
            stream = rng.substream("fed", train_seed, rnd, node_id)
            w, b = _local_train(clients[node_id], weights, bias, params, stream)
            acc_w += counts[node_id] * w
            acc_b += counts[node_id] * b
        weights = acc_w / total
        bias = acc_b / total
    return FedModel(weights=weights, bias=bias)


def evaluate_clients(
    model: FedModel, clients: dict[int, ClientData], threshold: float = 0.5
) -> tuple[pd.DataFrame, dict[str, float]]:
    """Per-client precision/recall/F1/accuracy plus the unweighted macro."""
    rows = []
    for node_id in sorted(clients):
        client = clients[node_id]
        pred = (model.predict_proba(client.x) >= threshold).astype(np.int64)
        y = client.y.astype(np.int64)
        tp = int(((pred == 1) & (y == 1)).sum())
        fp = int(((pred == 1) & (y == 0)).sum())
        fn = int(((pred == 0) & (y == 1)).sum())
        tn = int(((pred == 0) & (y == 0)).sum())
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        accuracy = (tp + tn) / max(1, len(y))
        rows.append(
            {
                "client": node_id,
                "rows": len(y),
                "positives": tp + fn,
                "no_positives": tp + fn == 0,
                "precision": precision,
                "recall": recall,
                "f1": f1,
                "accuracy": accuracy,
            }
        )
    table = pd.DataFrame(rows)
    macro = {
        metric: float(table[metric].mean())
        for metric in ("precision", "recall", "f1", "accuracy")
    }
    return table, macro
