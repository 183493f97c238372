"""MLP cost regressors on normalized features and targets.

These are plain dense networks with a single identity output unit and
squared-error loss, trained by the same engine that runs the profiled
workloads.  Inputs and the target are expected min-max normalized, so
the plain RMSE recorded per epoch IS the normalized RMSE (the target
range is 1 by construction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tinynn
from ..workload import Optimizer


@dataclass(frozen=True, eq=False)
class MLPRegressor:
    """A fitted regressor: the network, its shape, and its fit trace."""

    network: tinynn.Network
    hidden: tuple[int, ...]
    param_count: int
    trace: tuple[float, ...]

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return self.network.forward(x)[:, 0]

    def to_dict(self) -> dict:
        return {
            "widths": list(self.hidden),
            "weights": self.network.to_dict(),
            "trace": list(self.trace),
        }

    @staticmethod
    def from_dict(d: dict) -> "MLPRegressor":
        net = tinynn.Network.from_dict(d["weights"])
        return MLPRegressor(
            network=net, hidden=tuple(d["widths"]),
            param_count=net.param_count,
            trace=tuple(d.get("trace", ())),
        )


def fit_mlp_regressor(x: np.ndarray, y: np.ndarray, *,
                      hidden: tuple[int, ...],
                      optimizer: Optimizer = Optimizer.ADAM,
                      learning_rate: float = 0.005,
                      epochs: int = 200, batch_size: int = 32, seed: int = 0,
                      validation: tuple[np.ndarray, np.ndarray] | None = None,
                      ) -> MLPRegressor:
    """Train a dense regressor; the trace holds per-epoch validation RMSE.

    The trace is computed on `validation` when given, else on the
    training rows; with normalized targets it reads as nRMSE directly.
    Divergence propagates as the engine's error (a failed fit).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise ValueError("x must be 2-d and row-aligned with y")
    vx, vy = (x, y) if validation is None else (
        np.asarray(validation[0], dtype=np.float64),
        np.asarray(validation[1], dtype=np.float64).reshape(-1, 1))

    net = tinynn.build_regressor_network(x.shape[1], tuple(hidden), seed)
    opt = tinynn.OptimizerState(optimizer, learning_rate)
    bs = min(batch_size, x.shape[0])
    trace = []
    for epoch in range(epochs):
        tinynn.train_epochs(net, opt, x, y, 1, bs, shuffle_seed=seed,
                            epoch_offset=epoch, loss="mse")
        mse, _ = tinynn.evaluate(net, vx, vy, loss="mse")
        trace.append(float(np.sqrt(mse)))
    if epochs == 0:
        mse, _ = tinynn.evaluate(net, vx, vy, loss="mse")
        trace.append(float(np.sqrt(mse)))
    if not np.isfinite(trace[-1]):
        raise tinynn.DivergedError("regressor fit diverged")
    return MLPRegressor(network=net, hidden=tuple(hidden),
                        param_count=net.param_count, trace=tuple(trace))
