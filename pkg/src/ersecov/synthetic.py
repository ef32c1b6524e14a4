"""One-factor Gaussian markets with strictly positive loadings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ReturnsPanel


@dataclass(frozen=True)
class OneFactorMarket:
    """``r_t = mu + beta * f_t + e_t`` with ``f_t ~ N(0, sigma_m^2)``.

    All loadings are positive, so every population correlation is positive.
    """

    betas: np.ndarray
    idio_vol: np.ndarray
    market_vol: float = 4.5
    mean_return: float = 1.0

    @property
    def n(self) -> int:
        return len(self.betas)

    @property
    def covariance(self) -> np.ndarray:
        b = self.betas
        return self.market_vol**2 * np.outer(b, b) + np.diag(self.idio_vol**2)

    def simulate(self, T: int, rng: np.random.Generator, name: str = "synthetic") -> ReturnsPanel:
        f = rng.normal(0.0, self.market_vol, size=T)
        e = rng.normal(size=(T, self.n)) * self.idio_vol
        r = self.mean_return + np.outer(f, self.betas) + e
        dates = [f"{1969 + (6 + k) // 12:04d}{(6 + k) % 12 + 1:02d}" for k in range(T)]
        assets = [f"A{j:03d}" for j in range(self.n)]
        return ReturnsPanel(dates, assets, r, provenance=f"one-factor market n={self.n} T={T}",
                            name=name)


def random_market(n: int, rng: np.random.Generator, beta_range=(0.5, 1.5),
                  idio_range=(1.5, 3.5), market_vol: float = 4.5) -> OneFactorMarket:
    betas = rng.uniform(*beta_range, size=n)
    idio = rng.uniform(*idio_range, size=n)
    return OneFactorMarket(betas, idio, market_vol=market_vol)
