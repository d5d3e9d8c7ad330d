"""Benchmark presets, one per results table, numbered in document order.

Every preset spells out the full experiment so a change to library defaults
can never silently alter a preset's meaning.  Tables 1-12 are the Gaussian-
method grids (4 then 7 nodes, strong then weak signal, three noise laws at
n up to 2000); tables 13-24 add the distribution-free method at smaller n,
with quartic inner polynomials in 19-24.
"""

from __future__ import annotations

from pnlrank.data import BasisSpec
from pnlrank.hsic import HsicConfig
from pnlrank.ordering import OrderConfig
from pnlrank.simulation import (
    GAUSSIAN,
    GUMBEL,
    HIGH_SNR,
    LOGISTIC,
    LOW_SNR,
    ExperimentSpec,
    NoiseDistribution,
    SemSpec,
)

_RANKG_N = (100, 500, 1000, 1500, 2000)
_RANKS_N = (100, 150, 200, 250, 300)
_NOISES = (GAUSSIAN, GUMBEL, LOGISTIC)


def _spec(table, m, snr, noise, methods, n_values, degree):
    return ExperimentSpec(
        sem=SemSpec(
            m=m,
            edge_prob=None,
            inner_degree=degree,
            coef_range=snr,
            noise=NoiseDistribution(noise),
            seed=0,
        ),
        n_values=n_values,
        methods=methods,
        replications=100,
        order_cfg=OrderConfig(
            method=methods[0],
            basis=BasisSpec(degree),
            hsic=HsicConfig(1.0, 1.0),
            lam=1e-3 if "ranks" in methods else None,
            y0_policy="zero",
        ),
        base_seed=1000 + table,
    )


def _build() -> dict[str, ExperimentSpec]:
    presets = {}
    table = 1
    for m in (4, 7):
        for snr in (HIGH_SNR, LOW_SNR):
            for noise in _NOISES:
                presets[f"table{table}"] = _spec(
                    table, m, snr, noise, ("rankg",), _RANKG_N, 2
                )
                table += 1
    for degree in (2, 4):
        for snr in (HIGH_SNR, LOW_SNR):
            for noise in _NOISES:
                presets[f"table{table}"] = _spec(
                    table, 4, snr, noise, ("ranks", "rankg"), _RANKS_N, degree
                )
                table += 1
    return presets


PRESETS = _build()


def get_preset(name: str) -> ExperimentSpec:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS, key=lambda s: int(s.removeprefix("table"))))
        raise KeyError(f"unknown preset {name!r}; known: {known}") from None
