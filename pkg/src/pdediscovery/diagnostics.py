"""Posterior summaries and the pre-run subsample-size calculus."""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np


class DiagnosticsError(ValueError):
    pass


@dataclass
class TermSummary:
    component: str
    term: str
    inclusion: float
    mean: float
    hpd_lo: float
    hpd_hi: float
    n_included: int


@dataclass
class DiscoverySummary:
    threshold: float
    terms: list  # TermSummary for every (component, term)
    equations: dict  # component -> rendered string
    metadata: dict = field(default_factory=dict)

    def selected(self, component=None):
        return [t for t in self.terms if t.inclusion > self.threshold and (component is None or t.component == component)]

    def support(self, component):
        return {t.term for t in self.selected(component)}

    def coefficient(self, component, term):
        for t in self.terms:
            if t.component == component and t.term == term:
                return t.mean
        raise KeyError((component, term))


def inclusion_probabilities(samples):
    """Mean of ``gamma`` over retained iterations, ``N x D``."""
    g = np.asarray(samples.gamma)[samples.retained()]
    if len(g) == 0:
        raise DiagnosticsError("no retained iterations to summarise")
    return g.mean(axis=0)


def hpd_interval(draws, level=0.95):
    """Shortest interval holding ``ceil(level * n)`` of the sorted draws."""
    x = np.sort(np.asarray(draws, dtype=float).ravel())
    n = len(x)
    if n < 2:
        raise DiagnosticsError("need at least two draws for an HPD interval")
    if not 0 < level <= 1:
        raise DiagnosticsError("level must lie in (0, 1]")
    k = max(math.ceil(level * n), 1)
    widths = x[k - 1 :] - x[: n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


def equal_tailed_interval(draws, level=0.95):
    x = np.asarray(draws, dtype=float).ravel()
    a = (1 - level) / 2
    return float(np.quantile(x, a)), float(np.quantile(x, 1 - a))


def format_sig(x, digits=3):
    """Round to ``digits`` significant figures and print without exponent noise."""
    if x == 0 or not np.isfinite(x):
        return "0" if x == 0 else str(x)
    r = float(f"{x:.{digits}g}")
    mag = math.floor(math.log10(abs(r)))
    decimals = max(digits - 1 - mag, 0)
    return f"{r:.{decimals}f}"


def render_equation(lhs, coefs):
    """``[(term, coef), ...]`` -> ``"u_t = -0.994 u u_x + 0.098 u_xx"``."""
    if not coefs:
        return f"{lhs} = 0"
    parts = []
    for i, (name, c) in enumerate(coefs):
        s = format_sig(c)
        neg = s.startswith("-")
        s = s.lstrip("-")
        if i == 0:
            parts.append(f"{'-' if neg else ''}{s} {name}")
        else:
            parts.append(f"{'-' if neg else '+'} {s} {name}")
    return f"{lhs} = " + " ".join(parts)


def equation_summary(samples, lib=None, threshold=0.5, level=0.95, lhs_names=None):
    """Select terms by inclusion probability and summarise their coefficients.

    Coefficient statistics use only the retained draws in which the term was
    included. Terms never included get NaN statistics.
    """
    term_names = list(lib.names) if lib is not None else list(samples.term_names)
    comps = list(lib.component_names) if lib is not None else list(samples.component_names)
    probs = inclusion_probabilities(samples)
    r = samples.retained()
    M = np.asarray(samples.M)[r]
    G = np.asarray(samples.gamma)[r].astype(bool)
    lhs_names = lhs_names or [f"{c}_t" for c in comps]

    terms, equations = [], {}
    for n, comp in enumerate(comps):
        chosen = []
        for d, name in enumerate(term_names):
            draws = M[G[:, n, d], n, d]
            if len(draws) >= 2:
                mean = float(draws.mean())
                lo, hi = hpd_interval(draws, level)
            elif len(draws) == 1:
                mean = lo = hi = float(draws[0])
            else:
                mean = lo = hi = float("nan")
            p = float(probs[n, d])
            terms.append(TermSummary(comp, name, p, mean, lo, hi, int(len(draws))))
            if p > threshold:
                chosen.append((name, mean))
        if not chosen:
            warnings.warn(f"no term of {comp} exceeds inclusion threshold {threshold}")
        equations[comp] = render_equation(lhs_names[n], chosen)
    meta = {"iterations": len(samples), "burn_in": samples.burn_in, "retained": int(G.shape[0])}
    return DiscoverySummary(threshold, terms, equations, meta)


def subsample_size(g, beta, R_target=1.0, min_size=None):
    """``ceil(2 (log(R / sqrt(g + 1)) / log(beta) + 1))``, floored at ``min_size``."""
    if not 0 < beta < 1:
        raise DiagnosticsError("beta must lie in (0, 1)")
    if g <= 0 or R_target <= 0:
        raise DiagnosticsError("g and R_target must be positive")
    raw = 2.0 * (math.log(R_target / math.sqrt(g + 1.0)) / math.log(beta) + 1.0)
    n = math.ceil(raw - 1e-9)
    if min_size is not None:
        n = max(n, int(min_size))
    return int(n)


def choose_beta(condition_number):
    if condition_number > 1e4:
        return 0.9
    if condition_number > 1e3:
        return 0.95
    return 0.99


def same_order_of_magnitude(a, b):
    return abs(math.log10(a) - math.log10(b)) <= 1.0
