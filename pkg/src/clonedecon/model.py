"""Observed-data and parameter containers, likelihood and prior densities.

The sampling model: read counts for pair k in sample t are multinomial
over the 8 categories with probabilities p_tkg = v_case(g) * ptilde_tkg,
where ptilde mixes the subclone match probabilities with a background
noise term.  Coverage-case rates v are treated as known constants
estimated empirically from the data.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from .genotypes import CATEGORY_CASE, CODE_LOCUS1_DOSE, MATCH_TABLE, N_CODES

DEFAULT_LADDER = (4.5, 3.2, 2.5, 2.0, 1.7, 1.5, 1.35, 1.2, 1.1, 1.0)


class DataError(ValueError):
    """Invalid observed-data input (malformed file, inconsistent counts)."""


@dataclass(frozen=True)
class ReadCountTensor:
    """Counts n[t, k, g] over samples x pairs x 8 read categories.

    The trailing n_pseudo rows are single-variant pseudo-pairs appended by
    augment_snvs; they carry counts only in the right-missing categories.
    """

    counts: np.ndarray              # (T, K, 8) int64
    sample_ids: tuple[str, ...]
    pair_ids: tuple[str, ...]
    n_pseudo: int = 0

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 3 or counts.shape[2] != 8:
            raise DataError(f"counts must be (T, K, 8), got {counts.shape}")
        if counts.shape[0] < 1 or counts.shape[1] < 1:
            raise DataError("need at least one sample and one pair")
        if (counts < 0).any():
            raise DataError("negative read count")
        if len(self.sample_ids) != counts.shape[0]:
            raise DataError("sample_ids length does not match counts")
        if len(self.pair_ids) != counts.shape[1]:
            raise DataError("pair_ids length does not match counts")
        if not 0 <= self.n_pseudo <= counts.shape[1]:
            raise DataError("n_pseudo out of range")

    @property
    def n_samples(self) -> int:
        return self.counts.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.counts.shape[1]

    @property
    def totals(self) -> np.ndarray:
        """N[t, k] = sum_g n[t, k, g]."""
        return self.counts.sum(axis=2)

    def empirical_missingness(self) -> np.ndarray:
        """v_hat[t, k, case] = group count / N, uniform over cases when N=0."""
        totals = self.totals.astype(float)
        v = np.empty(totals.shape + (3,))
        v[..., 0] = self.counts[..., :4].sum(axis=2)
        v[..., 1] = self.counts[..., 4:6].sum(axis=2)
        v[..., 2] = self.counts[..., 6:8].sum(axis=2)
        safe = np.where(totals > 0, totals, 1.0)
        v /= safe[..., None]
        v[totals == 0] = 1.0 / 3.0
        return v


@dataclass(frozen=True)
class Hyperparameters:
    """Prior and sampler settings; defaults follow the reference analysis."""

    alpha: float = 4.0          # Beta mass on the reference-genotype slot
    gamma: float = 2.0          # shared Dirichlet weight on non-reference codes
    d: float = 0.5              # Gamma shape for subclone abundances
    d0: float = 0.03            # Gamma shape for the background abundance
    d1: float = 1.0             # Gamma shape for noise weights (2*d1 one-locus)
    r: float = 0.4              # geometric prior on the number of subclones
    cmin: int = 1
    cmax: int = 10
    b: float | None = None      # training fraction; None = calibrate from data
    d1star: float = 1.0         # Beta(d1star, d2star) prior on the normal weight
    d2star: float = 1.0
    theta_step: float = 0.2     # log-scale random-walk sd for abundances
    rho_step: float = 0.1       # log-scale random-walk sd for noise weights
    wstar_step: float = 0.2     # logit-scale random-walk sd for the normal weight
    ladder: tuple[float, ...] = DEFAULT_LADDER
    parallel_prob: float = 0.9  # probability of a parallel step vs a swap step
    sweeps_per_move: int = 5    # training sweeps between model-indicator moves
    iters: int = 30_000
    burnin: int = 10_000
    thin: int = 10

    def __post_init__(self):
        for name in ("alpha", "gamma", "d", "d0", "d1", "r",
                     "d1star", "d2star", "theta_step", "rho_step", "wstar_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.r < 1:
            raise ValueError("r must be in (0, 1)")
        if self.b is not None and not 0 < self.b < 1:
            raise ValueError("b must be in (0, 1)")
        if self.cmin < 1 or self.cmin > self.cmax:
            raise ValueError("need 1 <= cmin <= cmax")
        if not 0 < self.parallel_prob < 1:
            raise ValueError("parallel_prob must be in (0, 1)")
        ladder = tuple(float(x) for x in self.ladder)
        if ladder[-1] != 1.0 or any(a <= b for a, b in zip(ladder[1:], ladder[:-1])):
            raise ValueError("temperature ladder must decrease to 1")
        object.__setattr__(self, "ladder", ladder)
        if self.burnin >= self.iters and self.iters > 0:
            raise ValueError("burnin must be smaller than iters")
        if self.thin < 1 or self.sweeps_per_move < 1:
            raise ValueError("thin and sweeps_per_move must be >= 1")

    def with_overrides(self, **kwargs) -> "Hyperparameters":
        return replace(self, **kwargs)


@dataclass
class ModelState:
    """Parameters for a fixed number of subclones C.

    genotypes holds codes 1..10 (K x C); pi rows are the per-subclone code
    probabilities; theta are unscaled abundances with column 0 the
    background; rho_star are unscaled noise weights.  In purity mode wstar
    holds the per-sample normal-subclone weight and the theta-derived
    weights are rescaled by (1 - wstar).
    """

    genotypes: np.ndarray       # (K, C) int, codes 1..10
    pi: np.ndarray              # (C, 10)
    theta: np.ndarray           # (T, C+1), column 0 = background
    rho_star: np.ndarray        # (8,)
    wstar: np.ndarray | None = None   # (T,) in purity mode

    def __post_init__(self):
        self.genotypes = np.asarray(self.genotypes, dtype=np.int64)
        self.pi = np.asarray(self.pi, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        self.rho_star = np.asarray(self.rho_star, dtype=float)
        if self.genotypes.ndim != 2:
            raise ValueError("genotypes must be K x C")
        if self.genotypes.min() < 1 or self.genotypes.max() > N_CODES:
            raise ValueError("genotype codes must be in 1..10")
        if self.pi.shape != (self.n_subclones, N_CODES):
            raise ValueError("pi must be C x 10")
        if self.theta.shape[1] != self.n_subclones + 1:
            raise ValueError("theta must be T x (C+1)")
        if self.rho_star.shape != (8,):
            raise ValueError("rho_star must have 8 entries")
        if self.wstar is not None:
            self.wstar = np.asarray(self.wstar, dtype=float)
            if self.wstar.shape != (self.n_samples,):
                raise ValueError("wstar must have one entry per sample")

    @property
    def n_subclones(self) -> int:
        return self.genotypes.shape[1]

    @property
    def n_samples(self) -> int:
        return self.theta.shape[0]

    @property
    def purity_mode(self) -> bool:
        return self.wstar is not None

    def weights(self) -> np.ndarray:
        """Population frequencies w[t, c] for c = 0..C (background first).

        In purity mode the simplex is scaled so that the weights plus
        wstar sum to one.
        """
        w = self.theta / self.theta.sum(axis=1, keepdims=True)
        if self.purity_mode:
            w = w * (1.0 - self.wstar)[:, None]
        return w

    def rho(self) -> np.ndarray:
        """Noise category weights, normalized within each coverage case."""
        rho = self.rho_star.copy()
        rho[:4] /= rho[:4].sum()
        rho[4:6] /= rho[4:6].sum()
        rho[6:8] /= rho[6:8].sum()
        return rho


def mixture_probs(state: ModelState) -> np.ndarray:
    """Conditional read-category probabilities ptilde[t, k, g].

    Mixes each subclone's match probability by its weight and adds the
    background noise term (and, in purity mode, the normal subclone).
    Within each coverage case the 8 entries sum to 1 groupwise.
    """
    w = state.weights()
    rho = state.rho()
    # match[k, g, c] = A(h_g, z_kc)
    match = MATCH_TABLE[:, state.genotypes - 1].transpose(1, 0, 2)
    ptilde = np.einsum("kgc,tc->tkg", match, w[:, 1:])
    ptilde += w[:, :1, None] * rho[None, None, :]
    if state.purity_mode:
        ptilde += state.wstar[:, None, None] * MATCH_TABLE[None, None, :, 0]
    return ptilde


def category_probs(ptilde: np.ndarray, missingness: np.ndarray) -> np.ndarray:
    """Unconditional probabilities p[t, k, g] = v[t, k, case(g)] * ptilde."""
    return ptilde * missingness[..., CATEGORY_CASE]


def log_likelihood(data: ReadCountTensor, state: ModelState,
                   fraction: float = 1.0, temper: float = 1.0) -> float:
    """(fraction/temper) * sum n log p, with 0 log 0 = 0 and -inf on support holes.

    Multinomial coefficients are dropped throughout: only likelihood
    kernels and ratios are ever needed, and fractional counts from the
    training/test split make the coefficient meaningless anyway.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    if temper < 1:
        raise ValueError("temper must be >= 1")
    p = category_probs(mixture_probs(state), data.empirical_missingness())
    n = data.counts
    if (p[n > 0] == 0).any():
        return float("-inf")
    with np.errstate(divide="ignore"):
        logp = np.where(n > 0, np.log(np.where(p > 0, p, 1.0)), 0.0)
    return fraction / temper * float((n * logp).sum())


def _log_beta_pdf(x, a, b):
    if not 0 < x < 1:
        return float("-inf")
    return ((a - 1) * np.log(x) + (b - 1) * np.log1p(-x)
            + gammaln(a + b) - gammaln(a) - gammaln(b))


def _log_dirichlet_pdf(x, alphas):
    x = np.asarray(x, dtype=float)
    if (x <= 0).any() or abs(x.sum() - 1.0) > 1e-9:
        return float("-inf")
    alphas = np.asarray(alphas, dtype=float)
    return float(((alphas - 1) * np.log(x)).sum()
                 + gammaln(alphas.sum()) - gammaln(alphas).sum())


def _log_gamma_pdf(x, shape):
    x = np.asarray(x, dtype=float)
    if (x <= 0).any():
        return float("-inf")
    return float(((shape - 1) * np.log(x) - x - gammaln(shape)).sum())


def log_prior(state: ModelState, hp: Hyperparameters) -> float:
    """Joint log prior density of a state, including the geometric term for C.

    Factors: Beta-Dirichlet on each pi row, categorical for the genotype
    entries given pi, Gamma on abundances and unscaled noise weights,
    geometric on C, and Beta on the normal weight in purity mode.
    """
    C = state.n_subclones
    total = C * np.log1p(-hp.r) + np.log(hp.r)
    for c in range(C):
        p1 = state.pi[c, 0]
        total += _log_beta_pdf(p1, 1.0, hp.alpha / C)
        if p1 >= 1.0:
            return float("-inf")
        tilde = state.pi[c, 1:] / (1.0 - p1)
        total += _log_dirichlet_pdf(tilde, np.full(N_CODES - 1, hp.gamma))
        if not np.isfinite(total):
            return float("-inf")
        counts = np.bincount(state.genotypes[:, c] - 1, minlength=N_CODES)
        with np.errstate(divide="ignore"):
            logpi = np.log(state.pi[c])
        if np.isneginf(logpi[counts > 0]).any():
            return float("-inf")
        total += float((counts * np.where(counts > 0, logpi, 0.0)).sum())
    total += _log_gamma_pdf(state.theta[:, 0], hp.d0)
    total += _log_gamma_pdf(state.theta[:, 1:], hp.d)
    total += _log_gamma_pdf(state.rho_star[:4], hp.d1)
    total += _log_gamma_pdf(state.rho_star[4:], 2 * hp.d1)
    if state.purity_mode:
        for ws in state.wstar:
            total += _log_beta_pdf(ws, hp.d1star, hp.d2star)
    return float(total)


def augment_snvs(data: ReadCountTensor, snv_ids, snv_totals, snv_variants) -> ReadCountTensor:
    """Append unpaired variants as pseudo-pairs observed at one locus.

    Variant reads land in category "1-" and reference reads in "0-", so
    every pseudo-row keeps sum_g n = N and its empirical coverage-case
    rates are exactly (0, 0, 1).
    """
    totals = np.asarray(snv_totals, dtype=np.int64)
    variants = np.asarray(snv_variants, dtype=np.int64)
    if totals.shape != (data.n_samples, len(snv_ids)) or variants.shape != totals.shape:
        raise DataError("snv arrays must be (T, S) matching snv_ids")
    if (variants < 0).any() or (totals < 0).any():
        raise DataError("negative SNV count")
    if (variants > totals).any():
        raise DataError("variant reads exceed total reads for some SNV")
    S = len(snv_ids)
    extra = np.zeros((data.n_samples, S, 8), dtype=np.int64)
    extra[:, :, 6] = totals - variants
    extra[:, :, 7] = variants
    return ReadCountTensor(
        counts=np.concatenate([data.counts, extra], axis=1),
        sample_ids=data.sample_ids,
        pair_ids=data.pair_ids + tuple(snv_ids),
        n_pseudo=data.n_pseudo + S,
    )


def split_genotypes(genotypes: np.ndarray, n_pseudo: int):
    """Split an augmented genotype matrix into pair codes and SNV doses.

    The trailing n_pseudo rows are reduced to the observed locus only,
    giving 0 (wild-type), 0.5 (het) or 1 (hom variant) per subclone.
    """
    genotypes = np.asarray(genotypes)
    if not 0 <= n_pseudo <= genotypes.shape[0]:
        raise ValueError("n_pseudo out of range")
    k_pairs = genotypes.shape[0] - n_pseudo
    z_pairs = genotypes[:k_pairs]
    z_snv = CODE_LOCUS1_DOSE[genotypes[k_pairs:] - 1]
    return z_pairs, z_snv
