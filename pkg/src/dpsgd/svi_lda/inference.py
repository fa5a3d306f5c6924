"""The variational core: E-step, natural gradient, perplexity.

Everything here is deterministic given its inputs; stochasticity lives
in the runner that picks document minibatches.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln, psi, xlogy

from ..errors import ConfigurationError, NumericFaultError
from .corpus import Corpus, Document
from .model import DocState, LdaModel

E_STEP_TOL = 1e-4
E_STEP_MAX_ITERS = 100
_PHI_NORM_GUARD = 1e-100


def dirichlet_expectation(param) -> np.ndarray:
    """E[log x] for x ~ Dirichlet(param); rows are treated independently.

    For a vector returns psi(param) - psi(sum); for a matrix applies the
    same row by row.
    """
    arr = np.asarray(param, dtype=float)
    if arr.ndim not in (1, 2) or arr.size == 0:
        raise ConfigurationError(
            f"dirichlet_expectation expects a nonempty vector or matrix, "
            f"got shape {arr.shape}"
        )
    if not (arr > 0).all():
        bad = tuple(int(i) for i in np.argwhere(~(arr > 0))[0])
        raise NumericFaultError(
            f"dirichlet_expectation requires positive entries; "
            f"entry {bad} is {arr[bad]}"
        )
    if arr.ndim == 1:
        return psi(arr) - psi(arr.sum())
    return psi(arr) - psi(arr.sum(axis=1))[:, None]


def local_estep(
    model: LdaModel,
    doc: Document,
    tol: float = E_STEP_TOL,
    max_iters: int = E_STEP_MAX_ITERS,
    expected_log_beta: np.ndarray | None = None,
) -> DocState:
    """Coordinate ascent on (gamma, phi) for one document.

    Runs until the mean absolute gamma change drops below tol or
    max_iters sweeps. Pass expected_log_beta to amortise the global
    digamma across many documents of the same model.
    """
    if doc.n_distinct == 0:
        raise ConfigurationError("local_estep needs a nonempty document")
    if max_iters < 1:
        raise ConfigurationError("max_iters must be >= 1")
    elb = (
        dirichlet_expectation(model.lam)
        if expected_log_beta is None
        else expected_log_beta
    )
    exp_elb_doc = np.exp(elb[:, doc.word_ids])  # K x U
    counts = doc.counts.astype(float)
    gamma = np.full(model.K, model.alpha_doc + doc.length / model.K)
    exp_elogtheta = np.exp(dirichlet_expectation(gamma))
    sweeps = 0
    for _ in range(max_iters):
        # implicit phi: phi_uk proportional to exp(Elogtheta_k) * exp(Elogbeta_ku)
        phinorm = exp_elogtheta @ exp_elb_doc + _PHI_NORM_GUARD
        gamma_new = model.alpha_doc + exp_elogtheta * (
            exp_elb_doc @ (counts / phinorm)
        )
        change = float(np.abs(gamma_new - gamma).mean())
        gamma = gamma_new
        sweeps += 1
        if change < tol:
            break
        exp_elogtheta = np.exp(dirichlet_expectation(gamma))
    # explicit phi rows from the same exp_elogtheta that produced gamma,
    # so gamma == alpha_doc + sum_u counts_u * phi_u holds at return
    phi = (exp_elogtheta[None, :] * exp_elb_doc.T)
    phi = phi / phi.sum(axis=1, keepdims=True)
    return DocState(gamma=gamma, phi=phi, sweeps=sweeps)


def doc_elbo(
    model: LdaModel,
    doc: Document,
    state: DocState,
    expected_log_beta: np.ndarray | None = None,
) -> float:
    """Per-document ELBO at fixed lambda (global beta terms omitted).

    Coordinate ascent in local_estep must not decrease this value.
    """
    elb = (
        dirichlet_expectation(model.lam)
        if expected_log_beta is None
        else expected_log_beta
    )
    elb_doc = elb[:, doc.word_ids]  # K x U
    counts = doc.counts.astype(float)
    elogtheta = dirichlet_expectation(state.gamma)
    phi = state.phi  # U x K
    word_terms = phi * (elogtheta[None, :] + elb_doc.T) - xlogy(phi, phi)
    total = float(counts @ word_terms.sum(axis=1))
    a = model.alpha_doc
    total += float(
        gammaln(model.K * a) - model.K * gammaln(a)
        + (a - 1.0) * elogtheta.sum()
    )
    total -= float(
        gammaln(state.gamma.sum()) - gammaln(state.gamma).sum()
        + ((state.gamma - 1.0) * elogtheta).sum()
    )
    return total


def natural_gradient(
    model: LdaModel, batch: list[Document], states: list[DocState]
) -> np.ndarray:
    """lambda minus the minibatch target lambda_hat (a descent direction).

    lambda_hat = zeta + (n_docs / G) * summed expected sufficient
    statistics; stepping lambda <- lambda - rate * result with rate 1
    lands exactly on lambda_hat.
    """
    if not batch:
        raise ConfigurationError("natural_gradient needs a nonempty batch")
    if len(batch) != len(states):
        raise ConfigurationError(
            f"batch has {len(batch)} docs but {len(states)} states"
        )
    sstats = np.zeros((model.K, model.V_vocab))
    for doc, state in zip(batch, states):
        if state.phi.shape != (doc.n_distinct, model.K):
            raise ConfigurationError(
                f"phi shape {state.phi.shape} does not match doc with "
                f"{doc.n_distinct} distinct words and K={model.K}"
            )
        sstats[:, doc.word_ids] += (state.phi * doc.counts[:, None]).T
    lam_hat = model.zeta + (model.n_docs / len(batch)) * sstats
    return model.lam - lam_hat


def perplexity(
    model: LdaModel,
    held_out: Corpus,
    tol: float = E_STEP_TOL,
    max_iters: int = E_STEP_MAX_ITERS,
) -> float:
    """Geometric mean of inverse per-word predictive probability.

    Each held-out document gets a fresh E-step; a word's probability is
    the posterior-mean mixture sum_k thetabar_k betabar_kw. A model with
    every topic uniform over the vocabulary scores exactly V_vocab.
    """
    if held_out.n_docs == 0:
        raise ConfigurationError("perplexity needs a nonempty held-out corpus")
    beta_bar = model.mean_beta()
    elb = dirichlet_expectation(model.lam)
    total_ll = 0.0
    total_tokens = 0
    for doc in held_out.docs:
        if doc.n_distinct == 0:
            continue
        state = local_estep(model, doc, tol, max_iters, expected_log_beta=elb)
        theta_bar = state.gamma / state.gamma.sum()
        word_probs = theta_bar @ beta_bar[:, doc.word_ids]
        total_ll += float(doc.counts @ np.log(word_probs))
        total_tokens += doc.length
    if total_tokens == 0:
        raise ConfigurationError("held-out corpus has no tokens")
    return float(np.exp(-total_ll / total_tokens))
