# MIT License
# 
# Copyright (c) 2021, Alex M. Maldonado
# 
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
# 
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

"""Rate recursions, problem constants and closed-form complexity
predictions for the four schemes."""

from dataclasses import dataclass, asdict
import math
import logging

from vsne_tools.utils import *

log = logging.getLogger(__name__)

regimes = ('rho_lt_q', 'rho_eq_q', 'rho_gt_q')

@dataclass(frozen=True)
class ComplexityPrediction:
    """Iteration, oracle and communication bounds to reach an eps-NE.

    ``regime`` compares the forcing rate (batch or consensus) with the
    contraction rate ``q``; ``rate`` is the resulting effective rate.
    """
    scheme: str
    K_eps: float
    M_eps: float
    comm_eps: float = None
    regime: str = ''
    rate: float = None

    def to_dict(self):
        return asdict(self)

def _regime(q, rho):
    if abs(rho - q) <= 1e-12 * max(q, rho):
        return 'rho_eq_q'
    return 'rho_lt_q' if rho < q else 'rho_gt_q'

def _tilde(q, q_tilde=None):
    if q_tilde is None:
        q_tilde = 0.5 * (1.0 + q)
    if not q < q_tilde < 1.0:
        raise DomainError(f'q_tilde must lie in ({q}, 1); got {q_tilde}')
    return q_tilde

def _forced_constant(c0, c1, q, rho, q_tilde=None):
    """Constant and rate of v_k <= const * rate^k for
    v_{k+1} <= q v_k + c1 rho^{k+1}, v_0 <= c0."""
    regime = _regime(q, rho)
    if regime == 'rho_eq_q':
        rate = _tilde(q, q_tilde)
        return c0 + c1 / (math.e * math.log(rate / q)), rate, regime
    return c0 + c1 * rho / abs(q - rho), max(q, rho), regime

def recursion_bound(c0, c1, q, rho, k, q_tilde=None):
    """Upper bound on v_k when v_{k+1} <= q v_k + c1 rho^{k+1} and v_0 <= c0.

    For rho != q the bound is (c0 + c1 rho/|q - rho|) max(q, rho)^k; the
    forcing coefficient equals 1/(q/rho - 1) when rho < q. For rho == q it is
    (c0 + c1/ln((q_tilde/q)^e)) q_tilde^k with q_tilde = (1 + q)/2 unless given.

    Parameters
    ----------
    c0, c1 : :obj:`float`
        Nonnegative constants.
    q, rho : :obj:`float`
        Rates in (0, 1).
    k : :obj:`int`
        Iteration index.
    q_tilde : :obj:`float`, optional
        Any value in (q, 1) for the equal-rate case.
    
    Returns
    -------
    :obj:`float`
    """
    check_unit_interval('q', q)
    check_unit_interval('rho', rho)
    if c0 < 0.0 or c1 < 0.0:
        raise DomainError(f'c0 and c1 must be nonnegative; got {c0}, {c1}')
    if k < 0:
        raise DomainError(f'k must be nonnegative; got {k}')
    constant, rate, _ = _forced_constant(c0, c1, q, rho, q_tilde)
    return constant * rate**k

def cqv_constant(q, u, v, return_maximizer=False):
    """Maximum c_{q,v} of d(x) = q^{x^u} x^v over x > 0.

    Parameters
    ----------
    q : :obj:`float`
        In (0, 1).
    u : :obj:`float`
        In (0, 1].
    v : :obj:`float`
        Positive.
    return_maximizer : :obj:`bool`, optional
        Also return x* = (v/(u ln(1/q)))^{1/u}. Defaults to ``False``.
    
    Returns
    -------
    :obj:`float`
        e^{-v/u} (v/(u ln(1/q)))^{v/u}.
    :obj:`float`
        Maximizer, only if ``return_maximizer`` is ``True``.
    """
    check_unit_interval('q', q)
    if not 0.0 < u <= 1.0:
        raise DomainError(f'u must lie in (0, 1]; got {u}')
    if not v > 0.0:
        raise DomainError(f'v must be positive; got {v}')
    base = v / (u * math.log(1.0 / q))
    c = math.exp(-v / u) * base**(v / u)
    if return_maximizer:
        return c, base**(1.0 / u)
    return c

def kappa_tuned_params(eta, L_tilde, beta=None, a=None):
    """Step size and batch rate tuned to the condition number L_tilde/eta.

    Without ``beta`` this is the centralized choice alpha = eta/L_tilde^2,
    rho = 1 - 1/(2 kappa^2). With ``beta`` (and ``a > 2``) it is the
    distributed choice alpha = eta/(2 L_tilde^2),
    rho = max(1 - eta^2/(a L_tilde^2), beta).
    
    Returns
    -------
    :obj:`tuple`
        ``(alpha, rho)``.
    """
    if not eta > 0.0:
        raise DomainError(f'eta must be positive; got {eta}')
    if L_tilde < eta:
        raise DomainError(f'L_tilde ({L_tilde}) must be at least eta ({eta})')
    if beta is None:
        kappa = L_tilde / eta
        return eta / L_tilde**2, 1.0 - 1.0 / (2.0 * kappa**2)
    if a is None or not a > 2.0:
        raise DomainError(f'The distributed tuning needs a > 2; got {a}')
    if not 0.0 <= beta < 1.0:
        raise DomainError(f'beta must lie in [0, 1); got {beta}')
    alpha = eta / (2.0 * L_tilde**2)
    return alpha, max(1.0 - eta**2 / (a * L_tilde**2), beta)



###   PROBLEM CONSTANTS   ###

def noise_adjusted_lipschitz(L, nu1, alpha):
    """L_tilde = sqrt(1 + 2(1 + 2 alpha^2) nu1^2 + 2 L^2)."""
    return math.sqrt(1.0 + 2.0 * (1.0 + 2.0 * alpha**2) * nu1**2 + 2.0 * L**2)

def noise_level(nu1, nu2, alpha, x_star_norm):
    """nu^2 = 2(1 + 2 alpha^2) nu1^2 ||x*||^2 + (1 + 2 alpha^2) nu2^2."""
    factor = 1.0 + 2.0 * alpha**2
    return 2.0 * factor * nu1**2 * x_star_norm**2 + factor * nu2**2

def gradient_contraction(alpha, eta, L_tilde):
    """q = 1 - 2 alpha eta + alpha^2 L_tilde^2 for alpha in (0, 2 eta/L_tilde^2)."""
    if not 0.0 < alpha < 2.0 * eta / L_tilde**2:
        raise DomainError(
            f'alpha={alpha} is outside (0, {2.0 * eta / L_tilde**2:.6g})'
        )
    return 1.0 - 2.0 * alpha * eta + alpha**2 * L_tilde**2

def aggregative_contraction(alpha, eta_phi, L_phi, nu1=0.0):
    """Noise-adjusted constant and contraction rate of the distributed
    gradient scheme.

    Returns
    -------
    :obj:`tuple`
        ``(L_tilde_phi, varrho_phi)`` with
        L_tilde_phi = sqrt(1/2 + (1 + 2 alpha^2) nu1^2 + 2 L_phi^2) and
        varrho_phi = 1 - 2 alpha eta_phi + 2 alpha^2 L_tilde_phi^2.
    """
    L_tilde = math.sqrt(0.5 + (1.0 + 2.0 * alpha**2) * nu1**2 + 2.0 * L_phi**2)
    varrho = 1.0 - 2.0 * alpha * eta_phi + 2.0 * alpha**2 * L_tilde**2
    return L_tilde, varrho

def consensus_constants(theta, D_R, beta):
    """C_1 and C_2 bounding the aggregate estimation error."""
    check_unit_interval('beta', beta)
    C1 = theta * D_R
    log_inv = math.log(1.0 / beta)
    C2 = 2.0 * theta * D_R * (
        math.e * math.sqrt(1.0 / math.log(beta**-0.5))
        + (2.0 + log_inv) / (beta**0.5 * log_inv)
    )
    return C1, C2

def aggregative_noise_constant(alpha, nu_bar2, n, D_R, C1, C2, beta, lipschitz):
    """C_3 = alpha^2 nu_bar^2 + 4 alpha n D_R (C1 + C2) sum L_i
    + 4 alpha^2 n^2 beta (C1^2 + C2^2) sum L_i^2."""
    lipschitz = [float(l) for l in lipschitz]
    return (
        alpha**2 * nu_bar2
        + 4.0 * alpha * n * D_R * (C1 + C2) * sum(lipschitz)
        + 4.0 * alpha**2 * n**2 * beta * (C1**2 + C2**2) * sum(l**2 for l in lipschitz)
    )

def _br_sensitivity(mu, L):
    root = math.sqrt(mu**2 + L**2)
    return mu / (mu**2 + L**2) / (1.0 - L / root)

def br_batch_constant(mu, smoothness, variances):
    """C_ns = max_i nu_i^2 C_{i,b}^2 for the best-response batch schedule.

    Parameters
    ----------
    mu : :obj:`float`
        Proximal regularization.
    smoothness : :obj:`list` [:obj:`float`]
        L_fi of every player.
    variances : :obj:`list` [:obj:`float`]
        nu_i^2 of every player.
    """
    if not mu > 0.0:
        raise DomainError(f'mu must be positive; got {mu}')
    return max(
        nu2 * _br_sensitivity(mu, L)**2 for L, nu2 in zip(smoothness, variances)
    )

def distributed_br_constants(mu, L_a, L_g, n, C1, C2):
    """``(C_r, L_t, C_4)`` of the distributed best-response scheme."""
    C_r = _br_sensitivity(mu, L_a)
    L_t = mu * L_g / (mu**2 + L_a**2) / (1.0 - L_a / math.sqrt(mu**2 + L_a**2))
    C4 = math.sqrt(n) + n**1.5 * L_t * (C1 + C2)
    return C_r, L_t, C4



###   RATE BOUNDS   ###

def polynomial_rate_bound(C, noise, q, v, k):
    """MSE bound under S_k = ceil(alpha^-2 (k+1)^v).

    ``noise`` is alpha^2 nu^2. The k = 0 term drops the k^-v part.
    """
    check_unit_interval('q', q)
    geometric_part = q**k * (C + noise * (math.exp(2.0 * v) / q - 1.0) / (1.0 - q))
    if k == 0:
        return geometric_part
    return geometric_part + 2.0 * noise / q / math.log(1.0 / q) * k**-v

def br_rate_bound(C, n, a, eta_br, k, a_tilde=None):
    """MSE bound of the best-response scheme under geometric batches."""
    check_unit_interval('a', a)
    check_unit_interval('eta_br', eta_br)
    Q, rate, _ = _forced_constant(math.sqrt(C), math.sqrt(n), a, eta_br, a_tilde)
    return Q**2 * rate**(2 * k)

def polynomial_complexity_orders(v, u=None):
    """Exponents p of (1/eps)^p for polynomial schedules.

    Returns
    -------
    :obj:`dict`
        ``iteration``, ``oracle`` and, when ``u`` is given, ``communication``.
    """
    if not v > 0.0:
        raise DomainError(f'v must be positive; got {v}')
    orders = {'iteration': 1.0 / v, 'oracle': 1.0 + 1.0 / v}
    if u is not None:
        orders['communication'] = (u + 1.0) / v
    return orders

def communication_bound(K):
    """Consensus rounds sum_{k<K} (k+1) = K(K+1)/2 under tau_k = k+1."""
    return K * (K + 1) / 2.0



###   COMPLEXITY   ###

def _geometric_complexity(c0, c1, q, rho, target, batch_rate, scale, q_tilde=None):
    constant, rate, regime = _forced_constant(c0, c1, q, rho, q_tilde)
    K = max(0.0, math.log(constant / target) / math.log(1.0 / rate))
    ratio = math.log(1.0 / batch_rate) / math.log(1.0 / rate)
    M = scale * (constant / target)**ratio / (batch_rate * math.log(1.0 / batch_rate)) + K
    return K, M, regime, rate

def predict_complexity(scheme, params, eps):
    """Closed-form iteration (K), oracle (M) and communication bounds.

    ===========  ======================================================
    scheme       params
    ===========  ======================================================
    vs_pgr       C, q, rho, noise (alpha^2 nu^2), batch_scale
    d_vs_pgr     C, varrho, rho, beta, C3, batch_scale
    vs_pbr       C, a, eta_br, n, c_ns
    d_vs_pbr     C, a, eta_br, beta, C4, c_ns
    ===========  ======================================================

    ``batch_scale`` is the multiplier of the geometric batch (alpha^-2 for
    the alpha-scaled schedule, 1 for the raw schedule) and defaults to 1. An
    optional ``q_tilde`` selects the auxiliary rate of the equal-rate case.
    M counts samples per player.

    Parameters
    ----------
    scheme : :obj:`str`
    params : :obj:`dict`
    eps : :obj:`float`
        Target mean-squared error.
    
    Returns
    -------
    :obj:`ComplexityPrediction`
    """
    if not eps > 0.0:
        raise DomainError(f'eps must be positive; got {eps}')
    if scheme not in scheme_names:
        raise ConfigurationError(f'Unknown scheme {scheme}')
    try:
        C = float(params['C'])
        q_tilde = params.get('q_tilde')
        if scheme == 'vs_pgr':
            q, rho = params['q'], params['rho']
            c1, batch_rate = params.get('noise', 0.0), rho
            scale = params.get('batch_scale', 1.0)
            c0, target = C, eps
        elif scheme == 'd_vs_pgr':
            q, batch_rate = params['varrho'], params['rho']
            rho = max(params['rho'], params['beta'])
            c1, scale = params['C3'], params.get('batch_scale', 1.0)
            c0, target = C, eps
        elif scheme == 'vs_pbr':
            q, rho = params['a'], params['eta_br']
            c1, batch_rate = math.sqrt(params['n']), params['eta_br']**2
            scale = params['c_ns']
            c0, target = math.sqrt(C), math.sqrt(eps)
        else:
            q = params['a']
            rho = max(params['eta_br'], params['beta'])
            c1, batch_rate = params['C4'], params['eta_br']**2
            scale = params['c_ns']
            c0, target = math.sqrt(C), math.sqrt(eps)
    except KeyError as e:
        raise ConfigurationError(f'{scheme} prediction is missing parameter {e}') from None
    check_unit_interval('contraction rate', q)
    check_unit_interval('forcing rate', rho)
    if not C > 0.0 or c1 < 0.0:
        raise DomainError(f'Need C > 0 and a nonnegative forcing constant; got {C}, {c1}')

    K, M, regime, rate = _geometric_complexity(
        c0, c1, q, rho, target, batch_rate, scale, q_tilde
    )
    comm = communication_bound(K) if scheme in distributed_schemes else None
    log.debug(f'{scheme} prediction at eps={eps}: K={K:.4g}, M={M:.4g}, regime={regime}')
    return ComplexityPrediction(
        scheme=scheme, K_eps=K, M_eps=M, comm_eps=comm, regime=regime, rate=rate
    )
