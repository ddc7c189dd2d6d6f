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

"""Problem constants, contraction reports, the deterministic equilibrium
oracle and rate fits."""

from dataclasses import dataclass, asdict
import math
import logging
import numpy as np
from scipy import linalg, stats
import findiff

from vsne_tools.utils import *
from vsne_tools.game import StrategyProfile, gradient_data, profile_data
from vsne_tools.prox import prox_data
from vsne_tools.prediction import noise_adjusted_lipschitz

log = logging.getLogger(__name__)

oracle_modes = ('fixed_point', 'extragradient')
fit_regimes = ('linear', 'polynomial')
min_fit_points = 10

@dataclass(frozen=True)
class MonotonicityReport:
    """Strong monotonicity and Lipschitz constants of G.

    ``L_tilde`` is the noise-adjusted constant at step size ``alpha``.
    """
    eta: float
    L: float
    L_tilde: float
    kappa_tilde: float
    nu1: float = 0.0
    alpha: float = 0.0

    @property
    def strongly_monotone(self):
        return self.eta > 0.0

    def to_dict(self):
        report = asdict(self)
        report['strongly_monotone'] = self.strongly_monotone
        return report

@dataclass(frozen=True, eq=False)
class ContractionReport:
    """Blockwise Lipschitz matrix of the proximal best-response map."""
    Gamma: np.ndarray
    a_inf: float
    contractive: bool
    spectral_radius: float
    mu: float

    def to_dict(self):
        return {
            'Gamma': self.Gamma.tolist(), 'a_inf': self.a_inf,
            'contractive': self.contractive,
            'spectral_radius': self.spectral_radius, 'mu': self.mu,
        }

@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of ln(MSE) against k (linear) or ln k (polynomial)."""
    slope: float
    intercept: float
    r_squared: float
    window: tuple
    regime: str

    @property
    def rate(self):
        """Per-iteration decay factor exp(slope) of a linear fit."""
        if self.regime != 'linear':
            return None
        return math.exp(self.slope)

    def to_dict(self):
        fit = asdict(self)
        fit['window'] = list(self.window)
        fit['rate'] = self.rate
        return fit



###   CONSTANTS   ###

def quadratic_constants(M):
    """Constants of the affine map G(x) = M x + b.

    Parameters
    ----------
    M : :obj:`numpy.ndarray`
        Square Jacobian.
    
    Returns
    -------
    :obj:`float`
        eta = lambda_min((M + M^T)/2).
    :obj:`float`
        L = sigma_max(M).
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f'Expected a square matrix; got shape {M.shape}')
    eta = float(linalg.eigvalsh(0.5 * (M + M.T))[0])
    L = float(linalg.svdvals(M)[0])
    if eta <= 0.0:
        log.warning(f'Operator is not strongly monotone (eta={eta:.4g})')
    return eta, L

def operator_matrix(game, x0=None, delta=1.0, acc=2):
    """Jacobian of G from central finite differences.

    The stencil is exact for affine operators, so ``delta`` only matters for
    nonlinear games.

    Parameters
    ----------
    game : :obj:`vsne_tools.game.GameSpec`
    x0 : :obj:`numpy.ndarray`, optional
        Expansion point. Defaults to the origin.
    delta : :obj:`float`, optional
        Step of the stencil. Defaults to ``1.0``.
    acc : :obj:`int`, optional
        Accuracy order of the stencil. Defaults to ``2``.
    
    Returns
    -------
    :obj:`numpy.ndarray`
        ``(D, D)`` matrix with column j holding dG/dx_j.
    """
    stencil = findiff.coefficients(deriv=1, acc=acc)['center']
    D = game.total_dim
    x0 = np.zeros(D) if x0 is None else profile_data(game, x0).copy()
    M = np.zeros((D, D))
    for j in range(D):
        column = np.zeros(D)
        for o, c in zip(stencil['offsets'], stencil['coefficients']):
            if c == 0:
                continue
            x = x0.copy()
            x[j] += o * delta
            column += c * gradient_data(game, x)
        M[:, j] = column / delta
    return M

def monotonicity_report(game, alpha=0.0, nu1=0.0, M=None):
    """eta, L and kappa_tilde = L_tilde/eta of the game's operator."""
    if M is None:
        M = operator_matrix(game)
    eta, L = quadratic_constants(M)
    L_tilde = noise_adjusted_lipschitz(L, nu1, alpha)
    kappa = L_tilde / eta if eta > 0.0 else np.inf
    return MonotonicityReport(
        eta=eta, L=L, L_tilde=L_tilde, kappa_tilde=kappa, nu1=nu1, alpha=alpha
    )

def payoff_gradient(game, x, i, delta=1e-4, acc=4):
    """Central finite-difference gradient of the payoff of player ``i`` in
    its own strategy."""
    player = game.players[i]
    if player.payoff is None:
        raise ConfigurationError(f'Player {i} has no payoff function')
    stencil = findiff.coefficients(deriv=1, acc=acc)['center']
    data = profile_data(game, x)
    sl = game.block_slice(i)
    grad = np.zeros(player.dim)
    for l in range(player.dim):
        for o, c in zip(stencil['offsets'], stencil['coefficients']):
            if c == 0:
                continue
            shifted = data.copy()
            shifted[sl.start + l] += o * delta
            grad[l] += c * player.payoff(shifted)
    return grad / delta

def gamma_matrix(game, mu):
    """Contraction matrix of the proximal best-response map.

    Gamma_ii = mu/(mu + zeta_i,min) and Gamma_ij = zeta_ij,max/(mu + zeta_i,min).

    Parameters
    ----------
    game : :obj:`vsne_tools.game.GameSpec`
        Every player needs ``zeta_min`` and ``zeta_max``.
    mu : :obj:`float`
        Proximal regularization.
    
    Returns
    -------
    :obj:`ContractionReport`
    """
    if not mu > 0.0:
        raise DomainError(f'mu must be positive; got {mu}')
    n = game.n
    Gamma = np.zeros((n, n))
    for i, player in enumerate(game.players):
        if player.zeta_min is None or player.zeta_max is None:
            raise ConfigurationError(f'Player {i} lacks Hessian bounds')
        denominator = mu + player.zeta_min
        if not denominator > 0.0:
            raise DomainError(f'mu + zeta_min must be positive for player {i}')
        Gamma[i] = np.asarray(player.zeta_max, dtype=float) / denominator
        Gamma[i, i] = mu / denominator
    if np.any(Gamma < 0.0):
        raise DomainError('Hessian bounds produced negative Gamma entries')
    a_inf = float(np.max(Gamma.sum(axis=1)))
    spectral_radius = float(np.max(np.abs(linalg.eigvals(Gamma))))
    return ContractionReport(
        Gamma=Gamma, a_inf=a_inf, contractive=a_inf < 1.0,
        spectral_radius=spectral_radius, mu=float(mu)
    )

def contraction_check(game, mu, override=False):
    """:obj:`gamma_matrix` that raises :obj:`PreconditionError` unless
    ||Gamma||_inf < 1 or ``override`` is set."""
    report = gamma_matrix(game, mu)
    if not report.contractive:
        message = f'Best-response map is not contractive: ||Gamma||_inf = {report.a_inf:.6g}'
        if not override:
            raise PreconditionError(message)
        log.warning(message + ' (overridden)')
    else:
        log.info(f'Contraction certified: ||Gamma||_inf = {report.a_inf:.6g}')
    return report



###   EQUILIBRIUM ORACLE   ###

def fixed_point_residual(game, x, alpha):
    """||x - prox_{alpha r}(x - alpha G(x))||."""
    data = profile_data(game, x)
    step = prox_data(game, data - alpha * gradient_data(game, data), alpha)
    return float(np.linalg.norm(data - step))

def ground_truth_ne(
    game, mode='fixed_point', tol=default_oracle_tol, alpha=None,
    max_iters=default_oracle_max_iters, x0=None, M=None):
    """Deterministic Nash equilibrium of the noiseless game.

    Both modes stop once the natural residual with step 1/L is at most
    ``tol``. Since that residual bounds the one at any smaller step, the
    cheap step difference gates the full check.

    Parameters
    ----------
    game : :obj:`vsne_tools.game.GameSpec`
    mode : :obj:`str`, optional
        ``'fixed_point'`` iterates x <- prox(x - alpha G(x)) with
        ``alpha = eta/L^2``; ``'extragradient'`` uses step 1/(2L).
        Defaults to ``'fixed_point'``.
    tol : :obj:`float`, optional
        Defaults to ``1e-12``.
    alpha : :obj:`float`, optional
        Overrides the step size.
    max_iters : :obj:`int`, optional
        Defaults to ``1e6``.
    x0 : :obj:`numpy.ndarray`, optional
        Starting point. Defaults to the prox of the origin.
    M : :obj:`numpy.ndarray`, optional
        Precomputed Jacobian.
    
    Returns
    -------
    :obj:`vsne_tools.game.StrategyProfile`
    """
    if mode not in oracle_modes:
        raise ConfigurationError(f'Unknown oracle mode {mode}')
    if M is None:
        M = operator_matrix(game)
    eta, L = quadratic_constants(M)
    if L == 0.0:
        L = 1.0
    if mode == 'fixed_point':
        if eta <= 0.0:
            raise PreconditionError('Fixed-point oracle needs a strongly monotone operator')
        step = eta / L**2 if alpha is None else alpha
        if not 0.0 < step < 2.0 * eta / L**2:
            raise PreconditionError(f'Oracle step {step} does not give a contraction')
    else:
        step = 1.0 / (2.0 * L) if alpha is None else alpha
    alpha_res = 1.0 / L

    x = np.zeros(game.total_dim) if x0 is None else profile_data(game, x0).copy()
    x = prox_data(game, x, step)
    for k in range(int(max_iters)):
        if mode == 'fixed_point':
            x_new = prox_data(game, x - step * gradient_data(game, x), step)
            gate = np.linalg.norm(x_new - x)
        else:
            y = prox_data(game, x - step * gradient_data(game, x), step)
            x_new = prox_data(game, x - step * gradient_data(game, y), step)
            gate = np.linalg.norm(y - x)
        if not np.all(np.isfinite(x_new)):
            raise OracleError(f'{mode} oracle produced nonfinite iterates at k={k}')
        if gate <= tol and fixed_point_residual(game, x, alpha_res) <= tol:
            break
        x = x_new
    else:
        raise OracleError(
            f'{mode} oracle did not reach residual {tol} in {int(max_iters)} iterations'
        )
    residual = fixed_point_residual(game, x, alpha_res)
    log.info(f'{mode} oracle converged in {k} iterations, residual {residual:.3e}')
    return StrategyProfile(x, game.dims)



###   TRACES   ###

def fit_rate(trace, regime='linear', window=None, min_points=min_fit_points):
    """Fits the decay of an MSE trace.

    Parameters
    ----------
    trace : :obj:`numpy.ndarray`
        MSE indexed by iteration k = 0, 1, ...
    regime : :obj:`str`, optional
        ``'linear'`` regresses ln(MSE) on k (slope estimates the log rate);
        ``'polynomial'`` regresses on ln k (slope estimates -v). Defaults to
        ``'linear'``.
    window : :obj:`tuple`, optional
        Inclusive ``(k_lo, k_hi)``. Defaults to discarding the first quarter
        of the iterations. The window ends before the first nonpositive
        entry.
    min_points : :obj:`int`, optional
        Defaults to ``10``.
    
    Returns
    -------
    :obj:`RateFit`
    """
    if regime not in fit_regimes:
        raise ConfigurationError(f'Unknown fit regime {regime}')
    trace = np.asarray(trace, dtype=float)
    if trace.size == 0:
        raise FitError('Cannot fit an empty trace')
    if window is None:
        k_lo, k_hi = int(math.ceil(burn_in_fraction * (trace.size - 1))), trace.size - 1
    else:
        k_lo, k_hi = int(window[0]), min(int(window[1]), trace.size - 1)
    if regime == 'polynomial':
        k_lo = max(k_lo, 1)
    bad = np.flatnonzero(~(trace[k_lo:k_hi + 1] > 0.0) | ~np.isfinite(trace[k_lo:k_hi + 1]))
    if bad.size > 0:
        shrunk = k_lo + int(bad[0]) - 1
        log.debug(f'Fit window shrunk from {k_hi} to {shrunk}')
        k_hi = shrunk
    if k_hi - k_lo + 1 < min_points:
        raise FitError(
            f'Fit window [{k_lo}, {k_hi}] has fewer than {min_points} usable points'
        )
    k = np.arange(k_lo, k_hi + 1, dtype=float)
    abscissa = k if regime == 'linear' else np.log(k)
    result = stats.linregress(abscissa, np.log(trace[k_lo:k_hi + 1]))
    return RateFit(
        slope=float(result.slope), intercept=float(result.intercept),
        r_squared=float(result.rvalue**2), window=(k_lo, k_hi), regime=regime
    )

def epsilon_ne_index(trace, eps):
    """First k with MSE_k <= eps, or ``None``."""
    trace = np.asarray(trace, dtype=float)
    hits = np.flatnonzero(trace <= eps)
    if hits.size == 0:
        return None
    return int(hits[0])
