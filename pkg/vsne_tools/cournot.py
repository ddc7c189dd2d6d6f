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

"""Networked Nash-Cournot benchmark in linear-cost and quadratic-cost
variants.

Firm i sells x_i^l in market l at price d_l - b_l sum_j x_j^l and pays
(c_i + xi_i) sum_l x_i^l (+ rho_i/2 ||x_i||^2 for the quadratic variant).
"""

from dataclasses import dataclass, asdict
from functools import partial
import logging
import numpy as np

from vsne_tools.utils import *
from vsne_tools.prox import box_indicator
from vsne_tools.game import AggregateMap, GameSpec, PlayerSpec, UniformNoise

log = logging.getLogger(__name__)

cournot_variants = ('linear', 'quadratic')
price_noise_bases = ('d', 'b')

# Sampling ranges of the benchmark.
intercept_range = (40.0, 50.0)
slope_range = (1.0, 2.0)
cost_range = (3.0, 5.0)
margin_range = (0.5, 1.5)
noise_fraction = 0.2
default_cap = 2.0

@dataclass(frozen=True, eq=False)
class CournotInstance:
    """Coefficients of one benchmark instance.

    ``xi_half_widths`` (one per firm) and ``zeta_half_widths`` (one per
    market) describe the uniform cost and price noise.
    ``mu`` is the best-response regularization a quadratic instance was drawn
    for.
    """
    n: int
    L: int
    d: np.ndarray
    b: np.ndarray
    c: np.ndarray
    xi_half_widths: np.ndarray
    zeta_half_widths: np.ndarray
    rho: np.ndarray = None
    cap: float = default_cap
    price_noise_base: str = 'd'
    variant: str = 'linear'
    seed: int = 0
    mu: float = None

    def to_dict(self):
        instance_dict = asdict(self)
        for key, value in instance_dict.items():
            if isinstance(value, np.ndarray):
                instance_dict[key] = value.tolist()
        return instance_dict
    
    @classmethod
    def from_dict(cls, instance_dict):
        instance_dict = dict(instance_dict)
        for key in ('d', 'b', 'c', 'xi_half_widths', 'zeta_half_widths', 'rho'):
            if instance_dict.get(key) is not None:
                instance_dict[key] = np.array(instance_dict[key], dtype=float)
        return cls(**instance_dict)

def _firm_map(c_i, rho_i, d, b, x_i, z):
    out = c_i - d + b * x_i + b * z
    if rho_i is not None:
        out = out + rho_i * x_i
    return out

def _firm_noisy_map(c_i, rho_i, d, b, x_i, z, samples):
    # Column 0 is the cost shock, the rest are price shocks.
    return _firm_map(c_i, rho_i, d, b, x_i, z)[None, :] + samples[:, :1] - samples[:, 1:]

def _firm_grad(firm_map, i, n, x):
    stack = x.reshape(n, -1)
    return firm_map(stack[i], stack.sum(axis=0))

def _firm_noisy_grad(firm_noisy_map, i, n, x, samples):
    stack = x.reshape(n, -1)
    return firm_noisy_map(stack[i], stack.sum(axis=0), samples)

def _market_operator(c, rho, d, b, x):
    stack = x.reshape(c.size, -1)
    z = stack.sum(axis=0)
    out = c[:, None] - d + b * stack + b * z
    if rho is not None:
        out = out + rho[:, None] * stack
    return out.reshape(-1)

def cournot_payoff(instance, i, x):
    """Deterministic cost f_i(x) of firm ``i`` at the flat profile ``x``."""
    stack = np.asarray(x, dtype=float).reshape(instance.n, instance.L)
    x_i = stack[i]
    cost = instance.c[i] * x_i.sum()
    if instance.rho is not None:
        cost += 0.5 * instance.rho[i] * x_i @ x_i
    return float(cost - instance.d @ x_i + x_i @ (instance.b * stack.sum(axis=0)))

def cournot_game(instance):
    """Aggregative :obj:`vsne_tools.game.GameSpec` of an instance.

    F_i(x_i, z) = c_i 1 - d + B x_i + B z (+ rho_i x_i), boxes [0, cap]^L.
    """
    n, L = instance.n, instance.L
    b = instance.b
    rho = instance.rho
    players = []
    for i in range(n):
        rho_i = None if rho is None else float(rho[i])
        own_curvature = (0.0 if rho_i is None else rho_i) + 2.0 * b
        firm_map = partial(_firm_map, float(instance.c[i]), rho_i, instance.d, b)
        firm_noisy_map = partial(_firm_noisy_map, float(instance.c[i]), rho_i, instance.d, b)
        zeta_max = np.full(n, float(b.max()))
        zeta_max[i] = 0.0
        players.append(PlayerSpec(
            dim=L,
            smooth_grad=partial(_firm_grad, firm_map, i, n),
            noisy_grad=partial(_firm_noisy_grad, firm_noisy_map, i, n),
            prox_term=box_indicator(0.0, instance.cap),
            lower=0.0, upper=instance.cap,
            noise=UniformNoise(np.concatenate(
                ([instance.xi_half_widths[i]], instance.zeta_half_widths)
            )),
            aggregate=AggregateMap(eval=firm_map, noisy_eval=firm_noisy_map),
            zeta_min=float(own_curvature.min()),
            zeta_max=zeta_max,
            smoothness=float(own_curvature.max()),
            hessian_diag=own_curvature,
            payoff=partial(cournot_payoff, instance, i),
        ))
    return GameSpec(
        tuple(players), kind='aggregative',
        operator=partial(_market_operator, instance.c, rho, instance.d, b),
        name=f'cournot-{instance.variant}'
    )

def _draw_instance(n, L, seed, cap, price_noise_base, variant, mu=None):
    if n < 2 or L < 1:
        raise ConfigurationError(f'Cournot instances need n >= 2 and L >= 1; got n={n}, L={L}')
    if price_noise_base not in price_noise_bases:
        raise ConfigurationError(f'price_noise_base must be d or b; got {price_noise_base}')
    rng = np.random.default_rng(seed)
    d = rng.uniform(*intercept_range, size=L)
    b = rng.uniform(*slope_range, size=L)
    c = rng.uniform(*cost_range, size=n)
    rho = None
    if variant == 'quadratic':
        margin = rng.uniform(*margin_range, size=n)
        rho = (n - 1) * b.max() - 2.0 * b.min() + margin
    base = d if price_noise_base == 'd' else b
    return CournotInstance(
        n=n, L=L, d=d, b=b, c=c,
        xi_half_widths=noise_fraction * c,
        zeta_half_widths=noise_fraction * base,
        rho=rho, cap=float(cap), price_noise_base=price_noise_base,
        variant=variant, seed=seed, mu=None if mu is None else float(mu),
    )

def gen_linear_cournot(n, L, seed=0, cap=default_cap, price_noise_base='d'):
    """Linear-cost Nash-Cournot instance.

    Parameters
    ----------
    n : :obj:`int`
        Number of firms, at least 2.
    L : :obj:`int`
        Number of markets.
    seed : :obj:`int`, optional
        Defaults to ``0``.
    cap : :obj:`float`, optional
        Capacity of every firm in every market. Defaults to ``2``.
    price_noise_base : :obj:`str`, optional
        Price noise half-widths are this vector over 5: ``'d'`` or ``'b'``.
        Defaults to ``'d'``.
    
    Returns
    -------
    :obj:`vsne_tools.game.GameSpec`
    :obj:`CournotInstance`
    """
    instance = _draw_instance(n, L, seed, cap, price_noise_base, 'linear')
    log.info(f'Linear Cournot instance n={n}, L={L}, seed={seed}')
    return cournot_game(instance), instance

def gen_quadratic_cournot(n, L, mu=20.0, seed=0, cap=default_cap, price_noise_base='d'):
    """Quadratic-cost Nash-Cournot instance with a certified contraction.

    rho_i = (n - 1) max b - 2 min b + margin with margin ~ U(0.5, 1.5), so
    rho_i + 2 min b > (n - 1) max b and every row of Gamma sums below one for
    any ``mu > 0``.
    """
    if not mu > 0.0:
        raise ConfigurationError(f'mu must be positive; got {mu}')
    instance = _draw_instance(n, L, seed, cap, price_noise_base, 'quadratic', mu=mu)
    log.info(f'Quadratic Cournot instance n={n}, L={L}, mu={mu}, seed={seed}')
    return cournot_game(instance), instance

def cournot_monotonicity(instance):
    """Analytic (eta, L) of the linear-cost operator: (min b, (n+1) max b)."""
    return float(instance.b.min()), float((instance.n + 1) * instance.b.max())

def cournot_noise_constants(instance):
    """Noise constants of the additive uniform model.

    Returns
    -------
    :obj:`float`
        nu_1 (zero: the noise does not scale with x).
    :obj:`float`
        nu_2^2 = sum_i nu_i^2.
    :obj:`numpy.ndarray`
        nu_i^2 = L h_xi,i^2/3 + sum_l h_zeta,l^2/3 per firm.
    """
    per_firm = (
        instance.L * instance.xi_half_widths**2 / 3.0
        + np.sum(instance.zeta_half_widths**2) / 3.0
    )
    return 0.0, float(per_firm.sum()), per_firm
