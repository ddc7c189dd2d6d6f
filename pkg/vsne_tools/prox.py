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

"""Closed-form proximal operators of the nonsmooth player terms."""

from dataclasses import dataclass
import numpy as np

from vsne_tools.utils import *

prox_kinds = ('box', 'nonneg', 'l1', 'zero')

@dataclass(frozen=True)
class ProxOperator:
    """Nonsmooth term r of a player together with its proximal map.

    Parameters
    ----------
    kind : :obj:`str`
        ``'box'``, ``'nonneg'``, ``'l1'`` or ``'zero'``.
    lower : :obj:`float` or :obj:`numpy.ndarray`, optional
        Lower box bound (box kind only).
    upper : :obj:`float` or :obj:`numpy.ndarray`, optional
        Upper box bound (box kind only).
    weight : :obj:`float`, optional
        l1 weight (l1 kind only).
    """
    kind: str
    lower: object = None
    upper: object = None
    weight: float = None

    def __post_init__(self):
        if self.kind not in prox_kinds:
            raise ConfigurationError(f'Unknown prox kind {self.kind}')
        if self.kind == 'box':
            if self.lower is None or self.upper is None:
                raise ConfigurationError('Box prox needs lower and upper bounds')
            if np.any(np.asarray(self.lower) > np.asarray(self.upper)):
                raise ConfigurationError('Box prox has an empty domain')
        if self.kind == 'l1' and (self.weight is None or self.weight < 0):
            raise ConfigurationError(
                f'l1 prox needs a nonnegative weight; got {self.weight}'
            )
    
    @property
    def is_indicator(self):
        return self.kind in ('box', 'nonneg')

def box_indicator(lower, upper):
    return ProxOperator('box', lower=lower, upper=upper)

def nonneg_indicator():
    return ProxOperator('nonneg')

def l1(weight):
    return ProxOperator('l1', weight=float(weight))

def zero():
    return ProxOperator('zero')

def prox(op, x, alpha):
    """Evaluates prox_{alpha r}(x) = argmin_y r(y) + ||y - x||^2/(2 alpha).

    Parameters
    ----------
    op : :obj:`ProxOperator`
        Nonsmooth term.
    x : :obj:`numpy.ndarray`
        Point to evaluate.
    alpha : :obj:`float` or :obj:`numpy.ndarray`
        Positive step size; may be given per coordinate.
    
    Returns
    -------
    :obj:`numpy.ndarray`
        Exact minimizer.
    """
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0.0):
        raise DomainError(f'Prox step must be positive; got {alpha}')
    x = np.asarray(x, dtype=float)
    if op.kind == 'box':
        return np.clip(x, op.lower, op.upper)
    elif op.kind == 'nonneg':
        return np.maximum(x, 0.0)
    elif op.kind == 'l1':
        # Exactly at the threshold maps to 0.
        return np.sign(x) * np.maximum(np.abs(x) - alpha * op.weight, 0.0)
    return x.copy()

def prox_value(op, x):
    """Value r(x); ``inf`` outside the domain of an indicator."""
    x = np.asarray(x, dtype=float)
    if op.kind == 'box':
        inside = np.all(x >= op.lower) and np.all(x <= op.upper)
        return 0.0 if inside else np.inf
    elif op.kind == 'nonneg':
        return 0.0 if np.all(x >= 0.0) else np.inf
    elif op.kind == 'l1':
        return op.weight * float(np.sum(np.abs(x)))
    return 0.0

def prox_data(game, data, alpha):
    """Blockwise prox on the flat profile array (no counting)."""
    out = np.empty_like(data)
    for i, player in enumerate(game.players):
        sl = game.block_slice(i)
        out[sl] = prox(player.prox_term, data[sl], alpha)
    return out

def prox_profile(game, x, alpha, counters=None):
    """Concatenated prox of every player's term.

    One call counts as one proximal evaluation.

    Parameters
    ----------
    game : :obj:`vsne_tools.game.GameSpec`
    x : :obj:`vsne_tools.game.StrategyProfile` or :obj:`numpy.ndarray`
    alpha : :obj:`float`
    counters : :obj:`vsne_tools.game.ResourceCounters`, optional
        Incremented in place.
    
    Returns
    -------
    :obj:`vsne_tools.game.StrategyProfile`
    """
    from vsne_tools.game import StrategyProfile, profile_data

    if alpha <= 0.0:
        raise DomainError(f'Prox step must be positive; got {alpha}')
    data = prox_data(game, profile_data(game, x), alpha)
    if counters is not None:
        counters.prox_evals += 1
    return StrategyProfile(data, game.dims)
