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

"""Sample-size and communication-round schedules."""

from dataclasses import dataclass, asdict
import math

from vsne_tools.utils import *

batch_kinds = (
    'geometric', 'polynomial', 'pbr_geometric', 'raw_geometric',
    'raw_polynomial', 'constant'
)
comm_kinds = ('linear', 'polynomial', 'log')

# Parameters each batch kind requires.
_batch_params = {
    'geometric': ('alpha', 'rho'),
    'polynomial': ('alpha', 'v'),
    'pbr_geometric': ('c_ns', 'eta_br'),
    'raw_geometric': ('rho',),
    'raw_polynomial': ('v',),
    'constant': ('size',),
}

@dataclass(frozen=True)
class BatchSchedule:
    """Per-player sample sizes S_k.

    ============== =====================================
    kind           S_k
    ============== =====================================
    geometric      ceil(alpha^-2 rho^-(k+1))
    polynomial     ceil(alpha^-2 (k+1)^v)
    pbr_geometric  ceil(c_ns eta_br^-2(k+1))
    raw_geometric  ceil(rho^-(k+1))
    raw_polynomial ceil((k+1)^v)
    constant       size
    ============== =====================================

    Sizes above ``max_batch`` are a :obj:`ScheduleError`.
    """
    kind: str
    alpha: float = None
    rho: float = None
    v: float = None
    c_ns: float = None
    eta_br: float = None
    size: int = None
    max_batch: int = default_max_batch

    def __post_init__(self):
        if self.kind not in batch_kinds:
            raise ScheduleError(f'Unknown batch schedule kind {self.kind}')
        for name in _batch_params[self.kind]:
            if getattr(self, name) is None:
                raise ScheduleError(f'{self.kind} batch schedule needs {name}')
        if self.alpha is not None and not self.alpha > 0.0:
            raise ScheduleError(f'alpha must be positive; got {self.alpha}')
        if self.rho is not None and not 0.0 < self.rho < 1.0:
            raise ScheduleError(f'rho must lie in (0, 1); got {self.rho}')
        if self.v is not None and not self.v > 0.0:
            raise ScheduleError(f'v must be positive; got {self.v}')
        if self.c_ns is not None and not self.c_ns > 0.0:
            raise ScheduleError(f'c_ns must be positive; got {self.c_ns}')
        if self.eta_br is not None and not 0.0 < self.eta_br < 1.0:
            raise ScheduleError(f'eta_br must lie in (0, 1); got {self.eta_br}')
        if self.size is not None and (int(self.size) != self.size or self.size < 1):
            raise ScheduleError(f'Constant batch size must be a positive integer; got {self.size}')
        if self.max_batch < 1:
            raise ScheduleError(f'max_batch must be positive; got {self.max_batch}')
    
    @property
    def scale(self):
        """Multiplier in front of the growth term."""
        if self.kind in ('geometric', 'polynomial'):
            return self.alpha**-2
        elif self.kind == 'pbr_geometric':
            return self.c_ns
        elif self.kind == 'constant':
            return float(self.size)
        return 1.0

    @property
    def growth_rate(self):
        """Ratio in (0, 1) whose inverse powers drive geometric kinds."""
        if self.kind in ('geometric', 'raw_geometric'):
            return self.rho
        elif self.kind == 'pbr_geometric':
            return self.eta_br**2
        return None

    def to_dict(self):
        return {key: value for key, value in asdict(self).items() if value is not None}

def geometric(alpha, rho, **kwargs):
    return BatchSchedule('geometric', alpha=alpha, rho=rho, **kwargs)

def polynomial(alpha, v, **kwargs):
    return BatchSchedule('polynomial', alpha=alpha, v=v, **kwargs)

def pbr_geometric(c_ns, eta_br, **kwargs):
    return BatchSchedule('pbr_geometric', c_ns=c_ns, eta_br=eta_br, **kwargs)

def raw_geometric(rho, **kwargs):
    return BatchSchedule('raw_geometric', rho=rho, **kwargs)

def raw_polynomial(v, **kwargs):
    return BatchSchedule('raw_polynomial', v=v, **kwargs)

def constant(size, **kwargs):
    return BatchSchedule('constant', size=int(size), **kwargs)

def _log_batch(schedule, k):
    """Natural log of the uncapped schedule value."""
    if schedule.kind in ('polynomial', 'raw_polynomial'):
        return math.log(schedule.scale) + schedule.v * math.log(k + 1)
    elif schedule.kind == 'constant':
        return math.log(schedule.size)
    return math.log(schedule.scale) - (k + 1) * math.log(schedule.growth_rate)

def batch_size(schedule, k):
    """S_k of a batch schedule.

    Parameters
    ----------
    schedule : :obj:`BatchSchedule`
    k : :obj:`int`
        Iteration index, ``k >= 0``.
    
    Returns
    -------
    :obj:`int`
        Exact ceiling of the schedule formula (at least 1).
    """
    if k < 0:
        raise DomainError(f'Iteration index must be nonnegative; got {k}')
    if _log_batch(schedule, k) > math.log(schedule.max_batch) + 1e-9:
        raise ScheduleError(
            f'{schedule.kind} batch at k={k} exceeds the cap of {schedule.max_batch}'
        )
    kind = schedule.kind
    if kind == 'geometric':
        value = schedule.alpha**-2 * schedule.rho**-(k + 1)
    elif kind == 'polynomial':
        value = schedule.alpha**-2 * (k + 1)**schedule.v
    elif kind == 'pbr_geometric':
        value = schedule.c_ns * schedule.eta_br**(-2 * (k + 1))
    elif kind == 'raw_geometric':
        value = schedule.rho**-(k + 1)
    elif kind == 'raw_polynomial':
        value = (k + 1)**schedule.v
    else:
        return int(schedule.size)
    size = max(1, ceil_int(value))
    if size > schedule.max_batch:
        raise ScheduleError(
            f'{kind} batch at k={k} exceeds the cap of {schedule.max_batch}'
        )
    return size

def cumulative_samples(schedule, n, iterations):
    """Samples drawn by ``n`` players after ``iterations`` iterations."""
    return n * sum(batch_size(schedule, j) for j in range(iterations))

@dataclass(frozen=True)
class CommSchedule:
    """Consensus rounds tau_k: ``linear`` k+1, ``polynomial`` ceil((k+1)^u)
    and ``log`` max(1, ceil(ln k))."""
    kind: str
    u: float = None

    def __post_init__(self):
        if self.kind not in comm_kinds:
            raise ScheduleError(f'Unknown communication schedule kind {self.kind}')
        if self.kind == 'polynomial':
            if self.u is None or not 0.0 < self.u <= 1.0:
                raise ScheduleError(f'u must lie in (0, 1]; got {self.u}')

    def to_dict(self):
        return {key: value for key, value in asdict(self).items() if value is not None}

def comm_rounds(schedule, k):
    """tau_k of a communication schedule.

    ln(k) is undefined or nonpositive for k in {0, 1}; both use one round.
    """
    if k < 0:
        raise DomainError(f'Iteration index must be nonnegative; got {k}')
    if schedule.kind == 'linear':
        return k + 1
    elif schedule.kind == 'polynomial':
        return max(1, ceil_int((k + 1)**schedule.u))
    if k < 2:
        return 1
    return max(1, ceil_int(math.log(k)))

def cumulative_comm_rounds(schedule, iterations):
    return sum(comm_rounds(schedule, j) for j in range(iterations))
