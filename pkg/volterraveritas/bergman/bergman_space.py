from __future__ import annotations
from dataclasses import dataclass
from typing import Optional, Tuple, Union
import logging
import math

import numpy as np
from scipy import integrate, special

from volterraveritas.kernels.memory_kernel import MemoryKernel, TAIL_CUTOFF
from volterraveritas.utils.errors import DivergenceError, QuadratureAccuracyError, ValidationError
from volterraveritas.utils.utils import is_finite_number

logger = logging.getLogger(__name__)

#: Angle the embedding constant is evaluated at when the sector is the whole right half-plane.
DEFAULT_PROXY_ANGLE = 5.0 * math.pi / 12.0

#: One-sided slack every lhs <= rhs check allows for rounding.
INEQUALITY_SLACK = 1e-9


@dataclass(frozen=True)
class SectorSpec:
    """Sector Sigma_theta = {|arg z| < theta} together with the integrability exponent q of B^q_theta.

    Args:
        theta: half-opening angle in (0, pi/2].
        q: exponent > 1.
    """
    theta: float
    q: float

    def __post_init__(self):
        if not is_finite_number(self.theta) or not 0.0 < self.theta <= math.pi / 2 + 1e-15:
            raise ValidationError(f'must lie in (0, pi/2], got {self.theta!r}', 'theta')
        if not is_finite_number(self.q) or self.q <= 1.0:
            raise ValidationError(f'must be > 1, got {self.q!r}', 'q')

    @property
    def is_half_plane(self) -> bool:
        return self.theta >= math.pi / 2

    @property
    def slope(self) -> float:
        """tan(theta); the sector is |sigma| < tau * slope."""
        return math.tan(self.theta)


class ShiftedKernel:
    """Evaluator z -> f(z + t), the translation semigroup acting on a kernel.

    Args:
        kernel: the kernel being translated.
        shift: t >= 0.
    """

    def __init__(self, kernel: MemoryKernel, shift: float):
        self.kernel = kernel
        self.shift = shift

    def eval(self, z):
        return self.kernel.eval(np.asarray(z, dtype=complex) + self.shift)

    __call__ = eval

    def on_halfline(self, t):
        return self.kernel.on_halfline(np.asarray(t, dtype=float) + self.shift)

    def __repr__(self):
        return f'ShiftedKernel({self.kernel.spec}, t={self.shift!r})'


def translation_apply(kernel: MemoryKernel, shift: float) -> Union[MemoryKernel, ShiftedKernel]:
    """
    Translation semigroup on the Bergman space, (S(t)f)(z) = f(z + t).

    Exponential kernels stay in their family, beta e^{-gamma(z+t)} = (beta e^{-gamma t}) e^{-gamma z},
    so a MemoryKernel comes back; other kernels are wrapped in a ShiftedKernel.
    """
    if not is_finite_number(shift) or shift < 0.0:
        raise ValidationError(f'must be >= 0, got {shift!r}', 't')
    if shift == 0.0:
        return kernel
    if kernel.is_exponential:
        return MemoryKernel.exponential(kernel.beta * math.exp(-kernel.gamma * shift), kernel.gamma)
    return ShiftedKernel(kernel, shift)


def _angular_factor(kernel: MemoryKernel, spec: SectorSpec) -> float:
    """integral_{-tan theta}^{tan theta} (1 + u^2)^{q m / 2} du."""
    if kernel.power == 0:
        return 2.0 * spec.slope
    exponent = spec.q * kernel.power / 2.0
    value, _ = integrate.quad(lambda u: (1.0 + u * u) ** exponent, 0.0, spec.slope, epsabs=0.0, epsrel=1e-13)
    return 2.0 * value


def _radial_tail(kernel: MemoryKernel, spec: SectorSpec, start: float) -> float:
    """beta^q * integral_start^inf tau^{qm+1} e^{-q gamma tau} dtau."""
    shape = spec.q * kernel.power + 2.0
    rate = spec.q * kernel.gamma
    return kernel.beta ** spec.q * special.gamma(shape) * special.gammaincc(shape, rate * start) / rate ** shape


def bergman_norm_closed_form(kernel: MemoryKernel, spec: SectorSpec) -> float:
    """
    Exact ||beta z^m e^{-gamma z}||_{B^q_theta} for theta < pi/2.

    Writing sigma = tau u, the area integral factors into
    beta^q * Gamma(qm + 2) / (q gamma)^{qm+2} * integral_{-tan theta}^{tan theta} (1 + u^2)^{qm/2} du.
    """
    if spec.is_half_plane:
        raise DivergenceError(f'{kernel.spec} is not q-integrable over the half-plane')
    if kernel.beta == 0.0:
        return 0.0
    shape = spec.q * kernel.power + 2.0
    radial = kernel.beta ** spec.q * special.gamma(shape) / (spec.q * kernel.gamma) ** shape
    return (radial * _angular_factor(kernel, spec)) ** (1.0 / spec.q)


def _check_half_plane_integrability(f, spec: SectorSpec, tau: float):
    """Watches the sigma-integral over growing windows; a q-integrable f makes it settle."""
    windows = (10.0, 100.0, 1000.0)
    masses = []
    for width in windows:
        mass, _ = integrate.quad(lambda sigma: abs(f.eval(tau + 1j * sigma)) ** spec.q, 0.0, width, limit=400)
        masses.append(mass)
    if masses[0] > 0.0 and masses[-1] > 1.5 * masses[1]:
        raise DivergenceError(f'{f!r}: sigma-integral at tau={tau:.3g} keeps growing '
                              f'({masses[1]:.3e} -> {masses[-1]:.3e}); not in B^{spec.q}_(pi/2)')


def bergman_norm_with_error(f: Union[MemoryKernel, ShiftedKernel], spec: SectorSpec,
                            tol: float = 1e-8) -> Tuple[float, float]:
    """
    Bergman norm (area integral over Sigma_theta of |f|^q)^(1/q) by nested adaptive quadrature,
    tau outer and sigma inner over |sigma| < tau tan(theta).

    For MemoryKernels the tau-integral stops at TAIL_CUTOFF / gamma and the exact tail beyond it is
    added; translated kernels are integrated out to infinity.

    Args:
        f: kernel or translated kernel.
        spec: sector and exponent.
        tol: relative tolerance of the area integral.

    Returns:
        (norm, error estimate of the norm).

    Raises:
        DivergenceError: the integral is infinite (every kernel of the family on the half-plane).
        QuadratureAccuracyError: the quadrature could not certify tol.
    """
    if spec.is_half_plane:
        base = f.kernel if isinstance(f, ShiftedKernel) else f
        if base.beta == 0.0:
            return 0.0, 0.0
        _check_half_plane_integrability(f, spec, tau=1.0 / base.gamma)
        raise DivergenceError(f'{f!r} is not in B^{spec.q}_(pi/2)')

    q = spec.q
    slope = spec.slope

    def integrand(sigma, tau):
        return abs(f.eval(tau + 1j * sigma)) ** q

    if isinstance(f, MemoryKernel):
        if f.beta == 0.0:
            return 0.0, 0.0
        upper = TAIL_CUTOFF / f.gamma
        tail = _radial_tail(f, spec, upper) * _angular_factor(f, spec)
    else:
        upper = np.inf
        tail = 0.0
    half, error = integrate.dblquad(integrand, 0.0, upper, lambda tau: 0.0, lambda tau: tau * slope,
                                    epsabs=0.0, epsrel=tol * 1e-1)
    # |f(conj z)| = |f(z)| for real kernels, so the lower half of the sector mirrors the upper one
    total = 2.0 * half + tail
    error = 2.0 * error
    if error > tol * total:
        raise QuadratureAccuracyError(f'Bergman norm of {f!r}', error / total, tol)
    norm = total ** (1.0 / q)
    return float(norm), float(norm * error / (q * total))


def bergman_norm(f: Union[MemoryKernel, ShiftedKernel], spec: SectorSpec, tol: float = 1e-8) -> float:
    """Norm of f in B^q_theta; see bergman_norm_with_error."""
    return bergman_norm_with_error(f, spec, tol)[0]


def default_proof_angle(slope: float) -> float:
    """arccos(min(0.9, 0.9 / tan(theta))), which keeps a * cos(alpha) <= 0.9."""
    return math.acos(min(0.9, 0.9 / slope))


@dataclass(frozen=True)
class Lemma4Params:
    """Parameters of the Bergman-to-L^p embedding estimate and every constant derived from them.

    The estimate bounds (integral_0^R |f|^p)^(1/p) by C_R ||f||_{B^q_theta} with p = q(s-1)/s.
    Its constant is assembled from a Cauchy-formula bound over two circle arcs of half-angle alpha,
    a lower bound of the Jacobian of the arc parametrisation, and a Hoelder step with exponents s, s'.

    Args:
        s: Hoelder exponent in (1, 2).
        q: Bergman exponent > 2.
        theta: sector angle in (0, pi/2]. At pi/2 the constant is evaluated at proxy_angle.
        alpha: arc half-angle in (0, pi/2); None picks default_proof_angle.
        proxy_angle: stand-in for theta = pi/2, valid by sector inclusion.
    """
    s: float
    q: float
    theta: float
    alpha: Optional[float] = None
    proxy_angle: float = DEFAULT_PROXY_ANGLE

    def __post_init__(self):
        if not is_finite_number(self.q) or self.q <= 2.0:
            raise ValidationError(f'must be > 2, got {self.q!r}', 'q')
        if not is_finite_number(self.s) or not 1.0 < self.s < 2.0:
            raise ValidationError(f'must lie in (1, 2), got {self.s!r}', 's')
        SectorSpec(self.theta, self.q)
        if not 0.0 < self.proxy_angle < math.pi / 2:
            raise ValidationError(f'must lie in (0, pi/2), got {self.proxy_angle!r}', 'proxy_angle')
        if self.alpha is None:
            object.__setattr__(self, 'alpha', default_proof_angle(self.a))
        if not is_finite_number(self.alpha) or not 0.0 < self.alpha < math.pi / 2:
            raise ValidationError(f'must lie in (0, pi/2), got {self.alpha!r}', 'alpha')
        if self.a * self.c >= 1.0:
            raise ValidationError(f'a*cos(alpha) = {self.a * self.c:.6g} must be < 1', 'alpha')

    @property
    def effective_theta(self) -> float:
        return self.proxy_angle if self.theta >= math.pi / 2 else self.theta

    @property
    def a(self) -> float:
        return math.tan(self.effective_theta)

    @property
    def c(self) -> float:
        return math.cos(self.alpha)

    @property
    def p(self) -> float:
        """p_{s,q} = q(s - 1)/s."""
        return self.q * (self.s - 1.0) / self.s

    @property
    def s_conjugate(self) -> float:
        return self.s / (self.s - 1.0)

    @property
    def c1(self) -> float:
        """Jacobian lower-bound factor, |J| >= c1 * x."""
        a, c = self.a, self.c
        return a * (c * (1.0 - a * c) + a) / (1.0 + a * (1.0 - c))

    def delta(self, radius: float) -> float:
        """How far right of R the first arc family reaches, R(1 - c)a."""
        return radius * (1.0 - self.c) * self.a

    @property
    def cauchy_prefactor(self) -> float:
        """(4 alpha)^{p-1} / (2 pi (1 - c))^p."""
        p = self.p
        return (4.0 * self.alpha) ** (p - 1.0) / (2.0 * math.pi * (1.0 - self.c)) ** p

    @property
    def c_tilde(self) -> float:
        """R-independent factor of the Hoelder step."""
        a, c, s = self.a, self.c, self.s
        return ((2.0 * a * math.sin(self.alpha)) ** (1.0 / s)
                * (1.0 + a * (1.0 - c)) / (a * (a + c * (1.0 - a * c)))
                * (1.0 + (1.0 - c) * a) ** ((2.0 - s) / s)
                / (2.0 - s) ** (1.0 / s))

    def with_alpha(self, alpha: float) -> Lemma4Params:
        return Lemma4Params(self.s, self.q, self.theta, alpha, self.proxy_angle)

    def optimize_alpha(self, radius: float = 1.0, grid_size: int = 96) -> Tuple[Lemma4Params, float]:
        """
        Grid search over admissible arc angles for the smallest constant.

        The grid always contains the default angle, so the result never exceeds the default constant.

        Returns:
            (params at the best alpha, C_R there).
        """
        lower = math.acos(min(1.0, 1.0 / self.a))
        candidates = list(np.linspace(lower, math.pi / 2, grid_size + 2)[1:-1])
        candidates.append(default_proof_angle(self.a))
        if self.alpha is not None:
            candidates.append(self.alpha)
        best = None
        for alpha in candidates:
            try:
                params = self.with_alpha(float(alpha))
            except ValidationError:
                continue
            value = lemma4_constant(params, radius)
            if best is None or value < best[1]:
                best = (params, value)
        return best


def lemma4_constant(params: Lemma4Params, radius: float) -> float:
    """
    Constant C_R of (integral_0^R |f(t)|^p dt)^(1/p) <= C_R ||f||_{B^q_theta}, p = p_{s,q}.

    The Cauchy bound integrated over (0, R) gives
    integral_0^R |f|^p <= cauchy_prefactor * (I_1 + I_2), and each arc integral I_j is at most
    c_tilde * R^{(2-s)/s} * ||f||^p, hence C_R = (2 * cauchy_prefactor * c_tilde * R^{(2-s)/s})^{1/p},
    which vanishes like R^{(2-s)/(s p)} as R -> 0.

    Args:
        params: exponents and angles.
        radius: R > 0.

    Returns:
        C_R > 0.
    """
    if not is_finite_number(radius) or radius <= 0.0:
        raise ValidationError(f'must be > 0, got {radius!r}', 'R')
    if params.theta >= math.pi / 2:
        logger.warning('theta = pi/2: embedding constant evaluated at proxy angle %.6g', params.proxy_angle)
    s = params.s
    power_sum = 2.0 * params.cauchy_prefactor * params.c_tilde * radius ** ((2.0 - s) / s)
    return power_sum ** (1.0 / params.p)


@dataclass(frozen=True)
class EmbeddingCheck:
    """One row of the embedding experiment."""
    kernel: str
    q: float
    s: float
    theta: float
    alpha: float
    R: float
    C_R: float
    lhs: float
    norm: float
    rhs: float

    @property
    def satisfied(self) -> bool:
        return bool(self.lhs <= self.rhs * (1.0 + INEQUALITY_SLACK))

    def row(self) -> dict:
        return {'kernel': self.kernel, 'q': self.q, 's': self.s, 'theta': self.theta, 'alpha': self.alpha,
                'R': self.R, 'C_R': self.C_R, 'lhs': self.lhs, 'rhs': self.rhs, 'satisfied': self.satisfied}


def embedding_check(kernel: MemoryKernel, params: Lemma4Params, radius: float, tol: float = 1e-8) -> EmbeddingCheck:
    """
    Evaluates both sides of the embedding estimate for one kernel.

    lhs = ||a||_{L^p(0,R)} by quadrature, rhs = C_R * ||a||_{B^q_theta}. For theta = pi/2 the Bergman norm
    is taken on the proxy sector, which can only make rhs smaller, so satisfied=True still proves the
    half-plane inequality.
    """
    constant = lemma4_constant(params, radius)
    lhs = kernel.lp_halfline_norm(params.p, radius)
    norm = bergman_norm(kernel, SectorSpec(params.effective_theta, params.q), tol)
    return EmbeddingCheck(kernel.spec, params.q, params.s, params.theta, params.alpha, radius, constant, lhs, norm,
                          constant * norm)


def time_exponent_constant(p: float, q: float, theta: float, horizon: float) -> Tuple[float, float]:
    """
    Embedding constant bounding the L^p(0, T) norm (time exponent p) by the B^q_theta norm.

    That needs p_{s,q} = p, i.e. s = q/(q - p), which lies in (1, 2) only when q > 2p. For smaller q the
    Bergman exponent is raised to 3p (s = 3/2) and the substitution is logged.

    Returns:
        (C_T, Bergman exponent actually used).
    """
    if not is_finite_number(p) or p <= 1.0:
        raise ValidationError(f'must be > 1, got {p!r}', 'p')
    q_effective = q
    if q <= 2.0 * p:
        q_effective = 3.0 * p
        logger.warning('Bergman exponent q=%.6g <= 2p=%.6g; using q=%.6g for the time-exponent embedding',
                       q, 2.0 * p, q_effective)
    s = q_effective / (q_effective - p)
    params = Lemma4Params(s, q_effective, theta)
    return lemma4_constant(params, horizon), q_effective


def choose_exponent(q: float, l: float) -> Tuple[float, float]:
    """
    Picks s in (1, 2) with 1 < p_{s,q} = q(s-1)/s <= l.

    The admissible s-interval is (1, 2) when q <= 2l and (1, q/(q - l)] when q >= 2l; the midpoint is
    returned. p_{s,q} > 1 additionally needs s > q/(q - 1), so when the midpoint falls short of it the
    interval is narrowed to (q/(q - 1), upper] and its midpoint used instead. That lower end is below 2
    only for q > 2, so q <= 2 has no solution.

    Examples:
        choose_exponent(4, 2)   => (1.5, 4/3)
        choose_exponent(10, 2)  => (1.125, 10/9)

    Raises:
        ValidationError: q <= 2 or l <= 1.
    """
    if not is_finite_number(l) or l <= 1.0:
        raise ValidationError(f'must be > 1, got {l!r}', 'l')
    if not is_finite_number(q) or q <= 2.0:
        raise ValidationError(f'must be > 2 for some s in (1, 2) to give p_(s,q) > 1, got {q!r}', 'q')
    upper = 2.0 if q <= 2.0 * l else q / (q - l)
    s = 0.5 * (1.0 + upper)
    p = q * (s - 1.0) / s
    if not 1.0 < p <= l:
        lower = q / (q - 1.0)
        s = 0.5 * (lower + upper)
        p = q * (s - 1.0) / s
    return s, p
