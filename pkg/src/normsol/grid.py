"""Radial discretization of R^N.

Nodes are cell centres of a finite-volume mesh on [0, rmax].  Each node
owns the spherical shell between the midpoints to its neighbours (the
outermost shell ends at rmax), so the quadrature weight of node i is the
exact shell volume and the discrete Dirichlet form is a sum over cell
faces.  The wall at rmax carries a homogeneous Dirichlet value half a cell
beyond the last node; the origin face has zero area, which is the
ghost-reflection condition u'(0) = 0.

With this layout the discrete Laplacian is self-adjoint for the weighted
inner product and <-Lu, u> equals the discrete gradient norm exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solveh_banded

from .errors import ConstraintError, DilationRangeError, ParameterError

MIN_NODES = 512

# Defaults for the two kinds of runs.  Bubble grids need a very large
# truncation radius because |grad U|^2 only decays like r^{2-2N}.
SUBCRITICAL_RMAX = 100.0
SUBCRITICAL_CORE = 0.02
SUBCRITICAL_NODES = 2048
BUBBLE_RMAX = 1.0e7
BUBBLE_CORE = 1.0e-4
BUBBLE_NODES = 8192


def critical_exponent(N):
    """Sobolev exponent 2N/(N-2)."""
    if N < 3:
        raise ParameterError(f"dimension must be >= 3, got {N}")
    return 2.0 * N / (N - 2.0)


def unit_sphere_area(N):
    """Surface area of the unit sphere in R^N, 2 pi^{N/2} / Gamma(N/2)."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Cell-centred radial mesh with shell-volume weights.

    Attributes
    ----------
    N : int
        Spatial dimension.
    nodes : ndarray
        Cell centres r_0 < ... < r_{M-1} < rmax.
    weights : ndarray
        Shell volumes; ``sum(weights * f)`` integrates a radial f over the ball.
    rmax : float
        Truncation radius, where the Dirichlet value 0 is imposed.
    faces : ndarray
        Outer face radius of each cell; the last one is the wall at rmax.
    face_coeff : ndarray
        Face area divided by the distance between the two adjacent nodes.
    """

    N: int
    nodes: np.ndarray
    weights: np.ndarray
    rmax: float
    faces: np.ndarray
    face_coeff: np.ndarray
    spacing: str = "uniform"
    core: float = 0.0

    @property
    def M(self):
        return self.nodes.size

    def integrate(self, values):
        return float(np.dot(self.weights, values))

    def volume_within(self, R):
        """Measure of the ball of radius R, integrating the indicator with cut cells."""
        inner = np.concatenate(([0.0], self.faces[:-1]))
        lo = np.minimum(inner, R)
        hi = np.minimum(self.faces, R)
        return unit_sphere_area(self.N) / self.N * float(np.sum(hi**self.N - lo**self.N))

    def spec(self):
        return {"N": self.N, "rmax": self.rmax, "M": self.M,
                "spacing": self.spacing, "core": self.core}


def make_grid(N, rmax=SUBCRITICAL_RMAX, M=2048, spacing="uniform", core=None):
    """Build a radial grid.

    Parameters
    ----------
    N : int
        Dimension (>= 3).
    rmax : float
        Truncation radius.
    M : int
        Number of unknowns (>= 512).
    spacing : {"uniform", "log-stretched"}
        ``log-stretched`` places nodes at core*(exp(kappa*s) - 1) for s at
        the centres of M equal cells of [0, 1], so spacing is about
        ``core*kappa/M`` near the origin and grows geometrically outward.
    core : float, optional
        Length scale below which a log-stretched grid is roughly uniform.
    """
    if N < 3:
        raise ParameterError(f"dimension must be >= 3, got {N}")
    if M < MIN_NODES:
        raise ParameterError(f"need at least {MIN_NODES} nodes, got {M}")
    if not rmax > 0:
        raise ParameterError(f"rmax must be positive, got {rmax}")
    s = (np.arange(M) + 0.5) / M
    if spacing == "uniform":
        nodes = rmax * s
        core = 0.0
    elif spacing == "log-stretched":
        if core is None:
            core = 1e-3 * rmax
        if not 0 < core < rmax:
            raise ParameterError("core must lie in (0, rmax)")
        kappa = math.log1p(rmax / core)
        nodes = core * np.expm1(kappa * s)
    else:
        raise ParameterError(f"unknown spacing {spacing!r}")
    ext = np.append(nodes, rmax)
    faces = np.append(0.5 * (nodes[:-1] + nodes[1:]), rmax)
    inner = np.concatenate(([0.0], faces[:-1]))
    omega = unit_sphere_area(N)
    weights = omega / N * (faces**N - inner**N)
    face_coeff = omega * faces ** (N - 1) / np.diff(ext)
    for arr in (nodes, weights, faces, face_coeff):
        arr.setflags(write=False)
    return RadialGrid(N=N, nodes=nodes, weights=weights, rmax=float(rmax),
                      faces=faces, face_coeff=face_coeff, spacing=spacing,
                      core=float(core))


def default_grid(N, kind="subcritical", M=None):
    """Grid defaults: log-stretched to rmax=100 with a fine core, or a wide bubble grid.

    The subcritical core resolves concentrated mountain-pass states; the
    Pohozaev residual of discrete solutions then sits well below 1e-5.
    """
    if kind == "subcritical":
        return make_grid(N, SUBCRITICAL_RMAX, M or SUBCRITICAL_NODES, "log-stretched",
                         core=SUBCRITICAL_CORE)
    if kind == "bubble":
        return make_grid(N, BUBBLE_RMAX, M or BUBBLE_NODES, "log-stretched", core=BUBBLE_CORE)
    raise ParameterError(f"unknown grid kind {kind!r}")


def _face_jumps(grid, values):
    # u_{i+1} - u_i with u_M = 0 at rmax
    return np.diff(np.append(values, 0.0))


@dataclass(frozen=True, eq=False)
class RadialField:
    """Values of a radial function at the nodes of a grid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.nodes.shape:
            raise ParameterError("field size does not match grid")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    # norms -------------------------------------------------------------
    def mass_sq(self):
        """Squared L2 norm."""
        return float(np.dot(self.grid.weights, self.values**2))

    def l2(self):
        return math.sqrt(self.mass_sq())

    def grad_sq(self):
        """Squared L2 norm of the gradient (discrete Dirichlet form)."""
        d = _face_jumps(self.grid, self.values)
        return float(np.dot(self.grid.face_coeff, d * d))

    def lp_pow(self, p):
        """Integral of |u|^p."""
        return float(np.dot(self.grid.weights, np.abs(self.values) ** p))

    def integrate(self):
        return self.grid.integrate(self.values)

    # arithmetic --------------------------------------------------------
    def scaled(self, c):
        return RadialField(self.grid, c * self.values)

    def with_values(self, values):
        return RadialField(self.grid, values)

    def __add__(self, other):
        _same_grid(self, other)
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return RadialField(self.grid, self.values - other.values)

    def __mul__(self, c):
        return self.scaled(c)

    __rmul__ = __mul__

    def inner(self, other):
        """Weighted L2 inner product."""
        _same_grid(self, other)
        return float(np.dot(self.grid.weights, self.values * other.values))

    def normalized(self, mass):
        """Rescale to L2 norm ``mass``."""
        n = self.l2()
        if n == 0.0:
            raise ConstraintError("cannot normalize the zero field")
        return self.scaled(mass / n)

    def __call__(self, r):
        """Evaluate by monotone cubic interpolation (0 beyond rmax)."""
        return _interpolant(self)(np.asarray(r, dtype=float))

    # serialization -----------------------------------------------------
    def to_csv(self, path):
        write_profiles_csv(path, self.grid, {"value": self.values})

    def save(self, path):
        np.savez(path, N=self.grid.N, nodes=self.grid.nodes, rmax=self.grid.rmax,
                 spacing=self.grid.spacing, core=self.grid.core, values=self.values)


def load_field(path):
    """Read a field written by :meth:`RadialField.save`."""
    with np.load(path) as data:
        g = make_grid(int(data["N"]), float(data["rmax"]), int(data["nodes"].size),
                      str(data["spacing"]), float(data["core"]) or None)
        if not np.allclose(g.nodes, data["nodes"], rtol=1e-14, atol=0):
            raise ParameterError("stored nodes do not match a regenerated grid")
        return RadialField(g, data["values"])


def write_profiles_csv(path, grid, columns):
    """CSV with header ``r,<names>``; repr-precision floats, '.' decimal point."""
    names = list(columns)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(["r"] + names) + "\n")
        cols = [np.asarray(columns[n], dtype=float) for n in names]
        for i, r in enumerate(grid.nodes):
            fh.write(",".join(repr(float(x)) for x in [r] + [c[i] for c in cols]) + "\n")


def _same_grid(f, g):
    if f.grid is not g.grid:
        raise ParameterError("fields live on different grids")


def field_from_function(grid, fn):
    return RadialField(grid, fn(grid.nodes))


def gaussian_field(grid, width=1.0, center=0.0):
    """exp(-(r - center)^2 / (2 width^2)) sampled on the grid."""
    return RadialField(grid, np.exp(-0.5 * ((grid.nodes - center) / width) ** 2))


# ---------------------------------------------------------------------------
# operators

def laplacian_radial(f):
    """Discrete u'' + (N-1)u'/r; Neumann at 0, Dirichlet at rmax."""
    g = f.grid
    flux = g.face_coeff * _face_jumps(g, f.values)   # outward flux through each face
    div = flux - np.concatenate(([0.0], flux[:-1]))
    return RadialField(g, div / g.weights)


def stiffness_banded(grid, shift=0.0):
    """Upper banded form of (A + shift*W) where A is the Dirichlet-form matrix.

    Solving ``(A + shift W) x = W g`` applies ``(-L + shift)^{-1}`` to g.
    """
    c = grid.face_coeff
    diag = c.copy()
    diag[1:] += c[:-1]
    diag += shift * grid.weights
    ab = np.zeros((2, grid.M))
    ab[0, 1:] = -c[:-1]
    ab[1] = diag
    return ab


def stiffness_sparse(grid):
    """Dirichlet-form matrix A (K = x^T A x) as a sparse CSR matrix."""
    from scipy import sparse

    ab = stiffness_banded(grid, 0.0)
    off = ab[0, 1:]
    return sparse.diags([off, ab[1], off], [-1, 0, 1], format="csr")


def solve_shifted(grid, shift, g, banded=None):
    """Return x with (-L + shift) x = g on the grid."""
    if banded is None:
        banded = stiffness_banded(grid, shift)
    return solveh_banded(banded, grid.weights * g)


# ---------------------------------------------------------------------------
# explicit profiles

def bubble_values(N, eps, r):
    """U_eps(r) = (sqrt(N(N-2)) eps / (eps^2 + r^2))^{(N-2)/2}."""
    if not eps > 0:
        raise ParameterError("eps must be positive")
    return (math.sqrt(N * (N - 2.0)) * eps / (eps * eps + r * r)) ** ((N - 2.0) / 2.0)


def sample_bubble(grid, eps):
    """The extremal profile U_eps on the grid."""
    return RadialField(grid, bubble_values(grid.N, eps, grid.nodes))


def smooth_cutoff(r):
    """C-infinity monotone cutoff: 1 on r <= 1, 0 on r >= 2."""
    r = np.asarray(r, dtype=float)
    s = np.clip(r - 1.0, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f0 = np.where(s < 1.0, np.exp(-1.0 / np.where(s < 1.0, 1.0 - s, 1.0)), 0.0)
        f1 = np.where(s > 0.0, np.exp(-1.0 / np.where(s > 0.0, s, 1.0)), 0.0)
    return f0 / (f0 + f1)


def cutoff_bubble(grid, eps):
    """eta_eps = phi * U_eps with the smooth cutoff phi."""
    if not grid.rmax > 2.0:
        raise ParameterError("cutoff bubble needs rmax > 2")
    return RadialField(grid, smooth_cutoff(grid.nodes) * bubble_values(grid.N, eps, grid.nodes))


def sobolev_constant(N):
    """Best constant S of |grad u|_2^2 >= S |u|_{2*}^2, from the bubble quotient.

    The integrals of the analytic U_1 are done by adaptive quadrature after
    the substitution r = tan(theta), which maps the algebraic tail to a
    bounded interval.
    """
    q = critical_exponent(N)
    c = math.sqrt(N * (N - 2.0))
    k = (N - 2.0) / 2.0

    def grad_integrand(th):
        r = math.tan(th)
        du = c**k * k * 2.0 * r / (1.0 + r * r) ** (k + 1.0)   # |U_1'(r)|
        return du * du * r ** (N - 1) / math.cos(th) ** 2

    def crit_integrand(th):
        r = math.tan(th)
        u = (c / (1.0 + r * r)) ** k
        return u**q * r ** (N - 1) / math.cos(th) ** 2

    opts = dict(epsabs=0.0, epsrel=1e-13, limit=200)
    grad = integrate.quad(grad_integrand, 0.0, math.pi / 2, **opts)[0]
    crit = integrate.quad(crit_integrand, 0.0, math.pi / 2, **opts)[0]
    omega = unit_sphere_area(N)
    return omega * grad / (omega * crit) ** (2.0 / q)


# ---------------------------------------------------------------------------
# state pairs and dilation

@dataclass(eq=False)
class StatePair:
    """A pair (u, v) on one grid with target masses (a, b).

    Fields are immutable, so cached integrals never go stale; a new pair is
    created for every modification.
    """

    u: RadialField
    v: RadialField
    a: float
    b: float
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        _same_grid(self.u, self.v)
        if not (self.a > 0 and self.b > 0):
            raise ParameterError("target masses must be positive")

    @property
    def grid(self):
        return self.u.grid

    def mass_errors(self):
        """Relative deviation of (|u|_2, |v|_2) from (a, b)."""
        return abs(self.u.l2() / self.a - 1.0), abs(self.v.l2() / self.b - 1.0)

    def renormalized(self):
        return StatePair(self.u.normalized(self.a), self.v.normalized(self.b), self.a, self.b)

    def replace(self, u_values, v_values, renormalize=True):
        s = StatePair(self.u.with_values(u_values), self.v.with_values(v_values), self.a, self.b)
        return s.renormalized() if renormalize else s

    def clamped_nonnegative(self):
        return self.replace(np.maximum(self.u.values, 0.0), np.maximum(self.v.values, 0.0))


def gaussian_pair(grid, a, b, width=2.0, width_v=None):
    """Mass-fitted Gaussian seed."""
    u = gaussian_field(grid, width).normalized(a)
    v = gaussian_field(grid, width if width_v is None else width_v).normalized(b)
    return StatePair(u, v, a, b)


def _interpolant(f):
    g = f.grid
    x = np.concatenate(([-g.nodes[0]], g.nodes, [g.rmax]))
    y = np.concatenate(([f.values[0]], f.values, [0.0]))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        # flat stretches (underflowed tails) give zero secants; pchip copes
        pchip = PchipInterpolator(x, y, extrapolate=False)

    def evaluate(r):
        out = pchip(np.minimum(np.abs(r), g.rmax))
        out[np.abs(r) >= g.rmax] = 0.0
        return out

    return evaluate


def max_dilation(grid):
    """Largest |t| accepted by :func:`dilate`."""
    return math.log(grid.rmax / grid.nodes[0])


def dilate_field(f, t):
    """(t * u)(r) = e^{Nt/2} u(e^t r) by monotone cubic interpolation."""
    if t == 0.0:
        return f
    g = f.grid
    if abs(t) > max_dilation(g):
        raise DilationRangeError(f"|t| = {abs(t):.3g} exceeds grid range {max_dilation(g):.3g}")
    vals = math.exp(g.N * t / 2.0) * _interpolant(f)(math.exp(t) * g.nodes)
    return RadialField(g, vals)


def dilate(state, t, renormalize=True):
    """Mass-preserving dilation of both components.

    Interpolation changes the masses slightly; with ``renormalize`` the
    components are rescaled back to the targets (a, b).
    """
    s = StatePair(dilate_field(state.u, t), dilate_field(state.v, t), state.a, state.b)
    return s.renormalized() if renormalize else s
