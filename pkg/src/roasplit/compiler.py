"""Compile split certificate programs into standard-form conic SDPs.

The output is ``min c'x  s.t.  Ax = b,  x in K`` where K is a product of
a free block (polynomial coefficients) and one PSD block per
sum-of-squares multiplier.  PSD blocks are stored in scaled-vectorized
form (upper triangle, column-major, off-diagonal entries times sqrt(2))
so Euclidean inner products equal trace inner products.

Everything is assembled in per-cell scaled coordinates: each cell box,
time interval and the input box are affinely mapped onto [-1, 1] before
Gram assembly, and mapped back at extraction.  All enumeration orders
are fixed, so recompiling a problem yields a byte-identical matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .geom import Cell, SemialgebraicSet, TimeGrid, neighbor_facets
from .poly import Monomial, Polynomial, box_moments, monomial_basis
from .problem import RoaProblem

__all__ = [
    "CompileError",
    "ConeBlock",
    "SdpProblem",
    "SosBlock",
    "IdentityInfo",
    "DecisionLayout",
    "compile_problem",
    "compile_unsplit",
    "problem_size",
    "extract_solution",
    "write_cbf",
    "DEFAULT_MARGIN",
]

SQRT2 = math.sqrt(2.0)

# Tightening constant added to the flow-decrease and terminal
# inequalities.  It keeps optimal certificates strictly feasible, so the
# inequalities survive solver rounding with a margin to spare.
DEFAULT_MARGIN = 1e-3


class CompileError(ValueError):
    """Degree bookkeeping or structural failure during compilation."""


def svec_len(order: int) -> int:
    return order * (order + 1) // 2


def svec_pairs(order: int) -> list[tuple[int, int]]:
    """Upper-triangle (i <= j) index pairs in column-major order."""
    return [(i, j) for j in range(order) for i in range(j + 1)]


@dataclass(frozen=True)
class ConeBlock:
    kind: str  # "free" | "zero" | "nonneg" | "psd"
    dim: int  # length of the block inside x
    order: int | None = None  # matrix side for psd blocks

    def __post_init__(self):
        if self.kind not in ("free", "zero", "nonneg", "psd"):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.kind == "psd":
            if self.order is None or svec_len(self.order) != self.dim:
                raise ValueError("psd block dim must equal order*(order+1)/2")


@dataclass
class SdpProblem:
    """Standard conic form: min c'x s.t. Ax = b, x in product of cones."""

    A: sp.csc_matrix
    b: np.ndarray
    c: np.ndarray
    cones: tuple[ConeBlock, ...]

    def __post_init__(self):
        total = sum(blk.dim for blk in self.cones)
        if total != self.A.shape[1] or len(self.c) != total:
            raise ValueError("cone blocks do not partition the variable vector")
        if len(self.b) != self.A.shape[0]:
            raise ValueError("b length does not match A")

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    @property
    def nnz(self) -> int:
        return self.A.nnz


def problem_size(sdp: SdpProblem) -> int:
    """Number of structurally nonzero entries of the constraint matrix."""
    return sdp.nnz


@dataclass(frozen=True)
class SosBlock:
    """One sum-of-squares multiplier inside an identity."""

    label: str
    offset: int  # first column of the svec slots
    basis: tuple[Monomial, ...]
    g: Polynomial  # local-coordinate factor multiplying the SOS (1 for q)


@dataclass(frozen=True)
class IdentityInfo:
    """Metadata of one compiled polynomial identity (equality family)."""

    ident_id: str
    family: str  # lie | init | terminal | wpos | stitch | flow+ | flow-
    key: tuple
    local_vars: tuple[str, ...]
    match_degree: int
    row_offset: int
    n_rows: int
    blocks: tuple[SosBlock, ...]
    const: float
    # local -> original coordinates: orig = shift + scale * local
    var_maps: dict
    # original coordinates fixed by the identity (initial/terminal time,
    # collapsed facet coordinate)
    fixed_vars: dict


@dataclass
class DecisionLayout:
    """Column map of the decision vector plus identity metadata."""

    problem: RoaProblem
    margin: float
    v_groups: dict  # (cell, interval) -> (offset, basis)
    w_groups: dict  # cell -> (offset, basis)
    cell_scales: list  # cell -> (centers, halfwidths)
    t_scales: list  # interval -> (center, halfwidth)
    u_scale: tuple | None
    identities: list
    terminal_cells: tuple[int, ...]
    n_free: int
    n_cols: int
    n_rows: int


_BASIS_CACHE: dict = {}


def _basis(local_vars: tuple[str, ...], degree: int) -> list[Monomial]:
    key = (local_vars, degree)
    if key not in _BASIS_CACHE:
        _BASIS_CACHE[key] = monomial_basis(local_vars, degree)
    return _BASIS_CACHE[key]


def _normalized(g: Polynomial) -> Polynomial:
    """Scale an inequality to unit max-abs coefficient (set unchanged)."""
    top = g.max_abs_coefficient()
    if top == 0.0:
        return g
    return g * (1.0 / top)


def _interval_scale(lo: float, hi: float) -> tuple[float, float]:
    return ((lo + hi) / 2.0, (hi - lo) / 2.0)


def _max_on_box(g: Polynomial, box, names) -> float | None:
    """Exact maximum over the box for separable quadratics, else None.

    Handles every polynomial whose monomials involve a single variable
    with exponent at most two (covers affine functions and centered
    balls); returns None when the shape is more general.
    """
    linear: dict[str, float] = {}
    quad: dict[str, float] = {}
    const = 0.0
    for mono, coeff in g.terms.items():
        vars_ = mono.variables()
        if len(vars_) == 0:
            const += coeff
        elif len(vars_) == 1 and mono.degree() <= 2:
            v = vars_[0]
            if mono.degree() == 1:
                linear[v] = linear.get(v, 0.0) + coeff
            else:
                quad[v] = quad.get(v, 0.0) + coeff
        else:
            return None
    total = const
    for name, (lo, hi) in zip(names, box):
        b = linear.get(name, 0.0)
        a = quad.get(name, 0.0)
        candidates = [a * lo * lo + b * lo, a * hi * hi + b * hi]
        if a < 0.0:
            v = -b / (2.0 * a)
            if lo < v < hi:
                candidates.append(a * v * v + b * v)
        total += max(candidates)
    return total


def _cell_meets_target(cell: Cell, target: SemialgebraicSet, names) -> bool:
    """False only when some target inequality is provably negative on the cell."""
    for g in target.inequalities:
        top = _max_on_box(g, cell.box, names)
        if top is not None and top < 0.0:
            return False
    return True


class _Assembler:
    """Accumulates triplets, cones and identity metadata."""

    def __init__(self):
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []
        self.b_entries: dict[int, float] = {}
        self.col_cursor = 0
        self.row_cursor = 0
        self.cones: list[ConeBlock] = []
        self.identities: list[IdentityInfo] = []
        # current identity context
        self._row_index: dict[Monomial, int] | None = None
        self._ident: dict | None = None

    def alloc_free(self, size: int) -> int:
        if self.cones:
            raise CompileError("free slots must be allocated before cone blocks")
        offset = self.col_cursor
        self.col_cursor += size
        return offset

    def seal_free(self):
        if self.col_cursor:
            self.cones.append(ConeBlock("free", self.col_cursor))

    def begin_identity(self, ident_id, family, key, local_vars, match_degree,
                       const, var_maps, fixed_vars):
        basis = _basis(tuple(local_vars), match_degree)
        self._row_index = {mono: self.row_cursor + i for i, mono in enumerate(basis)}
        self._ident = dict(
            ident_id=ident_id,
            family=family,
            key=key,
            local_vars=tuple(local_vars),
            match_degree=match_degree,
            row_offset=self.row_cursor,
            n_rows=len(basis),
            blocks=[],
            const=float(const),
            var_maps=dict(var_maps),
            fixed_vars=dict(fixed_vars),
        )
        if const != 0.0:
            self.b_entries[self._row_index[Monomial()]] = float(const)

    def scatter(self, poly: Polynomial, col: int, sign: float):
        idx = self._row_index
        ident = self._ident["ident_id"]
        for mono, coeff in poly.terms.items():
            row = idx.get(mono)
            if row is None:
                raise CompileError(
                    f"identity {ident}: monomial {mono} of degree {mono.degree()} "
                    f"exceeds the matching degree {self._ident['match_degree']}"
                )
            self.rows.append(row)
            self.cols.append(col)
            self.vals.append(sign * coeff)

    def add_linear_group(self, offset: int, basis, contribution):
        """LHS contribution of one coefficient group; ``contribution``
        maps a basis monomial to its local-coordinate polynomial."""
        for i, mono in enumerate(basis):
            poly = contribution(mono)
            if not poly.is_zero():
                self.scatter(poly, offset + i, +1.0)

    def add_sos_block(self, label: str, g: Polynomial):
        """Subtract an SOS multiplier times ``g`` from the identity."""
        M = self._ident["match_degree"]
        dg = g.degree()
        if dg > M:
            raise CompileError(
                f"identity {self._ident['ident_id']}, multiplier {label}: "
                f"factor degree {dg} exceeds the degree budget {M}"
            )
        half = (M - dg) // 2
        basis = _basis(self._ident["local_vars"], half)
        order = len(basis)
        offset = self.col_cursor
        self.col_cursor += svec_len(order)
        self.cones.append(ConeBlock("psd", svec_len(order), order))
        for sv, (bi, bj) in enumerate(svec_pairs(order)):
            scale = 1.0 if bi == bj else SQRT2
            prod = Polynomial({basis[bi] * basis[bj]: scale}) * g
            self.scatter(prod, offset + sv, -1.0)
        self._ident["blocks"].append(
            SosBlock(label=label, offset=offset, basis=tuple(basis), g=g)
        )

    def end_identity(self):
        info = self._ident
        info["blocks"] = tuple(info["blocks"])
        self.identities.append(IdentityInfo(**info))
        self.row_cursor += info["n_rows"]
        self._row_index = None
        self._ident = None

    def build(self, c: np.ndarray) -> SdpProblem:
        A = sp.coo_matrix(
            (self.vals, (self.rows, self.cols)),
            shape=(self.row_cursor, self.col_cursor),
        ).tocsc()
        A.eliminate_zeros()
        A.sort_indices()
        b = np.zeros(self.row_cursor)
        for row, val in self.b_entries.items():
            b[row] = val
        return SdpProblem(A=A, b=b, c=c, cones=tuple(self.cones))


def _scaled_dynamics(problem: RoaProblem, cell_scale, t_scale, u_scale):
    """Dynamics of the scaled state as polynomials in scaled variables."""
    system = problem.system
    centers, halfw = cell_scale
    ct, rt = t_scale
    maps = {"t": (ct, rt)}
    for j, name in enumerate(system.state_names()):
        maps[name] = (centers[j], halfw[j])
    if u_scale is not None:
        cu, ru = u_scale
        for l, name in enumerate(system.input_names()):
            maps[name] = (cu[l], ru[l])
    out = []
    for j, fj in enumerate(system.f):
        g = fj.affine_substitute(maps) * (rt / halfw[j])
        out.append(g)
    return out


def _scaled_set(polys, maps) -> list[Polynomial]:
    return [_normalized(g.affine_substitute(maps)) for g in polys]


_UNIT = (-1.0, 1.0)


def _box_ineqs(names) -> list[Polynomial]:
    out = []
    for name in names:
        x = Polynomial.variable(name)
        out.append(x + 1.0)
        out.append(-x + 1.0)
    return out


def _u_scale_of(problem: RoaProblem):
    if problem.system.m == 0:
        return None
    if problem.u_box is not None:
        centers = tuple((lo + hi) / 2.0 for lo, hi in problem.u_box)
        halfw = tuple((hi - lo) / 2.0 for lo, hi in problem.u_box)
    else:
        centers = (0.0,) * problem.system.m
        halfw = (1.0,) * problem.system.m
    return (centers, halfw)


def _u_maps(problem: RoaProblem, u_scale):
    if u_scale is None:
        return {}
    cu, ru = u_scale
    return {name: (cu[l], ru[l]) for l, name in enumerate(problem.system.input_names())}


def _scaled_input_set(problem: RoaProblem, u_scale) -> list[Polynomial]:
    if problem.U is None:
        return []
    return _scaled_set(problem.U.inequalities, _u_maps(problem, u_scale))


def _lie_contribution(state_names, f_scaled):
    """Maps a (t, x) monomial of v to minus its scaled flow derivative."""

    def contribution(mono: Monomial) -> Polynomial:
        p = Polynomial({mono: 1.0})
        out = -p.differentiate("t")
        for name, fj in zip(state_names, f_scaled):
            out = out - p.differentiate(name) * fj
        return out

    return contribution


def _emit_lie(asm, problem, layout_vg, i, k, cell_scale, t_scale, u_scale, margin):
    system = problem.system
    state = system.state_names()
    local_vars = ("t",) + state + system.input_names()
    f_scaled = _scaled_dynamics(problem, cell_scale, t_scale, u_scale)
    deg_f = max((g.degree() for g in f_scaled), default=0)
    d = problem.degree
    M = max(d, d - 1 + deg_f)
    centers, halfw = cell_scale
    var_maps = {"t": t_scale}
    for j, name in enumerate(state):
        var_maps[name] = (centers[j], halfw[j])
    var_maps.update(_u_maps(problem, u_scale))

    asm.begin_identity(
        f"lie[{i},{k}]", "lie", (i, k), local_vars, M,
        const=margin, var_maps=var_maps, fixed_vars={},
    )
    offset, basis = layout_vg[(i, k)]
    asm.add_linear_group(offset, basis, _lie_contribution(state, f_scaled))
    asm.add_sos_block("q", Polynomial.constant(1.0))
    for idx, g in enumerate(_box_ineqs(("t",))):
        asm.add_sos_block(f"time[{idx}]", g)
    for idx, g in enumerate(_box_ineqs(state)):
        asm.add_sos_block(f"cell[{idx}]", g)
    for idx, g in enumerate(_scaled_input_set(problem, u_scale)):
        asm.add_sos_block(f"input[{idx}]", g)
    asm.end_identity()


def _emit_init(asm, problem, layout_vg, layout_wg, i, cell_scale):
    state = problem.system.state_names()
    centers, halfw = cell_scale
    var_maps = {name: (centers[j], halfw[j]) for j, name in enumerate(state)}
    asm.begin_identity(
        f"init[{i}]", "init", (i,), state, problem.degree,
        const=1.0, var_maps=var_maps, fixed_vars={"t": 0.0},
    )
    w_off, w_basis = layout_wg[i]
    asm.add_linear_group(w_off, w_basis, lambda mono: Polynomial({mono: 1.0}))
    v_off, v_basis = layout_vg[(i, 0)]
    asm.add_linear_group(
        v_off, v_basis,
        lambda mono: -Polynomial({mono: 1.0}).substitute({"t": -1.0}),
    )
    asm.add_sos_block("q", Polynomial.constant(1.0))
    for idx, g in enumerate(_box_ineqs(state)):
        asm.add_sos_block(f"cell[{idx}]", g)
    asm.end_identity()


def _emit_terminal(asm, problem, layout_vg, i, cell_scale, margin):
    state = problem.system.state_names()
    centers, halfw = cell_scale
    maps = {name: (centers[j], halfw[j]) for j, name in enumerate(state)}
    target_scaled = _scaled_set(problem.XT.inequalities, maps)
    last = problem.time_grid.n_intervals - 1
    asm.begin_identity(
        f"terminal[{i}]", "terminal", (i,), state, problem.degree,
        const=margin, var_maps=maps, fixed_vars={"t": problem.T},
    )
    v_off, v_basis = layout_vg[(i, last)]
    asm.add_linear_group(
        v_off, v_basis,
        lambda mono: Polynomial({mono: 1.0}).substitute({"t": 1.0}),
    )
    asm.add_sos_block("q", Polynomial.constant(1.0))
    for idx, g in enumerate(target_scaled):
        asm.add_sos_block(f"target[{idx}]", g)
    for idx, g in enumerate(_box_ineqs(state)):
        asm.add_sos_block(f"cell[{idx}]", g)
    asm.end_identity()


def _emit_wpos(asm, problem, layout_wg, i, cell_scale):
    state = problem.system.state_names()
    centers, halfw = cell_scale
    maps = {name: (centers[j], halfw[j]) for j, name in enumerate(state)}
    asm.begin_identity(
        f"wpos[{i}]", "wpos", (i,), state, problem.degree,
        const=0.0, var_maps=maps, fixed_vars={},
    )
    w_off, w_basis = layout_wg[i]
    asm.add_linear_group(w_off, w_basis, lambda mono: Polynomial({mono: 1.0}))
    asm.add_sos_block("q", Polynomial.constant(1.0))
    for idx, g in enumerate(_box_ineqs(state)):
        asm.add_sos_block(f"cell[{idx}]", g)
    asm.end_identity()


def _emit_stitch(asm, problem, layout_vg, i, k, cell_scale):
    state = problem.system.state_names()
    centers, halfw = cell_scale
    maps = {name: (centers[j], halfw[j]) for j, name in enumerate(state)}
    knot = problem.time_grid.knots[k + 1]
    asm.begin_identity(
        f"stitch[{i},{k}]", "stitch", (i, k), state, problem.degree,
        const=0.0, var_maps=maps, fixed_vars={"t": knot},
    )
    off_k, basis_k = layout_vg[(i, k)]
    asm.add_linear_group(
        off_k, basis_k, lambda mono: Polynomial({mono: 1.0}).substitute({"t": 1.0})
    )
    off_n, basis_n = layout_vg[(i, k + 1)]
    asm.add_linear_group(
        off_n, basis_n, lambda mono: -Polynomial({mono: 1.0}).substitute({"t": -1.0})
    )
    asm.add_sos_block("q", Polynomial.constant(1.0))
    for idx, g in enumerate(_box_ineqs(state)):
        asm.add_sos_block(f"cell[{idx}]", g)
    asm.end_identity()


def _facet_restriction(problem, facet, cell_scale, free_axes):
    """Affine map from facet-local scaled coordinates into one cell's
    scaled coordinates, plus the fixed scaled value of the collapsed axis."""
    state = problem.system.state_names()
    centers, halfw = cell_scale
    fixed = (facet.value - centers[facet.axis]) / halfw[facet.axis]
    maps = {}
    for j in free_axes:
        cf, rf = _interval_scale(*facet.box[j])
        maps[state[j]] = ((cf - centers[j]) / halfw[j], rf / halfw[j])
    return fixed, maps


def _emit_flow(asm, problem, layout_vg, facet_idx, facet, k,
               scales, t_scale, u_scale, sign_label):
    system = problem.system
    state = system.state_names()
    n = system.n
    free_axes = [j for j in range(n) if j != facet.axis]
    local_vars = ("t",) + tuple(state[j] for j in free_axes) + system.input_names()
    d = problem.degree

    # flow factor h'f restricted to the facet, in facet-local coordinates
    facet_maps = {"t": t_scale}
    for j in free_axes:
        facet_maps[state[j]] = _interval_scale(*facet.box[j])
    facet_maps[state[facet.axis]] = (facet.value, 0.0)
    facet_maps.update(_u_maps(problem, u_scale))
    flow = _normalized(
        (facet.sign * problem.system.f[facet.axis]).affine_substitute(facet_maps)
    )
    orientation = +1.0 if sign_label == "flow+" else -1.0

    var_maps = {"t": t_scale}
    for j in free_axes:
        var_maps[state[j]] = _interval_scale(*facet.box[j])
    var_maps.update(_u_maps(problem, u_scale))

    asm.begin_identity(
        f"{sign_label}[{facet.a},{facet.b},{k}]", sign_label,
        (facet_idx, k), local_vars, d,
        const=0.0, var_maps=var_maps,
        fixed_vars={state[facet.axis]: facet.value},
    )

    def side_contribution(cell_id, side_sign):
        fixed, maps = _facet_restriction(problem, facet, scales[cell_id], free_axes)

        def contribution(mono: Monomial) -> Polynomial:
            p = Polynomial({mono: 1.0}).substitute({state[facet.axis]: fixed})
            return side_sign * p.affine_substitute(maps)

        return contribution

    off_a, basis_a = layout_vg[(facet.a, k)]
    off_b, basis_b = layout_vg[(facet.b, k)]
    asm.add_linear_group(off_a, basis_a, side_contribution(facet.a, orientation))
    asm.add_linear_group(off_b, basis_b, side_contribution(facet.b, -orientation))

    asm.add_sos_block("q", Polynomial.constant(1.0))
    if not flow.is_zero():
        asm.add_sos_block("flow", orientation * flow)
    for idx, g in enumerate(_box_ineqs(("t",))):
        asm.add_sos_block(f"time[{idx}]", g)
    for idx, g in enumerate(_box_ineqs(tuple(state[j] for j in free_axes))):
        asm.add_sos_block(f"facet[{idx}]", g)
    for idx, g in enumerate(_scaled_input_set(problem, u_scale)):
        asm.add_sos_block(f"input[{idx}]", g)
    asm.end_identity()


def _allocate_groups(asm, problem):
    system = problem.system
    state = system.state_names()
    d = problem.degree
    v_basis = _basis(("t",) + state, d)
    w_basis = _basis(state, d)
    v_groups = {}
    w_groups = {}
    for cell in problem.cells:
        for k in range(problem.time_grid.n_intervals):
            v_groups[(cell.id, k)] = (asm.alloc_free(len(v_basis)), v_basis)
    for cell in problem.cells:
        w_groups[cell.id] = (asm.alloc_free(len(w_basis)), w_basis)
    return v_groups, w_groups


def _objective(problem, w_groups, n_cols):
    state = problem.system.state_names()
    unit_moments = box_moments([_UNIT] * problem.system.n, problem.degree, state)
    c = np.zeros(n_cols)
    for cell in problem.cells:
        offset, basis = w_groups[cell.id]
        jac = 1.0
        for lo, hi in cell.box:
            jac *= (hi - lo) / 2.0
        vals = unit_moments.as_array() * jac
        c[offset : offset + len(basis)] = vals
    return c


def compile_problem(problem: RoaProblem, margin: float = DEFAULT_MARGIN):
    """Compile the split program for a discretized problem.

    Emits, per cell i and interval k: the flow-decrease certificate on
    [T_k, T_{k+1}] x X_i x U, the initial slack w_i >= v_{i,1}(0,.) + 1,
    the terminal certificate on X_T intersected with qualifying cells,
    nonnegativity of w_i, time stitching across interior knots, and the
    two signed interface certificates per neighbouring facet.  The
    objective integrates the w_i over their cells.
    """
    problem.require_discretized()
    system = problem.system
    state = system.state_names()
    cells = problem.cells
    grid = problem.time_grid
    u_scale = _u_scale_of(problem)

    asm = _Assembler()
    v_groups, w_groups = _allocate_groups(asm, problem)
    n_free = asm.col_cursor
    asm.seal_free()

    scales = {c.id: (c.center(), c.halfwidth()) for c in cells}
    t_scales = [_interval_scale(*grid.interval(k)) for k in range(grid.n_intervals)]

    for cell in cells:
        for k in range(grid.n_intervals):
            _emit_lie(asm, problem, v_groups, cell.id, k,
                      scales[cell.id], t_scales[k], u_scale, margin)
    for cell in cells:
        _emit_init(asm, problem, v_groups, w_groups, cell.id, scales[cell.id])
    terminal_cells = tuple(
        c.id for c in cells if _cell_meets_target(c, problem.XT, state)
    )
    for cid in terminal_cells:
        _emit_terminal(asm, problem, v_groups, cid, scales[cid], margin)
    for cell in cells:
        _emit_wpos(asm, problem, w_groups, cell.id, scales[cell.id])
    for cell in cells:
        for k in range(grid.n_intervals - 1):
            _emit_stitch(asm, problem, v_groups, cell.id, k, scales[cell.id])
    facets = neighbor_facets(cells)
    for fi, facet in enumerate(facets):
        for k in range(grid.n_intervals):
            for sign_label in ("flow+", "flow-"):
                _emit_flow(asm, problem, v_groups, fi, facet, k,
                           scales, t_scales[k], u_scale, sign_label)

    c = _objective(problem, w_groups, asm.col_cursor)
    sdp = asm.build(c)
    layout = DecisionLayout(
        problem=problem,
        margin=margin,
        v_groups=v_groups,
        w_groups=w_groups,
        cell_scales=[scales[c.id] for c in cells],
        t_scales=t_scales,
        u_scale=u_scale,
        identities=asm.identities,
        terminal_cells=terminal_cells,
        n_free=n_free,
        n_cols=sdp.n_cols,
        n_rows=sdp.n_rows,
    )
    return sdp, layout


def compile_unsplit(problem: RoaProblem, margin: float = DEFAULT_MARGIN):
    """Compile the classical one-piece program (no partition).

    Independent assembly path over the whole state box and the full
    horizon; with one cell and one interval the split compiler must
    produce the same matrix, which is what the equivalence tests check.
    """
    if problem.degree is None:
        raise ValueError("problem needs a relaxation degree")
    single = replace(
        problem,
        cells=(Cell(0, tuple(problem.X)),),
        time_grid=TimeGrid((0.0, problem.T)),
    )
    system = single.system
    state = system.state_names()
    u_scale = _u_scale_of(single)

    asm = _Assembler()
    v_groups, w_groups = _allocate_groups(asm, single)
    n_free = asm.col_cursor
    asm.seal_free()

    cell = single.cells[0]
    scale = (cell.center(), cell.halfwidth())
    t_scale = _interval_scale(0.0, single.T)

    _emit_lie(asm, single, v_groups, 0, 0, scale, t_scale, u_scale, margin)
    _emit_init(asm, single, v_groups, w_groups, 0, scale)
    _emit_terminal(asm, single, v_groups, 0, scale, margin)
    _emit_wpos(asm, single, w_groups, 0, scale)

    c = _objective(single, w_groups, asm.col_cursor)
    sdp = asm.build(c)
    layout = DecisionLayout(
        problem=single,
        margin=margin,
        v_groups=v_groups,
        w_groups=w_groups,
        cell_scales=[scale],
        t_scales=[t_scale],
        u_scale=u_scale,
        identities=asm.identities,
        terminal_cells=(0,),
        n_free=n_free,
        n_cols=sdp.n_cols,
        n_rows=sdp.n_rows,
    )
    return sdp, layout


def extract_solution(layout: DecisionLayout, x: np.ndarray):
    """Assemble the piecewise polynomials from a primal vector.

    Returns ``(v, w)`` with ``v[(i, k)]`` a polynomial in (t, x) and
    ``w[i]`` a polynomial in x, all in original coordinates.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (layout.n_cols,):
        raise ValueError(f"expected primal vector of length {layout.n_cols}, got {x.shape}")
    problem = layout.problem
    state = problem.system.state_names()
    v_out = {}
    w_out = {}
    for cell_idx, cell in enumerate(problem.cells):
        centers, halfw = layout.cell_scales[cell_idx]
        unscale = {
            name: (-centers[j] / halfw[j], 1.0 / halfw[j])
            for j, name in enumerate(state)
        }
        for k in range(problem.time_grid.n_intervals):
            ct, rt = layout.t_scales[k]
            offset, basis = layout.v_groups[(cell.id, k)]
            terms = {mono: x[offset + i] for i, mono in enumerate(basis)}
            scaled = Polynomial(terms, ("t",) + state)
            maps = dict(unscale)
            maps["t"] = (-ct / rt, 1.0 / rt)
            v_out[(cell.id, k)] = scaled.affine_substitute(maps)
        offset, basis = layout.w_groups[cell.id]
        terms = {mono: x[offset + i] for i, mono in enumerate(basis)}
        w_out[cell.id] = Polynomial(terms, state).affine_substitute(unscale)
    return v_out, w_out


# -- text interchange ---------------------------------------------------------

def write_cbf(sdp: SdpProblem, path: str) -> None:
    """Dump the problem in Conic Benchmark Format for external solvers.

    Scalar blocks (free/nonneg/zero) become VAR entries, PSD blocks
    become PSDVAR entries; all constraints are equalities.  Output is
    deterministic for a fixed problem.
    """
    scalar_blocks = []  # (kind, dim, x_offset)
    psd_blocks = []  # (order, x_offset)
    offset = 0
    for blk in sdp.cones:
        if blk.kind == "psd":
            psd_blocks.append((blk.order, offset))
        else:
            scalar_blocks.append((blk.kind, blk.dim, offset))
        offset += blk.dim

    scalar_index: dict[int, int] = {}
    for kind, dim, off in scalar_blocks:
        for i in range(dim):
            scalar_index[off + i] = len(scalar_index)
    psd_entry: dict[int, tuple[int, int, int, float]] = {}
    for j, (order, off) in enumerate(psd_blocks):
        for sv, (bi, bj) in enumerate(svec_pairs(order)):
            # value multiplier turning an A coefficient into the CBF
            # <F, X> convention (off-diagonals counted twice)
            mult = 1.0 if bi == bj else 1.0 / SQRT2
            psd_entry[off + sv] = (j, bj, bi, mult)

    kind_name = {"free": "F", "nonneg": "L+", "zero": "L="}
    lines = ["VER", "3", "", "OBJSENSE", "MIN", ""]
    if psd_blocks:
        lines += ["PSDVAR", str(len(psd_blocks))]
        lines += [str(order) for order, _ in psd_blocks]
        lines.append("")
    if scalar_blocks:
        total = sum(dim for _, dim, _ in scalar_blocks)
        lines += ["VAR", f"{total} {len(scalar_blocks)}"]
        lines += [f"{kind_name[kind]} {dim}" for kind, dim, _ in scalar_blocks]
        lines.append("")
    lines += ["CON", f"{sdp.n_rows} 1", f"L= {sdp.n_rows}", ""]

    obj_a = [(scalar_index[i], v) for i, v in enumerate(sdp.c)
             if v != 0.0 and i in scalar_index]
    obj_f = [(psd_entry[i], v) for i, v in enumerate(sdp.c)
             if v != 0.0 and i in psd_entry]
    if obj_f:
        lines += ["OBJFCOORD", str(len(obj_f))]
        for (j, r, cc, mult), v in obj_f:
            lines.append(f"{j} {r} {cc} {v * mult!r}")
        lines.append("")
    if obj_a:
        lines += ["OBJACOORD", str(len(obj_a))]
        for i, v in obj_a:
            lines.append(f"{i} {v!r}")
        lines.append("")

    coo = sdp.A.tocoo()
    order_idx = np.lexsort((coo.col, coo.row))
    a_coords = []
    f_coords = []
    for t in order_idx:
        r, col, v = int(coo.row[t]), int(coo.col[t]), float(coo.data[t])
        if col in scalar_index:
            a_coords.append((r, scalar_index[col], v))
        else:
            j, mr, mc, mult = psd_entry[col]
            f_coords.append((r, j, mr, mc, v * mult))
    if f_coords:
        lines += ["FCOORD", str(len(f_coords))]
        lines += [f"{r} {j} {mr} {mc} {v!r}" for r, j, mr, mc, v in f_coords]
        lines.append("")
    if a_coords:
        lines += ["ACOORD", str(len(a_coords))]
        lines += [f"{r} {i} {v!r}" for r, i, v in a_coords]
        lines.append("")
    b_coords = [(i, -float(v)) for i, v in enumerate(sdp.b) if v != 0.0]
    if b_coords:
        lines += ["BCOORD", str(len(b_coords))]
        lines += [f"{i} {v!r}" for i, v in b_coords]
        lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
