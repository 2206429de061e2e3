"""Monolithic FSI problem: Newton solver, drivers and boundary functionals."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ..constitutive import MaterialParams, inflow_profile, mean_inflow_profile
from ..errors import ConfigurationError, NonconvergenceError
from ..mesh_geometry import Mesh, interface_width
from .assembly import STATIONARY, TRANSIENT, Assembler
from .space import FsiSpace

log = logging.getLogger(__name__)


@dataclass
class State:
    """Coupled discrete solution on the reference mesh at one time instant.

    v : (n_nodes, 2) velocity (cm/s), shared fluid/solid field;
    u : (n_nodes, 2) displacement (cm), solid displacement extended into the
        fluid as the ALE map;
    p : (n_p,) pressure (dyn/cm^2) on fluid nodes;
    time : seconds within the current heartbeat (0 for stationary states).
    """

    v: np.ndarray
    u: np.ndarray
    p: np.ndarray
    time: float = 0.0

    def copy(self) -> "State":
        return State(self.v.copy(), self.u.copy(), self.p.copy(), self.time)


@dataclass
class SolverSettings:
    """Newton/time-scheme knobs (none of them physical parameters)."""

    newton_tol: float = 1e-8
    newton_max_iter: int = 20
    theta: float = 1.0
    lps_delta0: float = 0.1
    pseudo_time_continuation: bool = True
    line_search: bool = True
    # x-diffusion weight of the mesh-extension operator (1 = plain Laplace);
    # small values keep mesh columns regular under large interface motion
    ale_kappa_x: float = 0.01
    # reuse the last LU factorization across transient steps (quasi-Newton
    # with residual-verified convergence and automatic refresh); exact
    # Newton is always used for stationary solves
    transient_jacobian_reuse: bool = True
    # penalty weight of the incoming momentum flux at the open outflow
    # boundary (active only under backflow; 0 disables)
    backflow_beta: float = 1.0
    # streamline projection stabilization weight for the convective term
    # (delta_K = conv_delta0 rho h / |v|_K; 0 disables)
    conv_delta0: float = 0.5
    # smoothing width of the backflow switch (cm^2/s flux units)
    backflow_eps: float = 0.5
    # acceptance floor when Newton stagnates at the floating-point roundoff
    # level of ill-conditioned systems (near-rigid walls, mu_s ~ 1e12);
    # plays no role at the default parameters
    stall_tol: float = 1e-2

    def __post_init__(self):
        if self.newton_tol <= 0.0:
            raise ConfigurationError("newton_tol must be positive")
        if not 0.5 <= self.theta <= 1.0:
            raise ConfigurationError("theta must lie in [0.5, 1]")
        if self.newton_max_iter < 1:
            raise ConfigurationError("newton_max_iter must be >= 1")


@dataclass
class DiscreteOperator:
    """Residual vector and (optionally) its sparse Jacobian."""

    residual: np.ndarray
    jacobian: Optional[sparse.csr_matrix] = None


@dataclass
class NewtonResult:
    state: State
    iterations: int
    residual_norms: list[float] = field(default_factory=list)

    @property
    def final_norm(self) -> float:
        return self.residual_norms[-1]


class FsiProblem:
    """Discretized monolithic FSI problem on one channel mesh.

    ``rigid_walls`` pins the solid and interface (v = u = 0 there) in every
    mode, which turns the fluid pass into a fixed-domain channel flow; the
    physical route to near-rigid walls (large mu_s) works as well.
    """

    def __init__(self, mesh: Mesh, params: MaterialParams = None,
                 settings: SolverSettings = None, degree: int = 2,
                 rigid_walls: bool = False, inflow_amplitude: float = 30.0):
        self.mesh = mesh
        self.params = params or MaterialParams()
        self.settings = settings or SolverSettings()
        self.space = FsiSpace(mesh, degree)
        self.rigid_walls = rigid_walls
        self.inflow_amplitude = inflow_amplitude
        self.assembler = Assembler(self.space, self.params, self.settings.lps_delta0,
                                   self.settings.ale_kappa_x,
                                   self.settings.backflow_beta,
                                   self.settings.conv_delta0,
                                   self.settings.backflow_eps)
        self._zero_dofs = {m: self._collect_zero_dofs(m) for m in (TRANSIENT, STATIONARY)}
        sp = self.space
        infl = sp.inflow_nodes()
        self._inflow_vx = sp.vdof[infl, 0]
        self._inflow_vy = sp.vdof[infl, 1]
        self._inflow_y = sp.coords[infl, 1]
        self._ale_lu = None
        self._lu_cache = {}

    # ------------------------------------------------------------------
    # Dirichlet data
    # ------------------------------------------------------------------
    def _collect_zero_dofs(self, mode: str) -> np.ndarray:
        sp = self.space
        dofs = []
        sym = sp.symmetry_nodes()
        dofs.append(sp.vdof[sym, 1])          # v_y = 0 on the symmetry plane
        # the mesh may slide tangentially along the symmetry plane (u_x is
        # a free extension unknown there); only the normal motion is pinned
        dofs.append(sp.udof[sym, 1])
        side = np.flatnonzero(((sp.node_ix == 0) | (sp.node_ix == sp.NX - 1))
                              & sp.is_fluid_side)
        dofs.append(sp.udof[side].ravel())    # ALE pinned on in/outflow edges
        clamp = sp.clamp_nodes()
        dofs.append(sp.udof[clamp].ravel())
        dofs.append(sp.vdof[clamp].ravel())
        infl = sp.inflow_nodes()
        dofs.append(sp.vdof[infl, 1])         # v_y = 0 at the inflow
        if mode == STATIONARY or self.rigid_walls:
            solid = np.flatnonzero(sp.is_solid_side)
            dofs.append(sp.vdof[solid].ravel())
        if self.rigid_walls:
            solid = np.flatnonzero(sp.is_solid_side)
            dofs.append(sp.udof[solid].ravel())
        return np.unique(np.concatenate(dofs))

    def dirichlet(self, mode: str, t: float = 0.0, inflow_scale: float = 1.0):
        """(dofs, values) of all strongly imposed constraints for one solve."""
        if mode == TRANSIENT:
            vx = inflow_profile(t, self._inflow_y, self.inflow_amplitude)[:, 0]
        else:
            vx = mean_inflow_profile(self._inflow_y, self.inflow_amplitude)[:, 0]
        vx = vx * inflow_scale
        dofs = np.concatenate([self._inflow_vx, self._zero_dofs[mode]])
        vals = np.concatenate([vx, np.zeros(self._zero_dofs[mode].size)])
        # zero constraints win at overlapping dofs (inflow corner on the clamp,
        # where the profile vanishes anyway); keep last occurrence
        order = np.arange(dofs.size)
        uniq, first = np.unique(dofs[::-1], return_index=True)
        vals = vals[::-1][first]
        return uniq, vals

    def apply_dirichlet(self, x: np.ndarray, mode: str, t: float = 0.0,
                        inflow_scale: float = 1.0) -> np.ndarray:
        dofs, vals = self.dirichlet(mode, t, inflow_scale)
        x = x.copy()
        x[dofs] = vals
        return x

    # ------------------------------------------------------------------
    # assembly entry points
    # ------------------------------------------------------------------
    def pack(self, state: State) -> np.ndarray:
        return self.space.pack(state.v, state.u, state.p)

    def unpack(self, x: np.ndarray, time: float = 0.0) -> State:
        v, u, p = self.space.unpack(x)
        return State(v.copy(), u.copy(), p.copy(), time)

    def zero_state(self, time: float = 0.0) -> State:
        sp = self.space
        return State(np.zeros((sp.n_nodes, 2)), np.zeros((sp.n_nodes, 2)),
                     np.zeros(sp.n_p), time)

    def assemble(self, state: State, prev: Optional[State], c_s: float,
                 dt: Optional[float], with_jacobian: bool = True,
                 inflow_scale: float = 1.0, extra_dirichlet=None) -> DiscreteOperator:
        """Assemble the monolithic residual (and Jacobian) at ``state``.

        ``dt`` is the time-step size in seconds, or None for the stationary
        problem. Dirichlet rows are replaced by x - g (identity rows in the
        Jacobian).
        """
        mode = STATIONARY if dt is None else TRANSIENT
        x = self.pack(state)
        prev_x = self.pack(prev) if prev is not None else None
        res, K = self.assembler.assemble(
            x, mode, c_s, dtau=dt, prev_x=prev_x,
            theta=self.settings.theta, with_jacobian=with_jacobian)
        dofs, vals = self.dirichlet(mode, state.time, inflow_scale)
        if extra_dirichlet is not None:
            dofs = np.concatenate([dofs, extra_dirichlet[0]])
            vals = np.concatenate([vals, extra_dirichlet[1]])
        res[dofs] = x[dofs] - vals
        if K is not None:
            K = _replace_rows_identity(K, dofs)
        return DiscreteOperator(res, K)

    # ------------------------------------------------------------------
    # solvers
    # ------------------------------------------------------------------
    def newton_solve(self, initial: State, prev: Optional[State], c_s: float,
                     dt: Optional[float], inflow_scale: float = 1.0,
                     reuse_jacobian: bool = False,
                     extra_dirichlet=None) -> NewtonResult:
        """Newton iteration with sparse direct linear solves.

        Returns once the absolute residual norm drops below newton_tol;
        raises NonconvergenceError (with the residual history) otherwise.
        With ``reuse_jacobian`` the last factorization (possibly from an
        earlier time step) is used as long as it still contracts the
        residual; a fresh exact Jacobian is factored whenever contraction
        degrades, so the convergence test is always on the true residual.
        """
        st = self.settings
        mode = STATIONARY if dt is None else TRANSIENT
        x = self.pack(initial)
        x = self.apply_dirichlet(x, mode, initial.time, inflow_scale)
        if extra_dirichlet is not None:
            x[extra_dirichlet[0]] = extra_dirichlet[1]
        state = self.unpack(x, initial.time)

        op = self.assemble(state, prev, c_s, dt, with_jacobian=False,
                           inflow_scale=inflow_scale,
                           extra_dirichlet=extra_dirichlet)
        norm = float(np.linalg.norm(op.residual))
        residual = op.residual
        history = [norm]
        lu = self._lu_cache.get(mode) if reuse_jacobian else None
        fresh = False
        it = 0
        while it < st.newton_max_iter:
            if norm <= st.newton_tol:
                return NewtonResult(state, it, history)
            if lu is None:
                op = self.assemble(state, prev, c_s, dt, with_jacobian=True,
                                   inflow_scale=inflow_scale,
                                   extra_dirichlet=extra_dirichlet)
                try:
                    lu = splu(op.jacobian.tocsc())
                except RuntimeError as exc:  # singular factorization
                    raise NonconvergenceError(f"linear solve failed: {exc}", history)
                fresh = True
                if reuse_jacobian:
                    self._lu_cache[mode] = lu
            delta = lu.solve(residual)
            if not np.all(np.isfinite(delta)):
                raise NonconvergenceError("non-finite Newton update", history)

            step = 1.0
            improved = False
            for _ in range(8):
                x_new = x - step * delta
                cand = self.unpack(x_new, state.time)
                try:
                    r_new = self.assemble(cand, prev, c_s, dt, with_jacobian=False,
                                          inflow_scale=inflow_scale,
                                          extra_dirichlet=extra_dirichlet).residual
                    n_new = float(np.linalg.norm(r_new))
                except Exception:
                    n_new = np.inf
                if n_new < norm or not st.line_search:
                    improved = n_new < norm
                    break
                step *= 0.5

            if not improved:
                if not fresh:
                    # stale factorization stopped descending: rebuild and
                    # retry from the same iterate
                    lu = None
                    continue
                # no descent left with the exact Jacobian: either the
                # floating-point floor of a stiff (near-rigid) system, or
                # genuine divergence
                if norm <= st.stall_tol:
                    log.debug("Newton stagnated at |r| = %.3e; accepting "
                              "(roundoff floor)", norm)
                    return NewtonResult(state, it, history)
                raise NonconvergenceError(
                    f"Newton made no progress at |r| = {norm:.3e}", history)
            if not reuse_jacobian:
                lu = None  # exact Newton: fresh Jacobian every iteration
            elif not fresh and n_new > 0.15 * norm:
                # weak contraction: accept the step but refresh next round
                lu = None
                self._lu_cache.pop(mode, None)
            it += 1
            x, state, norm, residual = x_new, cand, n_new, r_new
            fresh = False
            history.append(norm)
        if norm <= st.newton_tol:
            return NewtonResult(state, st.newton_max_iter, history)
        raise NonconvergenceError(
            f"Newton stalled at |r| = {norm:.3e} after {st.newton_max_iter} iterations",
            history)

    def solve_stationary(self, c_s: float, init: Optional[State] = None) -> State:
        """Stationary FSI solve at foam-cell level c_s (time-averaged inflow).

        Plain Newton from ``init`` (or zero); on failure the inflow is
        ramped in up to 10 steps, and if the growth prestress itself is the
        obstacle (cold start at large c_s), the foam-cell level is ramped as
        well. Day-over-day warm starts never need either ramp.
        """
        initial = init.copy() if init is not None else self.zero_state()
        initial.time = 0.0
        initial.v[self.space.is_solid_side] = 0.0
        try:
            return self.newton_solve(initial, None, c_s, None).state
        except NonconvergenceError:
            if not self.settings.pseudo_time_continuation:
                raise
            log.info("stationary Newton failed at c_s = %.4g; starting continuation", c_s)

        if c_s <= 0.0:
            state = self.zero_state()
            for k, scale in enumerate(np.linspace(0.1, 1.0, 10), start=1):
                try:
                    state = self.newton_solve(state, None, c_s, None,
                                              inflow_scale=float(scale)).state
                except NonconvergenceError as exc:
                    raise NonconvergenceError(
                        f"inflow continuation failed at stage {k}/10 "
                        f"(scale {scale:.2f})", exc.residual_history)
            return state

        # cold start at substantial growth: ramp c_s adaptively from zero
        state = self.solve_stationary(0.0, init=init)
        level = 0.0
        step = c_s / 10.0
        while level < c_s - 1e-12:
            target = min(level + step, c_s)
            try:
                state = self.newton_solve(state, None, float(target), None).state
                level = target
                step = min(1.5 * step, c_s / 4.0)
            except NonconvergenceError as exc:
                step *= 0.5
                if step < 1e-3 * c_s:
                    raise NonconvergenceError(
                        f"growth continuation stalled at c_s = {level:.4g} "
                        f"of {c_s:.4g}", exc.residual_history)
        return state

    def step_transient(self, prev: State, t_new: float, dtau: float,
                       c_s: float, _depth: int = 0) -> State:
        """One theta-scheme step of the monolithic system to time t_new.

        A step whose Newton iteration hits a near-singular tangent (the SVK
        wall under strong growth-induced compression has marginal states) is
        retried as two half-steps, recursively down to dtau/8.
        """
        if dtau <= 0.0:
            raise ConfigurationError("dtau must be positive")
        initial = prev.copy()
        initial.time = t_new
        reuse = self.settings.transient_jacobian_reuse
        try:
            try:
                result = self.newton_solve(initial, prev, c_s, dtau,
                                           reuse_jacobian=reuse)
            except NonconvergenceError:
                if not reuse:
                    raise
                # the quasi-Newton path wandered off; redo the step with
                # exact Newton from the previous state
                self._lu_cache.pop(TRANSIENT, None)
                result = self.newton_solve(initial, prev, c_s, dtau,
                                           reuse_jacobian=False)
        except NonconvergenceError:
            try:
                result = self._staggered_rescue(prev, t_new, dtau, c_s)
            except NonconvergenceError:
                if _depth >= 2:
                    raise
                log.info("transient step to t = %.4f: subdividing (dtau = %.4g)",
                         t_new, dtau / 2.0)
                mid = self.step_transient(prev, t_new - dtau / 2.0, dtau / 2.0,
                                          c_s, _depth + 1)
                return self.step_transient(mid, t_new, dtau / 2.0, c_s,
                                           _depth + 1)
        result.state.time = t_new
        return result.state

    def _staggered_rescue(self, prev: State, t_new: float, dtau: float,
                          c_s: float) -> NewtonResult:
        """Globalization for steps whose monolithic Newton fails outright.

        First solves the step with the geometry frozen (all displacement
        DoFs pinned at their previous values: a pure fluid step), then
        releases the wall and re-solves the monolithic system from that
        state. Steps over short-lived structural runaways that the damped
        implicit scheme is entitled to bridge.
        """
        log.info("transient step to t = %.4f: staggered rescue", t_new)
        sp = self.space
        u_dofs = sp.udof.ravel()
        frozen = (u_dofs, prev.u.ravel().copy())
        initial = prev.copy()
        initial.time = t_new
        stage_a = self.newton_solve(initial, prev, c_s, dtau,
                                    reuse_jacobian=False,
                                    extra_dirichlet=frozen)
        return self.newton_solve(stage_a.state, prev, c_s, dtau,
                                 reuse_jacobian=False)

    # ------------------------------------------------------------------
    # boundary functionals
    # ------------------------------------------------------------------
    def _interface_edge_quads(self, state: State):
        """Deformed-configuration kinematics at interface edge quad points.

        Yields (weights, J*F^-T nhat, spatial grad v, pressure) arrays over
        (cell, edge-quad) with nhat the fluid outward normal (0, -1).
        """
        sp = self.space
        Ne, dNe, wE, nhat = sp.tab_f.edges["bottom"]
        cells = sp.fcells_interface
        conn = sp.conn_f[cells]
        Vl = state.v[conn]
        Ul = state.u[conn]
        Pl = state.p[sp.pidx[conn]]
        Vg = np.einsum("qam,cai->cqim", dNe, Vl)
        Ug = np.einsum("qam,cai->cqim", dNe, Ul)
        F = Ug + np.eye(2)
        J = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
        Fi = np.empty_like(F)
        Fi[..., 0, 0] = F[..., 1, 1]
        Fi[..., 0, 1] = -F[..., 0, 1]
        Fi[..., 1, 0] = -F[..., 1, 0]
        Fi[..., 1, 1] = F[..., 0, 0]
        Fi = Fi / J[..., None, None]
        grad_v = Vg @ Fi
        ndef = J[..., None] * np.einsum("cqji,j->cqi", Fi, nhat)
        p_q = np.einsum("qa,ca->cq", Ne, Pl)
        return wE, ndef, grad_v, p_q

    def wall_shear_functional(self, state: State) -> float:
        """Scaled tangential wall-shear integral on the deformed interface.

        sigma_ws = sigma_0^-1 int_Gamma rho nu (I - n n^T)(grad v + grad v^T) n do,
        first (mainstream) component; positive in +x.
        """
        params = self.params
        wE, ndef, grad_v, _ = self._interface_edge_quads(state)
        scale = np.linalg.norm(ndef, axis=-1)
        n = ndef / scale[..., None]
        D = params.rho_f * params.nu_f * (grad_v + np.swapaxes(grad_v, -1, -2))
        trac = np.einsum("cqim,cqm->cqi", D, n)
        tang = trac - np.einsum("cqi,cqi->cq", trac, n)[..., None] * n
        integrand = tang[..., 0] * scale
        return float(np.einsum("q,cq->", wE, integrand)) / params.sigma_0

    def interface_traction_x(self, state: State) -> float:
        """Diagnostic pressure-inclusive traction integral int_Gamma (sigma n)_x do
        (unscaled); kept for comparison with the shear-only functional."""
        params = self.params
        wE, ndef, grad_v, p_q = self._interface_edge_quads(state)
        D = params.rho_f * params.nu_f * (grad_v + np.swapaxes(grad_v, -1, -2))
        sig_n = np.einsum("cqim,cqm->cqi", D, ndef) - p_q[..., None] * ndef
        return float(np.einsum("q,cq->", wE, sig_n[..., 0]))

    def boundary_flux(self, state: State, which: str) -> float:
        """Volume flux int v . n do through the inflow or outflow edge
        (deformed configuration, outward normal)."""
        sp = self.space
        side, cells = {
            "inflow": ("left", sp.fcells_inflow),
            "outflow": ("right", sp.fcells_outflow),
        }[which]
        Ne, dNe, wE, nhat = sp.tab_f.edges[side]
        conn = sp.conn_f[cells]
        Vl = state.v[conn]
        Ul = state.u[conn]
        v_q = np.einsum("qa,cai->cqi", Ne, Vl)
        Ug = np.einsum("qam,cai->cqim", dNe, Ul)
        F = Ug + np.eye(2)
        J = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
        Fi = np.empty_like(F)
        Fi[..., 0, 0] = F[..., 1, 1]
        Fi[..., 0, 1] = -F[..., 0, 1]
        Fi[..., 1, 0] = -F[..., 1, 0]
        Fi[..., 1, 1] = F[..., 0, 0]
        Fi = Fi / J[..., None, None]
        ndef = J[..., None] * np.einsum("cqji,j->cqi", Fi, nhat)
        return float(np.einsum("q,cq->", wE, np.einsum("cqi,cqi->cq", v_q, ndef)))

    def channel_width(self, state: State, x_query: float = 0.0) -> float:
        """Deformed channel width (doubled half-width) at x_query."""
        sp = self.space
        ids = sp.interface_nodes()
        return interface_width(sp.coords[ids, 0], state.u[ids], x_query,
                               self.mesh.geometry.fluid_half_height)

    # ------------------------------------------------------------------
    # ALE extension as a standalone operation
    # ------------------------------------------------------------------
    def extend_ale(self, interface_displacement: np.ndarray) -> np.ndarray:
        """Discrete harmonic extension of an interface displacement.

        ``interface_displacement`` is (n_interface_nodes, 2), ordered by
        increasing x along the interface. Returns an (n_nodes, 2) field:
        the extension on fluid nodes, the data on the interface, zero on the
        remaining solid nodes and on the outer fluid boundary.
        """
        sp = self.space
        iface = sp.interface_nodes()
        disp = np.asarray(interface_displacement, dtype=float)
        if disp.shape != (iface.size, 2):
            raise ConfigurationError(
                f"interface displacement must have shape {(iface.size, 2)}")

        if self._ale_lu is None:
            lap = self.assembler.ext_kernel
            nb = sp.nb
            rows = np.repeat(sp.conn_f, nb, axis=1).ravel()
            cols = np.tile(sp.conn_f, (1, nb)).ravel()
            data = np.broadcast_to(lap, (sp.ncf, nb, nb)).ravel()
            A = sparse.coo_matrix((data, (rows, cols)),
                                  shape=(sp.n_nodes, sp.n_nodes)).tocsr()
            side = np.flatnonzero(((sp.node_ix == 0) | (sp.node_ix == sp.NX - 1))
                                  & sp.is_fluid_side)
            fixed_x = np.zeros(sp.n_nodes, dtype=bool)
            fixed_x[~sp.is_fluid_side] = True
            fixed_x[side] = True
            fixed_x[iface] = True
            fixed_y = fixed_x.copy()
            fixed_y[sp.symmetry_nodes()] = True  # u_x slides, u_y pinned
            self._ale = []
            for fixed in (fixed_x, fixed_y):
                free = ~fixed
                self._ale.append((fixed, free,
                                  splu(A[free][:, free].tocsc()),
                                  A[free][:, fixed].tocsr()))
            self._ale_lu = True

        out = np.zeros((sp.n_nodes, 2))
        out[iface] = disp
        for comp, (fixed, free, lu, afc) in enumerate(self._ale):
            rhs = -afc @ out[fixed, comp]
            out[free, comp] = lu.solve(rhs)
        out[~sp.is_fluid_side & ~sp.is_iface] = 0.0
        return out

    # ------------------------------------------------------------------
    # field output
    # ------------------------------------------------------------------
    def dump_fields(self, state: State, path) -> None:
        """Write nodal fields as CSV: node id, x, y, vx, vy, ux, uy, p
        (p reported as 0 on solid-only nodes)."""
        sp = self.space
        with open(path, "w", encoding="utf-8") as f:
            f.write("node,x,y,vx,vy,ux,uy,p\n")
            for i in range(sp.n_nodes):
                pval = float(state.p[sp.pidx[i]]) if sp.pidx[i] >= 0 else 0.0
                f.write(f"{i},{float(sp.coords[i, 0])!r},{float(sp.coords[i, 1])!r},"
                        f"{float(state.v[i, 0])!r},{float(state.v[i, 1])!r},"
                        f"{float(state.u[i, 0])!r},{float(state.u[i, 1])!r},{pval!r}\n")


def _replace_rows_identity(K: sparse.csr_matrix, rows: np.ndarray) -> sparse.csr_matrix:
    """Zero the given rows of K and put 1 on their diagonal."""
    mask = np.zeros(K.shape[0], dtype=bool)
    mask[rows] = True
    row_of_entry = np.repeat(np.arange(K.shape[0]), np.diff(K.indptr))
    K.data[mask[row_of_entry]] = 0.0
    diag = sparse.coo_matrix((np.ones(rows.size), (rows, rows)), shape=K.shape)
    return (K + diag).tocsr()
