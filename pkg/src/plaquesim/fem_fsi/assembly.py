"""Residual and analytic Jacobian of the monolithic ALE FSI system.

One assembler serves both problem flavors:

* transient: one-step theta scheme of the coupled system (Navier-Stokes in
  ALE form on the moving fluid domain, grown Saint Venant-Kirchhoff wall,
  velocity-displacement relation in the solid, harmonic mesh extension in
  the fluid, LPS pressure stabilization, do-nothing outflow);
* stationary: time derivatives dropped, solid velocity pinned to zero, the
  solid momentum balance moves onto the interface/solid displacement rows
  (which makes the interface traction balance the equation that determines
  the interface position).

Row bookkeeping: every node carries "momentum rows" fed by fluid cells on
the fluid side and solid cells on the solid side; sharing one test function
across the interface is what enforces the traction balance weakly. In the
transient case the momentum row belongs to the velocity DoF; in the
stationary case it belongs to the displacement DoF on the solid side (the
velocity there is a Dirichlet zero).

The Jacobian is the exact hand-derived linearization of this residual,
including the ALE shape derivatives (dJ = J tr(F^-1 H), dF^-1 = -F^-1 H
F^-1); it is validated against complex-step differentiation in the tests.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from ..constitutive import (
    MaterialParams,
    growth_scalar,
    pk_growth_stress,
    pk_growth_stress_gradient,
)
from ..errors import InvertedElementError
from .space import FsiSpace

TRANSIENT = "transient"
STATIONARY = "stationary"

_EYE2 = np.eye(2)

_EINSUM_PATHS: dict = {}


def _einsum(subscripts, *ops):
    """np.einsum with contraction paths cached by (subscripts, shapes)."""
    key = (subscripts, tuple(op.shape for op in ops))
    path = _EINSUM_PATHS.get(key)
    if path is None:
        path = np.einsum_path(subscripts, *ops, optimize="optimal")[0]
        _EINSUM_PATHS[key] = path
    return np.einsum(subscripts, *ops, optimize=path)


def _det2(F):
    return F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]


def _inv2(F, det):
    Fi = np.empty_like(F)
    Fi[..., 0, 0] = F[..., 1, 1]
    Fi[..., 0, 1] = -F[..., 0, 1]
    Fi[..., 1, 0] = -F[..., 1, 0]
    Fi[..., 1, 1] = F[..., 0, 0]
    return Fi / det[..., None, None]


def _tr(A):
    return A[..., 0, 0] + A[..., 1, 1]


def _smooth_neg(g, eps):
    """C1 negative part: exactly 0 for g >= 0, g + eps/2 for g <= -eps,
    quadratic blend -g^2/(2 eps) in between. Branches on the real part so
    complex-step differentiation stays exact; identically zero under
    forward flow."""
    mid = (-eps < g.real) & (g.real < 0.0)
    low = g.real <= -eps
    out = np.where(mid, -g * g / (2.0 * eps), 0.0 * g)
    return np.where(low, g + eps / 2.0, out)


def _smooth_neg_deriv(g, eps):
    """Derivative of _smooth_neg: 0 / -g/eps / 1 on the three branches."""
    mid = (-eps < g.real) & (g.real < 0.0)
    low = g.real <= -eps
    out = np.where(mid, -g / eps, 0.0 * g)
    return np.where(low, 1.0 + 0.0 * g, out)


class FluidQuadState:
    """Per-(cell, quad-point) kinematic quantities of the fluid pass."""

    def __init__(self, sp: FsiSpace, Vl, Ul, Pl, check_cells=None):
        tab = sp.tab_f
        self.v = _einsum("qa,cai->cqi", tab.N, Vl)
        self.Vg = _einsum("qam,cai->cqim", tab.dN, Vl)
        self.u = _einsum("qa,cai->cqi", tab.N, Ul)
        Ug = _einsum("qam,cai->cqim", tab.dN, Ul)
        self.p = _einsum("qa,ca->cq", tab.N, Pl)
        self.F = Ug + _EYE2
        self.J = _det2(self.F)
        if check_cells is not None and np.any(self.J.real <= 0.0):
            c = int(np.argwhere(self.J.real <= 0.0)[0, 0])
            raise InvertedElementError(
                f"ALE map inverted in fluid cell {int(check_cells[c])}",
                cell=int(check_cells[c]))
        self.Fi = _inv2(self.F, self.J)
        self.M = self.Vg @ self.Fi       # spatial velocity gradient
        self.S = self.M + np.swapaxes(self.M, -1, -2)


class EdgeQuadState:
    """Kinematics on one edge family of fluid cells (do-nothing term)."""

    def __init__(self, sp: FsiSpace, side: str, cells, Vl, Ul):
        Ne, dNe, wE, nhat = sp.tab_f.edges[side]
        self.cells = cells
        self.Ne, self.dNe, self.wE, self.nhat = Ne, dNe, wE, nhat
        self.Vg = _einsum("qam,cai->cqim", dNe, Vl[cells])
        Ug = _einsum("qam,cai->cqim", dNe, Ul[cells])
        F = Ug + _EYE2
        self.J = _det2(F)
        self.Fi = _inv2(F, self.J)
        FiT = np.swapaxes(self.Fi, -1, -2)
        self.Z = FiT @ np.swapaxes(self.Vg, -1, -2) @ FiT
        self.ntil = _einsum("cqji,j->cqi", self.Fi, nhat)   # F^-T nhat
        self.that = _einsum("cqim,m->cqi", self.Z, nhat)    # F^-T Vg^T F^-T nhat


class Assembler:
    """Assembles residual vectors and sparse Jacobians for one space."""

    def __init__(self, space: FsiSpace, params: MaterialParams, lps_delta0: float,
                 ale_kappa_x: float = 0.01, backflow_beta: float = 1.0,
                 conv_delta0: float = 0.5, backflow_eps: float = 0.5):
        self.sp = space
        self.params = params
        self.backflow_beta = backflow_beta
        self.conv_delta0 = conv_delta0
        self.backflow_eps = backflow_eps
        sp = space

        # LPS weight: delta_K = delta0 h_K^2 / (rho nu), h_K^2 := hx*hy
        delta_k = lps_delta0 * (sp.hx * sp.hy_f) / (params.rho_f * params.nu_f)
        self.lps = delta_k * sp.tab_f.lps

        # mesh-extension operator: anisotropy-weighted diffusion. A weak
        # x-coupling makes the vertical compression of each mesh column
        # nearly uniform, which keeps the ALE map regular up to much larger
        # interface displacements than the plain Laplacian.
        self.ext_kernel = ale_kappa_x * sp.tab_f.laplace_xx + sp.tab_f.laplace_yy

        # growth shape at solid quadrature points (geometry-fixed)
        xq = sp.quad_xy_s[..., 0]
        yq = sp.quad_xy_s[..., 1]
        self.growth_shape = np.exp(-xq**2) * (2.0 - np.abs(yq))

        self._patterns: dict[tuple, tuple] = {}

    # ------------------------------------------------------------------
    # row maps
    # ------------------------------------------------------------------
    def momentum_rows(self, mode: str) -> np.ndarray:
        sp = self.sp
        if mode == TRANSIENT:
            return sp.vdof
        return np.where(sp.is_solid_side[:, None], sp.udof, sp.vdof)

    # ------------------------------------------------------------------
    # assembly
    # ------------------------------------------------------------------
    def assemble(self, x, mode: str, c_s: float, dtau=None, prev_x=None,
                 theta: float = 1.0, with_jacobian: bool = True):
        """Return (residual, jacobian-or-None) at state vector x.

        ``prev_x``/``dtau`` are required in transient mode. The residual
        does not include Dirichlet row replacement; see FsiProblem.
        """
        sp = self.sp
        params = self.params
        transient = mode == TRANSIENT
        if transient and (prev_x is None or dtau is None):
            raise ValueError("transient assembly needs prev_x and dtau")
        if not transient:
            theta = 1.0

        v, u, p = sp.unpack(x)
        res = np.zeros(sp.ndof, dtype=x.dtype)
        mom = self.momentum_rows(mode)

        # ---------------- fluid pass ----------------
        tab = sp.tab_f
        Vl = v[sp.conn_f]
        Ul = u[sp.conn_f]
        Pl = p[sp.pidx[sp.conn_f]]
        q = FluidQuadState(sp, Vl, Ul, Pl, check_cells=sp.fluid_cell_ids)

        rnu = params.rho_f * params.nu_f
        sig_visc = rnu * q.S
        FiT = np.swapaxes(q.Fi, -1, -2)

        # momentum, value-tested part: time derivative, ALE domain-velocity
        # convection (both with the new-state geometry) and theta-weighted
        # convection
        conv = _einsum("cqim,cqm->cqi", q.M, q.v)
        if transient:
            vo, uo, _ = sp.unpack(prev_x)
            Vlo = vo[sp.conn_f]
            Ulo = uo[sp.conn_f]
            vdot = (q.v - _einsum("qa,cai->cqi", tab.N, Vlo)) / dtau
            wdot = (q.u - _einsum("qa,cai->cqi", tab.N, Ulo)) / dtau
            VV = params.rho_f * q.J[..., None] * (
                vdot - _einsum("cqim,cqm->cqi", q.M, wdot) + theta * conv)
            if theta != 1.0:
                qo = FluidQuadState(sp, Vlo, Ulo, Pl)
                VV = VV + (1.0 - theta) * params.rho_f * qo.J[..., None] * \
                    _einsum("cqim,cqm->cqi", qo.M, qo.v)
        else:
            vdot = wdot = None
            VV = params.rho_f * q.J[..., None] * conv

        # momentum, gradient-tested part
        VT = theta * q.J[..., None, None] * (sig_visc @ FiT) \
            - (q.p * q.J)[..., None, None] * FiT
        if transient and theta != 1.0:
            VT = VT + (1.0 - theta) * qo.J[..., None, None] * (rnu * qo.S @ np.swapaxes(qo.Fi, -1, -2))

        rv = _einsum("q,qa,cqi->cai", tab.w, tab.N, VV) \
            + _einsum("q,qan,cqin->cai", tab.w, tab.dN, VT)

        # streamline projection stabilization of the convective term:
        # fluctuation of (v . grad) v tested with the fluctuation of the
        # test function's streamline derivative, coefficient
        # delta_K = delta0c rho h / |v|_K. Restores coercivity at large
        # cell-Peclet numbers (severely narrowed lumen); vanishes on
        # parabolic channel flow.
        wq = tab.w
        wtot = wq.sum()

        def fluc(f):
            mean = np.einsum("q,cq...->c...", wq, f) / wtot
            return f - mean[:, None]

        Fiv_q = _einsum("cqmn,cqn->cqm", q.Fi, q.v)
        gstr = _einsum("qam,cqm->cqa", tab.dN, Fiv_q)
        b_t = fluc(conv)
        g_t = fluc(gstr)
        vbar = np.sqrt(_einsum("q,cqi,cqi->c", wq, q.v, q.v) / wtot + 1e-4)
        delta_c = self.conv_delta0 * params.rho_f * sp.hx / vbar
        rv = rv + delta_c[:, None, None] * _einsum("q,cqi,cqa->cai", wq, b_t, g_t)

        # continuity + LPS
        PV = q.J * _tr(q.M)
        rp = _einsum("q,qa,cq->ca", tab.w, tab.N, PV) + Pl @ self.lps.T

        # mesh extension (interface rows masked out)
        r_ext = _einsum("ab,cbi->cai", self.ext_kernel, Ul) * sp.ext_mask[..., None]

        np.add.at(res, mom[sp.conn_f], rv)
        np.add.at(res, sp.pdof[sp.conn_f], rp)
        np.add.at(res, sp.udof[sp.conn_f], r_ext)

        # ---------------- outflow boundary terms ----------------
        # do-nothing correction plus backflow stabilization: the convective
        # term loses coercivity under reversed flow through the open
        # boundary, so the incoming momentum flux is penalized wherever
        # v . n < 0 (inactive otherwise)
        e = EdgeQuadState(sp, "right", sp.fcells_outflow, Vl, Ul)
        v_e = _einsum("qa,cai->cqi", e.Ne, Vl[e.cells])
        e.v = v_e
        e.g = _einsum("cqi,cqi->cq", v_e, e.J[..., None] * e.ntil)
        gneg = _smooth_neg(e.g, self.backflow_eps)
        e.gneg = gneg
        e.dgneg = _smooth_neg_deriv(e.g, self.backflow_eps)
        beta_rho = self.backflow_beta * params.rho_f
        tv = -rnu * theta * (e.J[..., None] * e.that) \
            - beta_rho * gneg[..., None] * v_e
        if transient and theta != 1.0:
            eo = EdgeQuadState(sp, "right", sp.fcells_outflow, Vlo, Ulo)
            tv = tv - rnu * (1.0 - theta) * (eo.J[..., None] * eo.that)
        r_edge = _einsum("q,qa,cqi->cai", e.wE, e.Ne, tv)
        np.add.at(res, mom[sp.conn_f[e.cells]], r_edge)

        # ---------------- solid pass ----------------
        tabs = sp.tab_s
        Vls = v[sp.conn_s]
        Uls = u[sp.conn_s]
        Ugs = _einsum("qam,cai->cqim", tabs.dN, Uls)
        Fs = Ugs + _EYE2
        dets = _det2(Fs)
        if np.any(dets.real <= 0.0):
            c = int(np.argwhere(dets.real <= 0.0)[0, 0])
            raise InvertedElementError(
                f"solid deformation gradient inverted in cell {int(sp.solid_cell_ids[c])}",
                cell=int(sp.solid_cell_ids[c]))
        g = 1.0 + c_s * self.growth_shape
        P = pk_growth_stress(Ugs, g, params)

        if transient:
            Vlso = vo[sp.conn_s]
            Ulso = uo[sp.conn_s]
            st = theta * P
            if theta != 1.0:
                st = st + (1.0 - theta) * pk_growth_stress(
                    _einsum("qam,cai->cqim", tabs.dN, Ulso), g, params)
            rv_s = _einsum("q,qan,cqin->cai", tabs.w, tabs.dN, st) \
                + params.rho_s / dtau * _einsum("ab,cbi->cai", tabs.mass, Vls - Vlso)
            rel = _einsum("ab,cbi->cai", tabs.mass,
                            (Uls - Ulso) / dtau - theta * Vls - (1.0 - theta) * Vlso)
            np.add.at(res, sp.vdof[sp.conn_s], rv_s)
            np.add.at(res, sp.udof[sp.conn_s], rel)
        else:
            rv_s = _einsum("q,qan,cqin->cai", tabs.w, tabs.dN, P)
            np.add.at(res, sp.udof[sp.conn_s], rv_s)

        if not with_jacobian:
            return res, None

        # ==================================================================
        # Jacobian
        # ==================================================================
        rf, nu = params.rho_f, params.nu_f
        J = q.J
        Fi = q.Fi
        M = q.M
        S = q.S
        FiFiT = Fi @ FiT
        SFiT = q.S @ FiT
        FiM = Fi @ M
        Fiv = _einsum("cqmn,cqn->cqm", Fi, q.v)
        Mv = _einsum("cqim,cqm->cqi", M, q.v)

        # ---- momentum rows, velocity columns ----
        Avv = theta * rf * (J[..., None, None] * M)
        if transient:
            Avv = Avv + (rf / dtau) * J[..., None, None] * _EYE2
        Bvv = theta * rf * _einsum("cq,ij,cqm->cqijm", J, _EYE2, Fiv)
        if transient:
            Fiw = _einsum("cqmn,cqn->cqm", Fi, wdot)
            Bvv = Bvv - rf * _einsum("cq,ij,cqm->cqijm", J, _EYE2, Fiw)
        Dvv = theta * rnu * (
            _einsum("cq,ij,cqmn->cqnimj", J, _EYE2, FiFiT)
            + _einsum("cq,cqmi,cqnj->cqnimj", J, Fi, Fi))

        kvv = (_einsum("q,qa,qb,cqij->caibj", tab.w, tab.N, tab.N, Avv)
               + _einsum("q,qa,qbm,cqijm->caibj", tab.w, tab.N, tab.dN, Bvv)
               + _einsum("q,qan,qbm,cqnimj->caibj", tab.w, tab.dN, tab.dN, Dvv))

        # ---- momentum rows, pressure columns ----
        Cvp = -_einsum("cq,cqni->cqni", J, Fi)
        kvp = _einsum("q,qan,qb,cqni->caib", tab.w, tab.dN, tab.N, Cvp)

        # ---- momentum rows, displacement columns ----
        if transient:
            Mw = _einsum("cqim,cqm->cqi", M, wdot)
            Bvu = rf * (
                _einsum("cq,cqmj,cqi->cqijm", J, Fi, vdot)
                - _einsum("cq,cqmj,cqi->cqijm", J, Fi, Mw)
                + _einsum("cq,cqij,cqm->cqijm", J, M, Fiw)
                + theta * _einsum("cq,cqmj,cqi->cqijm", J, Fi, Mv)
                - theta * _einsum("cq,cqij,cqm->cqijm", J, M,
                                    _einsum("cqmn,cqn->cqm", Fi, q.v)))
            Avu = -(rf / dtau) * J[..., None, None] * M
        else:
            Bvu = rf * (_einsum("cq,cqmj,cqi->cqijm", J, Fi, Mv)
                        - _einsum("cq,cqij,cqm->cqijm", J, M, Fiv))
            Avu = None
        Dvu = theta * rnu * (
            _einsum("cq,cqmj,cqin->cqnimj", J, Fi, SFiT)
            - _einsum("cq,cqij,cqmn->cqnimj", J, M, FiFiT)
            - _einsum("cq,cqnj,cqmi->cqnimj", J, FiM, Fi)
            - _einsum("cq,cqim,cqnj->cqnimj", J, SFiT, Fi))
        Dvu = Dvu + (q.p * J)[..., None, None, None, None] * (
            _einsum("cqmi,cqnj->cqnimj", Fi, Fi)
            - _einsum("cqmj,cqni->cqnimj", Fi, Fi))

        kvu = (_einsum("q,qa,qbm,cqijm->caibj", tab.w, tab.N, tab.dN, Bvu)
               + _einsum("q,qan,qbm,cqnimj->caibj", tab.w, tab.dN, tab.dN, Dvu))
        if Avu is not None:
            kvu = kvu + _einsum("q,qa,qb,cqij->caibj", tab.w, tab.N, tab.N, Avu)

        # ---- streamline stabilization blocks ----
        # S[a,i] = delta(v) T[a,i], T = sum_q w fluc(b)_i fluc(g_a);
        # product rule over delta(v), b(v,u) and g_a(v,u)
        T_str = _einsum("q,cqi,cqa->cai", wq, b_t, g_t)
        VN = _einsum("q,qb,cqj->cbj", wq, tab.N, q.v) / wtot
        ddelta = -(delta_c / vbar**2)[:, None, None] * VN
        kvv_str = _einsum("cai,cbj->caibj", T_str, ddelta)
        k1 = _einsum("c,q,cqb,cqa->cab", delta_c, wq, g_t, g_t)
        kvv_str = kvv_str + _einsum("cab,ij->caibj", k1, _EYE2)
        flucMN = fluc(_einsum("cqij,qb->cqijb", M, tab.N))
        kvv_str = kvv_str + _einsum("c,q,cqijb,cqa->caibj", delta_c, wq, flucMN, g_t)
        dNFi = _einsum("qam,cqmj->cqaj", tab.dN, Fi)
        flucDFN = fluc(_einsum("cqaj,qb->cqajb", dNFi, tab.N))
        kvv_str = kvv_str + _einsum("c,q,cqi,cqajb->caibj", delta_c, wq, b_t, flucDFN)
        kvv = kvv + kvv_str
        flucGU = fluc(_einsum("cqij,cqb->cqijb", -M, gstr))
        kvu_str = _einsum("c,q,cqijb,cqa->caibj", delta_c, wq, flucGU, g_t)
        flucDU = fluc(_einsum("cqaj,cqb->cqajb", -dNFi, gstr))
        kvu_str = kvu_str + _einsum("c,q,cqi,cqajb->caibj", delta_c, wq, b_t, flucDU)
        kvu = kvu + kvu_str

        # ---- continuity rows ----
        Bpv = _einsum("cq,cqmj->cqjm", J, Fi)
        kpv = _einsum("q,qa,qbm,cqjm->cabj", tab.w, tab.N, tab.dN, Bpv)
        Bpu = _einsum("cq,cqmj->cqjm", J * _tr(M), Fi) \
            - _einsum("cq,cqmj->cqjm", J, FiM)
        kpu = _einsum("q,qa,qbm,cqjm->cabj", tab.w, tab.N, tab.dN, Bpu)
        kpp = np.broadcast_to(self.lps, (sp.ncf, sp.nb, sp.nb))

        # ---- extension rows ----
        kext = _einsum("ab,ca->cab", self.ext_kernel, sp.ext_mask)

        # ---- edge (do-nothing + backflow) blocks ----
        BvvE = -theta * rnu * _einsum("cq,cqmi,cqj->cqijm", e.J, e.Fi, e.ntil)
        BvuE = theta * rnu * (
            -_einsum("cq,cqmj,cqi->cqijm", e.J, e.Fi, e.that)
            + _einsum("cq,cqmi,cqj->cqijm", e.J, e.Fi, e.that)
            + _einsum("cq,cqim,cqj->cqijm", e.J, e.Z, e.ntil))
        gneg = e.gneg
        act = e.dgneg
        ntil_J = e.J[..., None] * e.ntil
        AvvE = -beta_rho * (gneg[..., None, None] * np.asarray(_EYE2, dtype=gneg.dtype)
                            + _einsum("cq,cqi,cqj->cqij", act, e.v, ntil_J))
        kvvE_val = _einsum("q,qa,qb,cqij->caibj", e.wE, e.Ne, e.Ne, AvvE)
        # d(v . J F^-T nhat)/du for trial gradient (j, m):
        # Fi[m,j] g - J (Fi v)_m (F^-T nhat)_j
        Fiv_e = _einsum("cqmn,cqn->cqm", e.Fi, e.v)
        dg = _einsum("cqmj,cq->cqjm", e.Fi, e.g) \
            - _einsum("cq,cqm,cqj->cqjm", e.J, Fiv_e, e.ntil)
        BvuE = BvuE - beta_rho * _einsum("cq,cqi,cqjm->cqijm", act, e.v, dg)
        kvvE = _einsum("q,qa,qbm,cqijm->caibj", e.wE, e.Ne, e.dNe, BvvE)
        kvuE = _einsum("q,qa,qbm,cqijm->caibj", e.wE, e.Ne, e.dNe, BvuE)

        # ---- solid blocks ----
        DP = pk_growth_stress_gradient(Ugs, g, params)
        kuu_s = theta * _einsum("q,qan,qbm,cqinjm->caibj", tabs.w, tabs.dN, tabs.dN, DP)
        if transient:
            mass_vv = (params.rho_s / dtau) * _einsum("ab,ij->aibj", tabs.mass, _EYE2)
            krel_u = (1.0 / dtau) * _einsum("ab,ij->aibj", tabs.mass, _EYE2)
            krel_v = -theta * _einsum("ab,ij->aibj", tabs.mass, _EYE2)

        # ---- gather into COO (index pattern cached per mode) ----
        nbf = sp.nb
        data_parts = [
            kvv.reshape(sp.ncf, 2 * nbf, 2 * nbf),
            kvu.reshape(sp.ncf, 2 * nbf, 2 * nbf),
            kvp.reshape(sp.ncf, 2 * nbf, nbf),
            kpv.reshape(sp.ncf, nbf, 2 * nbf),
            kpu.reshape(sp.ncf, nbf, 2 * nbf),
            kpp,
            _einsum("cab,ij->caibj", kext, _EYE2).reshape(sp.ncf, 2 * nbf, 2 * nbf),
            kvvE.reshape(-1, 2 * nbf, 2 * nbf),
            kvuE.reshape(-1, 2 * nbf, 2 * nbf),
            kvvE_val.reshape(-1, 2 * nbf, 2 * nbf),
        ]
        if transient:
            data_parts += [
                kuu_s.reshape(sp.ncs, 2 * nbf, 2 * nbf),
                np.broadcast_to(mass_vv.reshape(2 * nbf, 2 * nbf),
                                (sp.ncs, 2 * nbf, 2 * nbf)),
                np.broadcast_to(krel_u.reshape(2 * nbf, 2 * nbf),
                                (sp.ncs, 2 * nbf, 2 * nbf)),
                np.broadcast_to(krel_v.reshape(2 * nbf, 2 * nbf),
                                (sp.ncs, 2 * nbf, 2 * nbf)),
            ]
        else:
            data_parts.append(kuu_s.reshape(sp.ncs, 2 * nbf, 2 * nbf))

        rows, cols = self._pattern(mode)
        data = np.concatenate([np.ascontiguousarray(d).ravel() for d in data_parts])
        K = sparse.coo_matrix((data, (rows, cols)), shape=(sp.ndof, sp.ndof)).tocsr()
        return res, K

    def _pattern(self, mode: str):
        """Concatenated (rows, cols) of all Jacobian blocks, in the fixed
        order data_parts uses in assemble()."""
        cached = self._patterns.get(mode)
        if cached is not None:
            return cached
        sp = self.sp
        nbf = sp.nb
        mom = self.momentum_rows(mode)
        mom_f = mom[sp.conn_f].reshape(sp.ncf, 2 * nbf)
        v_f = sp.vdof[sp.conn_f].reshape(sp.ncf, 2 * nbf)
        u_f = sp.udof[sp.conn_f].reshape(sp.ncf, 2 * nbf)
        p_f = sp.pdof[sp.conn_f]
        ce = sp.fcells_outflow
        v_s = sp.vdof[sp.conn_s].reshape(sp.ncs, 2 * nbf)
        u_s = sp.udof[sp.conn_s].reshape(sp.ncs, 2 * nbf)

        blocks = [
            (mom_f, v_f), (mom_f, u_f), (mom_f, p_f),
            (p_f, v_f), (p_f, u_f), (p_f, p_f),
            (u_f, u_f),
            (mom_f[ce], v_f[ce]), (mom_f[ce], u_f[ce]),
            (mom_f[ce], v_f[ce]),
        ]
        if mode == TRANSIENT:
            blocks += [(v_s, u_s), (v_s, v_s), (u_s, u_s), (u_s, v_s)]
        else:
            blocks += [(u_s, u_s)]
        rows = np.concatenate([np.repeat(r, c.shape[1], axis=1).ravel()
                               for r, c in blocks])
        cols = np.concatenate([np.tile(c, (1, r.shape[1])).ravel()
                               for r, c in blocks])
        self._patterns[mode] = (rows, cols)
        return rows, cols
