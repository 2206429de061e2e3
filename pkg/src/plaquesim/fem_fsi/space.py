"""Tensor-product finite element space on the structured channel mesh.

Equal-order continuous Q_k elements (default k = 2) for velocity,
displacement and pressure on the uniform reference grid; pressure DoFs live
on fluid-subdomain nodes only (interface included). All integrals are over
reference cells, which are axis-aligned rectangles, so one set of basis
tables per subdomain serves every cell.

DoF layout: [v (2 per node) | u (2 per node) | p (fluid nodes)], node-major
within each field block.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from ..mesh_geometry import Mesh


def lagrange_basis_1d(degree: int):
    """Equispaced 1D Lagrange polynomials on [-1, 1] and their derivatives.

    Returns (vals, ders): callables mapping points (m,) to arrays
    (m, degree+1).
    """
    nodes = np.linspace(-1.0, 1.0, degree + 1)
    polys = []
    for i in range(degree + 1):
        roots = np.delete(nodes, i)
        c = np.poly1d(roots, r=True)
        polys.append(c / c(nodes[i]))

    def vals(x):
        x = np.asarray(x, dtype=float)
        return np.stack([p(x) for p in polys], axis=-1)

    def ders(x):
        x = np.asarray(x, dtype=float)
        return np.stack([p.deriv()(x) for p in polys], axis=-1)

    return vals, ders


class CellTables:
    """Precomputed basis values/gradients at quadrature points of one
    uniform rectangular cell type (hx, hy)."""

    def __init__(self, degree: int, hx: float, hy: float):
        nq = degree + 1  # Gauss order 2*degree+1
        pts, wts = np.polynomial.legendre.leggauss(nq)
        vals, ders = lagrange_basis_1d(degree)
        nb1 = degree + 1

        # tensor quadrature, q = j*nq + i over (xi_i, eta_j)
        xi = np.tile(pts, nq)
        eta = np.repeat(pts, nq)
        w2 = (np.repeat(wts, nq).reshape(nq, nq) * wts).ravel()  # w_eta*w_xi, eta-major
        lx, ly = vals(xi), vals(eta)          # (nq2, nb1)
        dlx, dly = ders(xi), ders(eta)

        nb = nb1 * nb1
        nq2 = nq * nq
        self.N = np.empty((nq2, nb))
        self.dN = np.empty((nq2, nb, 2))
        for dy in range(nb1):
            for dx in range(nb1):
                a = dy * nb1 + dx
                self.N[:, a] = lx[:, dx] * ly[:, dy]
                self.dN[:, a, 0] = dlx[:, dx] * ly[:, dy] * (2.0 / hx)
                self.dN[:, a, 1] = lx[:, dx] * dly[:, dy] * (2.0 / hy)
        self.w = w2 * (hx * hy / 4.0)
        self.nq = nq2
        self.nb = nb
        # local quad coordinates relative to the cell's lower-left corner
        self.qx = (xi + 1.0) * (hx / 2.0)
        self.qy = (eta + 1.0) * (hy / 2.0)

        # consistent mass and scalar-Laplace element matrices
        self.mass = np.einsum("q,qa,qb->ab", self.w, self.N, self.N)
        self.laplace = np.einsum("q,qan,qbn->ab", self.w, self.dN, self.dN)
        # directional parts, for anisotropy-weighted diffusion operators
        self.laplace_xx = np.einsum("q,qa,qb->ab", self.w, self.dN[:, :, 0], self.dN[:, :, 0])
        self.laplace_yy = np.einsum("q,qa,qb->ab", self.w, self.dN[:, :, 1], self.dN[:, :, 1])
        # element-wise pressure-gradient fluctuation (LPS kernel, unscaled):
        # (grad p - mean grad p, grad q - mean grad q)_K
        mean_dN = np.einsum("q,qam->am", self.w, self.dN) / self.w.sum()
        fluc = self.dN - mean_dN[None, :, :]
        self.lps = np.einsum("q,qam,qbm->ab", self.w, fluc, fluc)

        # edge tables: side -> (Ne, dNe, wE, nhat, local 1d points)
        epts, ewts = np.polynomial.legendre.leggauss(nq)
        self.edges = {}
        for side, (exi, eeta, scale, nhat) in {
            "bottom": (epts, -np.ones(nq), hx / 2.0, np.array([0.0, -1.0])),
            "top": (epts, np.ones(nq), hx / 2.0, np.array([0.0, 1.0])),
            "left": (-np.ones(nq), epts, hy / 2.0, np.array([-1.0, 0.0])),
            "right": (np.ones(nq), epts, hy / 2.0, np.array([1.0, 0.0])),
        }.items():
            lxe, lye = vals(exi), vals(eeta)
            dlxe, dlye = ders(exi), ders(eeta)
            Ne = np.empty((nq, nb))
            dNe = np.empty((nq, nb, 2))
            for dy in range(nb1):
                for dx in range(nb1):
                    a = dy * nb1 + dx
                    Ne[:, a] = lxe[:, dx] * lye[:, dy]
                    dNe[:, a, 0] = dlxe[:, dx] * lye[:, dy] * (2.0 / hx)
                    dNe[:, a, 1] = lxe[:, dx] * dlye[:, dy] * (2.0 / hy)
            self.edges[side] = (Ne, dNe, ewts * scale, nhat)


class FsiSpace:
    """Discrete space, DoF maps and node/cell classifications."""

    def __init__(self, mesh: Mesh, degree: int = 2):
        if degree < 1:
            raise ConfigurationError("polynomial degree must be >= 1")
        self.mesh = mesh
        self.degree = degree
        k = degree
        geom = mesh.geometry
        self.nx, self.ny_f, self.ny_s = mesh.nx, mesh.ny_fluid, mesh.ny_solid
        self.hx = geom.length / mesh.nx
        self.hy_f = geom.fluid_half_height / mesh.ny_fluid
        self.hy_s = geom.wall_thickness / mesh.ny_solid

        self.NX = k * self.nx + 1
        self.NY = k * (self.ny_f + self.ny_s) + 1
        self.n_nodes = self.NX * self.NY
        self.iy_if = k * self.ny_s  # interface node row

        ids = np.arange(self.n_nodes)
        self.node_ix = ids % self.NX
        self.node_iy = ids // self.NX
        x0 = -geom.length / 2.0
        y0 = -(geom.fluid_half_height + geom.wall_thickness)
        xs = x0 + self.node_ix * (self.hx / k)
        ys = np.where(
            self.node_iy <= self.iy_if,
            y0 + self.node_iy * (self.hy_s / k),
            -geom.fluid_half_height + (self.node_iy - self.iy_if) * (self.hy_f / k),
        )
        self.coords = np.column_stack([xs, ys])

        self.is_iface = self.node_iy == self.iy_if
        self.is_solid_side = self.node_iy <= self.iy_if
        self.is_fluid_side = self.node_iy >= self.iy_if

        # dof maps
        n = self.n_nodes
        self.vdof = np.arange(2 * n).reshape(n, 2)
        self.udof = 2 * n + np.arange(2 * n).reshape(n, 2)
        self.pidx = np.full(n, -1, dtype=np.int64)
        fluid_nodes = np.flatnonzero(self.is_fluid_side)
        self.pidx[fluid_nodes] = np.arange(fluid_nodes.size)
        self.n_p = fluid_nodes.size
        self.pdof = np.where(self.pidx >= 0, 4 * n + self.pidx, -1)
        self.ndof = 4 * n + self.n_p

        # cell connectivity, fluid and solid separately (cy-major, then cx)
        nb1 = k + 1
        loc_dx = np.tile(np.arange(nb1), nb1)
        loc_dy = np.repeat(np.arange(nb1), nb1)

        def conn(cy_range):
            rows = []
            cells = []
            for cy in cy_range:
                for cx in range(self.nx):
                    ix = k * cx + loc_dx
                    iy = k * cy + loc_dy
                    rows.append(iy * self.NX + ix)
                    cells.append(cy * self.nx + cx)
            return np.asarray(rows, dtype=np.int64), np.asarray(cells, dtype=np.int64)

        ny_tot = self.ny_f + self.ny_s
        self.conn_f, self.fluid_cell_ids = conn(range(self.ny_s, ny_tot))
        self.conn_s, self.solid_cell_ids = conn(range(0, self.ny_s))
        self.ncf = self.conn_f.shape[0]
        self.ncs = self.conn_s.shape[0]

        self.tab_f = CellTables(degree, self.hx, self.hy_f)
        self.tab_s = CellTables(degree, self.hx, self.hy_s)
        self.nb = self.tab_f.nb

        # quad-point reference coordinates
        self.quad_xy_f = self._quad_coords(self.conn_f, self.tab_f)
        self.quad_xy_s = self._quad_coords(self.conn_s, self.tab_s)

        # local fluid-cell row indices within conn_f for edge subsets
        ix_c = np.arange(self.ncf) % self.nx
        iy_c = np.arange(self.ncf) // self.nx  # 0 at the interface layer
        self.fcells_interface = np.flatnonzero(iy_c == 0)
        self.fcells_outflow = np.flatnonzero(ix_c == self.nx - 1)
        self.fcells_inflow = np.flatnonzero(ix_c == 0)

        # extension rows are tested with fluid-interior displacement test
        # functions only: mask interface-node rows out of the fluid pass
        self.ext_mask = (~self.is_iface[self.conn_f]).astype(float)

    def _quad_coords(self, conn, tab):
        corner = self.coords[conn[:, 0]]  # local node 0 is the lower-left corner
        qx = corner[:, None, 0] + tab.qx[None, :]
        qy = corner[:, None, 1] + tab.qy[None, :]
        return np.stack([qx, qy], axis=-1)

    # ------------------------------------------------------------------
    # node selections
    # ------------------------------------------------------------------
    def interface_nodes(self) -> np.ndarray:
        """Interface node ids ordered by increasing x."""
        sel = np.flatnonzero(self.is_iface)
        return sel[np.argsort(self.node_ix[sel], kind="stable")]

    def inflow_nodes(self) -> np.ndarray:
        return np.flatnonzero((self.node_ix == 0) & self.is_fluid_side)

    def symmetry_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.node_iy == self.NY - 1)

    def clamp_nodes(self) -> np.ndarray:
        side = (self.node_ix == 0) | (self.node_ix == self.NX - 1)
        return np.flatnonzero((self.node_iy == 0) | (side & self.is_solid_side))

    def fluid_outer_nodes(self) -> np.ndarray:
        """Fluid-subdomain boundary nodes where the ALE map is pinned to zero
        (inflow/outflow/symmetry edges)."""
        side = (self.node_ix == 0) | (self.node_ix == self.NX - 1)
        top = self.node_iy == self.NY - 1
        return np.flatnonzero(self.is_fluid_side & (side | top))

    # ------------------------------------------------------------------
    # state packing
    # ------------------------------------------------------------------
    def pack(self, v: np.ndarray, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(v).ravel(), np.asarray(u).ravel(),
                               np.asarray(p).ravel()])

    def unpack(self, x: np.ndarray):
        n = self.n_nodes
        v = x[: 2 * n].reshape(n, 2)
        u = x[2 * n: 4 * n].reshape(n, 2)
        p = x[4 * n:]
        return v, u, p
