"""Half-channel reference mesh and geometric measurements.

Builds the tagged, conforming, structured quadrilateral mesh of the lower
half of the stenotic channel (fluid layer over solid wall, symmetry plane
at y = 0) and measures the channel width on deformed configurations. All
coordinates are reference (undeformed) coordinates in cm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError

# cell subdomains
FLUID = 0
SOLID = 1
SUBDOMAIN_NAMES = {FLUID: "fluid", SOLID: "solid"}

# facet tags
INFLOW = 1
OUTFLOW = 2
SOLID_CLAMP = 3
SYMMETRY = 4
INTERFACE = 5
TAG_NAMES = {
    INFLOW: "inflow",
    OUTFLOW: "outflow",
    SOLID_CLAMP: "solid_clamp",
    SYMMETRY: "symmetry",
    INTERFACE: "interface",
}


@dataclass(frozen=True)
class ChannelGeometry:
    """Origin-centered half-channel dimensions (cm).

    Fluid half-domain: [-length/2, length/2] x [-fluid_half_height, 0];
    solid wall below it with the given thickness.
    """

    length: float = 10.0
    fluid_half_height: float = 1.0
    wall_thickness: float = 1.0

    def __post_init__(self):
        for name in ("length", "fluid_half_height", "wall_thickness"):
            if not getattr(self, name) > 0.0:
                raise ConfigurationError(f"geometry dimension {name!r} must be positive")


@dataclass
class Mesh:
    """Structured conforming quadrilateral mesh with subdomain and facet tags.

    nodes : (n_nodes, 2) reference coordinates, read-only.
    cells : (n_cells, 4) counter-clockwise corner connectivity.
    cell_subdomain : (n_cells,) FLUID or SOLID per cell.
    facet_nodes / facet_tags : tagged facets; boundary facets carry exactly
        one of {INFLOW, OUTFLOW, SOLID_CLAMP, SYMMETRY}; INTERFACE facets are
        the interior fluid/solid separators.

    The structured layout (nx, ny_fluid, ny_solid, geometry) is kept so that
    the FE layer can build tensor-product spaces on top.
    """

    geometry: ChannelGeometry
    nx: int
    ny_fluid: int
    ny_solid: int
    nodes: np.ndarray
    cells: np.ndarray
    cell_subdomain: np.ndarray
    facet_nodes: np.ndarray
    facet_tags: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def interface_node_ids(self) -> np.ndarray:
        """Corner-node ids on the interface, ordered by increasing x."""
        row = self.ny_solid  # node-row index of y = -fluid_half_height
        return np.arange(self.nx + 1) + row * (self.nx + 1)

    def facet_lengths(self, tag: int) -> np.ndarray:
        sel = self.facet_nodes[self.facet_tags == tag]
        d = self.nodes[sel[:, 1]] - self.nodes[sel[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])


def build_channel_mesh(geom: ChannelGeometry, nx: int, ny_fluid: int, ny_solid: int) -> Mesh:
    """Build the tagged half-channel mesh.

    Cells are uniform rectangles; node row 0 is the clamped bottom
    (y = -(fluid_half_height + wall_thickness)), the top row is the symmetry
    plane y = 0. Fluid and solid share the interface nodes (conforming).

    Raises
    ------
    ConfigurationError
        For non-positive subdivision counts (geometry validates itself).
    """
    if min(nx, ny_fluid, ny_solid) < 1:
        raise ConfigurationError("nx, ny_fluid, ny_solid must all be >= 1")

    half_l = geom.length / 2.0
    y_bot = -(geom.fluid_half_height + geom.wall_thickness)
    ny = ny_fluid + ny_solid

    xs = np.linspace(-half_l, half_l, nx + 1)
    # solid rows from the bottom up to the interface, then fluid rows up to 0
    ys_solid = np.linspace(y_bot, -geom.fluid_half_height, ny_solid + 1)
    ys_fluid = np.linspace(-geom.fluid_half_height, 0.0, ny_fluid + 1)
    ys = np.concatenate([ys_solid, ys_fluid[1:]])

    xg, yg = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([xg.ravel(), yg.ravel()])

    def nid(ix, iy):
        return iy * (nx + 1) + ix

    cells = np.empty((nx * ny, 4), dtype=np.int64)
    subdomain = np.empty(nx * ny, dtype=np.int64)
    for cy in range(ny):
        for cx in range(nx):
            c = cy * nx + cx
            cells[c] = (nid(cx, cy), nid(cx + 1, cy), nid(cx + 1, cy + 1), nid(cx, cy + 1))
            subdomain[c] = SOLID if cy < ny_solid else FLUID

    facets = []
    tags = []
    for cx in range(nx):  # bottom clamp and top symmetry
        facets.append((nid(cx, 0), nid(cx + 1, 0)))
        tags.append(SOLID_CLAMP)
        facets.append((nid(cx, ny), nid(cx + 1, ny)))
        tags.append(SYMMETRY)
    for cy in range(ny):  # left/right columns: clamp on solid rows, in/outflow on fluid rows
        left_tag = SOLID_CLAMP if cy < ny_solid else INFLOW
        right_tag = SOLID_CLAMP if cy < ny_solid else OUTFLOW
        facets.append((nid(0, cy), nid(0, cy + 1)))
        tags.append(left_tag)
        facets.append((nid(nx, cy), nid(nx, cy + 1)))
        tags.append(right_tag)
    for cx in range(nx):  # interior fluid/solid separators
        facets.append((nid(cx, ny_solid), nid(cx + 1, ny_solid)))
        tags.append(INTERFACE)

    mesh = Mesh(
        geometry=geom,
        nx=nx,
        ny_fluid=ny_fluid,
        ny_solid=ny_solid,
        nodes=nodes,
        cells=cells,
        cell_subdomain=subdomain,
        facet_nodes=np.asarray(facets, dtype=np.int64),
        facet_tags=np.asarray(tags, dtype=np.int64),
    )
    for arr in (mesh.nodes, mesh.cells, mesh.cell_subdomain, mesh.facet_nodes, mesh.facet_tags):
        arr.setflags(write=False)
    return mesh


def interface_width(xs_ref: np.ndarray, displacement: np.ndarray, x_query: float,
                    half_height: float) -> float:
    """Doubled distance from y = 0 to the deformed interface at x_query.

    xs_ref are the reference x-coordinates of interface nodes (ascending),
    displacement the (n, 2) nodal displacements on them. The deformed
    interface curve is interpolated linearly in the deformed x-coordinate.
    """
    x_def = xs_ref + displacement[:, 0]
    y_def = -half_height + displacement[:, 1]
    order = np.argsort(x_def)
    x_def = x_def[order]
    y_def = y_def[order]
    if not (x_def[0] - 1e-12 <= x_query <= x_def[-1] + 1e-12):
        raise DomainError(f"x_query = {x_query} outside deformed interface span")
    y_at = float(np.interp(x_query, x_def, y_def))
    return 2.0 * abs(y_at)


def channel_width(mesh: Mesh, displacement: np.ndarray, x_query: float) -> float:
    """Channel width (cm) at x_query on the deformed configuration.

    ``displacement`` is a (n_nodes, 2) nodal field on the mesh; only the
    interface rows are read. By the symmetry reduction the reported width is
    twice the deformed half-width.
    """
    half_l = mesh.geometry.length / 2.0
    if not (-half_l <= x_query <= half_l):
        raise DomainError(f"x_query = {x_query} outside channel [-{half_l}, {half_l}]")
    ids = mesh.interface_node_ids()
    return interface_width(
        mesh.nodes[ids, 0], np.asarray(displacement)[ids],
        x_query, mesh.geometry.fluid_half_height,
    )


def export_mesh_text(mesh: Mesh) -> str:
    """Plain-text mesh dump: one node per line (id x y), then one cell per
    line (id n0 n1 n2 n3 subdomain)."""
    lines = []
    for i, (x, y) in enumerate(mesh.nodes):
        lines.append(f"{i} {float(x)!r} {float(y)!r}")
    for c in range(mesh.n_cells):
        n0, n1, n2, n3 = mesh.cells[c]
        lines.append(f"{c} {n0} {n1} {n2} {n3} {SUBDOMAIN_NAMES[int(mesh.cell_subdomain[c])]}")
    return "\n".join(lines) + "\n"
