//! Madrid-grid geometry: square building blocks bordered by sidewalks and
//! separated by four-lane streets, with waypoint graphs for buses (street
//! lanes) and pedestrians (sidewalk rings plus crossings at intersections).

use crate::geom::{Heading, Point3};

pub const BLOCK_SIZE_M: f64 = 120.0;
pub const SIDEWALK_WIDTH_M: f64 = 3.0;
pub const STREET_WIDTH_M: f64 = 14.0;
pub const LANES_PER_STREET: usize = 4;
pub const LANE_WIDTH_M: f64 = STREET_WIDTH_M / LANES_PER_STREET as f64;
/// Center offset of the outermost lane from the street centerline.
pub const OUTER_LANE_OFFSET_M: f64 = STREET_WIDTH_M / 2.0 - LANE_WIDTH_M / 2.0;
/// Pitch between repeated street/block cells.
pub const CELL_PITCH_M: f64 = STREET_WIDTH_M + 2.0 * SIDEWALK_WIDTH_M + BLOCK_SIZE_M;

/// Axis-aligned rectangle, used for blocks, streets and bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x - 1e-9 && x <= self.max_x + 1e-9 && y >= self.min_y - 1e-9 && y <= self.max_y + 1e-9
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)
    }
}

/// Undirected waypoint graph with axis-aligned edges.
#[derive(Debug, Clone)]
pub struct WayGraph {
    pub nodes: Vec<(f64, f64)>,
    pub edges: Vec<WayEdge>,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy)]
pub struct WayEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

impl WayGraph {
    pub fn new(nodes: Vec<(f64, f64)>) -> Self {
        let n = nodes.len();
        Self {
            nodes,
            edges: Vec::new(),
            adjacency: vec![Vec::new(); n],
        }
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        let (ax, ay) = self.nodes[a];
        let (bx, by) = self.nodes[b];
        debug_assert!((ax - bx).abs() < 1e-9 || (ay - by).abs() < 1e-9, "edges must be axis-aligned");
        let length = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
        let id = self.edges.len();
        self.edges.push(WayEdge { a, b, length });
        self.adjacency[a].push(id);
        self.adjacency[b].push(id);
    }

    pub fn edges_at(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// Heading when traveling from node `from` to node `to`.
    pub fn heading(&self, from: usize, to: usize) -> Heading {
        let (fx, fy) = self.nodes[from];
        let (tx, ty) = self.nodes[to];
        if (tx - fx).abs() > (ty - fy).abs() {
            if tx > fx {
                Heading::East
            } else {
                Heading::West
            }
        } else if ty > fy {
            Heading::North
        } else {
            Heading::South
        }
    }

    /// The neighbor node across edge `edge_id` from `node`.
    pub fn other_end(&self, edge_id: usize, node: usize) -> usize {
        let e = &self.edges[edge_id];
        if e.a == node {
            e.b
        } else {
            e.a
        }
    }

    /// From `node`, the neighbor reached by departing with `heading`,
    /// if such an edge exists.
    pub fn neighbor_toward(&self, node: usize, heading: Heading) -> Option<usize> {
        self.adjacency[node]
            .iter()
            .map(|&e| self.other_end(e, node))
            .find(|&to| self.heading(node, to) == heading)
    }

    pub fn edge_length(&self, from: usize, to: usize) -> f64 {
        let (fx, fy) = self.nodes[from];
        let (tx, ty) = self.nodes[to];
        ((fx - tx).powi(2) + (fy - ty).powi(2)).sqrt()
    }

    /// Centerline point at `offset` meters from `from` toward `to`,
    /// shifted `lateral_right` meters to the right of travel.
    pub fn point_along(&self, from: usize, to: usize, offset: f64, lateral_right: f64) -> (f64, f64) {
        let (fx, fy) = self.nodes[from];
        let h = self.heading(from, to);
        let (ux, uy) = h.unit();
        // right of (ux, uy) is (uy, -ux)
        (
            fx + ux * offset + uy * lateral_right,
            fy + uy * offset - ux * lateral_right,
        )
    }

    pub fn total_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }
}

/// A position on a waypoint graph: traveling from one node toward another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub from: usize,
    pub to: usize,
    pub offset_m: f64,
}

/// The constructed grid: blocks, bounds, street rectangles, and the two
/// movement graphs.
#[derive(Debug, Clone)]
pub struct GridLayout {
    pub blocks_per_side: usize,
    pub blocks: Vec<Rect>,
    pub bounds: Rect,
    pub streets: Vec<Rect>,
    pub intersections: Vec<Rect>,
    pub roads: WayGraph,
    pub walkways: WayGraph,
    /// Walkway edge ids that cross a street (excluded from initial
    /// pedestrian placement; pedestrians start on sidewalks proper).
    pub crossing_edges: Vec<bool>,
}

impl GridLayout {
    /// Build an `n x n` block layout with streets on all sides of every
    /// block, so a single-block layout still has a drivable ring road.
    pub fn build(blocks_per_side: usize) -> Self {
        assert!(blocks_per_side >= 1);
        let n = blocks_per_side;
        let side = n as f64 * CELL_PITCH_M + STREET_WIDTH_M;
        let bounds = Rect {
            min_x: 0.0,
            min_y: 0.0,
            max_x: side,
            max_y: side,
        };

        let block_origin = |i: usize| STREET_WIDTH_M + SIDEWALK_WIDTH_M + i as f64 * CELL_PITCH_M;
        let mut blocks = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let bx = block_origin(i);
                let by = block_origin(j);
                blocks.push(Rect {
                    min_x: bx,
                    min_y: by,
                    max_x: bx + BLOCK_SIZE_M,
                    max_y: by + BLOCK_SIZE_M,
                });
            }
        }

        // Street rectangles (full strips) and intersection squares.
        let street_lo = |k: usize| k as f64 * CELL_PITCH_M;
        let mut streets = Vec::new();
        for k in 0..=n {
            let lo = street_lo(k);
            streets.push(Rect {
                min_x: lo,
                min_y: 0.0,
                max_x: lo + STREET_WIDTH_M,
                max_y: side,
            });
            streets.push(Rect {
                min_x: 0.0,
                min_y: lo,
                max_x: side,
                max_y: lo + STREET_WIDTH_M,
            });
        }
        let mut intersections = Vec::new();
        for ky in 0..=n {
            for kx in 0..=n {
                intersections.push(Rect {
                    min_x: street_lo(kx),
                    min_y: street_lo(ky),
                    max_x: street_lo(kx) + STREET_WIDTH_M,
                    max_y: street_lo(ky) + STREET_WIDTH_M,
                });
            }
        }

        // Road graph: intersection centers connected along streets.
        let center = |k: usize| street_lo(k) + STREET_WIDTH_M / 2.0;
        let mut road_nodes = Vec::new();
        for ky in 0..=n {
            for kx in 0..=n {
                road_nodes.push((center(kx), center(ky)));
            }
        }
        let road_idx = |kx: usize, ky: usize| ky * (n + 1) + kx;
        let mut roads = WayGraph::new(road_nodes);
        for ky in 0..=n {
            for kx in 0..=n {
                if kx < n {
                    roads.add_edge(road_idx(kx, ky), road_idx(kx + 1, ky));
                }
                if ky < n {
                    roads.add_edge(road_idx(kx, ky), road_idx(kx, ky + 1));
                }
            }
        }

        // Walkway graph: one sidewalk ring per block (at the sidewalk
        // midline) plus street crossings joining adjacent blocks at the
        // intersection corners.
        let half = SIDEWALK_WIDTH_M / 2.0;
        let mut walk_nodes = Vec::new();
        // corner order per block: SW, SE, NE, NW
        for block in &blocks {
            walk_nodes.push((block.min_x - half, block.min_y - half));
            walk_nodes.push((block.max_x + half, block.min_y - half));
            walk_nodes.push((block.max_x + half, block.max_y + half));
            walk_nodes.push((block.min_x - half, block.max_y + half));
        }
        let corner = |i: usize, j: usize, c: usize| (j * n + i) * 4 + c;
        const SW: usize = 0;
        const SE: usize = 1;
        const NE: usize = 2;
        const NW: usize = 3;
        let mut walkways = WayGraph::new(walk_nodes);
        let mut crossing_edges = Vec::new();
        for j in 0..n {
            for i in 0..n {
                walkways.add_edge(corner(i, j, SW), corner(i, j, SE));
                walkways.add_edge(corner(i, j, SE), corner(i, j, NE));
                walkways.add_edge(corner(i, j, NE), corner(i, j, NW));
                walkways.add_edge(corner(i, j, NW), corner(i, j, SW));
                crossing_edges.extend([false; 4]);
            }
        }
        for j in 0..n {
            for i in 0..n {
                if i + 1 < n {
                    walkways.add_edge(corner(i, j, SE), corner(i + 1, j, SW));
                    walkways.add_edge(corner(i, j, NE), corner(i + 1, j, NW));
                    crossing_edges.extend([true, true]);
                }
                if j + 1 < n {
                    walkways.add_edge(corner(i, j, NW), corner(i, j + 1, SW));
                    walkways.add_edge(corner(i, j, NE), corner(i, j + 1, SE));
                    crossing_edges.extend([true, true]);
                }
            }
        }

        Self {
            blocks_per_side: n,
            blocks,
            bounds,
            streets,
            intersections,
            roads,
            walkways,
            crossing_edges,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        self.bounds.center()
    }

    /// Central block of the layout (requires odd `blocks_per_side`).
    pub fn central_block(&self) -> Rect {
        let n = self.blocks_per_side;
        self.blocks[(n / 2) * n + n / 2]
    }

    pub fn in_any_street(&self, x: f64, y: f64) -> bool {
        self.streets.iter().any(|s| s.contains(x, y))
    }

    pub fn in_any_intersection(&self, x: f64, y: f64) -> bool {
        self.intersections.iter().any(|s| s.contains(x, y))
    }

    /// Sidewalk bands around every block, plus the street crossings used
    /// at intersections.
    pub fn in_walkable_area(&self, x: f64, y: f64) -> bool {
        let w = SIDEWALK_WIDTH_M;
        for b in &self.blocks {
            let ring = Rect {
                min_x: b.min_x - w,
                min_y: b.min_y - w,
                max_x: b.max_x + w,
                max_y: b.max_y + w,
            };
            if ring.contains(x, y) && !b.contains(x, y) {
                return true;
            }
        }
        // crossings run beside intersections across the streets
        self.in_any_street(x, y)
    }

    /// World position of a road placement with the bus in the outermost
    /// lane of its direction of travel.
    pub fn bus_world_point(&self, p: &Placement) -> (f64, f64) {
        self.roads.point_along(p.from, p.to, p.offset_m, OUTER_LANE_OFFSET_M)
    }

    pub fn walk_world_point(&self, p: &Placement) -> (f64, f64) {
        self.walkways.point_along(p.from, p.to, p.offset_m, 0.0)
    }

    pub fn bus_heading(&self, p: &Placement) -> Heading {
        self.roads.heading(p.from, p.to)
    }
}

/// Convenience: 3D point at a given height from a 2D location.
pub fn at_height(xy: (f64, f64), z: f64) -> Point3 {
    Point3::new(xy.0, xy.1, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn not_limited_layout_dimensions() {
        let g = GridLayout::build(3);
        assert_eq!(g.blocks.len(), 9);
        // per side: 3 blocks + 6 sidewalks + 4 streets
        let expected = 3.0 * 120.0 + 6.0 * 3.0 + 4.0 * 14.0;
        assert!((g.bounds.max_x - expected).abs() < 1e-9);
        assert!((g.bounds.max_y - expected).abs() < 1e-9);
        // street width between adjacent blocks: gap minus the two sidewalks
        let b0 = g.blocks[0];
        let b1 = g.blocks[1];
        let gap = b1.min_x - b0.max_x - 2.0 * SIDEWALK_WIDTH_M;
        assert!((gap - 14.0).abs() < 1e-9);
    }

    #[test]
    fn limited_layout_is_one_block_with_ring_road() {
        let g = GridLayout::build(1);
        assert_eq!(g.blocks.len(), 1);
        assert_eq!(g.roads.nodes.len(), 4);
        assert_eq!(g.roads.edges.len(), 4);
        assert_eq!(g.walkways.edges.len(), 4);
        assert!((g.bounds.max_x - 154.0).abs() < 1e-9);
    }

    #[test]
    fn road_graph_connectivity() {
        let g = GridLayout::build(3);
        assert_eq!(g.roads.nodes.len(), 16);
        // 4 rows x 3 horizontal edges + 4 cols x 3 vertical edges
        assert_eq!(g.roads.edges.len(), 24);
        // interior nodes have degree 4
        let interior = 5; // (kx=1, ky=1) in the 4x4 node grid
        assert_eq!(g.roads.edges_at(interior).len(), 4);
    }

    #[test]
    fn walkway_crossings_only_between_adjacent_blocks() {
        let g = GridLayout::build(3);
        let n_rings = 9 * 4;
        let n_crossings = 2 * (2 * 3) * 2; // 6 adjacent pairs per axis, 2 crossings each
        assert_eq!(g.walkways.edges.len(), n_rings + n_crossings);
        let crossings = g.crossing_edges.iter().filter(|&&c| c).count();
        assert_eq!(crossings, n_crossings);
    }

    #[test]
    fn bus_lane_point_is_inside_street() {
        let g = GridLayout::build(3);
        let p = Placement {
            from: 0,
            to: 1,
            offset_m: 70.0,
        };
        let (x, y) = g.bus_world_point(&p);
        assert!(g.in_any_street(x, y));
        // heading east, right side is south of the centerline
        assert!(y < g.roads.nodes[0].1);
    }

    #[test]
    fn walk_points_stay_in_walkable_area() {
        let g = GridLayout::build(3);
        for (eid, e) in g.walkways.edges.iter().enumerate() {
            for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let p = Placement {
                    from: e.a,
                    to: e.b,
                    offset_m: e.length * frac,
                };
                let (x, y) = g.walk_world_point(&p);
                assert!(
                    g.in_walkable_area(x, y),
                    "edge {eid} frac {frac} at ({x},{y}) not walkable"
                );
            }
        }
    }

    #[test]
    fn heading_lookup() {
        let g = GridLayout::build(1);
        // nodes: (7,7), (147,7), (7,147), (147,147)
        assert_eq!(g.roads.heading(0, 1), Heading::East);
        assert_eq!(g.roads.heading(1, 0), Heading::West);
        assert_eq!(g.roads.heading(0, 2), Heading::North);
        assert_eq!(g.roads.neighbor_toward(0, Heading::East), Some(1));
        assert_eq!(g.roads.neighbor_toward(0, Heading::West), None);
    }
}
