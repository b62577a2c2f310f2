//! Scene construction: base-station placement for the three deployments,
//! bus/passenger/pedestrian spawning, and the per-entity radio attributes.

use crate::geom::{OrientedBox, Point3, Pose};
use crate::grid::{GridLayout, Placement};
use crate::rng::substream;
use rand::seq::SliceRandom;
use rand::Rng;
use std::io::Write;
use thiserror::Error;

pub const MACRO_HEIGHT_M: f64 = 25.0;
pub const PICO_HEIGHT_M: f64 = 10.0;
pub const DU_HEIGHT_M: f64 = 2.5;
pub const MT_HEIGHT_M: f64 = 3.5;
pub const PEDESTRIAN_HEIGHT_M: f64 = 1.5;
pub const PASSENGER_HEIGHT_M: f64 = 1.8;

pub const MACRO_TX_POWER_DBM: f64 = 35.0;
pub const DEFAULT_TX_POWER_DBM: f64 = 24.0;

pub const BUS_LENGTH_M: f64 = 12.0;
pub const BUS_WIDTH_M: f64 = 2.55;
pub const BUS_HEIGHT_M: f64 = 3.0;
pub const BUS_SEAT_ROWS: usize = 6;
pub const BUS_SEAT_COLS: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("population counts inconsistent: {buses} buses x {per_bus} passengers/bus != {passengers} passengers")]
    InconsistentCounts {
        buses: usize,
        per_bus: usize,
        passengers: usize,
    },
    #[error("{passengers} passengers exceed {seats} seats on {buses} buses")]
    NotEnoughSeats {
        passengers: usize,
        seats: usize,
        buses: usize,
    },
}

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    MacroGnb,
    PicoGnb,
    MiabDu,
    MiabMt,
    PedestrianUe,
    PassengerUe,
}

impl NodeKind {
    /// Nodes that transmit reference signals and can serve UEs.
    pub fn is_cell(&self) -> bool {
        matches!(self, NodeKind::MacroGnb | NodeKind::PicoGnb | NodeKind::MiabDu)
    }

    /// Fiber-connected gNBs; the only valid parents for an mIAB MT.
    pub fn is_fixed_gnb(&self) -> bool {
        matches!(self, NodeKind::MacroGnb | NodeKind::PicoGnb)
    }

    pub fn is_ue(&self) -> bool {
        matches!(self, NodeKind::PedestrianUe | NodeKind::PassengerUe)
    }

    /// Entities located inside a bus body (suffer wall penetration on
    /// links to the outside). The MT sits on the roof, outside.
    pub fn is_inside_bus(&self) -> bool {
        matches!(self, NodeKind::MiabDu | NodeKind::PassengerUe)
    }

    pub fn label(&self) -> &'static str {
        match self {
            NodeKind::MacroGnb => "macro_gnb",
            NodeKind::PicoGnb => "pico_gnb",
            NodeKind::MiabDu => "miab_du",
            NodeKind::MiabMt => "miab_mt",
            NodeKind::PedestrianUe => "pedestrian_ue",
            NodeKind::PassengerUe => "passenger_ue",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayType {
    Ura8x8,
    Ula64,
    SingleOmni,
}

impl ArrayType {
    pub fn elements(&self) -> usize {
        match self {
            ArrayType::Ura8x8 => 64,
            ArrayType::Ula64 => 64,
            ArrayType::SingleOmni => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementPattern {
    /// Directional element with 65 degree beamwidths and 30 dB front-to-back.
    Tgpp3d,
    Omni,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntennaConfig {
    pub array: ArrayType,
    pub pattern: ElementPattern,
    pub max_element_gain_dbi: f64,
    /// Mechanical downtilt in degrees.
    pub tilt_deg: f64,
    /// Panel boresights in degrees, relative to the node orientation.
    /// Fixed sites carry three sectors; a bus DU has a single panel
    /// facing the cabin.
    pub sector_azimuths_deg: Vec<f64>,
}

impl AntennaConfig {
    pub fn macro_gnb() -> Self {
        Self {
            array: ArrayType::Ura8x8,
            pattern: ElementPattern::Tgpp3d,
            max_element_gain_dbi: 8.0,
            tilt_deg: 12.0,
            sector_azimuths_deg: vec![0.0, 120.0, 240.0],
        }
    }

    pub fn pico_gnb() -> Self {
        Self {
            array: ArrayType::Ura8x8,
            pattern: ElementPattern::Tgpp3d,
            max_element_gain_dbi: 8.0,
            tilt_deg: 4.0,
            sector_azimuths_deg: vec![0.0, 120.0, 240.0],
        }
    }

    pub fn miab_du() -> Self {
        Self {
            array: ArrayType::Ura8x8,
            pattern: ElementPattern::Tgpp3d,
            max_element_gain_dbi: 8.0,
            tilt_deg: 4.0,
            sector_azimuths_deg: vec![0.0],
        }
    }

    pub fn miab_mt() -> Self {
        Self {
            array: ArrayType::Ula64,
            pattern: ElementPattern::Omni,
            max_element_gain_dbi: 0.0,
            tilt_deg: 0.0,
            sector_azimuths_deg: vec![],
        }
    }

    pub fn ue() -> Self {
        Self {
            array: ArrayType::SingleOmni,
            pattern: ElementPattern::Omni,
            max_element_gain_dbi: 0.0,
            tilt_deg: 0.0,
            sector_azimuths_deg: vec![],
        }
    }
}

#[derive(Debug, Clone)]
pub struct NetworkNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub position: Point3,
    /// World azimuth of the node body frame in degrees (bus-mounted nodes
    /// rotate with the bus).
    pub orientation_deg: f64,
    pub tx_power_dbm: f64,
    pub antenna: AntennaConfig,
    pub attached_bus: Option<usize>,
}

impl NetworkNode {
    /// Node with the radio attributes of its kind (height is taken from
    /// `position`, which callers set per the entity table).
    pub fn with_kind(id: NodeId, kind: NodeKind, position: Point3) -> Self {
        let (tx_power_dbm, antenna) = match kind {
            NodeKind::MacroGnb => (MACRO_TX_POWER_DBM, AntennaConfig::macro_gnb()),
            NodeKind::PicoGnb => (DEFAULT_TX_POWER_DBM, AntennaConfig::pico_gnb()),
            NodeKind::MiabDu => (DEFAULT_TX_POWER_DBM, AntennaConfig::miab_du()),
            NodeKind::MiabMt => (DEFAULT_TX_POWER_DBM, AntennaConfig::miab_mt()),
            NodeKind::PedestrianUe | NodeKind::PassengerUe => {
                (DEFAULT_TX_POWER_DBM, AntennaConfig::ue())
            }
        };
        Self {
            id,
            kind,
            position,
            orientation_deg: 0.0,
            tx_power_dbm,
            antenna,
            attached_bus: None,
        }
    }
}

/// A bus with its rigid body-frame offsets. The DU rides inside at the
/// back; the MT sits on the roof directly above it.
#[derive(Debug, Clone)]
pub struct Bus {
    pub id: usize,
    pub pose: Pose,
    pub du_node: NodeId,
    pub mt_node: NodeId,
    pub passenger_nodes: Vec<NodeId>,
    /// (forward, left, up) body-frame offsets per passenger.
    pub seat_offsets: Vec<(f64, f64, f64)>,
}

pub const DU_BODY_OFFSET: (f64, f64, f64) = (-5.5, 0.0, DU_HEIGHT_M);
pub const MT_BODY_OFFSET: (f64, f64, f64) = (-5.5, 0.0, MT_HEIGHT_M);

/// Body-frame seat positions: 6 rows x 2 columns.
pub fn seat_grid() -> Vec<(f64, f64, f64)> {
    let mut seats = Vec::with_capacity(BUS_SEAT_ROWS * BUS_SEAT_COLS);
    for row in 0..BUS_SEAT_ROWS {
        let fwd = -4.5 + row as f64 * 1.8;
        for col in 0..BUS_SEAT_COLS {
            let left = if col == 0 { -0.8 } else { 0.8 };
            seats.push((fwd, left, PASSENGER_HEIGHT_M));
        }
    }
    seats
}

impl Bus {
    pub fn body_box(&self) -> OrientedBox {
        OrientedBox {
            center: Point3::new(
                self.pose.position.x,
                self.pose.position.y,
                BUS_HEIGHT_M / 2.0,
            ),
            heading: self.pose.heading,
            half_len: BUS_LENGTH_M / 2.0,
            half_wid: BUS_WIDTH_M / 2.0,
            half_height: BUS_HEIGHT_M / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PopulationCounts {
    pub buses: usize,
    pub passengers_per_bus: usize,
    pub passengers: usize,
    pub pedestrians: usize,
}

impl Default for PopulationCounts {
    fn default() -> Self {
        Self {
            buses: 6,
            passengers_per_bus: 6,
            passengers: 36,
            pedestrians: 36,
        }
    }
}

impl PopulationCounts {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.buses * self.passengers_per_bus != self.passengers {
            return Err(ScenarioError::InconsistentCounts {
                buses: self.buses,
                per_bus: self.passengers_per_bus,
                passengers: self.passengers,
            });
        }
        let seats = self.buses * BUS_SEAT_ROWS * BUS_SEAT_COLS;
        if self.passengers > seats {
            return Err(ScenarioError::NotEnoughSeats {
                passengers: self.passengers,
                seats,
                buses: self.buses,
            });
        }
        Ok(())
    }
}

/// Configurable placement choices; all distances in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementParams {
    /// Circumradius of the macro triangle inside the central block.
    pub macro_ring_radius: f64,
    /// Pico hexagon radius in the 3x3 layout.
    pub pico_ring_radius_not_limited: f64,
    /// Pico hexagon radius in the single-block layout.
    pub pico_ring_radius_limited: f64,
}

impl Default for PlacementParams {
    fn default() -> Self {
        Self {
            macro_ring_radius: 40.0,
            pico_ring_radius_not_limited: 190.0,
            pico_ring_radius_limited: 65.0,
        }
    }
}

/// Fixed base-station positions for a deployment: macro sites first, then
/// pico sites.
pub fn base_station_positions(
    layout: &GridLayout,
    limited: bool,
    with_picos: bool,
    params: &PlacementParams,
) -> (Vec<Point3>, Vec<Point3>) {
    let mut macros = Vec::new();
    if limited {
        let (cx, cy) = layout.blocks[0].center();
        macros.push(Point3::new(cx, cy, MACRO_HEIGHT_M));
    } else {
        let (cx, cy) = layout.central_block().center();
        let r = params.macro_ring_radius;
        for k in 0..3 {
            let angle = (90.0 + 120.0 * k as f64).to_radians();
            macros.push(Point3::new(
                cx + r * angle.cos(),
                cy + r * angle.sin(),
                MACRO_HEIGHT_M,
            ));
        }
    }
    let mut picos = Vec::new();
    if with_picos {
        let (cx, cy) = layout.center();
        let r = if limited {
            params.pico_ring_radius_limited
        } else {
            params.pico_ring_radius_not_limited
        };
        for k in 0..6 {
            let angle = (60.0 * k as f64).to_radians();
            picos.push(Point3::new(
                cx + r * angle.cos(),
                cy + r * angle.sin(),
                PICO_HEIGHT_M,
            ));
        }
    }
    (macros, picos)
}

/// A fully constructed scene: layout, nodes, buses, and the initial graph
/// placements for everything that moves.
#[derive(Debug, Clone)]
pub struct Scene {
    pub layout: GridLayout,
    pub nodes: Vec<NetworkNode>,
    pub buses: Vec<Bus>,
    pub bus_placements: Vec<Placement>,
    pub pedestrian_ids: Vec<NodeId>,
    pub ped_placements: Vec<Placement>,
    pub with_miab: bool,
}

impl Scene {
    pub fn cell_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.kind.is_cell())
            .map(|n| n.id)
            .collect()
    }

    pub fn ue_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.kind.is_ue())
            .map(|n| n.id)
            .collect()
    }

    pub fn mt_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::MiabMt)
            .map(|n| n.id)
            .collect()
    }

    /// Apply a bus pose to its riders: DU, MT and passengers keep their
    /// body-frame offsets and take the bus heading.
    pub fn sync_riders(&mut self, bus_idx: usize) {
        let bus = self.buses[bus_idx].clone();
        let az = bus.pose.heading.azimuth().to_degrees();
        if bus.du_node != usize::MAX {
            let du = &mut self.nodes[bus.du_node];
            du.position = bus.pose.apply(DU_BODY_OFFSET.0, DU_BODY_OFFSET.1, DU_BODY_OFFSET.2);
            du.orientation_deg = az;
            let mt = &mut self.nodes[bus.mt_node];
            mt.position = bus.pose.apply(MT_BODY_OFFSET.0, MT_BODY_OFFSET.1, MT_BODY_OFFSET.2);
            mt.orientation_deg = az;
        }
        for (p, seat) in bus.passenger_nodes.iter().zip(&bus.seat_offsets) {
            let node = &mut self.nodes[*p];
            node.position = bus.pose.apply(seat.0, seat.1, seat.2);
            node.orientation_deg = az;
        }
    }

    /// Build a scene for the given layout regime and deployment. Node id
    /// assignment order is cells, then per-bus DU/MT, then passengers,
    /// then pedestrians, so ids are stable for a given configuration.
    pub fn build(
        limited: bool,
        with_picos: bool,
        with_miab: bool,
        counts: &PopulationCounts,
        params: &PlacementParams,
        seed: u64,
    ) -> Result<Scene, ScenarioError> {
        counts.validate()?;
        let layout = GridLayout::build(if limited { 1 } else { 3 });
        let (macros, picos) = base_station_positions(&layout, limited, with_picos, params);

        let mut nodes: Vec<NetworkNode> = Vec::new();
        let push = |nodes: &mut Vec<NetworkNode>, kind, pos| {
            let id = nodes.len();
            nodes.push(NetworkNode::with_kind(id, kind, pos));
            id
        };
        // Three non-co-located macros partition the map into outward
        // 120-degree wedges: each site carries two panels straddling its
        // wedge so no direction inside it is more than 30 degrees off a
        // boresight. The lone macro of the limited layout keeps a
        // standard co-located three-sector configuration.
        for (k, p) in macros.into_iter().enumerate() {
            let id = push(&mut nodes, NodeKind::MacroGnb, p);
            if !limited {
                let az = 90.0 + 120.0 * k as f64;
                nodes[id].antenna.sector_azimuths_deg = vec![az - 30.0, az + 30.0];
            }
        }
        // Picos are street-level single-panel cells facing the layout
        // center.
        let (cx, cy) = layout.center();
        for p in picos {
            let az = (cy - p.y).atan2(cx - p.x).to_degrees();
            let id = push(&mut nodes, NodeKind::PicoGnb, p);
            nodes[id].antenna.sector_azimuths_deg = vec![az];
        }

        // Buses: uniform over directed road edges, offset clear of the
        // intersection squares so the whole body starts on the straight.
        let mut rng = substream(seed, "spawn", &[]);
        let mut bus_placements = Vec::new();
        let mut buses = Vec::new();
        let seats = seat_grid();
        let margin = crate::grid::STREET_WIDTH_M / 2.0 + BUS_LENGTH_M / 2.0;
        for bus_id in 0..counts.buses {
            let edge = layout.roads.edges[rng.gen_range(0..layout.roads.edges.len())];
            let (from, to) = if rng.gen_bool(0.5) {
                (edge.a, edge.b)
            } else {
                (edge.b, edge.a)
            };
            let offset = rng.gen_range(margin..edge.length - margin);
            let placement = Placement {
                from,
                to,
                offset_m: offset,
            };
            let (x, y) = layout.bus_world_point(&placement);
            let heading = layout.bus_heading(&placement);
            let pose = Pose {
                position: Point3::new(x, y, 0.0),
                heading,
            };

            let (du_node, mt_node) = if with_miab {
                let du = push(&mut nodes, NodeKind::MiabDu, Point3::default());
                let mt = push(&mut nodes, NodeKind::MiabMt, Point3::default());
                nodes[du].attached_bus = Some(bus_id);
                nodes[mt].attached_bus = Some(bus_id);
                (du, mt)
            } else {
                (usize::MAX, usize::MAX)
            };

            // distinct random seats for this bus's passengers
            let mut seat_order: Vec<usize> = (0..seats.len()).collect();
            seat_order.shuffle(&mut rng);
            let mut passenger_nodes = Vec::new();
            let mut seat_offsets = Vec::new();
            for s in seat_order.iter().take(counts.passengers_per_bus) {
                let p = push(&mut nodes, NodeKind::PassengerUe, Point3::default());
                nodes[p].attached_bus = Some(bus_id);
                passenger_nodes.push(p);
                seat_offsets.push(seats[*s]);
            }

            buses.push(Bus {
                id: bus_id,
                pose,
                du_node,
                mt_node,
                passenger_nodes,
                seat_offsets,
            });
            bus_placements.push(placement);
        }

        // Pedestrians: uniform over sidewalk ring edges (not crossings),
        // weighted by length.
        let ring_edges: Vec<usize> = (0..layout.walkways.edges.len())
            .filter(|&e| !layout.crossing_edges[e])
            .collect();
        let total_len: f64 = ring_edges
            .iter()
            .map(|&e| layout.walkways.edges[e].length)
            .sum();
        let mut pedestrian_ids = Vec::new();
        let mut ped_placements = Vec::new();
        for _ in 0..counts.pedestrians {
            let mut pick = rng.gen_range(0.0..total_len);
            let mut chosen = ring_edges[0];
            for &e in &ring_edges {
                let len = layout.walkways.edges[e].length;
                if pick < len {
                    chosen = e;
                    break;
                }
                pick -= len;
            }
            let edge = layout.walkways.edges[chosen];
            let (from, to) = if rng.gen_bool(0.5) {
                (edge.a, edge.b)
            } else {
                (edge.b, edge.a)
            };
            let placement = Placement {
                from,
                to,
                offset_m: pick.min(edge.length),
            };
            let (x, y) = layout.walk_world_point(&placement);
            let id = push(
                &mut nodes,
                NodeKind::PedestrianUe,
                Point3::new(x, y, PEDESTRIAN_HEIGHT_M),
            );
            pedestrian_ids.push(id);
            ped_placements.push(placement);
        }

        let mut scene = Scene {
            layout,
            nodes,
            buses,
            bus_placements,
            pedestrian_ids,
            ped_placements,
            with_miab,
        };
        for i in 0..scene.buses.len() {
            scene.sync_riders(i);
        }
        Ok(scene)
    }

    /// CSV dump of node positions: id, kind, x, y, z.
    pub fn dump_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "id,kind,x,y,z")?;
        for n in &self.nodes {
            writeln!(
                w,
                "{},{},{:.3},{:.3},{:.3}",
                n.id,
                n.kind.label(),
                n.position.x,
                n.position.y,
                n.position.z
            )?;
        }
        Ok(())
    }
}
