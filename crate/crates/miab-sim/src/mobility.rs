//! Per-slot movement of buses and pedestrians along the grid graphs.
//!
//! Entities travel along axis-aligned graph edges at constant speed and
//! sample a turn exactly once per intersection entry: straight with
//! probability 0.6, left 0.2, right 0.2. Options that do not exist at a
//! node (layout boundary) renormalize the remaining weights; a dead end
//! forces a U-turn, which keeps the population constant on the closed
//! grid.

use crate::geom::{Point3, Pose};
use crate::grid::{Placement, WayGraph};
use crate::scenario::Scene;
use rand::Rng;
use thiserror::Error;

pub const TURN_P_STRAIGHT: f64 = 0.6;
pub const TURN_P_LEFT: f64 = 0.2;
pub const TURN_P_RIGHT: f64 = 0.2;

pub const PEDESTRIAN_SPEED_KMH: f64 = 3.0;

pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

/// Bus speed depends on the layout regime.
pub fn bus_speed_kmh(limited: bool) -> f64 {
    if limited {
        20.0
    } else {
        40.0
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MobilityError {
    #[error("entity placement references nodes {from}->{to} with no connecting edge")]
    OffGraph { from: usize, to: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnOutcome {
    Straight,
    Left,
    Right,
    UTurn,
}

/// Sample a turn given which of (straight, left, right) exist at the node.
/// Weights renormalize over the available subset; nothing available means
/// a U-turn.
pub fn choose_turn<R: Rng>(
    straight: bool,
    left: bool,
    right: bool,
    rng: &mut R,
) -> TurnOutcome {
    let mut options: Vec<(TurnOutcome, f64)> = Vec::with_capacity(3);
    if straight {
        options.push((TurnOutcome::Straight, TURN_P_STRAIGHT));
    }
    if left {
        options.push((TurnOutcome::Left, TURN_P_LEFT));
    }
    if right {
        options.push((TurnOutcome::Right, TURN_P_RIGHT));
    }
    if options.is_empty() {
        return TurnOutcome::UTurn;
    }
    let total: f64 = options.iter().map(|(_, w)| w).sum();
    let mut pick = rng.gen_range(0.0..total);
    for (outcome, w) in &options {
        if pick < *w {
            return *outcome;
        }
        pick -= w;
    }
    options.last().unwrap().0
}

/// Position and speed of a moving entity on a waypoint graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravelState {
    pub placement: Placement,
    pub speed_mps: f64,
}

impl TravelState {
    pub fn new(placement: Placement, speed_mps: f64) -> Self {
        Self {
            placement,
            speed_mps,
        }
    }
}

/// Advance an entity by `dt_s` seconds. Returns the turn taken if the
/// entity passed through a node this step.
pub fn step<R: Rng>(
    state: &mut TravelState,
    graph: &WayGraph,
    dt_s: f64,
    rng: &mut R,
) -> Result<Option<TurnOutcome>, MobilityError> {
    let p = &mut state.placement;
    if !graph
        .edges_at(p.from)
        .iter()
        .any(|&e| graph.other_end(e, p.from) == p.to)
    {
        return Err(MobilityError::OffGraph {
            from: p.from,
            to: p.to,
        });
    }

    let mut remaining = state.speed_mps * dt_s;
    let mut turned = None;
    loop {
        let edge_len = graph.edge_length(p.from, p.to);
        if p.offset_m + remaining < edge_len {
            p.offset_m += remaining;
            return Ok(turned);
        }
        // arrive at p.to and pick the next edge
        remaining -= edge_len - p.offset_m;
        let node = p.to;
        let heading = graph.heading(p.from, p.to);
        let straight = graph.neighbor_toward(node, heading);
        let left = graph.neighbor_toward(node, heading.left());
        let right = graph.neighbor_toward(node, heading.right());
        let outcome = choose_turn(straight.is_some(), left.is_some(), right.is_some(), rng);
        let next = match outcome {
            TurnOutcome::Straight => straight.unwrap(),
            TurnOutcome::Left => left.unwrap(),
            TurnOutcome::Right => right.unwrap(),
            TurnOutcome::UTurn => p.from,
        };
        p.from = node;
        p.to = next;
        p.offset_m = 0.0;
        turned = Some(outcome);
    }
}

/// Advance a bus and rigidly carry its DU, MT and passengers.
pub fn step_bus<R: Rng>(
    scene: &mut Scene,
    bus_idx: usize,
    state: &mut TravelState,
    dt_s: f64,
    rng: &mut R,
) -> Result<Option<TurnOutcome>, MobilityError> {
    let outcome = step(state, &scene.layout.roads, dt_s, rng)?;
    let (x, y) = scene.layout.bus_world_point(&state.placement);
    let heading = scene.layout.bus_heading(&state.placement);
    scene.buses[bus_idx].pose = Pose {
        position: Point3::new(x, y, 0.0),
        heading,
    };
    scene.sync_riders(bus_idx);
    Ok(outcome)
}

/// Advance a pedestrian along the walkway graph.
pub fn step_pedestrian<R: Rng>(
    scene: &mut Scene,
    ped_idx: usize,
    state: &mut TravelState,
    dt_s: f64,
    rng: &mut R,
) -> Result<Option<TurnOutcome>, MobilityError> {
    let outcome = step(state, &scene.layout.walkways, dt_s, rng)?;
    let (x, y) = scene.layout.walk_world_point(&state.placement);
    let id = scene.pedestrian_ids[ped_idx];
    let node = &mut scene.nodes[id];
    node.position.x = x;
    node.position.y = y;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Heading;
    use crate::grid::GridLayout;
    use crate::rng::substream;
    use crate::scenario::{PlacementParams, PopulationCounts, Scene};

    #[test]
    fn straight_segment_keeps_heading() {
        let layout = GridLayout::build(3);
        let mut state = TravelState::new(
            Placement {
                from: 0,
                to: 1,
                offset_m: 10.0,
            },
            kmh_to_mps(40.0),
        );
        let mut rng = substream(1, "test", &[]);
        let before = layout.roads.heading(state.placement.from, state.placement.to);
        let turned = step(&mut state, &layout.roads, 0.25e-3, &mut rng).unwrap();
        assert!(turned.is_none());
        let after = layout.roads.heading(state.placement.from, state.placement.to);
        assert_eq!(before, after);
    }

    #[test]
    fn bus_at_40_kmh_covers_11_11_m_per_second() {
        let layout = GridLayout::build(3);
        let mut state = TravelState::new(
            Placement {
                from: 0,
                to: 1,
                offset_m: 0.0,
            },
            kmh_to_mps(40.0),
        );
        let mut rng = substream(1, "test", &[]);
        // 4000 slots of 0.25 ms = 1 s; stays on the 140 m edge
        for _ in 0..4000 {
            step(&mut state, &layout.roads, 0.25e-3, &mut rng).unwrap();
        }
        assert!((state.placement.offset_m - 40.0 / 3.6).abs() < 1e-6);
    }

    #[test]
    fn turn_frequencies_match_probabilities() {
        let mut rng = substream(7, "turns", &[]);
        let n = 10_000;
        let mut counts = [0u32; 3];
        for _ in 0..n {
            match choose_turn(true, true, true, &mut rng) {
                TurnOutcome::Straight => counts[0] += 1,
                TurnOutcome::Left => counts[1] += 1,
                TurnOutcome::Right => counts[2] += 1,
                TurnOutcome::UTurn => unreachable!(),
            }
        }
        let f = |c: u32| c as f64 / n as f64;
        assert!((f(counts[0]) - 0.6).abs() < 0.03);
        assert!((f(counts[1]) - 0.2).abs() < 0.03);
        assert!((f(counts[2]) - 0.2).abs() < 0.03);
    }

    #[test]
    fn restricted_options_renormalize() {
        let mut rng = substream(8, "turns", &[]);
        for _ in 0..200 {
            let t = choose_turn(false, true, true, &mut rng);
            assert!(matches!(t, TurnOutcome::Left | TurnOutcome::Right));
        }
        assert_eq!(choose_turn(false, false, false, &mut rng), TurnOutcome::UTurn);
    }

    #[test]
    fn off_graph_placement_errors() {
        let layout = GridLayout::build(1);
        // nodes 0 and 3 are diagonal: no edge
        let mut state = TravelState::new(
            Placement {
                from: 0,
                to: 3,
                offset_m: 0.0,
            },
            1.0,
        );
        let mut rng = substream(1, "test", &[]);
        let err = step(&mut state, &layout.roads, 1.0, &mut rng).unwrap_err();
        assert_eq!(err, MobilityError::OffGraph { from: 0, to: 3 });
    }

    fn test_scene() -> Scene {
        Scene::build(
            true,
            false,
            true,
            &PopulationCounts::default(),
            &PlacementParams::default(),
            11,
        )
        .unwrap()
    }

    #[test]
    fn riders_follow_the_bus_rigidly() {
        let mut scene = test_scene();
        let mut state = TravelState::new(scene.bus_placements[0], kmh_to_mps(20.0));
        let mut rng = substream(11, "bus", &[0]);
        let du0 = scene.nodes[scene.buses[0].du_node].position;
        let mt0 = scene.nodes[scene.buses[0].mt_node].position;
        let d0 = du0.distance_3d(&mt0);
        // run long enough to take several corners on the ring road
        let mut turns = 0;
        for _ in 0..200_000 {
            if step_bus(&mut scene, 0, &mut state, 0.25e-3, &mut rng)
                .unwrap()
                .is_some()
            {
                turns += 1;
            }
        }
        assert!(turns >= 2, "bus should have passed intersections");
        let du = scene.nodes[scene.buses[0].du_node].position;
        let mt = scene.nodes[scene.buses[0].mt_node].position;
        assert!((du.distance_3d(&mt) - d0).abs() < 1e-9);
        assert!((mt.z - 3.5).abs() < 1e-9);
        // passengers still inside the body after the turns
        let body = scene.buses[0].body_box();
        for &p in &scene.buses[0].passenger_nodes {
            assert!(body.contains(&scene.nodes[p].position));
        }
    }

    #[test]
    fn stationary_bus_keeps_rider_positions() {
        let mut scene = test_scene();
        let before: Vec<_> = scene.buses[0]
            .passenger_nodes
            .iter()
            .map(|&p| scene.nodes[p].position)
            .collect();
        scene.sync_riders(0);
        for (&p, b) in scene.buses[0].passenger_nodes.iter().zip(&before) {
            assert_eq!(scene.nodes[p].position, *b);
        }
    }

    #[test]
    fn rotating_a_bus_rotates_rider_offsets() {
        let mut scene = test_scene();
        let bus_pos = scene.buses[0].pose.position;
        scene.buses[0].pose.heading = Heading::East;
        scene.sync_riders(0);
        let du_east = scene.nodes[scene.buses[0].du_node].position;
        scene.buses[0].pose.heading = Heading::North;
        scene.sync_riders(0);
        let du_north = scene.nodes[scene.buses[0].du_node].position;
        // 90 degree rotation about the bus origin: (dx, dy) -> (-dy, dx)
        let (dx, dy) = (du_east.x - bus_pos.x, du_east.y - bus_pos.y);
        assert!((du_north.x - (bus_pos.x - dy)).abs() < 1e-9);
        assert!((du_north.y - (bus_pos.y + dx)).abs() < 1e-9);
        assert!((du_north.z - du_east.z).abs() < 1e-9);
    }

    #[test]
    fn entities_stay_on_walkable_and_drivable_areas() {
        let mut scene = Scene::build(
            false,
            false,
            true,
            &PopulationCounts::default(),
            &PlacementParams::default(),
            21,
        )
        .unwrap();
        let mut bus_states: Vec<TravelState> = scene
            .bus_placements
            .iter()
            .map(|p| TravelState::new(*p, kmh_to_mps(40.0)))
            .collect();
        let mut ped_states: Vec<TravelState> = scene
            .ped_placements
            .iter()
            .map(|p| TravelState::new(*p, kmh_to_mps(3.0)))
            .collect();
        let mut rng = substream(21, "mix", &[]);
        // coarse dt to cover distance quickly; invariants checked each step
        for _ in 0..3000 {
            for (i, st) in bus_states.iter_mut().enumerate() {
                step_bus(&mut scene, i, st, 0.1, &mut rng).unwrap();
                let p = scene.buses[i].pose.position;
                assert!(scene.layout.in_any_street(p.x, p.y), "bus off street at {p:?}");
            }
            for (i, st) in ped_states.iter_mut().enumerate() {
                step_pedestrian(&mut scene, i, st, 0.1, &mut rng).unwrap();
                let p = scene.nodes[scene.pedestrian_ids[i]].position;
                assert!(
                    scene.layout.in_walkable_area(p.x, p.y),
                    "pedestrian off walkway at {p:?}"
                );
            }
        }
    }

    #[test]
    fn trajectories_reproducible_with_fixed_seed() {
        let run = |seed: u64| {
            let mut scene = test_scene();
            let mut state = TravelState::new(scene.bus_placements[2], kmh_to_mps(20.0));
            let mut rng = substream(seed, "bus", &[2]);
            for _ in 0..50_000 {
                step_bus(&mut scene, 2, &mut state, 0.25e-3, &mut rng).unwrap();
            }
            scene.buses[2].pose.position
        };
        let a = run(5);
        let b = run(5);
        assert_eq!(a, b);
    }
}
