//! The slot-driven engine: CBR traffic, per-cell round-robin scheduling
//! under the active TDD pattern, SINR with cross-link interference over
//! the realized transmitter set, threshold decoding with OLLA, two-hop
//! backhaul forwarding, and latency/throughput bookkeeping.
//!
//! Slot phases: mobility, throttled channel refresh, topology refresh,
//! traffic, scheduling, transmit/decode, forwarding, metrics. All
//! randomness comes from named substreams of the run seed, so a
//! configuration reruns bit-identically.

use crate::channel::ChannelModel;
use crate::config::{ConfigError, RunConfig};
use crate::frame::LinkRole;
use crate::metrics::{LinkCategory, MetricsBundle, UeClass, UeStats};
use crate::mobility::{self, TravelState};
use crate::radio::{
    self, noise_power_dbm, rx_power_per_re_dbm, sinr_sample, McsTable, OllaState,
    NUM_RBS, SLOT_DURATION_MS, SUBCARRIERS_PER_RB,
};
use crate::scenario::{NodeId, NodeKind, Scene, ScenarioError};
use crate::channel::antenna::array_gain_db;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use thiserror::Error;

pub const CBR_PACKET_BITS: u64 = 3072;
pub const CBR_INTERARRIVAL_SLOTS: u64 = 4;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Direction {
    Dl,
    Ul,
}

/// One CBR packet; `remaining_bits` tracks the current hop only and is
/// refilled when the packet is decoded and forwarded to the next hop.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub id: u64,
    pub ue: NodeId,
    pub class: UeClass,
    pub direction: Direction,
    pub size_bits: u64,
    pub remaining_bits: u64,
    pub created_slot: u64,
    pub backhaul_delivered_slot: Option<u64>,
    pub hops: u8,
}

/// FIFO byte queue of packets for one link; bits of one packet may span
/// slots but packets complete in order. Tracks per-destination bits so a
/// shared backhaul queue can report how many flows it carries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TxQueue {
    packets: VecDeque<PacketRecord>,
    bits: u64,
    per_ue_bits: BTreeMap<NodeId, u64>,
}

impl TxQueue {
    pub fn push(&mut self, p: PacketRecord) {
        self.bits += p.remaining_bits;
        *self.per_ue_bits.entry(p.ue).or_insert(0) += p.remaining_bits;
        self.packets.push_back(p);
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Number of distinct destination UEs with queued bits.
    pub fn distinct_ues(&self) -> usize {
        self.per_ue_bits.len()
    }

    /// Total size of queued packets (full packet sizes, for conservation
    /// audits).
    pub fn size_bits(&self) -> u64 {
        self.packets.iter().map(|p| p.size_bits).sum()
    }

    fn debit_ue(&mut self, ue: NodeId, bits: u64) {
        let entry = self.per_ue_bits.get_mut(&ue).expect("per-ue accounting");
        *entry -= bits;
        if *entry == 0 {
            self.per_ue_bits.remove(&ue);
        }
    }

    /// Remove up to `budget` bits; returns the packets whose last bit was
    /// sent within the budget.
    pub fn dequeue(&mut self, mut budget: u64) -> Vec<PacketRecord> {
        let mut completed = Vec::new();
        while budget > 0 {
            let Some(front) = self.packets.front_mut() else {
                break;
            };
            if front.remaining_bits <= budget {
                budget -= front.remaining_bits;
                self.bits -= front.remaining_bits;
                let mut p = self.packets.pop_front().unwrap();
                self.debit_ue(p.ue, p.remaining_bits);
                p.remaining_bits = 0;
                completed.push(p);
            } else {
                front.remaining_bits -= budget;
                self.bits -= budget;
                let ue = front.ue;
                self.debit_ue(ue, budget);
                budget = 0;
            }
        }
        completed
    }

    pub fn drain_all(&mut self) -> Vec<PacketRecord> {
        self.bits = 0;
        self.per_ue_bits.clear();
        self.packets.drain(..).collect()
    }

    pub fn drain_for_ue(&mut self, ue: NodeId) -> Vec<PacketRecord> {
        let mut kept = VecDeque::new();
        let mut taken = Vec::new();
        for p in self.packets.drain(..) {
            if p.ue == ue {
                self.bits -= p.remaining_bits;
                taken.push(p);
            } else {
                kept.push_back(p);
            }
        }
        self.per_ue_bits.remove(&ue);
        self.packets = kept;
        taken
    }

    pub fn iter(&self) -> impl Iterator<Item = &PacketRecord> {
        self.packets.iter()
    }
}

/// One DL and optionally one UL CBR flow per UE.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub ue: NodeId,
    pub class: UeClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSource {
    pub dl_flows: Vec<FlowSpec>,
    pub ul_flows: Vec<FlowSpec>,
}

impl TrafficSource {
    pub fn emits_at(slot: u64) -> bool {
        slot.is_multiple_of(CBR_INTERARRIVAL_SLOTS)
    }

    /// Number of emission instants in the first `slots` slots.
    pub fn emissions_over(slots: u64) -> u64 {
        slots.div_ceil(CBR_INTERARRIVAL_SLOTS)
    }

    /// Exact DL bits generated toward UEs of `class` over a horizon.
    pub fn dl_bits_over(&self, slots: u64, class: UeClass) -> u64 {
        let flows = self.dl_flows.iter().filter(|f| f.class == class).count() as u64;
        flows * Self::emissions_over(slots) * CBR_PACKET_BITS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HopKind {
    AccessDl,
    AccessUl,
    BackhaulDl,
    BackhaulUl,
}

impl HopKind {
    fn direction(&self) -> Direction {
        match self {
            HopKind::AccessDl | HopKind::BackhaulDl => Direction::Dl,
            HopKind::AccessUl | HopKind::BackhaulUl => Direction::Ul,
        }
    }

    fn category(&self) -> LinkCategory {
        match self {
            HopKind::AccessDl | HopKind::AccessUl => LinkCategory::Access,
            HopKind::BackhaulDl | HopKind::BackhaulUl => LinkCategory::Backhaul,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Allocation {
    cell: NodeId,
    /// Scheduling peer: the UE for access hops, the MT for backhaul hops.
    peer: NodeId,
    tx: NodeId,
    rx: NodeId,
    rb_start: usize,
    rb_len: usize,
    hop: HopKind,
}

/// Per-slot transmission record, kept for the most recent slot (test and
/// debug visibility).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationRecord {
    pub slot: u64,
    pub cell: NodeId,
    pub peer: NodeId,
    pub tx: NodeId,
    pub rx: NodeId,
    pub rb_start: usize,
    pub rb_len: usize,
    pub direction: Direction,
    pub category: LinkCategory,
    pub mcs: u8,
    pub decode_ok: bool,
    pub sinr_db: f64,
    pub interference_mw: f64,
}

/// One line of a trajectory trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub entity: String,
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
}

/// Round-robin split of `n_rbs` resource blocks over `k` peers: as even
/// as possible, leftover blocks to the first peers in rotation order.
pub fn rr_split(n_rbs: usize, k: usize) -> Vec<usize> {
    weighted_split(n_rbs, &vec![1; k])
}

/// Weighted round-robin split: shares proportional to integer weights,
/// leftover blocks to the first peers in rotation order. An MT relaying
/// several flows weighs as that many scheduling citizens.
pub fn weighted_split(n_rbs: usize, weights: &[usize]) -> Vec<usize> {
    let total: usize = weights.iter().sum();
    if total == 0 {
        return vec![0; weights.len()];
    }
    let mut shares: Vec<usize> = weights.iter().map(|w| n_rbs * w / total).collect();
    let mut leftover = n_rbs - shares.iter().sum::<usize>();
    let mut i = 0;
    while leftover > 0 {
        if weights[i % weights.len()] > 0 {
            shares[i % weights.len()] += 1;
            leftover -= 1;
        }
        i += 1;
    }
    shares
}

/// Buffer-aware weighted round-robin: like [`weighted_split`], but a peer
/// never takes more blocks than `needs` (its queue sized at the rate its
/// link currently selects); freed blocks redistribute to still-hungry
/// peers. A lone deep-queue peer therefore still receives every block.
pub fn capped_weighted_split(n_rbs: usize, weights: &[usize], needs: &[usize]) -> Vec<usize> {
    debug_assert_eq!(weights.len(), needs.len());
    let mut shares = vec![0usize; weights.len()];
    let mut capped = vec![false; weights.len()];
    let mut remaining = n_rbs;
    loop {
        let open: Vec<usize> = (0..weights.len())
            .filter(|&i| !capped[i] && weights[i] > 0)
            .collect();
        if open.is_empty() || remaining == 0 {
            break;
        }
        let open_weights: Vec<usize> = open.iter().map(|&i| weights[i]).collect();
        let round = weighted_split(remaining, &open_weights);
        let mut any_capped = false;
        for (&i, add) in open.iter().zip(round) {
            let headroom = needs[i].saturating_sub(shares[i]);
            if add >= headroom {
                shares[i] += headroom;
                remaining -= headroom;
                capped[i] = true;
                any_capped = true;
            } else {
                shares[i] += add;
                remaining -= add;
            }
        }
        if !any_capped {
            break;
        }
        // un-spent shares of uncapped peers return to the pool for the
        // next pass
        for &i in &open {
            if !capped[i] {
                remaining += shares[i];
                shares[i] = 0;
            }
        }
    }
    shares
}

#[derive(Debug, Default)]
struct Queues {
    dl_limbo: BTreeMap<NodeId, TxQueue>,
    ul_limbo: BTreeMap<NodeId, TxQueue>,
    /// (cell, ue) -> queue
    access_dl: BTreeMap<(NodeId, NodeId), TxQueue>,
    access_ul: BTreeMap<(NodeId, NodeId), TxQueue>,
    /// mt -> queue of packets riding the donor->MT (or MT->donor) hop
    backhaul_dl: BTreeMap<NodeId, TxQueue>,
    backhaul_ul: BTreeMap<NodeId, TxQueue>,
}

pub struct Simulation {
    cfg: RunConfig,
    scene: Scene,
    channel: ChannelModel,
    mcs_table: McsTable,
    bus_states: Vec<TravelState>,
    ped_states: Vec<TravelState>,
    bus_rngs: Vec<ChaCha8Rng>,
    ped_rngs: Vec<ChaCha8Rng>,
    cells: Vec<NodeId>,
    ues: Vec<NodeId>,
    mts: Vec<NodeId>,
    /// mt <-> du lookups for backhaul forwarding.
    mt_du: BTreeMap<NodeId, NodeId>,
    du_mt: BTreeMap<NodeId, NodeId>,
    serving: BTreeMap<NodeId, NodeId>,
    traffic: TrafficSource,
    queues: Queues,
    olla: BTreeMap<(NodeId, Direction), OllaState>,
    sinr_est: BTreeMap<(NodeId, Direction), f64>,
    rr_cursor: BTreeMap<NodeId, usize>,
    slot: u64,
    next_packet_id: u64,
    // metrics accumulation
    ue_generated: BTreeMap<NodeId, u64>,
    ue_delivered: BTreeMap<NodeId, u64>,
    ue_active_slots: BTreeMap<NodeId, u64>,
    latencies_ms: [Vec<f64>; 2],
    ue_latencies_ms: BTreeMap<NodeId, Vec<f64>>,
    mcs_hist: [Vec<u64>; 2],
    transmissions: [u64; 2],
    decode_errors: [u64; 2],
    generated_bits: [u64; 2],
    delivered_bits: [u64; 2],
    ul_generated_bits: u64,
    ul_delivered_bits: u64,
    two_hop_delivered: u64,
    last_allocations: Vec<AllocationRecord>,
}

impl Simulation {
    pub fn new(cfg: RunConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let scene = Scene::build(
            cfg.regime.is_limited(),
            cfg.deployment.with_picos(),
            cfg.deployment.with_miab(),
            &cfg.counts,
            &cfg.placement,
            cfg.seed,
        )?;
        let n = scene.nodes.len();
        let mut tracked = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                // fixed sites all follow the same pattern row, so they
                // never interfere with each other
                if scene.nodes[i].kind.is_fixed_gnb() && scene.nodes[j].kind.is_fixed_gnb() {
                    continue;
                }
                tracked.push((i, j));
            }
        }
        let mut channel_params = cfg.channel;
        channel_params.fading_enabled = cfg.fading;
        let channel = ChannelModel::new(cfg.seed, channel_params, n, tracked);

        let bus_speed = mobility::kmh_to_mps(mobility::bus_speed_kmh(cfg.regime.is_limited()));
        let ped_speed = mobility::kmh_to_mps(mobility::PEDESTRIAN_SPEED_KMH);
        let bus_states = scene
            .bus_placements
            .iter()
            .map(|p| TravelState::new(*p, bus_speed))
            .collect::<Vec<_>>();
        let ped_states = scene
            .ped_placements
            .iter()
            .map(|p| TravelState::new(*p, ped_speed))
            .collect::<Vec<_>>();
        let bus_rngs = (0..bus_states.len())
            .map(|i| crate::rng::substream(cfg.seed, "mobility-bus", &[i as u64]))
            .collect();
        let ped_rngs = (0..ped_states.len())
            .map(|i| crate::rng::substream(cfg.seed, "mobility-ped", &[i as u64]))
            .collect();

        let cells = scene.cell_ids();
        let ues = scene.ue_ids();
        let mts = scene.mt_ids();
        let mut mt_du = BTreeMap::new();
        let mut du_mt = BTreeMap::new();
        for bus in &scene.buses {
            if scene.with_miab {
                mt_du.insert(bus.mt_node, bus.du_node);
                du_mt.insert(bus.du_node, bus.mt_node);
            }
        }

        let flow = |&ue: &NodeId| FlowSpec {
            ue,
            class: ue_class(&scene, ue),
        };
        let dl_flows: Vec<FlowSpec> = ues.iter().map(flow).collect();
        let ul_flows = if cfg.uplink_flows {
            dl_flows.clone()
        } else {
            Vec::new()
        };
        let mcs_table = cfg.mcs_table.clone();
        let mcs_levels = mcs_table.len();

        Ok(Self {
            cfg,
            scene,
            channel,
            mcs_table,
            bus_states,
            ped_states,
            bus_rngs,
            ped_rngs,
            cells,
            ues,
            mts,
            mt_du,
            du_mt,
            serving: BTreeMap::new(),
            traffic: TrafficSource { dl_flows, ul_flows },
            queues: Queues::default(),
            olla: BTreeMap::new(),
            sinr_est: BTreeMap::new(),
            rr_cursor: BTreeMap::new(),
            slot: 0,
            next_packet_id: 0,
            ue_generated: BTreeMap::new(),
            ue_delivered: BTreeMap::new(),
            ue_active_slots: BTreeMap::new(),
            latencies_ms: [Vec::new(), Vec::new()],
            ue_latencies_ms: BTreeMap::new(),
            mcs_hist: [vec![0; mcs_levels], vec![0; mcs_levels]],
            transmissions: [0, 0],
            decode_errors: [0, 0],
            generated_bits: [0, 0],
            delivered_bits: [0, 0],
            ul_generated_bits: 0,
            ul_delivered_bits: 0,
            two_hop_delivered: 0,
            last_allocations: Vec::new(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn traffic(&self) -> &TrafficSource {
        &self.traffic
    }

    pub fn current_slot(&self) -> u64 {
        self.slot
    }

    pub fn last_allocations(&self) -> &[AllocationRecord] {
        &self.last_allocations
    }

    pub fn two_hop_delivered(&self) -> u64 {
        self.two_hop_delivered
    }

    pub fn dump_channel_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        self.channel.dump_csv(w, self.slot)
    }

    /// Positions and headings of everything that moves, for trajectory
    /// traces.
    pub fn trajectory_snapshot(&self) -> Vec<TrajectoryRow> {
        let mut rows = Vec::new();
        for bus in &self.scene.buses {
            rows.push(TrajectoryRow {
                entity: format!("bus_{}", bus.id),
                x: bus.pose.position.x,
                y: bus.pose.position.y,
                heading_deg: bus.pose.heading.azimuth().to_degrees(),
            });
        }
        for (i, &id) in self.scene.pedestrian_ids.iter().enumerate() {
            let p = self.scene.nodes[id].position;
            let st = &self.ped_states[i];
            let heading = self
                .scene
                .layout
                .walkways
                .heading(st.placement.from, st.placement.to);
            rows.push(TrajectoryRow {
                entity: format!("node_{id}"),
                x: p.x,
                y: p.y,
                heading_deg: heading.azimuth().to_degrees(),
            });
        }
        rows
    }

    /// Run the configured number of slots and produce the metrics.
    pub fn run(mut self) -> MetricsBundle {
        let total = self.cfg.total_slots();
        while self.slot < total {
            self.step();
        }
        self.into_metrics()
    }

    /// Execute one slot (all phases).
    pub fn step(&mut self) {
        let dt = SLOT_DURATION_MS / 1000.0;
        for i in 0..self.bus_states.len() {
            mobility::step_bus(&mut self.scene, i, &mut self.bus_states[i], dt, &mut self.bus_rngs[i])
                .expect("bus placements stay on the road graph");
        }
        for i in 0..self.ped_states.len() {
            mobility::step_pedestrian(
                &mut self.scene,
                i,
                &mut self.ped_states[i],
                dt,
                &mut self.ped_rngs[i],
            )
            .expect("pedestrian placements stay on the walkway graph");
        }

        if self.slot.is_multiple_of(self.cfg.channel_check_slots) {
            self.channel.refresh(&self.scene.nodes, &self.scene.buses, self.slot);
        }
        if self.slot.is_multiple_of(self.cfg.topology_period_slots) {
            self.refresh_topology();
        }
        if TrafficSource::emits_at(self.slot) {
            self.generate_traffic();
        }
        let allocations = self.build_allocations();
        self.transmit_and_decode(&allocations);

        // active time: any undelivered DL data keeps the UE active
        for &ue in &self.ues {
            let gen = self.ue_generated.get(&ue).copied().unwrap_or(0);
            let del = self.ue_delivered.get(&ue).copied().unwrap_or(0);
            if gen > del {
                *self.ue_active_slots.entry(ue).or_insert(0) += 1;
            }
        }
        self.slot += 1;
    }

    /// RSRP-based attachment for every UE and MT, with hysteresis; queues
    /// of re-attached UEs move to the new serving path.
    fn refresh_topology(&mut self) {
        let mut changed: Vec<NodeId> = Vec::new();
        let nodes = &self.scene.nodes;
        for &node in self.ues.iter().chain(self.mts.iter()) {
            let kind = nodes[node].kind;
            let mut candidates = Vec::with_capacity(self.cells.len());
            for &cell in &self.cells {
                if cell == node {
                    continue;
                }
                // a DU serves the onboard UEs of its own bus; everyone
                // else is a candidate for the fixed network only
                if nodes[cell].kind == NodeKind::MiabDu
                    && nodes[cell].attached_bus != nodes[node].attached_bus
                {
                    continue;
                }
                let link = self.channel.link(cell, node);
                let (elem_cell, elem_node) = self.channel.elem_gains(cell, node);
                let rsrp = radio::rsrp_dbm(
                    nodes[cell].tx_power_dbm,
                    elem_cell,
                    array_gain_db(&nodes[cell].antenna),
                    elem_node,
                    array_gain_db(&nodes[node].antenna),
                    link.propagation_loss_db(),
                );
                candidates.push((cell, nodes[cell].kind, rsrp));
            }
            let current = self.serving.get(&node).copied();
            let new = radio::attach(kind, current, &candidates, self.cfg.hysteresis_db);
            if new != current {
                match new {
                    Some(c) => {
                        self.serving.insert(node, c);
                    }
                    None => {
                        self.serving.remove(&node);
                    }
                }
                self.olla.remove(&(node, Direction::Dl));
                self.olla.remove(&(node, Direction::Ul));
                self.sinr_est.remove(&(node, Direction::Dl));
                self.sinr_est.remove(&(node, Direction::Ul));
                changed.push(node);
            }
        }
        for node in changed {
            if self.scene.nodes[node].kind.is_ue() {
                self.rehome_ue(node);
            }
        }
    }

    /// Move every queued packet of `ue` onto its current serving path.
    /// Packets restart their current hop (bits already sent on the old
    /// path are retransmitted).
    fn rehome_ue(&mut self, ue: NodeId) {
        let mut gathered = Vec::new();
        if let Some(mut q) = self.queues.dl_limbo.remove(&ue) {
            gathered.extend(q.drain_all());
        }
        let cells_with_queue: Vec<NodeId> = self
            .queues
            .access_dl
            .iter()
            .filter(|((_, u), q)| *u == ue && !q.is_empty())
            .map(|((c, _), _)| *c)
            .collect();
        for cell in cells_with_queue {
            if let Some(mut q) = self.queues.access_dl.remove(&(cell, ue)) {
                gathered.extend(q.drain_all());
            }
        }
        for q in self.queues.backhaul_dl.values_mut() {
            gathered.extend(q.drain_for_ue(ue));
        }
        gathered.sort_by_key(|p| (p.created_slot, p.id));
        for mut p in gathered {
            p.remaining_bits = p.size_bits;
            self.enqueue_dl(p);
        }

        let mut ul_gathered = Vec::new();
        if let Some(mut q) = self.queues.ul_limbo.remove(&ue) {
            ul_gathered.extend(q.drain_all());
        }
        let cells_with_queue: Vec<NodeId> = self
            .queues
            .access_ul
            .iter()
            .filter(|((_, u), q)| *u == ue && !q.is_empty())
            .map(|((c, _), _)| *c)
            .collect();
        for cell in cells_with_queue {
            if let Some(mut q) = self.queues.access_ul.remove(&(cell, ue)) {
                ul_gathered.extend(q.drain_all());
            }
        }
        ul_gathered.sort_by_key(|p| (p.created_slot, p.id));
        for mut p in ul_gathered {
            p.remaining_bits = p.size_bits;
            self.enqueue_ul(p);
        }
    }

    fn enqueue_dl(&mut self, p: PacketRecord) {
        let ue = p.ue;
        match self.serving.get(&ue).copied() {
            None => self.queues.dl_limbo.entry(ue).or_default().push(p),
            Some(cell) if self.scene.nodes[cell].kind == NodeKind::MiabDu => {
                let mt = self.du_mt[&cell];
                self.queues.backhaul_dl.entry(mt).or_default().push(p);
            }
            Some(cell) => self
                .queues
                .access_dl
                .entry((cell, ue))
                .or_default()
                .push(p),
        }
    }

    fn enqueue_ul(&mut self, p: PacketRecord) {
        let ue = p.ue;
        match self.serving.get(&ue).copied() {
            None => self.queues.ul_limbo.entry(ue).or_default().push(p),
            Some(cell) => self
                .queues
                .access_ul
                .entry((cell, ue))
                .or_default()
                .push(p),
        }
    }

    fn generate_traffic(&mut self) {
        let dl_flows = self.traffic.dl_flows.clone();
        for f in &dl_flows {
            let p = PacketRecord {
                id: self.next_packet_id,
                ue: f.ue,
                class: f.class,
                direction: Direction::Dl,
                size_bits: CBR_PACKET_BITS,
                remaining_bits: CBR_PACKET_BITS,
                created_slot: self.slot,
                backhaul_delivered_slot: None,
                hops: 0,
            };
            self.next_packet_id += 1;
            *self.ue_generated.entry(f.ue).or_insert(0) += CBR_PACKET_BITS;
            self.generated_bits[f.class.index()] += CBR_PACKET_BITS;
            self.enqueue_dl(p);
        }
        let ul_flows = self.traffic.ul_flows.clone();
        for f in &ul_flows {
            let p = PacketRecord {
                id: self.next_packet_id,
                ue: f.ue,
                class: f.class,
                direction: Direction::Ul,
                size_bits: CBR_PACKET_BITS,
                remaining_bits: CBR_PACKET_BITS,
                created_slot: self.slot,
                backhaul_delivered_slot: None,
                hops: 0,
            };
            self.next_packet_id += 1;
            self.ul_generated_bits += CBR_PACKET_BITS;
            self.enqueue_ul(p);
        }
    }

    /// Per-cell round-robin RB allocation under the active pattern rows.
    fn build_allocations(&mut self) -> Vec<Allocation> {
        let slot = self.slot;
        let access_dir = self.cfg.pattern.direction(LinkRole::DonorAccess, slot);
        let backhaul_dir = self.cfg.pattern.direction(LinkRole::Backhaul, slot);
        let miab_dir = self.cfg.pattern.direction(LinkRole::MiabAccess, slot);

        // Size each peer's RB need from its queue and the rate its
        // current link adaptation state would select, so weak links ask
        // for the wider allocations they actually require.
        let top_index = self.mcs_table.top_index();
        let table = &self.mcs_table;
        let olla = &self.olla;
        let est = &self.sinr_est;
        let need_rbs = |bits: u64, peer: NodeId, dir: Direction| {
            let key = (peer, dir);
            let mcs = match est.get(&key) {
                Some(e) => {
                    let offset = olla.get(&key).copied().unwrap_or_default();
                    radio::select_mcs(*e, &offset, table).index
                }
                None => top_index,
            };
            let rb_bits = radio::transport_block_bits(1, mcs, table).max(1);
            (bits.div_ceil(rb_bits)).max(1) as usize
        };

        let mut allocations = Vec::new();
        for &cell in &self.cells {
            let kind = self.scene.nodes[cell].kind;
            // peers backlogged in this slot's direction(s); an MT weighs
            // as the number of flows its backhaul queue carries, and no
            // peer takes more blocks than its queue can fill
            let mut peers: Vec<(NodeId, HopKind, usize, usize)> = Vec::new();
            let row_dir = if kind.is_fixed_gnb() { access_dir } else { miab_dir };
            if row_dir.counts_as_downlink() {
                for ((c, ue), q) in self.queues.access_dl.range((cell, 0)..=(cell, usize::MAX)) {
                    debug_assert_eq!(*c, cell);
                    if !q.is_empty() {
                        peers.push((*ue, HopKind::AccessDl, 1, need_rbs(q.bits(), *ue, Direction::Dl)));
                    }
                }
            } else if row_dir.is_uplink() {
                for ((c, ue), q) in self.queues.access_ul.range((cell, 0)..=(cell, usize::MAX)) {
                    debug_assert_eq!(*c, cell);
                    if !q.is_empty() {
                        peers.push((*ue, HopKind::AccessUl, 1, need_rbs(q.bits(), *ue, Direction::Ul)));
                    }
                }
            }
            if kind.is_fixed_gnb() && self.scene.with_miab {
                if backhaul_dir.counts_as_downlink() {
                    for (&mt, q) in &self.queues.backhaul_dl {
                        if !q.is_empty() && self.serving.get(&mt) == Some(&cell) {
                            peers.push((
                                mt,
                                HopKind::BackhaulDl,
                                q.distinct_ues().max(1),
                                need_rbs(q.bits(), mt, Direction::Dl),
                            ));
                        }
                    }
                } else if backhaul_dir.is_uplink() {
                    for (&mt, q) in &self.queues.backhaul_ul {
                        if !q.is_empty() && self.serving.get(&mt) == Some(&cell) {
                            peers.push((
                                mt,
                                HopKind::BackhaulUl,
                                q.distinct_ues().max(1),
                                need_rbs(q.bits(), mt, Direction::Ul),
                            ));
                        }
                    }
                }
            }
            if peers.is_empty() {
                continue;
            }
            peers.sort_by_key(|(peer, _, _, _)| *peer);

            let cursor = self.rr_cursor.entry(cell).or_insert(0);
            let start = *cursor % peers.len();
            *cursor = cursor.wrapping_add(1);
            peers.rotate_left(start);

            peers.truncate(NUM_RBS);
            let weights: Vec<usize> = peers.iter().map(|(_, _, w, _)| *w).collect();
            let needs: Vec<usize> = peers.iter().map(|(_, _, _, n)| *n).collect();
            let shares = capped_weighted_split(NUM_RBS, &weights, &needs);
            let mut granted: Vec<(NodeId, HopKind, usize)> = Vec::new();
            for ((peer, hop, _, _), share) in peers.into_iter().zip(shares) {
                if share > 0 {
                    granted.push((peer, hop, share));
                }
            }
            // Spread the chunks across the carrier instead of packing
            // them at the band edge, so co-channel overlap between cells
            // does not depend on fill order.
            let k = granted.len();
            let mut suffix: usize = granted.iter().map(|(_, _, s)| s).sum();
            let mut prev_end = 0;
            for (i, (peer, hop, share)) in granted.into_iter().enumerate() {
                let spread = i * NUM_RBS / k;
                let rb_start = spread.clamp(prev_end, NUM_RBS - suffix);
                let (tx, rx) = match hop {
                    HopKind::AccessDl | HopKind::BackhaulDl => (cell, peer),
                    HopKind::AccessUl | HopKind::BackhaulUl => (peer, cell),
                };
                allocations.push(Allocation {
                    cell,
                    peer,
                    tx,
                    rx,
                    rb_start,
                    rb_len: share,
                    hop,
                });
                prev_end = rb_start + share;
                suffix -= share;
            }
        }
        allocations
    }

    fn transmit_and_decode(&mut self, allocations: &[Allocation]) {
        struct Outcome {
            mcs: u8,
            decode_ok: bool,
            tb_bits: u64,
            sinr_db: f64,
            interference_mw: f64,
        }
        let nodes = &self.scene.nodes;
        let channel = &self.channel;
        let table = &self.mcs_table;
        let noise_per_re = noise_power_dbm(1);

        // DL spreads the cell's power over the whole carrier; UL
        // concentrates the node's power on its allocated subcarriers.
        let tx_psd: Vec<f64> = allocations
            .iter()
            .map(|a| match a.hop.direction() {
                Direction::Dl => radio::per_re_tx_power_dbm(nodes[a.tx].tx_power_dbm),
                Direction::Ul => {
                    let n_sc = (a.rb_len * SUBCARRIERS_PER_RB).max(1);
                    nodes[a.tx].tx_power_dbm - 10.0 * (n_sc as f64).log10()
                }
            })
            .collect();

        let mut outcomes = Vec::with_capacity(allocations.len());
        for (ai, a) in allocations.iter().enumerate() {
            let n_sc = a.rb_len * SUBCARRIERS_PER_RB;
            let link = channel.link(a.tx, a.rx);
            let (elem_tx, elem_rx) = channel.elem_gains(a.tx, a.rx);
            let signal_re = rx_power_per_re_dbm(
                tx_psd[ai],
                elem_tx,
                array_gain_db(&nodes[a.tx].antenna),
                elem_rx,
                array_gain_db(&nodes[a.rx].antenna),
                link.propagation_loss_db(),
            );
            let signal_dbm = signal_re + 10.0 * (n_sc as f64).log10();

            let mut interference_mw = 0.0;
            for (bi, b) in allocations.iter().enumerate() {
                if b.tx == a.tx {
                    continue;
                }
                debug_assert_ne!(b.tx, a.rx, "a node cannot transmit and receive in one slot");
                let lo = a.rb_start.max(b.rb_start);
                let hi = (a.rb_start + a.rb_len).min(b.rb_start + b.rb_len);
                if hi <= lo {
                    continue;
                }
                let overlap_sc = (hi - lo) * SUBCARRIERS_PER_RB;
                let ilink = channel.link(b.tx, a.rx);
                let (elem_i_tx, elem_i_rx) = channel.elem_gains(b.tx, a.rx);
                // interference arrives off-beam: element gains only at
                // the transmitter, and an array receiver steered at its
                // peer additionally rejects off-beam sources
                let rx_rejection = array_gain_db(&nodes[a.rx].antenna);
                let i_re = rx_power_per_re_dbm(
                    tx_psd[bi],
                    elem_i_tx,
                    0.0,
                    elem_i_rx,
                    -rx_rejection,
                    ilink.propagation_loss_db(),
                );
                interference_mw += radio::db_to_lin(i_re) * overlap_sc as f64;
            }
            let sample = sinr_sample(signal_dbm, interference_mw, n_sc);

            let key = (a.peer, a.hop.direction());
            let estimate = *self
                .sinr_est
                .entry(key)
                .or_insert_with(|| signal_re - noise_per_re);
            let olla = self.olla.entry(key).or_default();
            let decision = radio::select_mcs(estimate, olla, table);
            let tb_bits = radio::transport_block_bits(a.rb_len, decision.index, table);
            let decode_ok = sample.sinr_db >= table.min_sinr_db(decision.index);
            olla.update(decode_ok);
            self.sinr_est.insert(key, sample.sinr_db);

            outcomes.push(Outcome {
                mcs: decision.index,
                decode_ok,
                tb_bits,
                sinr_db: sample.sinr_db,
                interference_mw,
            });
        }

        // apply queue effects; forwarded packets become schedulable next slot
        let mut forwards_dl: Vec<(NodeId, PacketRecord)> = Vec::new();
        let mut forwards_ul: Vec<(NodeId, PacketRecord)> = Vec::new();
        self.last_allocations.clear();
        let slot = self.slot;
        for (a, o) in allocations.iter().zip(&outcomes) {
            let cat = a.hop.category();
            self.transmissions[cat.index()] += 1;
            if !o.decode_ok {
                self.decode_errors[cat.index()] += 1;
            }
            self.mcs_hist[cat.index()][o.mcs as usize] += 1;
            self.last_allocations.push(AllocationRecord {
                slot,
                cell: a.cell,
                peer: a.peer,
                tx: a.tx,
                rx: a.rx,
                rb_start: a.rb_start,
                rb_len: a.rb_len,
                direction: a.hop.direction(),
                category: cat,
                mcs: o.mcs,
                decode_ok: o.decode_ok,
                sinr_db: o.sinr_db,
                interference_mw: o.interference_mw,
            });
            if !o.decode_ok {
                continue;
            }
            match a.hop {
                HopKind::AccessDl => {
                    let q = self
                        .queues
                        .access_dl
                        .get_mut(&(a.cell, a.peer))
                        .expect("scheduled queue exists");
                    for p in q.dequeue(o.tb_bits) {
                        self.deliver_dl(p, slot);
                    }
                }
                HopKind::BackhaulDl => {
                    let q = self
                        .queues
                        .backhaul_dl
                        .get_mut(&a.peer)
                        .expect("scheduled queue exists");
                    let du = self.mt_du[&a.peer];
                    for mut p in q.dequeue(o.tb_bits) {
                        p.backhaul_delivered_slot = Some(slot);
                        p.hops += 1;
                        p.remaining_bits = p.size_bits;
                        forwards_dl.push((du, p));
                    }
                }
                HopKind::AccessUl => {
                    let q = self
                        .queues
                        .access_ul
                        .get_mut(&(a.cell, a.peer))
                        .expect("scheduled queue exists");
                    let completed = q.dequeue(o.tb_bits);
                    if self.scene.nodes[a.cell].kind == NodeKind::MiabDu {
                        let mt = self.du_mt[&a.cell];
                        for mut p in completed {
                            p.hops += 1;
                            p.remaining_bits = p.size_bits;
                            forwards_ul.push((mt, p));
                        }
                    } else {
                        for p in completed {
                            self.ul_delivered_bits += p.size_bits;
                        }
                    }
                }
                HopKind::BackhaulUl => {
                    let q = self
                        .queues
                        .backhaul_ul
                        .get_mut(&a.peer)
                        .expect("scheduled queue exists");
                    for p in q.dequeue(o.tb_bits) {
                        self.ul_delivered_bits += p.size_bits;
                    }
                }
            }
        }
        for (du, p) in forwards_dl {
            self.queues.access_dl.entry((du, p.ue)).or_default().push(p);
        }
        for (mt, p) in forwards_ul {
            self.queues.backhaul_ul.entry(mt).or_default().push(p);
        }
    }

    fn deliver_dl(&mut self, p: PacketRecord, slot: u64) {
        if let Some(bh) = p.backhaul_delivered_slot {
            debug_assert!(bh < slot, "backhaul hop must complete strictly earlier");
            self.two_hop_delivered += 1;
        }
        *self.ue_delivered.entry(p.ue).or_insert(0) += p.size_bits;
        self.delivered_bits[p.class.index()] += p.size_bits;
        let latency_ms = (slot - p.created_slot) as f64 * SLOT_DURATION_MS;
        self.latencies_ms[p.class.index()].push(latency_ms);
        self.ue_latencies_ms.entry(p.ue).or_default().push(latency_ms);
    }

    /// DL conservation audit: generated bits equal delivered bits plus
    /// the full sizes of packets still queued anywhere, per UE.
    pub fn audit_dl_conservation(&self) -> bool {
        let mut queued: BTreeMap<NodeId, u64> = BTreeMap::new();
        let tally = |queued: &mut BTreeMap<NodeId, u64>, q: &TxQueue| {
            for p in q.iter() {
                *queued.entry(p.ue).or_insert(0) += p.size_bits;
            }
        };
        for q in self.queues.dl_limbo.values() {
            tally(&mut queued, q);
        }
        for q in self.queues.access_dl.values() {
            tally(&mut queued, q);
        }
        for q in self.queues.backhaul_dl.values() {
            tally(&mut queued, q);
        }
        self.ues.iter().all(|ue| {
            let gen = self.ue_generated.get(ue).copied().unwrap_or(0);
            let del = self.ue_delivered.get(ue).copied().unwrap_or(0);
            let q = queued.get(ue).copied().unwrap_or(0);
            gen == del + q
        })
    }

    pub fn into_metrics(self) -> MetricsBundle {
        let per_ue = self
            .ues
            .iter()
            .map(|&ue| {
                let generated_bits = self.ue_generated.get(&ue).copied().unwrap_or(0);
                let delivered_bits = self.ue_delivered.get(&ue).copied().unwrap_or(0);
                let active_slots = self.ue_active_slots.get(&ue).copied().unwrap_or(0);
                let active_s = active_slots as f64 * SLOT_DURATION_MS / 1000.0;
                let throughput_bps = if active_s > 0.0 {
                    delivered_bits as f64 / active_s
                } else {
                    0.0
                };
                let p90_latency_ms = self.ue_latencies_ms.get(&ue).map(|lats| {
                    let mut sorted = lats.clone();
                    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    crate::metrics::quantile_sorted(&sorted, 0.9)
                });
                UeStats {
                    node_id: ue,
                    class: ue_class(&self.scene, ue),
                    generated_bits,
                    delivered_bits,
                    active_slots,
                    throughput_bps,
                    p90_latency_ms,
                }
            })
            .collect();
        MetricsBundle {
            config_hash: self.cfg.config_hash(),
            seed: self.cfg.seed,
            duration_slots: self.slot,
            per_ue,
            latencies_ms: self.latencies_ms,
            mcs_hist: self.mcs_hist,
            transmissions: self.transmissions,
            decode_errors: self.decode_errors,
            generated_bits: self.generated_bits,
            delivered_bits: self.delivered_bits,
            ul_generated_bits: self.ul_generated_bits,
            ul_delivered_bits: self.ul_delivered_bits,
        }
    }
}

fn ue_class(scene: &Scene, ue: NodeId) -> UeClass {
    match scene.nodes[ue].kind {
        NodeKind::PassengerUe => UeClass::Passenger,
        _ => UeClass::Pedestrian,
    }
}
