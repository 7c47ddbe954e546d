//! Radio network simulation.
//!
//! A base station polls plug monitors (IAMs) one after another every few
//! seconds; each replies within a fixed deadline. Clamp transmitters (CC-TX)
//! broadcast on their own slightly different periods without listening
//! first. All nodes share one channel: packets that overlap in the air are
//! lost. The base station learns each transmitter's period and keeps quiet
//! around its predicted arrivals.
//!
//! Time is kept in integer microseconds and events are processed in order
//! from a priority queue, so runs are exactly reproducible.

mod codec;
mod logger;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use codec::{
    cctx_frame, checksum, decode_cctx, decode_iam, encode_cctx, encode_iam, flip_bit,
    manchester_decode_bits, manchester_encode_bits, parse_cctx, parse_poll, parse_reply,
    poll_frame, reply_frame, IntegrityError,
};
pub use logger::{
    derive_button_events, filter_reading, IamObservation, SourceKind, SwitchTracker, IAM_MAX_WATTS,
    POWER_LOSS_BUTTON_WINDOW, WHOLE_HOUSE_MAX_WATTS,
};

const US: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Independent per-bit corruption probability.
    pub bit_flip_probability: f64,
    pub air_time: f64,
    /// Gap between the end of a poll and the start of the reply.
    pub iam_turnaround: f64,
    pub iam_reply_deadline: f64,
    /// Spacing between consecutive polls within a cycle.
    pub poll_slot: f64,
    pub poll_cycle: f64,
    /// Readings are up to this many seconds old when sent.
    pub max_staleness: f64,
    /// Quiet time before a predicted CC-TX arrival. Zero together with
    /// `guard_after` disables avoidance.
    pub guard_window: f64,
    pub guard_after: f64,
    pub cctx_period_mean: f64,
    pub cctx_period_spread: f64,
    pub period_learning_rate: f64,
    /// Unix seconds.
    pub start: f64,
    pub duration: f64,
    pub seed: u64,
    pub record_log: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            bit_flip_probability: 2e-6,
            air_time: 0.005,
            iam_turnaround: 0.005,
            iam_reply_deadline: 0.020,
            poll_slot: 0.025,
            poll_cycle: 6.0,
            max_staleness: 4.0,
            guard_window: 0.150,
            guard_after: 0.050,
            cctx_period_mean: 6.0,
            cctx_period_spread: 0.3,
            period_learning_rate: 0.2,
            start: 0.0,
            duration: 3600.0,
            seed: 0,
            record_log: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::invalid(msg.to_string())) };
        check(
            (0.0..=1.0).contains(&self.bit_flip_probability),
            "bit_flip_probability must lie in [0, 1]",
        )?;
        check(self.air_time > 0.0, "air_time must be positive")?;
        check(self.iam_turnaround >= 0.0, "iam_turnaround must be non-negative")?;
        check(
            self.iam_turnaround + self.air_time <= self.iam_reply_deadline,
            "IAM replies would miss their deadline",
        )?;
        check(
            self.poll_slot >= 2.0 * self.air_time + self.iam_turnaround,
            "poll_slot is too short for a poll and its reply",
        )?;
        check(self.poll_cycle > 0.0, "poll_cycle must be positive")?;
        check(self.max_staleness >= 0.0, "max_staleness must be non-negative")?;
        check(
            self.guard_window >= 0.0 && self.guard_after >= 0.0,
            "guard window must be non-negative",
        )?;
        check(
            self.cctx_period_spread >= 0.0 && self.cctx_period_spread < self.cctx_period_mean,
            "CC-TX period spread must be below the mean",
        )?;
        check(
            self.period_learning_rate > 0.0 && self.period_learning_rate <= 1.0,
            "period_learning_rate must lie in (0, 1]",
        )?;
        check(self.duration > 0.0 && self.duration.is_finite(), "duration must be positive")?;
        check(self.start.is_finite(), "start must be finite")?;
        Ok(())
    }

    pub fn without_guard(mut self) -> Self {
        self.guard_window = 0.0;
        self.guard_after = 0.0;
        self
    }

    fn guard_enabled(&self) -> bool {
        self.guard_window > 0.0 || self.guard_after > 0.0
    }
}

/// What a plug monitor would report at an instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IamState {
    pub powered: bool,
    pub switch_on: bool,
    pub watts: f64,
}

/// Supplies node readings to the simulation.
pub trait DemandSource {
    fn iam_state(&mut self, iam: usize, t: f64) -> IamState;
    /// Apparent power seen by a clamp transmitter.
    fn cctx_reading(&mut self, cctx: usize, t: f64) -> f64;
}

/// Every node reports the same value forever.
#[derive(Debug, Clone, Copy)]
pub struct ConstantSource(pub f64);

impl DemandSource for ConstantSource {
    fn iam_state(&mut self, _: usize, _: f64) -> IamState {
        IamState {
            powered: true,
            switch_on: true,
            watts: self.0,
        }
    }

    fn cctx_reading(&mut self, _: usize, _: f64) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum NodeRef {
    Iam(usize),
    Cctx(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Collision,
    /// Failed checksum, or a valid checksum on a frame for the wrong monitor.
    Checksum,
    /// Invalid line code, or a transmitter id the base station does not know.
    Manchester,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    Reading { t_us: i64, node: NodeRef, value: u32 },
    Rejected { t_us: i64, node: NodeRef, value: u32 },
    Loss { t_us: i64, node: NodeRef, cause: LossKind },
    PollDeferred { t_us: i64, iam: usize, until_us: i64 },
}

/// Counters for one node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeStats {
    /// Readings the node attempted to deliver while powered.
    pub expected: u64,
    pub received: u64,
    pub rejected: u64,
    pub collisions: u64,
    pub checksum: u64,
    pub manchester: u64,
}

impl NodeStats {
    pub fn lost(&self) -> u64 {
        self.collisions + self.checksum + self.manchester
    }

    fn add(&mut self, o: &NodeStats) {
        self.expected += o.expected;
        self.received += o.received;
        self.rejected += o.rejected;
        self.collisions += o.collisions;
        self.checksum += o.checksum;
        self.manchester += o.manchester;
    }

    pub fn dropout(&self) -> f64 {
        if self.expected == 0 {
            0.0
        } else {
            self.lost() as f64 / self.expected as f64
        }
    }

    fn count(&mut self, cause: LossKind) {
        match cause {
            LossKind::Collision => self.collisions += 1,
            LossKind::Checksum => self.checksum += 1,
            LossKind::Manchester => self.manchester += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcTxNode {
    pub id: u16,
    /// Seconds between broadcasts.
    pub period: f64,
    pub first_tx: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub iam_ids: Vec<u32>,
    pub cctx: Vec<CcTxNode>,
    /// Per IAM, `(reception time in microseconds, watts)`.
    pub iam_readings: Vec<Vec<(i64, u32)>>,
    /// Per CC-TX, `(reception time in microseconds, volt-amperes)`.
    pub cctx_readings: Vec<Vec<(i64, u32)>>,
    pub iam_stats: Vec<NodeStats>,
    pub cctx_stats: Vec<NodeStats>,
    /// Empty unless [`SimConfig::record_log`] is set.
    pub log: Vec<SimEvent>,
}

impl SimResult {
    pub fn iam_totals(&self) -> NodeStats {
        let mut t = NodeStats::default();
        self.iam_stats.iter().for_each(|s| t.add(s));
        t
    }

    pub fn cctx_totals(&self) -> NodeStats {
        let mut t = NodeStats::default();
        self.cctx_stats.iter().for_each(|s| t.add(s));
        t
    }

    pub fn collisions(&self) -> u64 {
        self.iam_totals().collisions + self.cctx_totals().collisions
    }
}

/// One line of JSON per event.
pub fn write_event_log<W: Write>(events: &[SimEvent], mut out: W) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TxKind {
    Poll(usize),
    Reply(usize),
    Cctx(usize),
}

#[derive(Debug, Clone, Copy)]
struct Tx {
    kind: TxKind,
    frame: [u8; 8],
    len: usize,
    collided: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ev {
    TxEnd(usize),
    Reply { iam: usize, watts: u16, switch_on: bool },
    Cctx(usize),
    Poll(usize),
    CycleStart,
}

impl Ev {
    /// Ends before starts at the same instant, so touching packets do not collide.
    fn rank(&self) -> u8 {
        match self {
            Ev::TxEnd(_) => 0,
            Ev::Reply { .. } | Ev::Cctx(_) => 1,
            Ev::Poll(_) | Ev::CycleStart => 2,
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
struct Scheduled {
    t: i64,
    rank: u8,
    seq: u64,
    ev: Ev,
}

impl Ord for Scheduled {
    fn cmp(&self, o: &Self) -> Ordering {
        (o.t, o.rank, o.seq).cmp(&(self.t, self.rank, self.seq))
    }
}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Period estimate for one transmitter, from successful receptions only.
#[derive(Debug, Clone, Copy)]
struct Learner {
    last_rx: Option<i64>,
    period: f64,
}

/// Separate generators so that, for example, enabling the guard window
/// cannot change when transmitters fire.
struct Streams {
    topology: ChaCha8Rng,
    corruption: ChaCha8Rng,
    staleness: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        Self {
            topology: stream(1),
            corruption: stream(2),
            staleness: stream(3),
        }
    }
}

struct Sim<'a, S: DemandSource> {
    cfg: &'a SimConfig,
    source: &'a mut S,
    rng: Streams,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    txs: Vec<Tx>,
    free: Vec<usize>,
    in_air: Vec<usize>,
    iam_ids: Vec<u32>,
    cctx: Vec<CcTxNode>,
    cctx_by_id: HashMap<u16, usize>,
    learners: Vec<Learner>,
    cycle_start: i64,
    end: i64,
    air: i64,
    result: SimResult,
}

fn to_us(seconds: f64) -> i64 {
    (seconds * US).round() as i64
}

impl<S: DemandSource> Sim<'_, S> {
    fn push(&mut self, t: i64, ev: Ev) {
        self.seq += 1;
        self.queue.push(Scheduled {
            t,
            rank: ev.rank(),
            seq: self.seq,
            ev,
        });
    }

    fn log(&mut self, e: SimEvent) {
        if self.cfg.record_log {
            self.result.log.push(e);
        }
    }

    fn transmit(&mut self, now: i64, kind: TxKind, frame: &[u8]) {
        let mut buf = [0u8; 8];
        buf[..frame.len()].copy_from_slice(frame);
        let tx = Tx {
            kind,
            frame: buf,
            len: frame.len(),
            collided: !self.in_air.is_empty(),
        };
        for &other in &self.in_air {
            self.txs[other].collided = true;
        }
        let idx = match self.free.pop() {
            Some(i) => {
                self.txs[i] = tx;
                i
            }
            None => {
                self.txs.push(tx);
                self.txs.len() - 1
            }
        };
        self.in_air.push(idx);
        self.push(now + self.air, Ev::TxEnd(idx));
    }

    fn corrupt(&mut self, frame: &mut [u8]) {
        let p = self.cfg.bit_flip_probability;
        if p == 0.0 {
            return;
        }
        let bits = frame.len() * 8;
        let flips = Binomial::new(bits as u64, p).expect("validated").sample(&mut self.rng.corruption) as usize;
        if flips > 0 {
            for i in sample(&mut self.rng.corruption, bits, flips) {
                flip_bit(frame, i);
            }
        }
    }

    fn seconds(&self, t: i64) -> f64 {
        t as f64 / US
    }

    /// Earliest time at or after `t` when a poll and its reply fit outside
    /// every predicted CC-TX window.
    fn clear_time(&self, mut t: i64) -> i64 {
        if !self.cfg.guard_enabled() {
            return t;
        }
        let before = to_us(self.cfg.guard_window);
        let after = to_us(self.cfg.guard_after);
        let busy = 2 * self.air + to_us(self.cfg.iam_turnaround);
        for _ in 0..64 {
            let mut moved = false;
            for l in &self.learners {
                let Some(last) = l.last_rx else { continue };
                let period = l.period * US;
                // First predicted arrival whose window has not closed by `t`.
                let k = (((t - after - last) as f64) / period).ceil().max(1.0);
                let arrival = last + (k * period).round() as i64;
                if t < arrival + after && t + busy > arrival - before {
                    t = arrival + after;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        t
    }

    fn learn(&mut self, node: usize, arrival: i64) {
        let alpha = self.cfg.period_learning_rate;
        let l = &mut self.learners[node];
        if let Some(last) = l.last_rx {
            let gap = (arrival - last) as f64 / US;
            let k = (gap / l.period).round().max(1.0);
            if k <= 4.0 {
                l.period += alpha * (gap / k - l.period);
            }
        }
        l.last_rx = Some(arrival);
    }

    fn handle(&mut self, now: i64, ev: Ev) {
        match ev {
            Ev::CycleStart => {
                self.cycle_start = now;
                if !self.iam_ids.is_empty() {
                    self.push(now, Ev::Poll(0));
                }
            }
            Ev::Poll(i) => {
                let t = self.clear_time(now);
                if t > now {
                    self.log(SimEvent::PollDeferred {
                        t_us: now,
                        iam: i,
                        until_us: t,
                    });
                    self.push(t, Ev::Poll(i));
                    return;
                }
                let frame = poll_frame(self.iam_ids[i], 0);
                self.transmit(now, TxKind::Poll(i), &frame);
                let next = now + to_us(self.cfg.poll_slot);
                if i + 1 < self.iam_ids.len() {
                    self.push(next, Ev::Poll(i + 1));
                } else {
                    let due = self.cycle_start + to_us(self.cfg.poll_cycle);
                    self.push(due.max(next), Ev::CycleStart);
                }
            }
            Ev::Reply { iam, watts, switch_on } => {
                let frame = reply_frame(self.iam_ids[iam], watts, switch_on);
                self.transmit(now, TxKind::Reply(iam), &frame);
            }
            Ev::Cctx(j) => {
                let va = self.source.cctx_reading(j, self.seconds(now));
                let frame = cctx_frame(self.cctx[j].id, va.round().clamp(0.0, u16::MAX as f64) as u16);
                self.transmit(now, TxKind::Cctx(j), &frame);
                self.result.cctx_stats[j].expected += 1;
                let next = to_us(self.cfg.start + self.cctx[j].first_tx)
                    + to_us(self.cctx[j].period * self.result.cctx_stats[j].expected as f64);
                self.push(next, Ev::Cctx(j));
            }
            Ev::TxEnd(idx) => {
                self.in_air.retain(|&k| k != idx);
                self.free.push(idx);
                let tx = self.txs[idx];
                self.finish(now, tx);
            }
        }
    }

    fn finish(&mut self, now: i64, tx: Tx) {
        let mut frame = tx.frame;
        let frame = &mut frame[..tx.len];
        match tx.kind {
            TxKind::Poll(i) => {
                let state = self.source.iam_state(i, self.seconds(now));
                if !state.powered {
                    return;
                }
                self.result.iam_stats[i].expected += 1;
                if tx.collided {
                    return self.lose(now, NodeRef::Iam(i), LossKind::Collision);
                }
                self.corrupt(frame);
                match parse_poll(frame) {
                    Ok((id, _)) if id == self.iam_ids[i] => {}
                    _ => return self.lose(now, NodeRef::Iam(i), LossKind::Checksum),
                }
                let age = self.rng.staleness.random_range(0.0..=self.cfg.max_staleness);
                let sampled = self.source.iam_state(i, self.seconds(now) - age);
                let watts = if state.switch_on { sampled.watts } else { 0.0 };
                self.push(
                    now + to_us(self.cfg.iam_turnaround),
                    Ev::Reply {
                        iam: i,
                        watts: watts.round().clamp(0.0, u16::MAX as f64) as u16,
                        switch_on: state.switch_on,
                    },
                );
            }
            TxKind::Reply(i) => {
                if tx.collided {
                    return self.lose(now, NodeRef::Iam(i), LossKind::Collision);
                }
                self.corrupt(frame);
                match parse_reply(frame) {
                    Ok((id, watts, _)) if id == self.iam_ids[i] => self.accept(now, NodeRef::Iam(i), watts as u32),
                    _ => self.lose(now, NodeRef::Iam(i), LossKind::Checksum),
                }
            }
            TxKind::Cctx(j) => {
                if tx.collided {
                    return self.lose(now, NodeRef::Cctx(j), LossKind::Collision);
                }
                self.corrupt(frame);
                let decoded = parse_cctx(frame)
                    .ok()
                    .and_then(|(id, va)| self.cctx_by_id.get(&id).map(|&k| (k, va)));
                match decoded {
                    Some((k, va)) => {
                        if k == j {
                            self.learn(j, now - self.air);
                        }
                        self.accept(now, NodeRef::Cctx(k), va as u32);
                    }
                    None => self.lose(now, NodeRef::Cctx(j), LossKind::Manchester),
                }
            }
        }
    }

    fn lose(&mut self, now: i64, node: NodeRef, cause: LossKind) {
        match node {
            NodeRef::Iam(i) => self.result.iam_stats[i].count(cause),
            NodeRef::Cctx(j) => self.result.cctx_stats[j].count(cause),
        }
        self.log(SimEvent::Loss { t_us: now, node, cause });
    }

    fn accept(&mut self, now: i64, node: NodeRef, value: u32) {
        let (kind, stats, readings) = match node {
            NodeRef::Iam(i) => (SourceKind::Iam, &mut self.result.iam_stats[i], &mut self.result.iam_readings[i]),
            NodeRef::Cctx(j) => (
                SourceKind::WholeHouse,
                &mut self.result.cctx_stats[j],
                &mut self.result.cctx_readings[j],
            ),
        };
        if filter_reading(kind, value) {
            stats.received += 1;
            readings.push((now, value));
            self.log(SimEvent::Reading { t_us: now, node, value });
        } else {
            stats.rejected += 1;
            self.log(SimEvent::Rejected { t_us: now, node, value });
        }
    }
}

/// Simulate `n_iams` polled monitors and `n_cctx` free-running transmitters.
pub fn run_simulation<S: DemandSource>(cfg: &SimConfig, n_iams: usize, n_cctx: usize, source: &mut S) -> Result<SimResult> {
    cfg.validate()?;
    if n_iams + n_cctx == 0 {
        return Err(Error::invalid("simulation needs at least one node"));
    }
    if n_cctx > u16::MAX as usize {
        return Err(Error::invalid("too many CC-TX nodes for 16-bit ids"));
    }
    let mut rng = Streams::new(cfg.seed);

    let mut cctx = Vec::with_capacity(n_cctx);
    let mut cctx_by_id = HashMap::new();
    while cctx.len() < n_cctx {
        let id: u16 = rng.topology.random();
        let period = cfg.cctx_period_mean
            + cfg.cctx_period_spread * rng.topology.random_range(-1.0..=1.0);
        let first_tx = rng.topology.random_range(0.0..period);
        if cctx_by_id.insert(id, cctx.len()).is_none() {
            cctx.push(CcTxNode { id, period, first_tx });
        }
    }
    let mut iam_ids: Vec<u32> = Vec::with_capacity(n_iams);
    while iam_ids.len() < n_iams {
        let id: u32 = rng.topology.random();
        if !iam_ids.contains(&id) {
            iam_ids.push(id);
        }
    }

    let start = to_us(cfg.start);
    let mut sim = Sim {
        cfg,
        source,
        rng,
        queue: BinaryHeap::new(),
        seq: 0,
        txs: Vec::new(),
        free: Vec::new(),
        in_air: Vec::new(),
        learners: vec![
            Learner {
                last_rx: None,
                period: cfg.cctx_period_mean,
            };
            n_cctx
        ],
        cycle_start: start,
        end: start + to_us(cfg.duration),
        air: to_us(cfg.air_time),
        result: SimResult {
            iam_ids: iam_ids.clone(),
            cctx: cctx.clone(),
            iam_readings: vec![Vec::new(); n_iams],
            cctx_readings: vec![Vec::new(); n_cctx],
            iam_stats: vec![NodeStats::default(); n_iams],
            cctx_stats: vec![NodeStats::default(); n_cctx],
            log: Vec::new(),
        },
        iam_ids,
        cctx,
        cctx_by_id,
    };
    for j in 0..n_cctx {
        let t = start + to_us(sim.cctx[j].first_tx);
        sim.push(t, Ev::Cctx(j));
    }
    if n_iams > 0 {
        sim.push(start, Ev::CycleStart);
    }
    while let Some(s) = sim.queue.pop() {
        // Transmissions under way at the horizon still complete.
        if s.t >= sim.end && !matches!(s.ev, Ev::TxEnd(_) | Ev::Reply { .. }) {
            continue;
        }
        sim.handle(s.t, s.ev);
    }
    Ok(sim.result)
}

#[cfg(test)]
mod tests;
