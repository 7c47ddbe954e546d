//! Synthetic appliance demand.
//!
//! Each appliance is a semi-Markov process: it sits in a state for an
//! exponentially distributed dwell time, then jumps according to a row of
//! its transition matrix. State 0 is the appliance's idle state. A [`House`]
//! adds the standing draw of its plug monitors and a vampire floor on top of
//! the appliances to form the mains signal.

mod config;
mod mains;
pub mod presets;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};

pub use config::{house_from_doc, house_to_doc, load_house_config};
pub use mains::{mains_waveform, VoltageModel};

/// Active power drawn by one plug monitor, watts.
pub const IAM_SELF_ACTIVE: f64 = 0.9;
/// Apparent power drawn by one plug monitor, volt-amperes.
pub const IAM_SELF_APPARENT: f64 = 2.4;
pub const DEFAULT_ON_POWER_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ApplianceState {
    pub name: String,
    pub active: f64,
    pub apparent: f64,
    /// Mean of the exponential dwell time, seconds.
    pub mean_dwell: f64,
}

impl ApplianceState {
    pub fn new(name: &str, active: f64, apparent: f64, mean_dwell: f64) -> Self {
        Self {
            name: name.to_string(),
            active,
            apparent,
            mean_dwell,
        }
    }

    /// Unity power factor.
    pub fn resistive(name: &str, watts: f64, mean_dwell: f64) -> Self {
        Self::new(name, watts, watts, mean_dwell)
    }

    pub fn reactive_power(&self) -> f64 {
        (self.apparent * self.apparent - self.active * self.active).max(0.0).sqrt()
    }
}

/// How an appliance's readings reach the logger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeterKind {
    /// Plug-in monitor, polled; reports active power.
    Iam,
    /// Clamp transmitter on a hard-wired circuit; reports apparent power.
    Clamp,
    Unmetered,
}

/// What happens at the plug monitor when the appliance goes idle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IamBehavior {
    AlwaysOn,
    /// The occupant uses the monitor's button to switch the appliance.
    ButtonOperated,
    /// The monitor is pulled from the wall along with the appliance.
    UnpluggedWhenOff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApplianceModel {
    pub name: String,
    pub states: Vec<ApplianceState>,
    /// Row-stochastic; `transitions[i][j]` is the chance of jumping from `i` to `j`.
    pub transitions: Vec<Vec<f64>>,
    pub on_power_threshold: f64,
    pub meter: MeterKind,
    pub iam_behavior: IamBehavior,
    pub room: Option<String>,
}

impl ApplianceModel {
    pub fn new(name: &str, states: Vec<ApplianceState>, transitions: Vec<Vec<f64>>) -> Result<Self> {
        let model = Self {
            name: name.to_string(),
            states,
            transitions,
            on_power_threshold: DEFAULT_ON_POWER_THRESHOLD,
            meter: MeterKind::Iam,
            iam_behavior: IamBehavior::AlwaysOn,
            room: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// States visited in order, wrapping from the last back to the first.
    pub fn cycle(name: &str, states: Vec<ApplianceState>) -> Result<Self> {
        let n = states.len();
        let transitions = (0..n)
            .map(|i| (0..n).map(|j| if j == (i + 1) % n { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(name, states, transitions)
    }

    /// Idle state 0 jumps to one of the others with the given weights; every
    /// other state returns to idle.
    pub fn star(name: &str, states: Vec<ApplianceState>, weights: &[f64]) -> Result<Self> {
        let n = states.len();
        if weights.len() + 1 != n {
            return Err(Error::invalid(format!("{name}: need one weight per non-idle state")));
        }
        let total: f64 = weights.iter().sum();
        let mut transitions = vec![vec![0.0; n]; n];
        for (j, w) in weights.iter().enumerate() {
            transitions[0][j + 1] = w / total;
            transitions[j + 1][0] = 1.0;
        }
        Self::new(name, states, transitions)
    }

    /// Always in one state.
    pub fn constant(name: &str, active: f64, apparent: f64) -> Result<Self> {
        Self::new(
            name,
            vec![ApplianceState::new("on", active, apparent, 86_400.0)],
            vec![vec![1.0]],
        )
    }

    pub fn with_meter(mut self, meter: MeterKind) -> Self {
        self.meter = meter;
        self
    }

    pub fn with_iam_behavior(mut self, behavior: IamBehavior) -> Self {
        self.iam_behavior = behavior;
        self
    }

    pub fn with_threshold(mut self, watts: f64) -> Self {
        self.on_power_threshold = watts;
        self
    }

    pub fn in_room(mut self, room: &str) -> Self {
        self.room = Some(room.to_string());
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(format!("appliance `{}`: {msg}", self.name)));
        if self.name.trim().is_empty() || self.name.contains('\n') {
            return Err(Error::invalid("appliance names must be non-empty single-line text"));
        }
        let n = self.states.len();
        if n == 0 {
            return bad("needs at least one state".into());
        }
        for s in &self.states {
            if !(s.active >= 0.0 && s.active.is_finite()) {
                return bad(format!("state `{}` has negative or non-finite power", s.name));
            }
            if !(s.apparent >= s.active && s.apparent.is_finite()) {
                return bad(format!("state `{}` has apparent power below active power", s.name));
            }
            if !(s.mean_dwell > 0.0 && s.mean_dwell.is_finite()) {
                return bad(format!("state `{}` needs a positive dwell time", s.name));
            }
        }
        if self.transitions.len() != n || self.transitions.iter().any(|r| r.len() != n) {
            return bad(format!("transition matrix must be {n}x{n}"));
        }
        for (i, row) in self.transitions.iter().enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) {
                return bad(format!("row {i} has a negative probability"));
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("row {i} does not sum to one"));
            }
        }
        if !(self.on_power_threshold > 0.0) {
            return bad("on_power_threshold must be positive".into());
        }
        Ok(())
    }

    /// Long-run fraction of time spent in each state.
    ///
    /// The embedded jump chain's stationary vector `nu` is weighted by mean
    /// dwell: `pi_i = nu_i m_i / sum_j nu_j m_j`. Assumes the chain is
    /// irreducible.
    pub fn stationary_fractions(&self) -> Vec<f64> {
        let n = self.states.len();
        // Solve nu (P - I) = 0 with sum(nu) = 1 by replacing the last equation.
        let mut a = vec![vec![0.0; n + 1]; n];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate().take(n) {
                *cell = self.transitions[j][i] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for cell in a[n - 1].iter_mut() {
            *cell = 1.0;
        }
        let nu = solve(a);
        let weighted: Vec<f64> = nu
            .iter()
            .zip(&self.states)
            .map(|(v, s)| v.max(0.0) * s.mean_dwell)
            .collect();
        let total: f64 = weighted.iter().sum();
        weighted.iter().map(|w| w / total).collect()
    }

    pub fn mean_active_power(&self) -> f64 {
        self.stationary_fractions()
            .iter()
            .zip(&self.states)
            .map(|(f, s)| f * s.active)
            .sum()
    }

    pub fn is_on(&self, state: usize) -> bool {
        self.states[state].active >= self.on_power_threshold
    }

    fn draw_dwell<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> f64 {
        Exp::new(1.0 / self.states[state].mean_dwell)
            .expect("validated dwell")
            .sample(rng)
    }

    fn draw_next<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let row = &self.transitions[state];
        let mut acc = 0.0;
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        row.iter().rposition(|&p| p > 0.0).unwrap_or(state)
    }

    fn draw_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let fractions = self.stationary_fractions();
        for (j, f) in fractions.iter().enumerate() {
            acc += f;
            if u < acc {
                return j;
            }
        }
        fractions.len() - 1
    }
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        if p.abs() < 1e-300 {
            continue;
        }
        for row in 0..n {
            if row != col {
                let factor = a[row][col] / p;
                if factor != 0.0 {
                    for k in col..=n {
                        a[row][k] -= factor * a[col][k];
                    }
                }
            }
        }
    }
    (0..n)
        .map(|i| if a[i][i].abs() < 1e-300 { 0.0 } else { a[i][n] / a[i][i] })
        .collect()
}

/// Instantaneous demand of a house.
#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    pub active: Vec<f64>,
    pub apparent: Vec<f64>,
    pub mains_active: f64,
    /// Reactive parts are assumed to share one sign, so mains apparent power
    /// is `hypot(sum P, sum Q)`.
    pub mains_apparent: f64,
}

/// One appliance changing state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub appliance: usize,
    pub time: f64,
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct House {
    pub appliances: Vec<ApplianceModel>,
    /// Plug monitors installed, whether or not an appliance model is attached.
    pub iam_count: u32,
    pub vampire_power: f64,
    pub vampire_apparent: f64,
    time: f64,
    runtime: Vec<Option<(usize, f64)>>,
}

impl House {
    pub fn new(appliances: Vec<ApplianceModel>, iam_count: u32, vampire_power: f64) -> Result<Self> {
        let house = Self {
            runtime: vec![None; appliances.len()],
            appliances,
            iam_count,
            vampire_power,
            vampire_apparent: vampire_power,
            time: 0.0,
        };
        house.validate()?;
        Ok(house)
    }

    pub fn with_vampire_apparent(mut self, va: f64) -> Result<Self> {
        self.vampire_apparent = va;
        self.validate()?;
        Ok(self)
    }

    /// One plug monitor per IAM-metered appliance and nothing else.
    pub fn iams_for_metered(appliances: Vec<ApplianceModel>, vampire_power: f64) -> Result<Self> {
        let n = appliances.iter().filter(|a| a.meter == MeterKind::Iam).count() as u32;
        Self::new(appliances, n, vampire_power)
    }

    pub fn validate(&self) -> Result<()> {
        for a in &self.appliances {
            a.validate()?;
        }
        let iam_metered = self.appliances.iter().filter(|a| a.meter == MeterKind::Iam).count();
        if (self.iam_count as usize) < iam_metered {
            return Err(Error::invalid(format!(
                "{iam_metered} appliances are IAM-metered but only {} IAMs are installed",
                self.iam_count
            )));
        }
        if !(self.vampire_power >= 0.0 && self.vampire_apparent >= self.vampire_power)
            || !self.vampire_apparent.is_finite()
        {
            return Err(Error::invalid("vampire power must satisfy 0 <= P <= S"));
        }
        let mut names: Vec<&str> = self.appliances.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("appliance name `{}` used twice", w[0])));
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Place every appliance in its idle state at time `t`.
    pub fn reset(&mut self, t: f64) {
        self.time = t;
        self.runtime.iter_mut().for_each(|r| *r = None);
    }

    /// Start every appliance from its stationary distribution at time `t`.
    /// Residual dwell is exponential, so the start is itself stationary.
    pub fn reset_stationary<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) {
        self.time = t;
        for (a, r) in self.appliances.iter().zip(self.runtime.iter_mut()) {
            let state = a.draw_stationary(rng);
            *r = Some((state, a.draw_dwell(state, rng)));
        }
    }

    pub fn state_of(&self, appliance: usize) -> usize {
        self.runtime[appliance].map_or(0, |(s, _)| s)
    }

    pub fn states(&self) -> Vec<usize> {
        (0..self.appliances.len()).map(|i| self.state_of(i)).collect()
    }

    /// Step every state machine forward by `dt` seconds. Returns the
    /// transitions that happened, ordered by time.
    pub fn advance<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) -> Result<Vec<Transition>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("advance needs a positive, finite time step"));
        }
        let mut changes = Vec::new();
        for (i, (a, r)) in self.appliances.iter().zip(self.runtime.iter_mut()).enumerate() {
            let (mut state, mut remaining) = r.unwrap_or_else(|| (0, a.draw_dwell(0, rng)));
            let mut elapsed = 0.0;
            while remaining <= dt - elapsed {
                elapsed += remaining;
                let next = a.draw_next(state, rng);
                if next != state {
                    changes.push(Transition {
                        appliance: i,
                        time: self.time + elapsed,
                        state: next,
                    });
                }
                state = next;
                remaining = a.draw_dwell(state, rng);
            }
            *r = Some((state, remaining - (dt - elapsed)));
        }
        self.time += dt;
        changes.sort_by(|x, y| x.time.total_cmp(&y.time).then(x.appliance.cmp(&y.appliance)));
        Ok(changes)
    }

    pub fn demand_for(&self, states: &[usize]) -> Demand {
        let mut d = Demand {
            active: Vec::with_capacity(states.len()),
            apparent: Vec::with_capacity(states.len()),
            mains_active: 0.0,
            mains_apparent: 0.0,
        };
        let iams = self.iam_count as f64;
        let mut reactive = iams * (IAM_SELF_APPARENT.powi(2) - IAM_SELF_ACTIVE.powi(2)).sqrt()
            + (self.vampire_apparent.powi(2) - self.vampire_power.powi(2)).max(0.0).sqrt();
        let mut active = 0.0;
        for (a, &s) in self.appliances.iter().zip(states) {
            let st = &a.states[s];
            d.active.push(st.active);
            d.apparent.push(st.apparent);
            active += st.active;
            reactive += st.reactive_power();
        }
        d.mains_active = active + iams * IAM_SELF_ACTIVE + self.vampire_power;
        d.mains_apparent = d.mains_active.hypot(reactive);
        d
    }

    pub fn demand(&self) -> Demand {
        self.demand_for(&self.states())
    }

    /// Run from a stationary start at `start` for `duration` seconds.
    pub fn simulate<R: Rng + ?Sized>(&self, start: f64, duration: f64, rng: &mut R) -> Result<HouseTrace> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::invalid("simulation duration must be positive"));
        }
        let mut house = self.clone();
        house.reset_stationary(start, rng);
        let mut timelines: Vec<Vec<(f64, usize)>> =
            house.states().into_iter().map(|s| vec![(start, s)]).collect();
        // Stepping in blocks bounds the size of each transition batch.
        const BLOCK: f64 = 3600.0;
        let mut t = 0.0;
        while t < duration {
            let dt = BLOCK.min(duration - t);
            for tr in house.advance(dt, rng)? {
                timelines[tr.appliance].push((tr.time, tr.state));
            }
            t += dt;
        }
        for line in &mut timelines {
            line.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        Ok(HouseTrace {
            house: self.clone(),
            start,
            end: start + duration,
            timelines,
        })
    }
}

/// Exact state history of a simulated house.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseTrace {
    pub house: House,
    pub start: f64,
    pub end: f64,
    /// Per appliance, `(time, state)` change points; the first is at `start`.
    pub timelines: Vec<Vec<(f64, usize)>>,
}

/// A span of constant state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub state: usize,
}

impl HouseTrace {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn state_at(&self, appliance: usize, t: f64) -> usize {
        let line = &self.timelines[appliance];
        let k = line.partition_point(|&(ct, _)| ct <= t);
        line[k.saturating_sub(1)].1
    }

    pub fn states_at(&self, t: f64) -> Vec<usize> {
        (0..self.timelines.len()).map(|i| self.state_at(i, t)).collect()
    }

    pub fn sample_demand(&self, t: f64) -> Demand {
        self.house.demand_for(&self.states_at(t))
    }

    pub fn segments(&self, appliance: usize) -> impl Iterator<Item = Segment> + '_ {
        let line = &self.timelines[appliance];
        line.iter().enumerate().map(move |(k, &(t, state))| Segment {
            start: t,
            end: line.get(k + 1).map_or(self.end, |n| n.0),
            state,
        })
    }

    /// Active energy of one appliance over the trace, joules.
    pub fn energy(&self, appliance: usize) -> f64 {
        let a = &self.house.appliances[appliance];
        self.segments(appliance)
            .map(|s| a.states[s.state].active * (s.end - s.start))
            .sum()
    }

    /// Mean active power of one appliance over `[t0, t1)`.
    pub fn mean_active(&self, appliance: usize, t0: f64, t1: f64) -> f64 {
        let a = &self.house.appliances[appliance];
        let mut acc = 0.0;
        for s in self.segments(appliance) {
            let lo = s.start.max(t0);
            let hi = s.end.min(t1);
            if hi > lo {
                acc += a.states[s.state].active * (hi - lo);
            }
        }
        acc / (t1 - t0)
    }

    /// Mean mains active and apparent power over `[t0, t1)`.
    pub fn mean_mains(&self, t0: f64, t1: f64) -> (f64, f64) {
        let mut cuts: Vec<f64> = vec![t0, t1];
        for line in &self.timelines {
            let k0 = line.partition_point(|&(t, _)| t <= t0);
            cuts.extend(line[k0..].iter().map(|&(t, _)| t).take_while(|&t| t < t1));
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let (mut p, mut s) = (0.0, 0.0);
        for w in cuts.windows(2) {
            let d = self.sample_demand(w[0]);
            p += d.mains_active * (w[1] - w[0]);
            s += d.mains_apparent * (w[1] - w[0]);
        }
        (p / (t1 - t0), s / (t1 - t0))
    }

    /// Fraction of the trace each state of one appliance occupies.
    pub fn occupancy(&self, appliance: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.house.appliances[appliance].states.len()];
        for s in self.segments(appliance) {
            out[s.state] += s.end - s.start;
        }
        let total = self.duration();
        out.iter_mut().for_each(|x| *x /= total);
        out
    }
}

#[cfg(test)]
mod tests;
