//! Spatial population, observed event times and compartment membership.
//!
//! Time is discrete: an event recorded at time `t` happened somewhere in the
//! continuous interval `[t, t + 1)`, so every membership test below is an
//! integer comparison.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// Discrete time point.
pub type Time = u32;

/// Individuals located in the plane with a cached Euclidean distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Population<F> {
    coords: Vec<(F, F)>,
    distances: Vec<F>,
}

impl<F: Real> Population<F> {
    /// Builds the population and its full pairwise distance matrix.
    /// Individual `i` is the `i`-th coordinate pair.
    pub fn new(coords: Vec<(F, F)>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::input("a population needs at least 2 individuals"));
        }
        if let Some(i) = coords.iter().position(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::input(format!("individual {i} has a non-finite coordinate")));
        }
        let n = coords.len();
        let mut distances = vec![F::zero(); n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (dx, dy) = (coords[i].0 - coords[j].0, coords[i].1 - coords[j].1);
                let d = dx.hypot(dy);
                distances[i * n + j] = d;
                distances[j * n + i] = d;
            }
        }
        Ok(Population { coords, distances })
    }

    /// `n` individuals with coordinates drawn independently from `U[0, side]`.
    pub fn uniform_square<R: Rng + ?Sized>(n: usize, side: F, rng: &mut R) -> Result<Self> {
        let side_f = side.to_f64_lossy();
        if !(side_f > 0.0) {
            return Err(Error::input("side length must be positive"));
        }
        let coords = (0..n)
            .map(|_| {
                let x: f64 = rng.random::<f64>() * side_f;
                let y: f64 = rng.random::<f64>() * side_f;
                (F::of(x), F::of(y))
            })
            .collect();
        Self::new(coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[(F, F)] {
        &self.coords
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> F {
        self.distances[i * self.coords.len() + j]
    }

    /// Distances from `i` to every individual.
    pub fn row(&self, i: usize) -> &[F] {
        let n = self.coords.len();
        &self.distances[i * n..(i + 1) * n]
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> F {
        self.distances.iter().copied().fold(F::zero(), F::max)
    }

    /// Pairs `(i, j)`, `i < j`, sitting at the same location.
    pub fn coincident_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.distance(i, j) == F::zero() {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Compartmental framework.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Framework {
    SI,
    SIR,
    SEIR,
}

impl Framework {
    pub fn has_exposed(self) -> bool {
        matches!(self, Framework::SEIR)
    }

    pub fn has_removed(self) -> bool {
        !matches!(self, Framework::SI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Compartment {
    Susceptible,
    Exposed,
    Infectious,
    Removed,
}

/// Event times of one individual. `None` means the event never happened
/// within the observation horizon.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventRecord {
    pub exposed: Option<Time>,
    pub infectious: Option<Time>,
    pub removed: Option<Time>,
}

/// Observed epidemic: per-individual event times over `[start, horizon]`.
///
/// `start` is zero unless the history was cut with
/// [`EventHistory::temporal_subset`]; states reached before `start` are
/// conditioned on rather than modelled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventHistory {
    framework: Framework,
    records: Vec<EventRecord>,
    start: Time,
    horizon: Time,
}

impl EventHistory {
    pub fn new(framework: Framework, records: Vec<EventRecord>, horizon: Time) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::input("horizon must be at least 1"));
        }
        for (i, r) in records.iter().enumerate() {
            let times = [r.exposed, r.infectious, r.removed];
            if times.iter().flatten().any(|&t| t > horizon) {
                return Err(Error::input(format!(
                    "individual {i} has an event after the horizon {horizon}"
                )));
            }
            let ordered = match (r.exposed, r.infectious, r.removed) {
                (Some(e), Some(i), _) if e > i => false,
                (_, Some(i), Some(r)) if i > r => false,
                (Some(e), None, Some(r)) if e > r => false,
                _ => true,
            };
            if !ordered {
                return Err(Error::input(format!(
                    "individual {i} has event times out of order: {r:?}"
                )));
            }
            if framework.has_exposed() && r.exposed.is_some() && r.infectious.is_none() && r.removed.is_some()
            {
                return Err(Error::input(format!(
                    "individual {i} is removed without ever becoming infectious"
                )));
            }
        }
        Ok(EventHistory { framework, records, start: 0, horizon })
    }

    /// A history in which nobody is ever infected.
    pub fn all_susceptible(framework: Framework, n: usize, horizon: Time) -> Result<Self> {
        Self::new(framework, vec![EventRecord::default(); n], horizon)
    }

    pub fn framework(&self) -> Framework {
        self.framework
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn horizon(&self) -> Time {
        self.horizon
    }

    pub fn start(&self) -> Time {
        self.start
    }

    /// The modelled window `(start, horizon)`.
    pub fn window(&self) -> (Time, Time) {
        (self.start, self.horizon)
    }

    /// Fills event times implied by fixed sojourns: a missing infectious
    /// time under SEIR becomes `exposed + latent`, and a missing removal
    /// time becomes `infectious + infectious_period`. Imputed times beyond
    /// the horizon are left unrecorded.
    pub fn impute(&mut self, latent: Option<Time>, infectious_period: Option<Time>) {
        let horizon = self.horizon;
        let within = |t: Time| if t <= horizon { Some(t) } else { None };
        for r in &mut self.records {
            if self.framework.has_exposed() && r.infectious.is_none() && r.removed.is_none() {
                if let (Some(e), Some(mu_e)) = (r.exposed, latent) {
                    r.infectious = within(e + mu_e);
                }
            }
            if self.framework.has_removed() && r.removed.is_none() {
                if let (Some(i), Some(mu_i)) = (r.infectious, infectious_period) {
                    r.removed = within(i + mu_i);
                }
            }
        }
    }

    /// First time individual `i` is out of the susceptible class, with the
    /// compartment it moved to.
    pub fn leaves_susceptible_into(&self, i: usize) -> Option<(Time, Compartment)> {
        let r = &self.records[i];
        let candidates = [
            (r.exposed.filter(|_| self.framework.has_exposed()), Compartment::Exposed),
            (r.infectious, Compartment::Infectious),
            (r.removed.filter(|_| self.framework.has_removed()), Compartment::Removed),
        ];
        // ties resolve to the later compartment, as `state` does
        candidates
            .into_iter()
            .filter_map(|(t, c)| t.map(|t| (t, c)))
            .fold(None, |best: Option<(Time, Compartment)>, (t, c)| match best {
                Some((bt, _)) if bt < t => best,
                _ => Some((t, c)),
            })
    }

    /// First time individual `i` is no longer susceptible.
    pub fn leaves_susceptible(&self, i: usize) -> Option<Time> {
        self.leaves_susceptible_into(i).map(|(t, _)| t)
    }

    /// Time at which `i` becomes newly infected (newly exposed under SEIR),
    /// i.e. the time it joins the class the likelihood counts as new.
    pub fn infection_time(&self, i: usize) -> Option<Time> {
        let target = if self.framework.has_exposed() {
            Compartment::Exposed
        } else {
            Compartment::Infectious
        };
        match self.leaves_susceptible_into(i)? {
            (t, c) if c == target => Some(t),
            _ => None,
        }
    }

    /// Half-open infectious interval `[from, until)`, `until = None` meaning
    /// infectious to the end of the horizon.
    pub fn infectious_interval(&self, i: usize) -> Option<(Time, Option<Time>)> {
        let r = &self.records[i];
        let from = r.infectious?;
        let until = if self.framework.has_removed() { r.removed } else { None };
        Some((from, until))
    }

    /// Compartment of individual `i` at time `t`.
    pub fn state(&self, i: usize, t: Time) -> Compartment {
        let r = &self.records[i];
        let reached = |x: Option<Time>| x.is_some_and(|x| x <= t);
        if self.framework.has_removed() && reached(r.removed) {
            Compartment::Removed
        } else if reached(r.infectious) {
            Compartment::Infectious
        } else if self.framework.has_exposed() && reached(r.exposed) {
            Compartment::Exposed
        } else {
            Compartment::Susceptible
        }
    }

    /// The sets `S(t), E(t), I(t), R(t)`.
    pub fn compartment_sets(&self, t: Time) -> Result<CompartmentSets> {
        if t > self.horizon {
            return Err(Error::input(format!("time {t} is outside [0, {}]", self.horizon)));
        }
        let mut sets = CompartmentSets::default();
        for i in 0..self.records.len() {
            match self.state(i, t) {
                Compartment::Susceptible => sets.susceptible.push(i),
                Compartment::Exposed => sets.exposed.push(i),
                Compartment::Infectious => sets.infectious.push(i),
                Compartment::Removed => sets.removed.push(i),
            }
        }
        Ok(sets)
    }

    /// Restricts the modelled window to `[t_min, t_max]`.
    ///
    /// States reached at or before `t_min` are kept as known history. Events
    /// after `t_max` are dropped, so individuals first exposed after the
    /// window are susceptible throughout it.
    pub fn temporal_subset(&self, t_min: Time, t_max: Time) -> Result<EventHistory> {
        if t_min >= t_max {
            return Err(Error::input(format!("empty window [{t_min}, {t_max}]")));
        }
        if t_max > self.horizon {
            return Err(Error::input(format!(
                "window end {t_max} exceeds the horizon {}",
                self.horizon
            )));
        }
        let cut = |x: Option<Time>| x.filter(|&x| x <= t_max);
        let records = self
            .records
            .iter()
            .map(|r| {
                EventRecord {
                    exposed: cut(r.exposed),
                    infectious: cut(r.infectious),
                    removed: cut(r.removed),
                }
            })
            .collect();
        Ok(EventHistory {
            framework: self.framework,
            records,
            start: t_min.max(self.start),
            horizon: t_max,
        })
    }

    /// Individuals already out of the susceptible class at `start`.
    pub fn initial_infected(&self) -> Vec<usize> {
        (0..self.records.len())
            .filter(|&i| self.leaves_susceptible(i).is_some_and(|t| t <= self.start))
            .collect()
    }

    /// Initially infected individuals plus every later infection.
    pub fn final_size(&self) -> usize {
        let start = self.start;
        (0..self.records.len())
            .filter(|&i| {
                self.leaves_susceptible(i).is_some_and(|t| t <= start)
                    || self.infection_time(i).is_some()
            })
            .count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompartmentSets {
    pub susceptible: Vec<usize>,
    pub exposed: Vec<usize>,
    pub infectious: Vec<usize>,
    pub removed: Vec<usize>,
}

/// Precomputed compartment of every individual at every time in `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct CompartmentIndex {
    n: usize,
    horizon: Time,
    states: Vec<Compartment>,
    infectious: Vec<Vec<usize>>,
}

impl CompartmentIndex {
    pub fn new(history: &EventHistory) -> Self {
        let n = history.len();
        let horizon = history.horizon();
        let mut states = Vec::with_capacity(n * (horizon as usize + 1));
        let mut infectious = vec![Vec::new(); horizon as usize + 1];
        for t in 0..=horizon {
            for i in 0..n {
                let s = history.state(i, t);
                if s == Compartment::Infectious {
                    infectious[t as usize].push(i);
                }
                states.push(s);
            }
        }
        CompartmentIndex { n, horizon, states, infectious }
    }

    pub fn horizon(&self) -> Time {
        self.horizon
    }

    pub fn state(&self, i: usize, t: Time) -> Compartment {
        self.states[t as usize * self.n + i]
    }

    /// `I(t)`, ascending.
    pub fn infectious_at(&self, t: Time) -> &[usize] {
        &self.infectious[t as usize]
    }
}
