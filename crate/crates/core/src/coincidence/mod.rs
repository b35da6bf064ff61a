//! Time-tagged event simulation and coincidence filtering.
//!
//! Only energy-filtered (SPP-loss) electrons are recorded; the full electron
//! count is kept as a counter. Timestamps are in ns from the start of the run.

mod accumulate;
mod correlate;

pub use accumulate::{chi_square_per_dof, gated_accumulate, Accumulated};
pub use correlate::{correlate, Coincidence, CoincidenceReport, CoincidenceSummary, Correlator};

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::constants::ELEMENTARY_CHARGE;
use crate::error::{Error, Result};

/// `simulate_events` refuses runs expected to record more than this.
pub const IN_MEMORY_LIMIT: f64 = 1e7;
/// Jitter draws are clamped to this many standard deviations.
pub const JITTER_CLAMP_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    /// Beam current (pA).
    pub current_pa: f64,
    pub p_spp: f64,
    pub p_ps: f64,
    pub window_ns: f64,
    pub dead_time_ns: f64,
    /// Dark counts per second at the bucket.
    pub dark_rate: f64,
    pub duration_s: f64,
    pub seed: u64,
    /// Electron-to-photon delay (ns).
    pub delay_ns: f64,
    /// Gaussian timing jitter (ns, standard deviation).
    pub jitter_ns: f64,
    /// Relative photon probability per bucket tag.
    pub tag_weights: Vec<f64>,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            current_pa: 10.0,
            p_spp: 1e-3,
            p_ps: 1e-3,
            window_ns: 10.0,
            dead_time_ns: 10_000.0,
            dark_rate: 0.0,
            duration_s: 1.0,
            seed: 0,
            delay_ns: 0.0,
            jitter_ns: 1.0,
            tag_weights: vec![1.0],
        }
    }
}

impl RateConfig {
    /// `n = i_e/e`, electrons per second.
    pub fn electron_rate(&self) -> f64 {
        self.current_pa * 1e-12 / ELEMENTARY_CHARGE
    }

    /// Mean electron spacing `e/i_e` (ns).
    pub fn electron_spacing_ns(&self) -> f64 {
        1e9 / self.electron_rate()
    }

    /// `τ_spp = e/(i_e·P_SPP)` (s).
    pub fn tau_spp_s(&self) -> f64 {
        1.0 / (self.electron_rate() * self.p_spp)
    }

    /// `τ_ps = e/(i_e·P_SPP·P_PS)` (s).
    pub fn tau_ps_s(&self) -> f64 {
        1.0 / (self.electron_rate() * self.p_spp * self.p_ps)
    }

    /// Expected number of recorded events.
    pub fn expected_records(&self) -> f64 {
        let spp = self.electron_rate() * self.p_spp * self.duration_s;
        spp * (1.0 + self.p_ps) + self.dark_rate * self.duration_s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if !(self.duration_s > 0.0) {
            return bad(format!("duration {} s must be positive", self.duration_s));
        }
        if !(self.current_pa > 0.0) {
            return bad(format!("current {} pA must be positive", self.current_pa));
        }
        if !(0.0..=1.0).contains(&self.p_spp) {
            return bad(format!("P_SPP = {} outside [0, 1]", self.p_spp));
        }
        if !(0.0..=1.0).contains(&self.p_ps) {
            return bad(format!("P_PS = {} outside [0, 1]", self.p_ps));
        }
        if !(self.window_ns > 0.0) {
            return bad(format!(
                "coincidence window {} ns must be positive",
                self.window_ns
            ));
        }
        if !(self.dead_time_ns >= 0.0) {
            return bad(format!("dead time {} ns is negative", self.dead_time_ns));
        }
        if !(self.dark_rate >= 0.0) || !(self.jitter_ns >= 0.0) || !self.delay_ns.is_finite() {
            return bad("dark rate and jitter must be nonnegative, delay finite".into());
        }
        if self.tag_weights.is_empty()
            || self.tag_weights.iter().any(|w| !(*w >= 0.0))
            || !(self.tag_weights.iter().sum::<f64>() > 0.0)
        {
            return bad("tag_weights must be nonnegative with a positive sum".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    /// Energy-filtered electron that created an SPP.
    Electron,
    /// Bucket photon from an SPP.
    Photon,
    Dark,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Electron => "electron",
            EventKind::Photon => "photon",
            EventKind::Dark => "dark",
        })
    }
}

impl FromStr for EventKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "electron" => Ok(EventKind::Electron),
            "photon" => Ok(EventKind::Photon),
            "dark" => Ok(EventKind::Dark),
            _ => Err(Error::Argument(format!("unknown event kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t_ns: f64,
    pub kind: EventKind,
    pub tag: Option<u32>,
    /// Id of the SPP electron behind an electron or photon record. Not
    /// persisted in CSV.
    pub origin: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub events: Vec<Event>,
    pub duration_ns: f64,
    /// All electrons that crossed the interaction region, recorded or not.
    pub total_electrons: Option<u64>,
}

impl EventLog {
    pub fn is_sorted(&self) -> bool {
        self.events.windows(2).all(|w| w[0].t_ns <= w[1].t_ns)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "timestamp_ns,kind,tag")?;
        for e in &self.events {
            write_event(&mut w, e)?;
        }
        Ok(())
    }

    /// Reads `timestamp_ns,kind,tag`; origins are unknown afterwards.
    pub fn read_csv<R: BufRead>(r: R, duration_ns: f64) -> Result<Self> {
        let mut events = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if i == 0 && line.starts_with("timestamp_ns") || line.is_empty() {
                continue;
            }
            let bad = || Error::Argument(format!("line {}: malformed event `{line}`", i + 1));
            let mut f = line.split(',');
            let t: f64 = f.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let kind: EventKind = f.next().ok_or_else(bad)?.parse()?;
            let tag = match f.next().map(str::trim) {
                None | Some("") => None,
                Some(v) => Some(v.parse().map_err(|_| bad())?),
            };
            events.push(Event {
                t_ns: t,
                kind,
                tag,
                origin: None,
            });
        }
        Ok(EventLog {
            events,
            duration_ns,
            total_electrons: None,
        })
    }
}

pub fn write_event<W: Write>(w: &mut W, e: &Event) -> Result<()> {
    match e.tag {
        Some(tag) => writeln!(w, "{},{},{}", e.t_ns, e.kind, tag)?,
        None => writeln!(w, "{},{},", e.t_ns, e.kind)?,
    }
    Ok(())
}

struct Pending {
    t: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Pending {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Pending {
    fn cmp(&self, o: &Self) -> Ordering {
        self.t.total_cmp(&o.t).then(self.seq.cmp(&o.seq))
    }
}

/// Lazily generated, time-ordered event stream; memory stays bounded by the
/// number of events within one jitter span.
pub struct EventStream {
    duration_ns: f64,
    delay_ns: f64,
    early: f64,
    p_ps: f64,
    spp_gap: Option<Exp<f64>>,
    dark_gap: Option<Exp<f64>>,
    jitter: Option<Normal<f64>>,
    jitter_ns: f64,
    tags: WeightedIndex<f64>,
    n_tags: u32,
    rng_e: ChaCha8Rng,
    rng_d: ChaCha8Rng,
    next_e: Option<f64>,
    next_d: Option<f64>,
    heap: BinaryHeap<Reverse<Pending>>,
    seq: u64,
    spp_count: u64,
    other_electrons: u64,
}

impl EventStream {
    pub fn new(cfg: &RateConfig) -> Result<Self> {
        cfg.validate()?;
        let duration_ns = cfg.duration_s * 1e9;
        let spp_rate = cfg.electron_rate() * cfg.p_spp * 1e-9;
        let spp_gap = (spp_rate > 0.0).then(|| Exp::new(spp_rate).expect("positive rate"));
        let dark_gap =
            (cfg.dark_rate > 0.0).then(|| Exp::new(cfg.dark_rate * 1e-9).expect("positive rate"));
        let jitter = (cfg.jitter_ns > 0.0).then(|| Normal::new(0.0, cfg.jitter_ns).expect("σ > 0"));
        let tags = WeightedIndex::new(&cfg.tag_weights)
            .map_err(|e| Error::Argument(format!("tag_weights: {e}")))?;
        let mut rng_e = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_e.set_stream(1);
        let mut rng_d = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_d.set_stream(2);
        let mut rng_n = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_n.set_stream(3);
        let other_mean = cfg.electron_rate() * (1.0 - cfg.p_spp) * cfg.duration_s;
        let other_electrons = if other_mean > 0.0 {
            Poisson::new(other_mean)
                .expect("positive mean")
                .sample(&mut rng_n) as u64
        } else {
            0
        };
        let mut s = EventStream {
            duration_ns,
            delay_ns: cfg.delay_ns,
            early: (cfg.delay_ns - JITTER_CLAMP_SIGMAS * cfg.jitter_ns).min(0.0),
            p_ps: cfg.p_ps,
            spp_gap,
            dark_gap,
            jitter,
            jitter_ns: cfg.jitter_ns,
            tags,
            n_tags: cfg.tag_weights.len() as u32,
            rng_e,
            rng_d,
            next_e: None,
            next_d: None,
            heap: BinaryHeap::new(),
            seq: 0,
            spp_count: 0,
            other_electrons,
        };
        s.next_e = s.draw_electron(0.0);
        s.next_d = s.draw_dark(0.0);
        Ok(s)
    }

    fn draw_electron(&mut self, from: f64) -> Option<f64> {
        let t = from + self.spp_gap.as_ref()?.sample(&mut self.rng_e);
        (t <= self.duration_ns).then_some(t)
    }

    fn draw_dark(&mut self, from: f64) -> Option<f64> {
        let t = from + self.dark_gap.as_ref()?.sample(&mut self.rng_d);
        (t <= self.duration_ns).then_some(t)
    }

    fn push(&mut self, event: Event) {
        self.seq += 1;
        self.heap.push(Reverse(Pending {
            t: event.t_ns,
            seq: self.seq,
            event,
        }));
    }

    fn emit_electron(&mut self, t: f64) {
        let id = self.spp_count;
        self.spp_count += 1;
        self.push(Event {
            t_ns: t,
            kind: EventKind::Electron,
            tag: None,
            origin: Some(id),
        });
        if self.rng_e.gen::<f64>() < self.p_ps {
            let j = match &self.jitter {
                Some(n) => {
                    let lim = JITTER_CLAMP_SIGMAS * self.jitter_ns;
                    n.sample(&mut self.rng_e).clamp(-lim, lim)
                }
                None => 0.0,
            };
            let tag = self.tags.sample(&mut self.rng_e) as u32;
            let tp = t + self.delay_ns + j;
            if (0.0..=self.duration_ns).contains(&tp) {
                self.push(Event {
                    t_ns: tp,
                    kind: EventKind::Photon,
                    tag: Some(tag),
                    origin: Some(id),
                });
            }
        }
    }

    fn refill(&mut self) {
        loop {
            let top = self.heap.peek().map(|p| p.0.t);
            if let Some(te) = self.next_e {
                if top.map_or(true, |m| te + self.early <= m) {
                    self.emit_electron(te);
                    self.next_e = self.draw_electron(te);
                    continue;
                }
            }
            if let Some(td) = self.next_d {
                if top.map_or(true, |m| td <= m) {
                    let tag = self.rng_d.gen_range(0..self.n_tags);
                    self.push(Event {
                        t_ns: td,
                        kind: EventKind::Dark,
                        tag: Some(tag),
                        origin: None,
                    });
                    self.next_d = self.draw_dark(td);
                    continue;
                }
            }
            break;
        }
    }

    pub fn duration_ns(&self) -> f64 {
        self.duration_ns
    }

    /// Total electron count; final once the stream is exhausted.
    pub fn total_electrons(&self) -> u64 {
        self.spp_count + self.other_electrons
    }
}

impl Iterator for EventStream {
    type Item = Event;
    fn next(&mut self) -> Option<Event> {
        self.refill();
        self.heap.pop().map(|p| p.0.event)
    }
}

/// Simulates a whole run in memory.
pub fn simulate_events(cfg: &RateConfig) -> Result<EventLog> {
    cfg.validate()?;
    let expected = cfg.expected_records();
    if expected > IN_MEMORY_LIMIT {
        return Err(Error::Argument(format!(
            "about {expected:.3e} events expected; use EventStream (streaming mode) above {IN_MEMORY_LIMIT:.0e}"
        )));
    }
    let mut stream = EventStream::new(cfg)?;
    let events: Vec<Event> = stream.by_ref().collect();
    Ok(EventLog {
        events,
        duration_ns: stream.duration_ns(),
        total_electrons: Some(stream.total_electrons()),
    })
}
