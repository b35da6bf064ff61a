//! Single-pass coincidence filter.
//!
//! Records pair when `|t_photon − t_electron| ≤ window`, oldest first on
//! either side. Each pair is accepted unless it falls within the dead time
//! of the previously accepted one (non-paralyzable).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Event, EventKind, EventLog};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coincidence {
    /// Time the pair closed (the later record), ns.
    pub t_ns: f64,
    pub tag: Option<u32>,
    pub is_true: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoincidenceSummary {
    pub true_coincidences: u64,
    pub accidentals: u64,
    pub rejected_dead_time: u64,
    pub electrons: u64,
    pub photons: u64,
    pub darks: u64,
    pub duration_s: f64,
    /// `duration / true coincidences`, s.
    pub tau_ps_empirical_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoincidenceReport {
    pub summary: CoincidenceSummary,
    pub coincidences: Vec<Coincidence>,
}

/// Streaming correlator; feed events in time order.
#[derive(Debug, Clone)]
pub struct Correlator {
    window: f64,
    dead_time: f64,
    electrons: VecDeque<Event>,
    photons: VecDeque<Event>,
    last_accepted: Option<f64>,
    last_t: f64,
    report: CoincidenceReport,
}

impl Correlator {
    pub fn new(window_ns: f64, dead_time_ns: f64) -> Result<Self> {
        if !(window_ns > 0.0) || !(dead_time_ns >= 0.0) {
            return Err(Error::Argument(format!(
                "window {window_ns} ns must be positive and dead time {dead_time_ns} ns nonnegative"
            )));
        }
        Ok(Correlator {
            window: window_ns,
            dead_time: dead_time_ns,
            electrons: VecDeque::new(),
            photons: VecDeque::new(),
            last_accepted: None,
            last_t: f64::NEG_INFINITY,
            report: CoincidenceReport::default(),
        })
    }

    pub fn push(&mut self, e: &Event) -> Result<()> {
        if e.t_ns < self.last_t {
            return Err(Error::Argument(format!(
                "event log not sorted: {} ns after {} ns",
                e.t_ns, self.last_t
            )));
        }
        self.last_t = e.t_ns;
        let t = e.t_ns;
        let w = self.window;
        let s = &mut self.report.summary;
        match e.kind {
            EventKind::Electron => {
                s.electrons += 1;
                while self.photons.front().is_some_and(|p| t - p.t_ns > w) {
                    self.photons.pop_front();
                }
                match self.photons.pop_front() {
                    Some(p) => self.pair(e, &p),
                    None => self.electrons.push_back(*e),
                }
            }
            EventKind::Photon | EventKind::Dark => {
                if e.kind == EventKind::Photon {
                    s.photons += 1;
                } else {
                    s.darks += 1;
                }
                while self.electrons.front().is_some_and(|x| t - x.t_ns > w) {
                    self.electrons.pop_front();
                }
                match self.electrons.pop_front() {
                    Some(x) => self.pair(&x, e),
                    None => self.photons.push_back(*e),
                }
            }
        }
        Ok(())
    }

    fn pair(&mut self, electron: &Event, photon: &Event) {
        let t = electron.t_ns.max(photon.t_ns);
        let s = &mut self.report.summary;
        if self.last_accepted.is_some_and(|l| t - l < self.dead_time) {
            s.rejected_dead_time += 1;
            return;
        }
        self.last_accepted = Some(t);
        let is_true = match (electron.origin, photon.origin) {
            (Some(a), Some(b)) => a == b,
            _ => photon.kind == EventKind::Photon,
        };
        if is_true {
            s.true_coincidences += 1;
        } else {
            s.accidentals += 1;
        }
        self.report.coincidences.push(Coincidence {
            t_ns: t,
            tag: photon.tag,
            is_true,
        });
    }

    pub fn finish(mut self, duration_ns: f64) -> CoincidenceReport {
        let s = &mut self.report.summary;
        s.duration_s = duration_ns * 1e-9;
        s.tau_ps_empirical_s =
            (s.true_coincidences > 0).then(|| s.duration_s / s.true_coincidences as f64);
        self.report
    }
}

/// Correlates a whole log.
pub fn correlate(log: &EventLog, window_ns: f64, dead_time_ns: f64) -> Result<CoincidenceReport> {
    let mut c = Correlator::new(window_ns, dead_time_ns)?;
    for e in &log.events {
        c.push(e)?;
    }
    Ok(c.finish(log.duration_ns))
}
