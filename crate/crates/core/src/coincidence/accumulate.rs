//! Gated camera accumulation: one electron hit per true coincidence, drawn
//! from the gated image of the bucket tag that fired.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Coincidence;
use crate::error::{Error, Result};
use crate::joint::ImageProfile;

#[derive(Debug, Clone, PartialEq)]
pub struct Accumulated {
    /// Histogram per bucket tag.
    pub per_tag: BTreeMap<u32, ImageProfile>,
    /// All tags summed, as a camera without tag separation would record.
    pub combined: ImageProfile,
    pub hits: u64,
}

/// Histograms of electron hits. Every image must share one axis.
pub fn gated_accumulate(
    coincidences: &[Coincidence],
    images: &BTreeMap<u32, ImageProfile>,
    seed: u64,
) -> Result<Accumulated> {
    let template = images
        .values()
        .next()
        .ok_or_else(|| Error::Config("no gated images supplied".into()))?;
    if images.values().any(|im| im.axis != template.axis) {
        return Err(Error::Config("gated images use different axes".into()));
    }
    let mut samplers = BTreeMap::new();
    for (&tag, im) in images {
        let s = WeightedIndex::new(&im.intensity).ok();
        samplers.insert(tag, s);
    }
    let n = template.axis.len();
    let mut counts: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for c in coincidences.iter().filter(|c| c.is_true) {
        let tag = c
            .tag
            .ok_or_else(|| Error::Config("coincidence without a bucket tag".into()))?;
        let sampler = samplers
            .get(&tag)
            .ok_or_else(|| Error::Config(format!("no gated image for bucket tag {tag}")))?;
        let Some(sampler) = sampler else {
            continue;
        };
        let i = sampler.sample(&mut rng);
        counts.entry(tag).or_insert_with(|| vec![0.0; n])[i] += 1.0;
        hits += 1;
    }
    let mk = |v: Vec<f64>| {
        ImageProfile::new(
            template.axis.clone(),
            v,
            true,
            template.plane,
            template.central_half_width,
        )
    };
    let mut combined = vec![0.0; n];
    for v in counts.values() {
        for (c, x) in combined.iter_mut().zip(v) {
            *c += x;
        }
    }
    Ok(Accumulated {
        per_tag: counts.into_iter().map(|(t, v)| (t, mk(v))).collect(),
        combined: mk(combined),
        hits,
    })
}

/// Pearson χ²/dof of `counts` against the shape of `expected`, over bins
/// expecting at least five hits.
pub fn chi_square_per_dof(counts: &[f64], expected: &[f64]) -> Option<f64> {
    let n: f64 = counts.iter().sum();
    let total: f64 = expected.iter().sum();
    if n <= 0.0 || total <= 0.0 {
        return None;
    }
    let mut chi = 0.0;
    let mut bins = 0usize;
    for (c, e) in counts.iter().zip(expected) {
        let m = n * e / total;
        if m >= 5.0 {
            chi += (c - m).powi(2) / m;
            bins += 1;
        }
    }
    (bins > 1).then(|| chi / (bins - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint::ImagePlane;

    fn fringe(shift: f64) -> ImageProfile {
        let axis: Vec<f64> = (0..400).map(|i| -2000.0 + 10.0 * i as f64).collect();
        let intensity = axis
            .iter()
            .map(|y| (std::f64::consts::PI * (y - shift) / 600.0).cos().powi(2))
            .collect();
        ImageProfile::new(axis, intensity, true, ImagePlane::Defocus(0.0), 1000.0)
    }

    fn hits(n: usize, tags: u32) -> Vec<Coincidence> {
        (0..n)
            .map(|i| Coincidence {
                t_ns: i as f64,
                tag: Some(i as u32 % tags),
                is_true: true,
            })
            .collect()
    }

    #[test]
    fn empty_input_gives_empty_histogram() {
        let images = BTreeMap::from([(0, fringe(0.0))]);
        let acc = gated_accumulate(&[], &images, 1).unwrap();
        assert_eq!(acc.hits, 0);
        assert!(acc.combined.intensity.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn histogram_is_consistent_with_fringes() {
        let img = fringe(0.0);
        let images = BTreeMap::from([(0, img.clone())]);
        let acc = gated_accumulate(&hits(100_000, 1), &images, 3).unwrap();
        let chi = chi_square_per_dof(&acc.combined.intensity, &img.intensity).unwrap();
        assert!((0.5..=2.0).contains(&chi), "{chi}");
    }

    #[test]
    fn mixing_tags_washes_out_fringes() {
        let images: BTreeMap<u32, ImageProfile> =
            (0..6).map(|t| (t, fringe(100.0 * t as f64))).collect();
        let acc = gated_accumulate(&hits(600_000, 6), &images, 5).unwrap();
        let single = acc.per_tag[&0].measure_visibility();
        let mixed = acc.combined.measure_visibility();
        assert!(single > 0.9 && mixed < 0.2, "{single} {mixed}");
    }

    #[test]
    fn missing_tag_is_a_config_error() {
        let images = BTreeMap::from([(0, fringe(0.0))]);
        assert!(matches!(
            gated_accumulate(&hits(4, 2), &images, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn accidentals_are_not_drawn() {
        let images = BTreeMap::from([(0, fringe(0.0))]);
        let mut c = hits(10, 1);
        for x in &mut c[..4] {
            x.is_true = false;
        }
        assert_eq!(gated_accumulate(&c, &images, 0).unwrap().hits, 6);
    }
}
