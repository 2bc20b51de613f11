use serde::Serialize;

use super::{Result, TimelineError};

/// Linear display mapping `(v - offset) * gain`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scale {
    pub offset: f64,
    pub gain: f64,
}

impl Scale {
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.offset) * self.gain
    }
}

/// Centers on the 2nd/98th percentile midpoint and maps that range to [-1, 1].
/// Non-finite values are ignored.
pub fn auto_scale(channel: &[f64]) -> Scale {
    let mut sorted: Vec<f64> = channel.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return Scale {
            offset: 0.0,
            gain: 1.0,
        };
    }
    sorted.sort_by(f64::total_cmp);
    let lo = percentile(&sorted, 0.02);
    let hi = percentile(&sorted, 0.98);
    let range = hi - lo;
    Scale {
        offset: lo + range / 2.0,
        gain: if range > 0.0 { 2.0 / range } else { 1.0 },
    }
}

/// Linear interpolation between closest ranks.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeTile {
    pub bucket_index: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// `None` when the bucket holds no samples.
    pub min_value: Option<f64>,
    pub max_value: Option<f64>,
    pub sample_count: usize,
}

/// Min/max per equal-width bucket of `[t0, t1)`. NaN values are not counted.
pub fn envelope_tiles(
    values: &[f64],
    times: &[f64],
    t0: f64,
    t1: f64,
    buckets: usize,
) -> Result<Vec<EnvelopeTile>> {
    if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() || buckets == 0 {
        return Err(TimelineError::Window { t0, t1 });
    }
    let width = (t1 - t0) / buckets as f64;
    let edge = |i: usize| if i == buckets { t1 } else { t0 + i as f64 * width };
    let mut tiles: Vec<EnvelopeTile> = (0..buckets)
        .map(|i| EnvelopeTile {
            bucket_index: i,
            t_start: edge(i),
            t_end: edge(i + 1),
            min_value: None,
            max_value: None,
            sample_count: 0,
        })
        .collect();
    for (&v, &t) in values.iter().zip(times) {
        if !(t >= t0 && t < t1) || v.is_nan() {
            continue;
        }
        let mut b = (((t - t0) / width) as usize).min(buckets - 1);
        while b > 0 && t < edge(b) {
            b -= 1;
        }
        while b + 1 < buckets && t >= edge(b + 1) {
            b += 1;
        }
        let tile = &mut tiles[b];
        tile.min_value = Some(tile.min_value.map_or(v, |m| m.min(v)));
        tile.max_value = Some(tile.max_value.map_or(v, |m| m.max(v)));
        tile.sample_count += 1;
    }
    Ok(tiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_minus_one_to_one() {
        let v: Vec<f64> = (0..=2000).map(|i| -1.0 + i as f64 / 1000.0).collect();
        let s = auto_scale(&v);
        assert!(s.offset.abs() < 0.05);
        assert!((s.gain - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_to_ten() {
        let v: Vec<f64> = (0..=1000).map(|i| i as f64 / 100.0).collect();
        let s = auto_scale(&v);
        assert!((s.offset - 5.0).abs() < 0.05 * 5.0);
        assert!((s.gain - 0.2).abs() < 0.05 * 0.2);
        // percentile oracle: 2nd and 98th of 0..=10 in 0.01 steps are 0.2 and 9.8
        assert!((s.apply(9.8) - 1.0).abs() < 1e-9);
        assert!((s.apply(0.2) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_ranges() {
        assert_eq!(auto_scale(&[5.0; 10]), Scale { offset: 5.0, gain: 1.0 });
        assert_eq!(auto_scale(&[]), Scale { offset: 0.0, gain: 1.0 });
    }

    #[test]
    fn spikes_do_not_dominate() {
        let mut v: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.1).sin()).collect();
        v[10] = 1e6;
        assert!(auto_scale(&v).gain > 0.5);
    }

    #[test]
    fn forced_partition() {
        let tiles = envelope_tiles(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 2.0, 3.0], 0.0, 4.0, 2).unwrap();
        assert_eq!((tiles[0].min_value, tiles[0].max_value), (Some(0.0), Some(1.0)));
        assert_eq!((tiles[1].min_value, tiles[1].max_value), (Some(2.0), Some(3.0)));
        assert_eq!(tiles[1].t_end, 4.0);
    }

    #[test]
    fn single_bucket_is_global_extrema() {
        let v = [3.0, -1.0, 7.0, 2.0];
        let tiles = envelope_tiles(&v, &[0.0, 1.0, 2.0, 3.0], 0.0, 10.0, 1).unwrap();
        assert_eq!(tiles[0].min_value, Some(-1.0));
        assert_eq!(tiles[0].max_value, Some(7.0));
        assert_eq!(tiles[0].sample_count, 4);
    }

    #[test]
    fn window_beyond_data() {
        let tiles = envelope_tiles(&[1.0], &[0.0], 5.0, 6.0, 3).unwrap();
        assert!(tiles.iter().all(|t| t.sample_count == 0 && t.min_value.is_none()));
    }

    #[test]
    fn bad_window() {
        assert!(envelope_tiles(&[], &[], 1.0, 1.0, 1).is_err());
        assert!(envelope_tiles(&[], &[], 0.0, 1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn tiles_match_brute_force(
            samples in prop::collection::vec((-100f64..100.0, -1e3f64..1e3), 0..300),
            t0 in -120f64..100.0,
            span in 0.01f64..150.0,
            buckets in 1usize..64,
        ) {
            let (times, values): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
            let t1 = t0 + span;
            let tiles = envelope_tiles(&values, &times, t0, t1, buckets).unwrap();
            let total: usize = tiles.iter().map(|t| t.sample_count).sum();
            let inside: Vec<f64> = times.iter().zip(&values)
                .filter(|(t, _)| **t >= t0 && **t < t1).map(|(_, v)| *v).collect();
            prop_assert_eq!(total, inside.len());
            let lo = tiles.iter().filter_map(|t| t.min_value).fold(f64::INFINITY, f64::min);
            let hi = tiles.iter().filter_map(|t| t.max_value).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(lo, inside.iter().copied().fold(f64::INFINITY, f64::min));
            prop_assert_eq!(hi, inside.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            for tile in &tiles {
                // each tile is exactly the brute-force scan of its own interval
                let own: Vec<f64> = times.iter().zip(&values)
                    .filter(|(t, _)| **t >= tile.t_start && **t < tile.t_end).map(|(_, v)| *v).collect();
                prop_assert_eq!(tile.sample_count, own.len());
                prop_assert_eq!(tile.min_value, own.iter().copied().reduce(f64::min));
                prop_assert_eq!(tile.max_value, own.iter().copied().reduce(f64::max));
            }
        }
    }
}
