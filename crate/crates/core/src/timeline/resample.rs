//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc lowpass.

use std::f64::consts::PI;

use super::{Result, TimelineError};
use crate::format::StreamInfo;

pub const STOPBAND_ATTENUATION_DB: f64 = 80.0;
/// Transition band as a fraction of the lower Nyquist frequency.
const TRANSITION_FRACTION: f64 = 0.05;
const MAX_DENOMINATOR: u64 = 1000;
const RATIO_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ResamplePlan {
    pub from_rate: f64,
    pub to_rate: f64,
    pub up: usize,
    pub down: usize,
    pub stopband_attenuation: f64,
    /// Polyphase-normalized taps at the upsampled rate (odd length).
    taps: Vec<f64>,
}

impl ResamplePlan {
    pub fn new(from_rate: f64, to_rate: f64) -> Result<Self> {
        if !(from_rate > 0.0 && to_rate > 0.0 && from_rate.is_finite() && to_rate.is_finite()) {
            return Err(TimelineError::Rate(format!(
                "rates must be positive and finite ({from_rate} -> {to_rate})"
            )));
        }
        let (up, down) = rational_ratio(to_rate / from_rate).ok_or_else(|| {
            TimelineError::Rate(format!(
                "{to_rate}/{from_rate} is not a ratio with denominator <= {MAX_DENOMINATOR}"
            ))
        })?;
        let (up, down) = (up as usize, down as usize);
        let taps = if up == 1 && down == 1 {
            vec![1.0]
        } else {
            design_lowpass(up, down)
        };
        Ok(ResamplePlan {
            from_rate,
            to_rate,
            up,
            down,
            stopband_attenuation: STOPBAND_ATTENUATION_DB,
            taps,
        })
    }

    pub fn filter_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }
}

/// Smallest-denominator `p/q` (q <= 1000) within a relative 1e-9 of `ratio`.
fn rational_ratio(ratio: f64) -> Option<(u64, u64)> {
    (1..=MAX_DENOMINATOR).find_map(|q| {
        let p = (ratio * q as f64).round();
        (p >= 1.0 && p < u32::MAX as f64 && ((p / q as f64) - ratio).abs() <= RATIO_TOLERANCE * ratio)
            .then(|| {
                let p = p as u64;
                let g = gcd(p, q);
                (p / g, q / g)
            })
    })
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn kaiser_beta(attenuation: f64) -> f64 {
    if attenuation > 50.0 {
        0.1102 * (attenuation - 8.7)
    } else if attenuation > 21.0 {
        0.5842 * (attenuation - 21.0).powf(0.4) + 0.07886 * (attenuation - 21.0)
    } else {
        0.0
    }
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc at the upsampled rate. Stopband starts at the lower
/// Nyquist frequency; each polyphase branch is scaled to unit sum so DC passes
/// exactly.
fn design_lowpass(up: usize, down: usize) -> Vec<f64> {
    let k = up.max(down) as f64;
    let stop_edge = PI / k;
    let transition = TRANSITION_FRACTION * stop_edge;
    let cutoff = stop_edge - transition / 2.0;
    let order = ((STOPBAND_ATTENUATION_DB - 7.95) / (2.285 * transition)).ceil() as usize;
    let n = order + 1 + (order % 2); // odd length, integer group delay
    let center = (n - 1) as f64 / 2.0;
    let beta = kaiser_beta(STOPBAND_ATTENUATION_DB);
    let i0_beta = bessel_i0(beta);
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 - center;
            let sinc = if x == 0.0 {
                cutoff / PI
            } else {
                (cutoff * x).sin() / (PI * x)
            };
            let r = x / center;
            let window = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            sinc * window
        })
        .collect();
    for phase in 0..up {
        let sum: f64 = taps.iter().skip(phase).step_by(up).sum();
        for t in taps.iter_mut().skip(phase).step_by(up) {
            *t /= sum;
        }
    }
    taps
}

/// Resamples one channel. Output sample `k` sits at `k / to_rate` seconds
/// after the first input sample; the signal is zero-extended past its ends.
pub fn resample(signal: &[f64], plan: &ResamplePlan) -> Vec<f64> {
    if plan.up == 1 && plan.down == 1 {
        return signal.to_vec();
    }
    let (up, down) = (plan.up, plan.down);
    let taps = &plan.taps;
    let delay = (taps.len() - 1) / 2;
    let len = signal.len();
    (0..plan.output_len(len))
        .map(|k| {
            // position on the upsampled grid, shifted by the group delay
            let m = k * down + delay;
            let hi = (m / up).min(len.saturating_sub(1));
            let lo = (m + 1).saturating_sub(taps.len()).div_ceil(up);
            let mut acc = 0.0;
            let mut n = lo;
            while n <= hi {
                acc += taps[m - n * up] * signal[n];
                n += 1;
            }
            acc
        })
        .collect()
}

/// User rate if given, else the highest nominal rate among regular streams.
pub fn common_rate<'a>(
    infos: impl IntoIterator<Item = &'a StreamInfo>,
    user_rate: Option<f64>,
) -> Result<f64> {
    let max = infos
        .into_iter()
        .filter(|i| i.is_regular())
        .map(|i| i.nominal_srate)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    match (user_rate, max) {
        (_, None) => Err(TimelineError::NoRegularStream),
        (Some(u), Some(_)) => Ok(u),
        (None, Some(m)) => Ok(m),
    }
}
