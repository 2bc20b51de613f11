use std::f64::consts::{PI, TAU};

use super::{Result, SynthError};

/// Width of the oracle's centered fit window, in oscillation cycles.
pub const ORACLE_CYCLES: f64 = 4.0;
const MIN_AMPLITUDE: f64 = 1e-12;

/// Wraps an angle into (-π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let mut w = x - TAU * ((x - PI) / TAU).ceil();
    if w <= -PI {
        w += TAU;
    } else if w > PI {
        w -= TAU;
    }
    w
}

/// Circular mean and circular standard deviation `sqrt(-2 ln R)`.
pub fn circular_stats(angles: &[f64]) -> Option<(f64, f64)> {
    if angles.is_empty() {
        return None;
    }
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let n = angles.len() as f64;
    let r = (s * s + c * c).sqrt() / n;
    Some((wrap_phase(s.atan2(c)), (-2.0 * r.min(1.0).ln()).sqrt()))
}

/// Least-squares fit of `a cos(ωt) + b sin(ωt)` over a trailing window, with
/// `t = 0` at the newest sample. The basis only depends on the window length,
/// so it is built once and reused.
#[derive(Debug, Clone)]
pub struct PhasePredictor {
    freq: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
    /// Inverse of the 2x2 normal matrix.
    inv: [[f64; 2]; 2],
}

impl PhasePredictor {
    pub fn new(len: usize, srate: f64, freq: f64) -> Result<Self> {
        if !(srate > 0.0 && freq > 0.0 && freq < srate / 2.0) {
            return Err(SynthError::Config(format!(
                "frequency {freq} Hz is not below Nyquist of {srate} Hz"
            )));
        }
        let need = (2.0 * srate / freq).ceil() as usize;
        if len < need {
            return Err(SynthError::Window { need, got: len });
        }
        let omega = TAU * freq;
        let (cos, sin): (Vec<f64>, Vec<f64>) = (0..len)
            .map(|i| {
                let t = (i as f64 - (len - 1) as f64) / srate;
                ((omega * t).cos(), (omega * t).sin())
            })
            .unzip();
        let cc: f64 = cos.iter().map(|c| c * c).sum();
        let ss: f64 = sin.iter().map(|s| s * s).sum();
        let cs: f64 = cos.iter().zip(&sin).map(|(c, s)| c * s).sum();
        let det = cc * ss - cs * cs;
        Ok(PhasePredictor {
            freq,
            cos,
            sin,
            inv: [[ss / det, -cs / det], [-cs / det, cc / det]],
        })
    }

    pub fn len(&self) -> usize {
        self.cos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cos.is_empty()
    }

    /// Phase of the fitted `A sin(ωt + φ)` at the window end.
    pub fn current(&self, window: &[f64]) -> Result<f64> {
        if window.len() != self.len() {
            return Err(SynthError::Window {
                need: self.len(),
                got: window.len(),
            });
        }
        let (mut xc, mut xs) = (0.0, 0.0);
        for ((x, c), s) in window.iter().zip(&self.cos).zip(&self.sin) {
            xc += x * c;
            xs += x * s;
        }
        let a = self.inv[0][0] * xc + self.inv[0][1] * xs;
        let b = self.inv[1][0] * xc + self.inv[1][1] * xs;
        let amplitude = a.hypot(b);
        if !(amplitude >= MIN_AMPLITUDE) {
            return Err(SynthError::PhaseUndefined { amplitude });
        }
        // A sin(ωt + φ) = A sin φ cos ωt + A cos φ sin ωt
        Ok(a.atan2(b))
    }

    /// Current phase advanced by `horizon` seconds.
    pub fn advance(&self, phase: f64, horizon: f64) -> f64 {
        wrap_phase(phase + TAU * self.freq * horizon)
    }

    pub fn predict(&self, window: &[f64], horizon: f64) -> Result<f64> {
        Ok(self.advance(self.current(window)?, horizon))
    }
}

/// One-shot trailing-window prediction; see [`PhasePredictor`].
pub fn predict_phase(window: &[f64], srate: f64, freq: f64, horizon: f64) -> Result<f64> {
    PhasePredictor::new(window.len(), srate, freq)?.predict(window, horizon)
}

/// Ground-truth phase at `t` seconds after the first sample: least-squares
/// fit of `a cos + b sin + c` at `freq` over a window of four cycles centered
/// on `t`.
pub fn oracle_phase(signal: &[f64], srate: f64, freq: f64, t: f64) -> Result<f64> {
    if !(srate > 0.0 && freq > 0.0 && freq < srate / 2.0) {
        return Err(SynthError::Config(format!(
            "frequency {freq} Hz is not below Nyquist of {srate} Hz"
        )));
    }
    let half = ORACLE_CYCLES / 2.0 / freq;
    let lo = ((t - half) * srate).ceil();
    let hi = ((t + half) * srate).floor();
    if !(lo >= 0.0 && hi <= (signal.len() as f64 - 1.0)) || !t.is_finite() {
        return Err(SynthError::Edge { t });
    }
    let (lo, hi) = (lo as usize, hi as usize);
    let omega = TAU * freq;
    // normal equations for basis [cos, sin, 1]
    let mut m = [[0.0f64; 3]; 3];
    let mut v = [0.0f64; 3];
    for (i, x) in signal.iter().enumerate().take(hi + 1).skip(lo) {
        let tau = i as f64 / srate - t;
        let basis = [(omega * tau).cos(), (omega * tau).sin(), 1.0];
        for r in 0..3 {
            v[r] += basis[r] * x;
            for c in 0..3 {
                m[r][c] += basis[r] * basis[c];
            }
        }
    }
    let [a, b, _] = solve3(m, v);
    let amplitude = a.hypot(b);
    if !(amplitude >= MIN_AMPLITUDE) {
        return Err(SynthError::PhaseUndefined { amplitude });
    }
    Ok(wrap_phase(a.atan2(b)))
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut v: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        v.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            v[row] -= f * v[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (v[row] - tail) / m[row][row];
    }
    x
}
