use std::f64::consts::PI;

use num_complex::Complex64;

use super::{Result, SynthError};

/// Second-order section, `a[0] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2)
            / (self.a[0] + self.a[1] * z_inv + self.a[2] * z2)
    }

    /// Direct form II transposed.
    fn run(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = self.b[0] * *v + s1;
            s1 = self.b[1] * *v - self.a[1] * y + s2;
            s2 = self.b[2] * *v - self.a[2] * y;
            *v = y;
        }
    }
}

/// Butterworth band-pass as a cascade of biquads, designed by the bilinear
/// transform with prewarped edges. Unit gain at the geometric center.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPass {
    pub sections: Vec<Biquad>,
    pub srate: f64,
}

impl BandPass {
    /// `order` is the low-pass prototype order; the band-pass has twice that.
    pub fn butterworth(order: usize, low: f64, high: f64, srate: f64) -> Result<Self> {
        if order == 0 || !(0.0 < low && low < high && high < srate / 2.0) {
            return Err(SynthError::Config(format!(
                "band [{low}, {high}] Hz does not fit below Nyquist of {srate} Hz"
            )));
        }
        let fs2 = 2.0 * srate;
        let w1 = fs2 * (PI * low / srate).tan();
        let w2 = fs2 * (PI * high / srate).tan();
        let bw = w2 - w1;
        let w0sq = w1 * w2;
        let mut sections = Vec::with_capacity(order);
        // prototype poles in the upper half plane; each maps to two band-pass
        // poles whose conjugates come from the mirrored prototype pole
        for k in 0..order {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            let p = Complex64::from_polar(1.0, theta);
            if p.im < -1e-12 {
                continue;
            }
            let pb = p * bw;
            let root = (pb * pb - 4.0 * w0sq).sqrt();
            let (sa, sb) = ((pb + root) / 2.0, (pb - root) / 2.0);
            let pairs = if p.im.abs() <= 1e-12 {
                // real prototype pole: both band-pass poles share one section
                vec![(sa, sb)]
            } else {
                vec![(sa, sa.conj()), (sb, sb.conj())]
            };
            for (s1, s2) in pairs {
                let z1 = (fs2 + s1) / (fs2 - s1);
                let z2 = (fs2 + s2) / (fs2 - s2);
                sections.push(Biquad {
                    b: [1.0, 0.0, -1.0],
                    a: [1.0, -(z1 + z2).re, (z1 * z2).re],
                });
            }
        }
        let mut filter = BandPass { sections, srate };
        let center = (w0sq.sqrt() / fs2).atan() * srate / PI;
        let gain = filter.magnitude(center);
        for b in &mut filter.sections[0].b {
            *b /= gain;
        }
        Ok(filter)
    }

    /// Single-pass magnitude response at `freq` Hz.
    pub fn magnitude(&self, freq: f64) -> f64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq / self.srate);
        self.sections
            .iter()
            .map(|s| s.response(z_inv))
            .product::<Complex64>()
            .norm()
    }

    pub fn filter(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x);
        }
    }

    /// Forward-backward filtering: zero phase, squared magnitude. The edges
    /// are padded with an odd reflection of up to one second of signal.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        if x.len() < 2 {
            return x.to_vec();
        }
        let pad = (self.srate.ceil() as usize).min(x.len() - 1);
        let (first, last) = (x[0], x[x.len() - 1]);
        let mut buf = Vec::with_capacity(x.len() + 2 * pad);
        buf.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        buf.extend_from_slice(x);
        buf.extend((1..=pad).map(|i| 2.0 * last - x[x.len() - 1 - i]));
        self.filter(&mut buf);
        buf.reverse();
        self.filter(&mut buf);
        buf.reverse();
        buf[pad..pad + x.len()].to_vec()
    }
}
