//! Rayleigh block fading, additive noise and the forward transmission model.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cxmat::{AlamoutiBlock, ComplexMat};
use crate::error::{Error, Result};

/// Circularly-symmetric complex Gaussian with `E|z|^2 = 1`.
pub fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Independent stream for one Monte Carlo trial. Streams for distinct
/// `(point, trial)` pairs never overlap, so trials can run in any order.
pub fn trial_rng(seed: u64, point: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(point.wrapping_add(0x5eed))));
    rng.set_stream(trial);
    rng
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fading coefficients `coeff(user, tx, rx)` for one block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub users: usize,
    pub tx: usize,
    pub rx: usize,
    coeffs: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn new(users: usize, tx: usize, rx: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != users * tx * rx {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients for ({users}, {tx}, {rx}), got {}",
                users * tx * rx,
                coeffs.len()
            )));
        }
        Ok(Self {
            users,
            tx,
            rx,
            coeffs,
        })
    }

    /// Builds from `per_user[j][n][m]`.
    pub fn from_nested(per_user: &[Vec<Vec<Complex64>>]) -> Result<Self> {
        let users = per_user.len();
        let tx = per_user.first().map_or(0, Vec::len);
        let rx = per_user.first().and_then(|u| u.first()).map_or(0, Vec::len);
        let mut coeffs = Vec::with_capacity(users * tx * rx);
        for u in per_user {
            if u.len() != tx || u.iter().any(|row| row.len() != rx) {
                return Err(Error::InvalidInput("ragged channel tensor".into()));
            }
            coeffs.extend(u.iter().flatten().copied());
        }
        Self::new(users, tx, rx, coeffs)
    }

    pub fn coeff(&self, user: usize, tx: usize, rx: usize) -> Complex64 {
        self.coeffs[(user * self.tx + tx) * self.rx + rx]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `[tx][rx]` coefficients of one user.
    pub fn user_coeffs(&self, user: usize) -> Vec<Vec<Complex64>> {
        (0..self.tx)
            .map(|n| (0..self.rx).map(|m| self.coeff(user, n, m)).collect())
            .collect()
    }

    /// Per receive antenna Alamouti block `(h1m, h2m)`; requires 2 transmit antennas.
    pub fn alamouti_blocks(&self, user: usize) -> Vec<AlamoutiBlock> {
        assert_eq!(self.tx, 2, "Alamouti blocks need 2 transmit antennas");
        (0..self.rx)
            .map(|m| AlamoutiBlock::new(self.coeff(user, 0, m), self.coeff(user, 1, m)))
            .collect()
    }

    /// Per receive antenna 4-coefficient vector; requires 4 transmit antennas.
    pub fn qostbc_vectors(&self, user: usize) -> Vec<[Complex64; 4]> {
        assert_eq!(self.tx, 4, "QOSTBC vectors need 4 transmit antennas");
        (0..self.rx)
            .map(|m| std::array::from_fn(|n| self.coeff(user, n, m)))
            .collect()
    }
}

/// i.i.d. CN(0,1) coefficients.
pub fn sample_channel(
    users: usize,
    tx: usize,
    rx: usize,
    rng: &mut impl Rng,
) -> ChannelRealization {
    let coeffs = (0..users * tx * rx)
        .map(|_| complex_gaussian(rng))
        .collect();
    ChannelRealization {
        users,
        tx,
        rx,
        coeffs,
    }
}

/// AWGN with variance `2 / snr` per complex sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub snr: f64,
    pub per_sample_variance: f64,
}

impl NoiseModel {
    pub fn from_snr(snr: f64) -> Result<Self> {
        if !(snr.is_finite() && snr > 0.0) {
            return Err(Error::InvalidInput(format!(
                "snr must be positive and finite, got {snr}"
            )));
        }
        Ok(Self {
            snr,
            per_sample_variance: 2.0 / snr,
        })
    }

    pub fn from_db(snr_db: f64) -> Result<Self> {
        Self::from_snr(10f64.powf(snr_db / 10.0))
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr.log10()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Complex64 {
        complex_gaussian(rng) * self.per_sample_variance.sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseMode {
    Off,
    Awgn(NoiseModel),
}

impl NoiseMode {
    pub fn variance(&self) -> f64 {
        match self {
            Self::Off => 0.0,
            Self::Awgn(n) => n.per_sample_variance,
        }
    }
}

/// `r[t][m] = sum_j sum_n X_j[t][n] coeff(j, n, m) + noise`.
pub fn transmit(
    codewords: &[ComplexMat],
    channel: &ChannelRealization,
    noise: NoiseMode,
    rng: &mut impl Rng,
) -> Result<ComplexMat> {
    if codewords.len() != channel.users {
        return Err(Error::InvalidInput(format!(
            "{} codewords for {} users",
            codewords.len(),
            channel.users
        )));
    }
    let span = codewords.first().map_or(0, ComplexMat::rows);
    for x in codewords {
        if x.rows() != span || x.cols() != channel.tx {
            return Err(Error::DimensionMismatch {
                op: "transmit",
                left: x.shape(),
                right: (span, channel.tx),
            });
        }
    }
    let mut out = ComplexMat::zeros(span, channel.rx);
    for (j, x) in codewords.iter().enumerate() {
        for t in 0..span {
            for m in 0..channel.rx {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..channel.tx {
                    acc += x[(t, n)] * channel.coeff(j, n, m);
                }
                out[(t, m)] += acc;
            }
        }
    }
    if let NoiseMode::Awgn(model) = noise {
        for t in 0..span {
            for m in 0..channel.rx {
                out[(t, m)] += model.sample(rng);
            }
        }
    }
    Ok(out)
}

/// Real unpacking of a desired/interferer block pair over `M` receive
/// antennas: 4 reals per antenna per user.
///
/// Antenna 1: `h11 = a1 - j a2`, `h21 = -a3 + j a4`, `g11 = b1 + j b2`,
/// `g21 = b3 - j b4`. Antenna `i >= 2`: `h1i = -a - j a'`, `h2i = -a'' - j a'''`,
/// `g1i = b + j b'`, `g2i = b'' + j b'''` on that antenna's group of four.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealChannelDecomposition {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl RealChannelDecomposition {
    pub fn antennas(&self) -> usize {
        self.a.len() / 4
    }

    /// 1-based accessors matching the usual `a_k`, `b_k` numbering.
    pub fn a_(&self, k: usize) -> f64 {
        self.a[k - 1]
    }

    pub fn b_(&self, k: usize) -> f64 {
        self.b[k - 1]
    }

    pub fn compose(&self) -> Result<(Vec<AlamoutiBlock>, Vec<AlamoutiBlock>)> {
        if self.a.len() != self.b.len() || self.a.is_empty() || !self.a.len().is_multiple_of(4) {
            return Err(Error::InvalidInput(format!(
                "decomposition lengths must be equal nonzero multiples of 4, got {} and {}",
                self.a.len(),
                self.b.len()
            )));
        }
        let c = Complex64::new;
        let mut h = Vec::with_capacity(self.antennas());
        let mut g = Vec::with_capacity(self.antennas());
        for (i, (a, b)) in self
            .a
            .chunks_exact(4)
            .zip(self.b.chunks_exact(4))
            .enumerate()
        {
            if i == 0 {
                h.push(AlamoutiBlock::new(c(a[0], -a[1]), c(-a[2], a[3])));
                g.push(AlamoutiBlock::new(c(b[0], b[1]), c(b[2], -b[3])));
            } else {
                h.push(AlamoutiBlock::new(c(-a[0], -a[1]), c(-a[2], -a[3])));
                g.push(AlamoutiBlock::new(c(b[0], b[1]), c(b[2], b[3])));
            }
        }
        Ok((h, g))
    }
}

pub fn decompose_real(
    h: &[AlamoutiBlock],
    g: &[AlamoutiBlock],
) -> Result<RealChannelDecomposition> {
    if h.len() != g.len() || h.is_empty() {
        return Err(Error::InvalidInput(format!(
            "need matching nonempty block lists, got {} and {}",
            h.len(),
            g.len()
        )));
    }
    let mut a = Vec::with_capacity(4 * h.len());
    let mut b = Vec::with_capacity(4 * h.len());
    for (i, (hb, gb)) in h.iter().zip(g).enumerate() {
        if i == 0 {
            a.extend([hb.a.re, -hb.a.im, -hb.b.re, hb.b.im]);
            b.extend([gb.a.re, gb.a.im, gb.b.re, -gb.b.im]);
        } else {
            a.extend([-hb.a.re, -hb.a.im, -hb.b.re, -hb.b.im]);
            b.extend([gb.a.re, gb.a.im, gb.b.re, gb.b.im]);
        }
    }
    Ok(RealChannelDecomposition { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stcodes::alamouti_encode;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sampling_is_deterministic_and_shaped() {
        let a = sample_channel(2, 2, 2, &mut trial_rng(7, 0, 3));
        let b = sample_channel(2, 2, 2, &mut trial_rng(7, 0, 3));
        assert_eq!(a, b);
        assert_eq!(a.coeffs().len(), 8);
        let other = sample_channel(2, 2, 2, &mut trial_rng(7, 0, 4));
        assert_ne!(a, other);
        let other_point = sample_channel(2, 2, 2, &mut trial_rng(7, 1, 3));
        assert_ne!(a, other_point);
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = trial_rng(1, 0, 0);
        let n = 1_000_000;
        let (mut sr, mut si, mut sr2, mut si2, mut sri) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = complex_gaussian(&mut rng);
            sr += z.re;
            si += z.im;
            sr2 += z.re * z.re;
            si2 += z.im * z.im;
            sri += z.re * z.im;
        }
        let nf = n as f64;
        assert!((sr / nf).abs() < 0.01 && (si / nf).abs() < 0.01);
        assert!((sr2 / nf - 0.5).abs() < 0.01);
        assert!((si2 / nf - 0.5).abs() < 0.01);
        assert!((sri / nf).abs() < 0.01);
    }

    #[test]
    fn noiseless_identity_channel_returns_codeword() {
        let ch = ChannelRealization::new(
            1,
            2,
            2,
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let x = alamouti_encode(&[c(0.3, -0.2), c(-1.0, 0.5)]).unwrap();
        let r = transmit(
            std::slice::from_ref(&x),
            &ch,
            NoiseMode::Off,
            &mut trial_rng(0, 0, 0),
        )
        .unwrap();
        assert_eq!(r, x);
    }

    #[test]
    fn two_user_reception_is_linear() {
        let mut rng = trial_rng(2, 0, 0);
        let ch = sample_channel(2, 2, 3, &mut rng);
        let x1 =
            alamouti_encode(&[complex_gaussian(&mut rng), complex_gaussian(&mut rng)]).unwrap();
        let x2 =
            alamouti_encode(&[complex_gaussian(&mut rng), complex_gaussian(&mut rng)]).unwrap();
        let both = transmit(&[x1.clone(), x2.clone()], &ch, NoiseMode::Off, &mut rng).unwrap();
        let zero = ComplexMat::zeros(2, 2);
        let only1 = transmit(&[x1, zero.clone()], &ch, NoiseMode::Off, &mut rng).unwrap();
        let only2 = transmit(&[zero, x2], &ch, NoiseMode::Off, &mut rng).unwrap();
        assert!(both.max_abs_diff(&only1.add(&only2).unwrap()) < 1e-15);
    }

    #[test]
    fn transmit_rejects_bad_shapes() {
        let ch = sample_channel(2, 2, 1, &mut trial_rng(0, 0, 0));
        let x = ComplexMat::zeros(2, 2);
        assert!(transmit(
            std::slice::from_ref(&x),
            &ch,
            NoiseMode::Off,
            &mut trial_rng(0, 0, 0)
        )
        .is_err());
        assert!(transmit(
            &[x, ComplexMat::zeros(2, 3)],
            &ch,
            NoiseMode::Off,
            &mut trial_rng(0, 0, 0)
        )
        .is_err());
    }

    #[test]
    fn noise_variance_is_two_over_snr() {
        let model = NoiseModel::from_snr(1.0).unwrap();
        assert_eq!(model.per_sample_variance, 2.0);
        let mut rng = trial_rng(3, 0, 0);
        let n = 1_000_000;
        let var = (0..n)
            .map(|_| model.sample(&mut rng).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((var - 2.0).abs() < 0.01, "{var}");
        assert!(NoiseModel::from_snr(0.0).is_err());
        assert!((NoiseModel::from_db(20.0).unwrap().snr - 100.0).abs() < 1e-9);
    }

    #[test]
    fn decompose_examples() {
        let zero = c(0.0, 0.0);
        let h = [AlamoutiBlock::new(c(1.0, 0.0), zero), AlamoutiBlock::ZERO];
        let g = [AlamoutiBlock::ZERO, AlamoutiBlock::new(zero, c(0.0, -1.0))];
        let d = decompose_real(&h, &g).unwrap();
        assert_eq!((d.a_(1), d.a_(2)), (1.0, 0.0));
        // g22 = b7 + j b8 under the consistent sign table
        assert_eq!((d.b_(7), d.b_(8)), (0.0, -1.0));
    }

    #[test]
    fn decompose_round_trip() {
        let mut rng = trial_rng(4, 0, 0);
        for m in 1..=4 {
            let ch = sample_channel(2, 2, m, &mut rng);
            let (h, g) = (ch.alamouti_blocks(0), ch.alamouti_blocks(1));
            let (h2, g2) = decompose_real(&h, &g).unwrap().compose().unwrap();
            assert_eq!(h, h2);
            assert_eq!(g, g2);
        }
        assert!(decompose_real(&[], &[]).is_err());
    }
}
