//! Closed-form quantities of the two-user cancellation receiver and the
//! estimators used to read diversity orders off simulated curves.

use serde::{Deserialize, Serialize};

use crate::cxmat::{AlamoutiBlock, ComplexMat};
use crate::error::{Error, Result};
use crate::fading::RealChannelDecomposition;
use crate::montecarlo::Runner;

/// `||H||^2 = sum_i |a_i|^2 + |b_i|^2` over stacked Alamouti blocks.
pub fn stacked_norm_sq(blocks: &[AlamoutiBlock]) -> f64 {
    blocks.iter().map(AlamoutiBlock::norm_sq).sum()
}

/// `H^H G = sum_i H_i^H G_i`, itself an Alamouti block.
pub fn cross_block(h: &[AlamoutiBlock], g: &[AlamoutiBlock]) -> AlamoutiBlock {
    h.iter().zip(g).fold(AlamoutiBlock::ZERO, |acc, (hi, gi)| {
        acc.add(&hi.hermitian().mul(gi))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveSnrBreakdown {
    pub snr_ap: f64,
    pub h_norm_sq: f64,
    pub g_norm_sq: f64,
    /// `||H^H G||^2 / (||H||^2 ||G||^2)`
    pub lambda_norm_sq: f64,
    pub sigma_sq: f64,
    /// `(||H||^2 ||G||^2 - ||H^H G||^2) / (sigma^2 ||G||^2)`
    pub numerator_form: f64,
}

/// Post-cancellation SNR of the desired user against one interferer.
pub fn effective_snr_ap(
    h: &[AlamoutiBlock],
    g: &[AlamoutiBlock],
    sigma_sq: f64,
) -> Result<EffectiveSnrBreakdown> {
    if h.len() != g.len() || h.is_empty() {
        return Err(Error::InvalidInput(
            "H and G need the same nonzero antenna count".into(),
        ));
    }
    if !(sigma_sq > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sigma^2 must be positive, got {sigma_sq}"
        )));
    }
    let hn = stacked_norm_sq(h);
    let gn = stacked_norm_sq(g);
    if hn == 0.0 || gn == 0.0 {
        return Err(Error::Degenerate("zero channel in effective SNR".into()));
    }
    let cross = cross_block(h, g).norm_sq();
    let lambda_norm_sq = cross / (hn * gn);
    Ok(EffectiveSnrBreakdown {
        snr_ap: hn * (1.0 - lambda_norm_sq) / sigma_sq,
        h_norm_sq: hn,
        g_norm_sq: gn,
        lambda_norm_sq,
        sigma_sq,
        numerator_form: (hn * gn - cross) / (sigma_sq * gn),
    })
}

/// `(||H||^2 ||G||^2 - ||H^H G||^2) / ||G||^2`.
pub fn chi_square_statistic(h: &[AlamoutiBlock], g: &[AlamoutiBlock]) -> Result<f64> {
    let gn = stacked_norm_sq(g);
    if gn == 0.0 {
        return Err(Error::Degenerate("zero interferer channel".into()));
    }
    let hn = stacked_norm_sq(h);
    Ok(((hn * gn - cross_block(h, g).norm_sq()) / gn).max(0.0))
}

/// CDF of Gamma(2, 1), density `x e^{-x}`.
pub fn gamma2_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-x).exp() * (1.0 + x)
    }
}

/// Two-sided Kolmogorov-Smirnov distance of a sample to a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// `||H||^2 ||G||^2 - ||H^H G||^2` computed on materialized matrices.
pub fn lemma1_lhs(d: &RealChannelDecomposition) -> Result<f64> {
    let (h, g) = d.compose()?;
    let hm = crate::stcodes::equivalent_channel(&h);
    let gm = crate::stcodes::equivalent_channel(&g);
    // stacked Alamouti matrices carry each coefficient twice
    let hn = hm.frob_norm_sq() / 2.0;
    let gn = gm.frob_norm_sq() / 2.0;
    let cross = hm.hermitian().matmul(&gm)?.frob_norm_sq() / 2.0;
    Ok(hn * gn - cross)
}

/// The four linear forms pairing antenna 1 with antenna `k >= 2`, whose
/// squares sum to the left-hand side when `M = 2`.
pub fn lemma1_group_terms(d: &RealChannelDecomposition, k: usize) -> Result<[f64; 4]> {
    if k < 2 || k > d.antennas() || d.b.len() != d.a.len() {
        return Err(Error::InvalidInput(format!(
            "antenna group {k} out of range"
        )));
    }
    let a = |i: usize| d.a[i - 1];
    let b = |i: usize| d.b[i - 1];
    let o = 4 * (k - 2);
    let a_ = |i: usize| d.a[i - 1 + o];
    let b_ = |i: usize| d.b[i - 1 + o];
    let den = b(1) * b(1) + b(2) * b(2) + b(3) * b(3) + b(4) * b(4);
    if den == 0.0 {
        return Err(Error::Degenerate("b1..b4 all zero".into()));
    }
    let kk = 2.0 * (a(1) * b(4) + a(3) * b(2) + a(4) * b(1) - a(2) * b(3)) / den;
    let t1 = a_(5) * b(1) - a_(6) * b(2) - a_(7) * b(3) - a_(8) * b(4)
        + a(1) * b_(5)
        + a(2) * b_(6)
        + a(3) * b_(7)
        + a(4) * b_(8)
        - kk * (b(1) * b_(8) + b(2) * b_(7) - b(3) * b_(6) + b(4) * b_(5));
    let t2 = a_(6) * b(1) + a_(5) * b(2) - a_(8) * b(3) + a_(7) * b(4) + a(1) * b_(6)
        - a(2) * b_(5)
        + a(3) * b_(8)
        - a(4) * b_(7)
        - kk * (-b(1) * b_(7) + b(2) * b_(8) + b(3) * b_(5) + b(4) * b_(6));
    let t3 = a_(7) * b(1) + a_(8) * b(2) + a_(5) * b(3) - a_(6) * b(4) + a(1) * b_(7)
        - a(2) * b_(8)
        - a(3) * b_(5)
        + a(4) * b_(6)
        + kk * (-b(1) * b_(6) + b(2) * b_(5) - b(3) * b_(8) - b(4) * b_(7));
    let t4 =
        a_(8) * b(1) - a_(7) * b(2) + a_(6) * b(3) + a_(5) * b(4) + a(1) * b_(8) + a(2) * b_(7)
            - a(3) * b_(6)
            - a(4) * b_(5)
            + kk * (b(1) * b_(5) + b(2) * b_(6) + b(3) * b_(7) - b(4) * b_(8));
    Ok([t1, t2, t3, t4])
}

/// Sum of squares of the four forms (two receive antennas).
pub fn lemma1_rhs(d: &RealChannelDecomposition) -> Result<f64> {
    if d.antennas() != 2 {
        return Err(Error::InvalidInput(format!(
            "the identity is stated for 2 receive antennas, got {}",
            d.antennas()
        )));
    }
    Ok(lemma1_group_terms(d, 2)?.iter().map(|t| t * t).sum())
}

/// `|LHS - RHS| / max(1, |LHS|)`.
pub fn lemma1_residual(d: &RealChannelDecomposition) -> Result<f64> {
    let rhs = lemma1_rhs(d)?;
    let lhs = lemma1_lhs(d)?;
    Ok((lhs - rhs).abs() / lhs.abs().max(1.0))
}

fn pattern(x: &[f64]) -> ComplexMat {
    let &[x1, x2, x3, x4] = x else {
        unreachable!("groups have four entries")
    };
    ComplexMat::from_real(
        4,
        4,
        &[
            x1, x2, x3, x4, //
            x2, -x1, x4, -x3, //
            x3, -x4, -x1, x2, //
            x4, x3, -x2, -x1,
        ],
    )
    .expect("16 entries")
}

/// Normalized cross matrices `B_i` (one per extra antenna) and their
/// `beta_i` with `B_i B_i^T = beta_i I`.
pub fn b_matrices(b: &[f64], m: usize) -> Result<Vec<(ComplexMat, f64)>> {
    if m < 2 || b.len() != 4 * m {
        return Err(Error::InvalidInput(format!(
            "need {} b-values for M = {m}, got {}",
            4 * m,
            b.len()
        )));
    }
    let den: f64 = b[..4].iter().map(|x| x * x).sum();
    if den == 0.0 {
        return Err(Error::Degenerate("b1..b4 all zero".into()));
    }
    Ok(b[4..]
        .chunks_exact(4)
        .map(|grp| {
            let own: f64 = grp.iter().map(|x| x * x).sum();
            let scale = 1.0 / (den + own).sqrt();
            (pattern(grp).scale_real(scale), own / (den + own))
        })
        .collect())
}

/// Normalized channel correlation matrix, `4(M-1)` square, identity diagonal
/// blocks and `X_ij = B_i B_j^T` elsewhere.
pub fn channel_correlation_c(b: &[f64], m: usize) -> Result<ComplexMat> {
    let bs = b_matrices(b, m)?;
    let n = bs.len();
    let mut c = ComplexMat::zeros(4 * n, 4 * n);
    for i in 0..n {
        for k in 0..n {
            let blk = if i == k {
                ComplexMat::identity(4)
            } else {
                bs[i].0.matmul(&bs[k].0.transpose())?
            };
            c.set_block(4 * i, 4 * k, &blk);
        }
    }
    Ok(c)
}

/// `det C = (1 - beta_1 beta_2)^4` for three receive antennas.
pub fn det_c_closed_form(b: &[f64], m: usize) -> Result<f64> {
    if m != 3 {
        return Err(Error::InvalidInput(format!(
            "closed form is for M = 3, got {m}"
        )));
    }
    let bs = b_matrices(b, m)?;
    Ok((1.0 - bs[0].1 * bs[1].1).powi(4))
}

/// `sum_i beta_i / (lambda + beta_i - 1) - 1`.
pub fn secular(betas: &[f64], lambda: f64) -> f64 {
    betas.iter().map(|&b| b / (lambda + b - 1.0)).sum::<f64>() - 1.0
}

/// Scale-aware residual of the secular equation.
pub fn secular_residual(betas: &[f64], lambda: f64) -> f64 {
    let terms: f64 = betas.iter().map(|&b| (b / (lambda + b - 1.0)).abs()).sum();
    secular(betas, lambda).abs() / (1.0 + terms)
}

/// Root of the secular equation stored as an offset from its nearest pole
/// `1 - beta_o`, so denominators `delta + (beta_m - beta_o)` keep full
/// relative accuracy even when the root hugs a pole.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecularRoot {
    pub lambda: f64,
    pub origin_beta: f64,
    pub offset: f64,
    /// Scale-aware residual evaluated in the offset form.
    pub residual: f64,
}

impl SecularRoot {
    /// `1 / (lambda + beta - 1)` without cancellation.
    pub fn inverse_gap(&self, beta: f64) -> f64 {
        1.0 / (self.offset + (beta - self.origin_beta))
    }
}

fn offset_secular(betas: &[f64], origin: f64, delta: f64) -> (f64, f64) {
    let mut sum = 0.0;
    let mut abs = 0.0;
    for &b in betas {
        let t = b / (delta + (b - origin));
        sum += t;
        abs += t.abs();
    }
    (sum - 1.0, abs)
}

/// Roots of `sum_i beta_i / (lambda + beta_i - 1) = 1`, ascending. With the
/// betas sorted ascending there is exactly one root in each
/// `(1 - beta_{k+1}, 1 - beta_k)` and one in `(1 - beta_1, 1 + sum beta]`.
pub fn lemma3_roots(betas: &[f64]) -> Result<Vec<f64>> {
    Ok(lemma3_roots_detailed(betas)?
        .into_iter()
        .map(|r| r.lambda)
        .collect())
}

pub fn lemma3_roots_detailed(betas: &[f64]) -> Result<Vec<SecularRoot>> {
    if betas.is_empty() {
        return Err(Error::InvalidInput("no betas".into()));
    }
    if let Some(b) = betas.iter().find(|&&b| !(b > 0.0 && b < 1.0)) {
        return Err(Error::InvalidInput(format!("beta {b} outside (0, 1)")));
    }
    let mut sorted = betas.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("betas must be distinct".into()));
    }
    let n = sorted.len();
    let mut roots = Vec::with_capacity(n);
    for k in (0..n).rev() {
        let left = sorted[k];
        // coarse location decides which pole to measure from
        let lo = 1.0 - left;
        let hi = if k == 0 {
            1.0 + sorted.iter().sum::<f64>()
        } else {
            1.0 - sorted[k - 1]
        };
        let coarse = bisect_decreasing(|l| secular(&sorted, l), lo, hi);
        let (origin, dlo, dhi) = if k > 0 && hi - coarse < coarse - lo {
            let right = sorted[k - 1];
            (right, right - left, 0.0)
        } else {
            (left, 0.0, hi - lo)
        };
        let delta = bisect_decreasing(|d| offset_secular(&sorted, origin, d).0, dlo, dhi);
        let (f, abs) = offset_secular(&sorted, origin, delta);
        roots.push(SecularRoot {
            lambda: (1.0 - origin) + delta,
            origin_beta: origin,
            offset: delta,
            residual: f.abs() / (1.0 + abs),
        });
    }
    Ok(roots)
}

/// Root of a function decreasing from `+inf` at `lo` to `-inf` or negative
/// at `hi`, bisected down to adjacent floats.
fn bisect_decreasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (fl, fh) = (f(lo), f(hi));
    if fl.is_finite() && (!fh.is_finite() || fl.abs() <= fh.abs()) {
        lo
    } else {
        hi
    }
}

/// Eigen evidence for the correlation matrix built from `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralCertificate {
    pub betas: Vec<f64>,
    pub lambda_stars: Vec<f64>,
    /// `coeffs[i][m] = 1 / (lambda*_i + beta_m - 1)`.
    pub coeffs: Vec<Vec<f64>>,
    pub s_values: Vec<f64>,
    /// Largest scale-aware secular residual.
    pub root_residual: f64,
    /// Smallest gap between distinct roots.
    pub min_root_gap: f64,
    /// `max_i ||C u_i - lambda*_i u_i|| / ||u_i||`.
    pub eig_residual: f64,
    /// `max_{i!=j} ||u_i^T u_j|| / (||u_i|| ||u_j||)`.
    pub orth_residual: f64,
    /// `max |U^T C U - diag(S_i lambda*_i)| / max(S_i lambda*_i)` per block row.
    pub diag_check: f64,
    /// Smallest eigenvalue of C from the Jacobi solver.
    pub min_eigenvalue: f64,
    /// Largest distance between the Jacobi spectrum and the lambda* (each x4).
    pub spectrum_mismatch: f64,
}

impl SpectralCertificate {
    pub fn passes(&self, tol: f64) -> bool {
        self.lambda_stars.len() == self.betas.len()
            && self.lambda_stars.iter().all(|&l| l > 0.0)
            && self.min_root_gap > 1e-12
            && self.root_residual < 1e-12
            && self.eig_residual < tol
            && self.orth_residual < tol
            && self.diag_check < tol
            && self.min_eigenvalue > 0.0
    }
}

pub fn lemma2_verify(b: &[f64], m: usize) -> Result<SpectralCertificate> {
    if m < 3 {
        return Err(Error::InvalidInput(format!(
            "certificate needs M >= 3, got {m}"
        )));
    }
    let bs = b_matrices(b, m)?;
    let c = channel_correlation_c(b, m)?;
    let betas: Vec<f64> = bs.iter().map(|(_, beta)| *beta).collect();
    let detailed = lemma3_roots_detailed(&betas)?;
    let roots: Vec<f64> = detailed.iter().map(|r| r.lambda).collect();
    let n = betas.len();

    let coeffs: Vec<Vec<f64>> = detailed
        .iter()
        .map(|r| betas.iter().map(|&beta| r.inverse_gap(beta)).collect())
        .collect();
    let s_values: Vec<f64> = coeffs
        .iter()
        .map(|a| a.iter().zip(&betas).map(|(ai, beta)| beta * ai * ai).sum())
        .collect();
    let us: Vec<ComplexMat> = coeffs
        .iter()
        .map(|a| {
            let parts: Vec<ComplexMat> = a
                .iter()
                .zip(&bs)
                .map(|(ai, (bm, _))| bm.scale_real(*ai))
                .collect();
            ComplexMat::vstack(&parts).expect("equal widths")
        })
        .collect();
    let unorm: Vec<f64> = us.iter().map(|u| (u.frob_norm_sq() / 4.0).sqrt()).collect();

    let mut eig_residual: f64 = 0.0;
    for ((u, &l), &un) in us.iter().zip(&roots).zip(&unorm) {
        let r = c.matmul(u)?.sub(&u.scale_real(l))?;
        eig_residual = eig_residual.max((r.frob_norm_sq() / 4.0).sqrt() / un);
    }
    let mut orth_residual: f64 = 0.0;
    for i in 0..n {
        for k in 0..n {
            if i != k {
                let g = us[i].transpose().matmul(&us[k])?;
                orth_residual = orth_residual.max(g.max_abs() / (unorm[i] * unorm[k]));
            }
        }
    }
    let u_all = ComplexMat::hstack(&us)?;
    let d = u_all.transpose().matmul(&c)?.matmul(&u_all)?;
    let mut diag_check: f64 = 0.0;
    for i in 0..4 * n {
        let scale = s_values[i / 4] * roots[i / 4];
        for k in 0..4 * n {
            let want = if i == k { scale } else { 0.0 };
            let denom = scale.max(s_values[k / 4] * roots[k / 4]);
            diag_check = diag_check.max((d[(i, k)].re - want).abs() / denom);
        }
    }

    let spectrum: Vec<f64> = c.eig_real_sym()?.into_iter().map(|(l, _)| l).collect();
    let mut expected: Vec<f64> = roots.iter().flat_map(|&l| [l; 4]).collect();
    expected.sort_by(f64::total_cmp);
    let spectrum_mismatch = spectrum
        .iter()
        .zip(&expected)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max);

    let mut sorted = roots.clone();
    sorted.sort_by(f64::total_cmp);
    let min_root_gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);

    Ok(SpectralCertificate {
        root_residual: detailed.iter().map(|r| r.residual).fold(0.0, f64::max),
        min_root_gap,
        eig_residual,
        orth_residual,
        diag_check,
        min_eigenvalue: spectrum.first().copied().unwrap_or(0.0),
        spectrum_mismatch,
        betas,
        lambda_stars: roots,
        coeffs,
        s_values,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    pub x: f64,
    pub y: f64,
    pub trials: u64,
    pub errors: u64,
    /// The stop rule hit the trial cap before reaching the minimum count.
    #[serde(default)]
    pub low_confidence: bool,
}

impl SimPoint {
    pub fn new(x: f64, errors: u64, trials: u64, low_confidence: bool) -> Self {
        let y = if trials == 0 {
            0.0
        } else {
            errors as f64 / trials as f64
        };
        Self {
            x,
            y,
            trials,
            errors,
            low_confidence,
        }
    }

    /// Wilson score interval at 95%.
    pub fn interval95(&self) -> (f64, f64) {
        wilson(self.errors, self.trials, 1.959_963_984_540_054)
    }
}

pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub label: String,
    pub seed: u64,
    pub points: Vec<SimPoint>,
}

/// Weighted least-squares slope of `y` on `x`.
pub fn weighted_slope(x: &[f64], y: &[f64], w: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() != w.len() || x.len() < 2 {
        return Err(Error::InvalidInput(
            "slope fit needs at least 2 matching points".into(),
        ));
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, b), c)| c * (a - mx) * (b - my))
        .sum();
    let sxx: f64 = x.iter().zip(w).map(|(a, c)| c * (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput(
            "slope fit needs distinct x values".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// Builds the outage curve from exceedance counts and fits
/// `log P` against `log eps`, weighting each point by its count.
pub fn outage_fit(
    label: &str,
    seed: u64,
    eps_grid: &[f64],
    counts: &[u64],
    samples: u64,
    min_count: u64,
) -> Result<(f64, SimResult)> {
    if eps_grid.len() < 3 || eps_grid.windows(2).any(|w| w[0] >= w[1]) || eps_grid[0] <= 0.0 {
        return Err(Error::InvalidInput(
            "eps grid must be positive, ascending, >= 3 points".into(),
        ));
    }
    if counts.len() != eps_grid.len() {
        return Err(Error::InvalidInput(
            "one count per eps value required".into(),
        ));
    }
    for (&x, &count) in eps_grid.iter().zip(counts) {
        if count < min_count {
            return Err(Error::InsufficientCounts {
                x,
                count,
                required: min_count,
            });
        }
    }
    let points: Vec<SimPoint> = eps_grid
        .iter()
        .zip(counts)
        .map(|(&x, &k)| SimPoint::new(x, k, samples, false))
        .collect();
    let lx: Vec<f64> = points.iter().map(|p| p.x.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.y.ln()).collect();
    let w: Vec<f64> = points.iter().map(|p| p.errors as f64).collect();
    let slope = weighted_slope(&lx, &ly, &w)?;
    Ok((
        slope,
        SimResult {
            label: label.to_string(),
            seed,
            points,
        },
    ))
}

/// Empirical `P{X < eps}` over `samples` draws of `sampler(trial)` and the
/// fitted log-log slope.
pub fn outage_diversity_estimate<F>(
    runner: &Runner,
    sampler: F,
    eps_grid: &[f64],
    samples: u64,
    min_count: u64,
) -> Result<(f64, SimResult)>
where
    F: Fn(u64) -> f64 + Sync,
{
    let grid = eps_grid.to_vec();
    let counts: Vec<u64> = runner.run_fixed(samples, |t| {
        let x = sampler(t);
        grid.iter().map(|&e| u64::from(x < e)).collect::<Vec<u64>>()
    });
    let mut counts = counts;
    counts.resize(eps_grid.len(), 0);
    outage_fit("outage", 0, eps_grid, &counts, samples, min_count)
}

/// Negative slope of `log10 y` against `log10 snr` over points with
/// `x` (dB) inside `window`, weighted by error counts.
pub fn ber_diversity_estimate(
    curve: &SimResult,
    window: (f64, f64),
    min_errors: u64,
) -> Result<f64> {
    let inside: Vec<&SimPoint> = curve
        .points
        .iter()
        .filter(|p| p.x >= window.0 - 1e-9 && p.x <= window.1 + 1e-9)
        .collect();
    if inside.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "{} points inside [{}, {}] dB; need 3",
            inside.len(),
            window.0,
            window.1
        )));
    }
    if let Some(p) = inside.iter().find(|p| p.errors < min_errors) {
        return Err(Error::InsufficientCounts {
            x: p.x,
            count: p.errors,
            required: min_errors,
        });
    }
    let x: Vec<f64> = inside.iter().map(|p| p.x / 10.0).collect();
    let y: Vec<f64> = inside.iter().map(|p| p.y.log10()).collect();
    let w: Vec<f64> = inside.iter().map(|p| p.errors as f64).collect();
    Ok(-weighted_slope(&x, &y, &w)?)
}

/// Unweighted variant for constructed curves.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    weighted_slope(&x, &y, &vec![1.0; points.len()])
}
