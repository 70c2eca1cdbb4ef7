//! Joint ML detection, array-processing interference cancellation and
//! whitened ML decoding of the cancelled system.
//!
//! All detectors work in the conjugated receive domain, where each receive
//! antenna contributes `y = sum_j K_j x_j + n` with Alamouti blocks `K_j`
//! (or 4x4 quasi-orthogonal channels for the joint ML search).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cxmat::{AlamoutiBlock, ComplexMat};
use crate::error::{Error, Result};
use crate::fading::ChannelRealization;
use crate::stcodes::{
    conjugate_odd_slots, qostbc_merge, split_channel, split_received, unsplit_received,
    Constellation, StCode, SumDifferencePair,
};

/// Interferer blocks with `|a|^2 + |b|^2` at or below this are treated as a
/// degenerate draw.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Default cap on the joint ML hypothesis count.
pub const DEFAULT_SEARCH_CAP: u128 = 1 << 20;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CancellationStep {
    pub eliminated_user: usize,
    /// Index of the virtual antenna subtracted from all others.
    pub reference: usize,
    pub inputs: usize,
    pub outputs: usize,
}

/// Single-user system left after cancellation:
/// `observations = channel * x + n`, `E[n n^H] = noise_cov`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalentSystem {
    pub user: usize,
    pub channel: ComplexMat,
    pub observations: ComplexMat,
    pub noise_cov: ComplexMat,
    /// Linear map applied to the stacked per-antenna observations.
    pub transform: ComplexMat,
    pub steps: Vec<CancellationStep>,
}

impl EquivalentSystem {
    /// `||T H|| / (||T|| ||H||)` for a stacked channel `H` the transform
    /// was supposed to null.
    pub fn leakage(&self, stacked_channel: &ComplexMat) -> Result<f64> {
        let through = self.transform.matmul(stacked_channel)?;
        let scale = self.transform.frob_norm() * stacked_channel.frob_norm();
        Ok(if scale == 0.0 {
            0.0
        } else {
            through.frob_norm() / scale
        })
    }

    /// True when the desired channel vanished together with the interference.
    pub fn is_degenerate(&self) -> bool {
        self.channel.frob_norm_sq() <= DEGENERATE_TOL
    }
}

/// Decided constellation indices, one list per decided user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub users: Vec<usize>,
    pub indices: Vec<Vec<usize>>,
    pub metric: f64,
}

impl Decision {
    pub fn for_user(&self, user: usize) -> Option<&[usize]> {
        self.users
            .iter()
            .position(|&u| u == user)
            .map(|p| self.indices[p].as_slice())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// `K_i^-1 y_i - K_1^-1 y_1`
    #[default]
    First,
    /// `K_i^-1 y_i - K_L^-1 y_L`
    Last,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CancelOptions {
    pub reference: Reference,
    /// Users to eliminate, in order. `None` eliminates every non-target user
    /// from the highest index down.
    pub order: Option<Vec<usize>>,
}

impl CancelOptions {
    fn resolved_order(&self, users: usize, target: usize) -> Result<Vec<usize>> {
        let order = match &self.order {
            Some(o) => o.clone(),
            None => (0..users).rev().filter(|&u| u != target).collect(),
        };
        let mut seen = vec![false; users];
        for &u in &order {
            if u >= users || u == target || seen[u] {
                return Err(Error::InvalidInput(format!(
                    "bad cancellation order {order:?}"
                )));
            }
            seen[u] = true;
        }
        if order.len() + 1 != users {
            return Err(Error::InvalidInput(format!(
                "cancellation order {order:?} must list every user except {target}"
            )));
        }
        Ok(order)
    }
}

/// Multi-user reception in the Alamouti domain with the running linear map
/// from the original observations.
#[derive(Clone, Debug, PartialEq)]
pub struct AlamoutiDomain {
    pub observations: Vec<[Complex64; 2]>,
    /// `blocks[user][virtual antenna]`.
    pub blocks: Vec<Vec<AlamoutiBlock>>,
    /// `transform[virtual antenna][original antenna]`.
    pub transform: Vec<Vec<AlamoutiBlock>>,
    /// Variance of each conjugated-domain sample of the original observations.
    pub noise_var: f64,
    pub steps: Vec<CancellationStep>,
}

impl AlamoutiDomain {
    pub fn new(
        observations: Vec<[Complex64; 2]>,
        blocks: Vec<Vec<AlamoutiBlock>>,
        noise_var: f64,
    ) -> Result<Self> {
        let m = observations.len();
        if blocks.iter().any(|b| b.len() != m) {
            return Err(Error::InvalidInput(
                "every user needs one block per antenna".into(),
            ));
        }
        let transform = (0..m)
            .map(|i| {
                (0..m)
                    .map(|k| {
                        if i == k {
                            AlamoutiBlock::IDENTITY
                        } else {
                            AlamoutiBlock::ZERO
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            observations,
            blocks,
            transform,
            noise_var,
            steps: Vec::new(),
        })
    }

    /// Alamouti reception from raw `2 x M` samples.
    pub fn from_reception(
        received: &ComplexMat,
        channel: &ChannelRealization,
        noise_var: f64,
    ) -> Result<Self> {
        if channel.tx != 2 || received.shape() != (2, channel.rx) {
            return Err(Error::DimensionMismatch {
                op: "AlamoutiDomain::from_reception",
                left: received.shape(),
                right: (2, channel.rx),
            });
        }
        let observations = (0..channel.rx)
            .map(|m| [received[(0, m)], -received[(1, m)].conj()])
            .collect();
        let blocks = (0..channel.users)
            .map(|j| channel.alamouti_blocks(j))
            .collect();
        Self::new(observations, blocks, noise_var)
    }

    pub fn antennas(&self) -> usize {
        self.observations.len()
    }

    /// One round: `y'_i = K_i^-1 y_i - K_ref^-1 y_ref` over all virtual
    /// antennas except the reference, where `K` is the eliminated user's block.
    pub fn cancel(&mut self, user: usize, reference: Reference) -> Result<()> {
        let l = self.antennas();
        if l < 2 {
            return Err(Error::InsufficientAntennas {
                users: self.blocks.len(),
                antennas: self.transform.first().map_or(0, Vec::len),
                needed: self.blocks.len(),
            });
        }
        let mut inv = Vec::with_capacity(l);
        for k in &self.blocks[user] {
            if k.norm_sq() <= DEGENERATE_TOL {
                return Err(Error::Degenerate(format!(
                    "interferer block of user {user} vanishes"
                )));
            }
            inv.push(k.inverse()?);
        }
        let r = match reference {
            Reference::First => 0,
            Reference::Last => l - 1,
        };
        let keep: Vec<usize> = (0..l).filter(|&i| i != r).collect();

        let ref_obs = inv[r].apply(self.observations[r]);
        self.observations = keep
            .iter()
            .map(|&i| {
                let v = inv[i].apply(self.observations[i]);
                [v[0] - ref_obs[0], v[1] - ref_obs[1]]
            })
            .collect();
        for blocks in &mut self.blocks {
            let ref_blk = inv[r].mul(&blocks[r]);
            *blocks = keep
                .iter()
                .map(|&i| inv[i].mul(&blocks[i]).sub(&ref_blk))
                .collect();
        }
        let ref_row: Vec<AlamoutiBlock> = self.transform[r].iter().map(|t| inv[r].mul(t)).collect();
        self.transform = keep
            .iter()
            .map(|&i| {
                self.transform[i]
                    .iter()
                    .zip(&ref_row)
                    .map(|(t, rt)| inv[i].mul(t).sub(rt))
                    .collect()
            })
            .collect();
        self.steps.push(CancellationStep {
            eliminated_user: user,
            reference: r,
            inputs: l,
            outputs: l - 1,
        });
        Ok(())
    }

    pub fn cancel_all(&mut self, target: usize, opts: &CancelOptions) -> Result<()> {
        let users = self.blocks.len();
        if target >= users {
            return Err(Error::InvalidInput(format!(
                "target user {target} out of {users}"
            )));
        }
        let antennas = self.antennas();
        if antennas < users {
            return Err(Error::InsufficientAntennas {
                users,
                antennas,
                needed: users,
            });
        }
        for u in opts.resolved_order(users, target)? {
            self.cancel(u, opts.reference)?;
        }
        Ok(())
    }

    /// `(sum_i K_i^H y_i, sum_i ||K_i||^2)` for one user: the matched filter
    /// output and gain of the unwhitened metric.
    pub fn matched_filter(&self, user: usize) -> ([Complex64; 2], f64) {
        let mut z = [ZERO; 2];
        let mut kappa = 0.0;
        for (k, y) in self.blocks[user].iter().zip(&self.observations) {
            let v = k.hermitian().apply(*y);
            z[0] += v[0];
            z[1] += v[1];
            kappa += k.norm_sq();
        }
        (z, kappa)
    }

    pub fn transform_mat(&self) -> ComplexMat {
        let rows = self.transform.len();
        let cols = self.transform.first().map_or(0, Vec::len);
        let mut t = ComplexMat::zeros(2 * rows, 2 * cols);
        for (i, row) in self.transform.iter().enumerate() {
            for (k, blk) in row.iter().enumerate() {
                t.set_block(2 * i, 2 * k, &blk.to_mat());
            }
        }
        t
    }

    /// Materializes the system seen by `user`.
    pub fn to_system(&self, user: usize) -> EquivalentSystem {
        let l = self.antennas();
        let mut channel = ComplexMat::zeros(2 * l, 2);
        let mut obs = ComplexMat::zeros(2 * l, 1);
        for i in 0..l {
            channel.set_block(2 * i, 0, &self.blocks[user][i].to_mat());
            obs[(2 * i, 0)] = self.observations[i][0];
            obs[(2 * i + 1, 0)] = self.observations[i][1];
        }
        let transform = self.transform_mat();
        let noise_cov = transform
            .matmul(&transform.hermitian())
            .expect("square by construction")
            .scale_real(self.noise_var);
        EquivalentSystem {
            user,
            channel,
            observations: obs,
            noise_cov,
            transform,
            steps: self.steps.clone(),
        }
    }
}

/// Row-by-row cancellation of one interferer on two antennas:
/// `[[I, -G1 G2^-1], [-H2 H1^-1, I]]` applied to `(r1, r2)`. The first system
/// keeps `c` (channel `H1 - G1 G2^-1 H2`), the second keeps `s`.
pub fn ap_cancel_pair(
    r1: [Complex64; 2],
    r2: [Complex64; 2],
    h: [AlamoutiBlock; 2],
    g: [AlamoutiBlock; 2],
    noise_var: f64,
) -> Result<(EquivalentSystem, EquivalentSystem)> {
    let [h1, h2] = h;
    let [g1, g2] = g;
    for (blk, name) in [(g2, "G2"), (h1, "H1")] {
        if blk.norm_sq() <= DEGENERATE_TOL {
            return Err(Error::Degenerate(format!("{name} vanishes")));
        }
    }
    let p = g1.mul(&g2.inverse()?);
    let q = h2.mul(&h1.inverse()?);
    let build = |user: usize, weights: [AlamoutiBlock; 2], channel: AlamoutiBlock| {
        let y0 = weights[0].apply(r1);
        let y1 = weights[1].apply(r2);
        let mut transform = ComplexMat::zeros(2, 4);
        transform.set_block(0, 0, &weights[0].to_mat());
        transform.set_block(0, 2, &weights[1].to_mat());
        let noise_cov = transform
            .matmul(&transform.hermitian())
            .expect("2x4 by 4x2")
            .scale_real(noise_var);
        EquivalentSystem {
            user,
            channel: channel.to_mat(),
            observations: ComplexMat::column(&[y0[0] + y1[0], y0[1] + y1[1]]),
            noise_cov,
            transform,
            steps: vec![CancellationStep {
                eliminated_user: 1 - user,
                reference: 1 - user,
                inputs: 2,
                outputs: 1,
            }],
        }
    };
    let sys_c = build(
        0,
        [AlamoutiBlock::IDENTITY, p.scale(-1.0)],
        h1.sub(&p.mul(&h2)),
    );
    let sys_s = build(
        1,
        [q.scale(-1.0), AlamoutiBlock::IDENTITY],
        g2.sub(&q.mul(&g1)),
    );
    Ok((sys_c, sys_s))
}

/// Cancels every user but `target` from an Alamouti reception (`2 x M` raw
/// samples) and returns the remaining single-user system.
pub fn ap_cancel_general(
    received: &ComplexMat,
    channel: &ChannelRealization,
    target: usize,
    noise_var: f64,
    opts: &CancelOptions,
) -> Result<EquivalentSystem> {
    let mut dom = AlamoutiDomain::from_reception(received, channel, noise_var)?;
    dom.cancel_all(target, opts)?;
    Ok(dom.to_system(target))
}

/// Closed-form noise correlation after cancelling one interferer with
/// blocks `g` (reference antenna 1): `(M-1) x (M-1)` pattern with diagonal
/// `s/||G_{i+1}||^2 + s/||G_1||^2`, off-diagonal `s/||G_1||^2`, times `I_2`.
pub fn noise_correlation(g: &[AlamoutiBlock], sigma_sq: f64) -> Result<ComplexMat> {
    if g.len() < 2 {
        return Err(Error::InvalidInput(
            "noise correlation needs at least 2 antennas".into(),
        ));
    }
    if let Some(i) = g.iter().position(|b| b.norm_sq() <= DEGENERATE_TOL) {
        return Err(Error::Degenerate(format!("interferer block {i} vanishes")));
    }
    let base = sigma_sq / g[0].norm_sq();
    let n = g.len() - 1;
    let pattern = ComplexMat::from_fn(n, n, |i, k| {
        let v = if i == k {
            base + sigma_sq / g[i + 1].norm_sq()
        } else {
            base
        };
        Complex64::new(v, 0.0)
    });
    Ok(pattern.kron(&ComplexMat::identity(2)))
}

/// Lexicographic pair iteration helper: returns the lowest-index minimizer.
fn argmin_pairs(
    n0: usize,
    n1: usize,
    mut metric: impl FnMut(usize, usize) -> f64,
) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for i in 0..n0 {
        for k in 0..n1 {
            let m = metric(i, k);
            if m < best.2 {
                best = (i, k, m);
            }
        }
    }
    best
}

fn argmin(points: &[Complex64], metric: impl Fn(Complex64) -> f64) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &p) in points.iter().enumerate() {
        let m = metric(p);
        if m < best.1 {
            best = (i, m);
        }
    }
    best
}

/// Whitened system `L^-1 y`, `L^-1 H` with `C = L L^H`.
fn whiten(sys: &EquivalentSystem) -> Result<(ComplexMat, ComplexMat)> {
    let l = sys.noise_cov.cholesky()?;
    Ok((
        l.forward_substitute(&sys.observations)?,
        l.forward_substitute(&sys.channel)?,
    ))
}

/// Exhaustive minimizer of `(y - Hc)^H C^-1 (y - Hc)` over symbol pairs.
pub fn whitened_ml_decode(
    sys: &EquivalentSystem,
    constellation: &Constellation,
) -> Result<Decision> {
    if sys.channel.cols() != 2 {
        return Err(Error::InvalidInput(
            "whitened ML decode expects a 2-symbol system".into(),
        ));
    }
    let (y, h) = whiten(sys)?;
    let pts = &constellation.points;
    let n = y.rows();
    let (i, k, metric) = argmin_pairs(pts.len(), pts.len(), |i, k| {
        (0..n)
            .map(|r| (y[(r, 0)] - h[(r, 0)] * pts[i] - h[(r, 1)] * pts[k]).norm_sqr())
            .sum()
    });
    Ok(Decision {
        users: vec![sys.user],
        indices: vec![vec![i, k]],
        metric,
    })
}

/// `(H^H W y, H^H W H)` with `W = C^-1` (whitened) or `I`.
fn metric_terms(sys: &EquivalentSystem, whitened: bool) -> Result<(Vec<Complex64>, ComplexMat)> {
    let (y, h) = if whitened {
        whiten(sys)?
    } else {
        (sys.observations.clone(), sys.channel.clone())
    };
    let hh = h.hermitian();
    let z = hh.matmul(&y)?.col(0);
    let gram = hh.matmul(&h)?;
    Ok((z, gram))
}

/// Per-symbol decoding using `H^H C^-1 H = kappa I`: each symbol minimizes
/// `kappa |c|^2 - 2 Re(c^* z_k)` on its own.
pub fn separable_decode(
    sys: &EquivalentSystem,
    constellation: &Constellation,
    whitened: bool,
) -> Result<Decision> {
    let (z, gram) = metric_terms(sys, whitened)?;
    let kappa = gram[(0, 0)].re;
    if kappa <= DEGENERATE_TOL {
        return Err(Error::Degenerate("equivalent channel vanishes".into()));
    }
    let mut indices = Vec::with_capacity(z.len());
    let mut metric = 0.0;
    for zk in &z {
        let (i, m) = argmin(&constellation.points, |p| {
            kappa * p.norm_sqr() - 2.0 * (p.conj() * zk).re
        });
        indices.push(i);
        metric += m;
    }
    Ok(Decision {
        users: vec![sys.user],
        indices: vec![indices],
        metric,
    })
}

/// Fast Euclidean per-symbol decode straight from the Alamouti domain.
pub fn domain_decode(
    dom: &AlamoutiDomain,
    user: usize,
    constellation: &Constellation,
) -> Result<Decision> {
    let (z, kappa) = dom.matched_filter(user);
    if kappa <= DEGENERATE_TOL {
        return Err(Error::Degenerate("equivalent channel vanishes".into()));
    }
    let mut indices = Vec::with_capacity(2);
    let mut metric = 0.0;
    for zk in z {
        let (i, m) = argmin(&constellation.points, |p| {
            kappa * p.norm_sqr() - 2.0 * (p.conj() * zk).re
        });
        indices.push(i);
        metric += m;
    }
    Ok(Decision {
        users: vec![user],
        indices: vec![indices],
        metric,
    })
}

/// Hypothesis count of a joint search, saturating.
pub fn search_size(constellation: usize, symbols: usize, users: usize) -> u128 {
    (constellation as u128).saturating_pow((symbols * users) as u32)
}

/// Joint ML over every user's symbols: `argmin ||y - sum_j H_j x_j||^2` in
/// the conjugated domain; ties go to the lowest lexicographic index tuple
/// (user 0 first, then symbol order).
pub fn ml_joint_detect(
    received: &ComplexMat,
    channel: &ChannelRealization,
    code: StCode,
    constellation: &Constellation,
    cap: u128,
) -> Result<Decision> {
    let k = code.symbols();
    if channel.tx != k || received.shape() != (k, channel.rx) {
        return Err(Error::DimensionMismatch {
            op: "ml_joint_detect",
            left: received.shape(),
            right: (k, channel.rx),
        });
    }
    let q = constellation.len();
    let size = search_size(q, k, channel.users);
    if size > cap {
        return Err(Error::SearchTooLarge { size, cap });
    }
    let y = code.receive_vector(received).col(0);
    let dim = y.len();
    let slots: Vec<Vec<Complex64>> = (0..k).map(|s| code.slot_points(constellation, s)).collect();
    let per_user = q.pow(k as u32);

    // candidates[j][t] = H_j x(t), t enumerated with symbol 0 most significant
    let mut candidates = Vec::with_capacity(channel.users);
    for j in 0..channel.users {
        let h = code.equivalent_channel(&channel.user_coeffs(j))?;
        let mut list = Vec::with_capacity(per_user * dim);
        for t in 0..per_user {
            let x: Vec<Complex64> = (0..k).map(|s| slots[s][digit(t, s, k, q)]).collect();
            for r in 0..dim {
                list.push((0..k).map(|c| h[(r, c)] * x[c]).sum::<Complex64>());
            }
        }
        candidates.push(list);
    }

    let users = channel.users;
    let mut best_metric = f64::INFINITY;
    let mut best = vec![0usize; users];
    let mut choice = vec![0usize; users];
    let mut residuals = vec![y.clone(); users + 1];
    search(
        0,
        users,
        dim,
        &candidates,
        &mut residuals,
        &mut choice,
        &mut best,
        &mut best_metric,
    );

    Ok(Decision {
        users: (0..users).collect(),
        indices: best
            .iter()
            .map(|&t| (0..k).map(|s| digit(t, s, k, q)).collect())
            .collect(),
        metric: best_metric,
    })
}

fn digit(t: usize, slot: usize, k: usize, q: usize) -> usize {
    (t / q.pow((k - 1 - slot) as u32)) % q
}

#[allow(clippy::too_many_arguments)]
fn search(
    level: usize,
    users: usize,
    dim: usize,
    candidates: &[Vec<Complex64>],
    residuals: &mut [Vec<Complex64>],
    choice: &mut [usize],
    best: &mut [usize],
    best_metric: &mut f64,
) {
    let count = candidates[level].len() / dim;
    for t in 0..count {
        let cand = &candidates[level][t * dim..(t + 1) * dim];
        let (head, tail) = residuals.split_at_mut(level + 1);
        let next = &mut tail[0];
        for r in 0..dim {
            next[r] = head[level][r] - cand[r];
        }
        choice[level] = t;
        if level + 1 == users {
            let m: f64 = next.iter().map(|v| v.norm_sqr()).sum();
            if m < *best_metric {
                *best_metric = m;
                best.copy_from_slice(choice);
            }
        } else {
            search(
                level + 1,
                users,
                dim,
                candidates,
                residuals,
                choice,
                best,
                best_metric,
            );
        }
    }
}

/// Classical single-user Alamouti combining: `z = H^H y`, nearest point to
/// `z / ||H||^2` per symbol.
pub fn alamouti_matched_filter(
    received: &ComplexMat,
    blocks: &[AlamoutiBlock],
    constellation: &Constellation,
) -> Vec<usize> {
    let y = conjugate_odd_slots(received).col(0);
    let mut z = [ZERO; 2];
    let mut kappa = 0.0;
    for (m, blk) in blocks.iter().enumerate() {
        let v = blk.hermitian().apply([y[2 * m], y[2 * m + 1]]);
        z[0] += v[0];
        z[1] += v[1];
        kappa += blk.norm_sq();
    }
    z.iter()
        .map(|zk| argmin(&constellation.points, |p| (zk / kappa - p).norm_sqr()).0)
        .collect()
}

/// Sum and difference Alamouti systems left after cancelling every other
/// user of a quasi-orthogonal reception.
#[derive(Clone, Debug, PartialEq)]
pub struct QostbcSystem {
    pub plus: AlamoutiDomain,
    pub minus: AlamoutiDomain,
    pub user: usize,
    pub rotation: f64,
}

impl QostbcSystem {
    /// Per virtual antenna 4-coefficient channel after the reverse conversion.
    pub fn merged_channels(&self) -> Vec<[Complex64; 4]> {
        self.plus.blocks[self.user]
            .iter()
            .zip(&self.minus.blocks[self.user])
            .map(|(p, m)| qostbc_merge(p, m))
            .collect()
    }

    /// Per virtual antenna raw-domain samples after the reverse conversion.
    pub fn merged_observations(&self) -> Vec<[Complex64; 4]> {
        self.plus
            .observations
            .iter()
            .zip(&self.minus.observations)
            .map(|(p, m)| {
                unsplit_received(&SumDifferencePair {
                    plus: *p,
                    minus: *m,
                })
            })
            .collect()
    }

    pub fn plus_system(&self) -> EquivalentSystem {
        self.plus.to_system(self.user)
    }

    pub fn minus_system(&self) -> EquivalentSystem {
        self.minus.to_system(self.user)
    }
}

/// Splits every antenna of a `4 x M` quasi-orthogonal reception and cancels
/// all users but `target` on the sum and difference branches independently.
pub fn qostbc_ap_system(
    received: &ComplexMat,
    channel: &ChannelRealization,
    target: usize,
    noise_var: f64,
    rotation: f64,
    opts: &CancelOptions,
) -> Result<QostbcSystem> {
    if channel.tx != 4 || received.shape() != (4, channel.rx) {
        return Err(Error::DimensionMismatch {
            op: "qostbc_ap_system",
            left: received.shape(),
            right: (4, channel.rx),
        });
    }
    let mut plus_obs = Vec::with_capacity(channel.rx);
    let mut minus_obs = Vec::with_capacity(channel.rx);
    for m in 0..channel.rx {
        let sd = split_received(std::array::from_fn(|t| received[(t, m)]));
        plus_obs.push(sd.plus);
        minus_obs.push(sd.minus);
    }
    let mut plus_blocks = Vec::with_capacity(channel.users);
    let mut minus_blocks = Vec::with_capacity(channel.users);
    for j in 0..channel.users {
        let (p, q): (Vec<_>, Vec<_>) = channel
            .qostbc_vectors(j)
            .into_iter()
            .map(split_channel)
            .unzip();
        plus_blocks.push(p);
        minus_blocks.push(q);
    }
    // each branch sample is a sum of two raw samples
    let mut plus = AlamoutiDomain::new(plus_obs, plus_blocks, 2.0 * noise_var)?;
    let mut minus = AlamoutiDomain::new(minus_obs, minus_blocks, 2.0 * noise_var)?;
    plus.cancel_all(target, opts)?;
    minus.cancel_all(target, opts)?;
    Ok(QostbcSystem {
        plus,
        minus,
        user: target,
        rotation,
    })
}

/// Pairwise decode of `(c1, c3)` and `(c2, c4)`: the branch metrics only
/// couple those pairs.
pub fn qostbc_pair_decode(
    sys: &QostbcSystem,
    constellation: &Constellation,
    whitened: bool,
) -> Result<Decision> {
    let terms = |dom: &AlamoutiDomain| -> Result<([Complex64; 2], f64)> {
        if whitened {
            let (z, gram) = metric_terms(&dom.to_system(sys.user), true)?;
            Ok(([z[0], z[1]], gram[(0, 0)].re))
        } else {
            Ok(dom.matched_filter(sys.user))
        }
    };
    let (zp, kp) = terms(&sys.plus)?;
    let (zm, km) = terms(&sys.minus)?;
    if kp + km <= DEGENERATE_TOL {
        return Err(Error::Degenerate("equivalent channel vanishes".into()));
    }
    let pts = &constellation.points;
    let rot = constellation
        .clone()
        .with_rotation(sys.rotation)
        .rotated_points();
    let mut indices = [0usize; 4];
    let mut metric = 0.0;
    for k in 0..2 {
        let (i, l, m) = argmin_pairs(pts.len(), rot.len(), |i, l| {
            let (s, d) = (pts[i] + rot[l], pts[i] - rot[l]);
            kp * s.norm_sqr() - 2.0 * (s.conj() * zp[k]).re + km * d.norm_sqr()
                - 2.0 * (d.conj() * zm[k]).re
        });
        indices[k] = i;
        indices[k + 2] = l;
        metric += m;
    }
    Ok(Decision {
        users: vec![sys.user],
        indices: vec![indices.to_vec()],
        metric,
    })
}

pub fn qostbc_ap_detect(
    received: &ComplexMat,
    channel: &ChannelRealization,
    target: usize,
    noise_var: f64,
    constellation: &Constellation,
    opts: &CancelOptions,
    whitened: bool,
) -> Result<Decision> {
    let sys = qostbc_ap_system(
        received,
        channel,
        target,
        noise_var,
        constellation.rotation,
        opts,
    )?;
    qostbc_pair_decode(&sys, constellation, whitened)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::{
        complex_gaussian, sample_channel, transmit, trial_rng, NoiseMode, NoiseModel,
    };
    use crate::stcodes::{alamouti_encode, qostbc_encode, SymbolVector};
    use rand::Rng;
    use std::f64::consts::FRAC_PI_4;

    fn random_block(rng: &mut impl Rng) -> AlamoutiBlock {
        AlamoutiBlock::new(complex_gaussian(rng), complex_gaussian(rng))
    }

    struct Scenario {
        channel: ChannelRealization,
        symbols: Vec<SymbolVector>,
        received: ComplexMat,
    }

    fn scenario(
        users: usize,
        tx: usize,
        rx: usize,
        noise: NoiseMode,
        q: &Constellation,
        rng: &mut impl Rng,
    ) -> Scenario {
        let channel = sample_channel(users, tx, rx, rng);
        let code = StCode::for_antennas(tx, q.rotation).unwrap();
        let symbols: Vec<SymbolVector> = (0..users)
            .map(|j| SymbolVector::random(q, tx, j, rng))
            .collect();
        let codewords: Vec<ComplexMat> = symbols
            .iter()
            .map(|s| code.encode(&s.symbols).unwrap())
            .collect();
        let received = transmit(&codewords, &channel, noise, rng).unwrap();
        Scenario {
            channel,
            symbols,
            received,
        }
    }

    fn stacked(blocks: &[AlamoutiBlock]) -> ComplexMat {
        crate::stcodes::equivalent_channel(blocks)
    }

    #[test]
    fn ml_noiseless_recovers_everything() {
        let q = Constellation::qpsk().with_rotation(FRAC_PI_4);
        let mut rng = trial_rng(1, 0, 0);
        for (users, tx, rx) in [(1, 2, 1), (2, 2, 1), (2, 2, 2), (2, 4, 1)] {
            for _ in 0..50 {
                let s = scenario(users, tx, rx, NoiseMode::Off, &q, &mut rng);
                let code = StCode::for_antennas(tx, q.rotation).unwrap();
                let d =
                    ml_joint_detect(&s.received, &s.channel, code, &q, DEFAULT_SEARCH_CAP).unwrap();
                for j in 0..users {
                    assert_eq!(d.indices[j], s.symbols[j].indices);
                }
                assert!(d.metric < 1e-20);
            }
        }
    }

    #[test]
    fn ml_matches_brute_force_oracle() {
        let q = Constellation::qpsk();
        let mut rng = trial_rng(2, 0, 0);
        let noise = NoiseMode::Awgn(NoiseModel::from_db(3.0).unwrap());
        for _ in 0..1000 {
            let s = scenario(2, 2, 2, noise, &q, &mut rng);
            let d = ml_joint_detect(
                &s.received,
                &s.channel,
                StCode::Alamouti,
                &q,
                DEFAULT_SEARCH_CAP,
            )
            .unwrap();
            // direct codeword enumeration on the raw samples
            let mut best = (f64::INFINITY, vec![]);
            for t in 0..256usize {
                let idx = [t >> 6 & 3, t >> 4 & 3, t >> 2 & 3, t & 3];
                let x1 = alamouti_encode(&[q.point(idx[0]), q.point(idx[1])]).unwrap();
                let x2 = alamouti_encode(&[q.point(idx[2]), q.point(idx[3])]).unwrap();
                let r = transmit(&[x1, x2], &s.channel, NoiseMode::Off, &mut rng).unwrap();
                let m = r.sub(&s.received).unwrap().frob_norm_sq();
                if m < best.0 {
                    best = (m, idx.to_vec());
                }
            }
            assert_eq!(d.indices.concat(), best.1);
            assert!((d.metric - best.0).abs() < 1e-9 * best.0.max(1.0));
        }
    }

    #[test]
    fn ml_single_user_equals_matched_filter() {
        let q = Constellation::qpsk();
        let mut rng = trial_rng(3, 0, 0);
        let noise = NoiseMode::Awgn(NoiseModel::from_db(2.0).unwrap());
        for rx in 1..=3 {
            for _ in 0..300 {
                let s = scenario(1, 2, rx, noise, &q, &mut rng);
                let d = ml_joint_detect(
                    &s.received,
                    &s.channel,
                    StCode::Alamouti,
                    &q,
                    DEFAULT_SEARCH_CAP,
                )
                .unwrap();
                let mf = alamouti_matched_filter(&s.received, &s.channel.alamouti_blocks(0), &q);
                assert_eq!(d.indices[0], mf);
            }
        }
    }

    #[test]
    fn ml_cap_and_ties() {
        let q = Constellation::qam16();
        let ch = sample_channel(3, 4, 3, &mut trial_rng(4, 0, 0));
        let r = ComplexMat::zeros(4, 3);
        let code = StCode::Qostbc { rotation: 0.0 };
        assert!(matches!(
            ml_joint_detect(&r, &ch, code, &q, DEFAULT_SEARCH_CAP),
            Err(Error::SearchTooLarge { .. })
        ));
        // zero channel: every hypothesis ties, lowest tuple wins
        let zero = ChannelRealization::new(1, 2, 1, vec![ZERO; 2]).unwrap();
        let d = ml_joint_detect(
            &ComplexMat::zeros(2, 1),
            &zero,
            StCode::Alamouti,
            &q,
            1 << 20,
        )
        .unwrap();
        assert_eq!(d.indices, vec![vec![0, 0]]);
    }

    #[test]
    fn pair_cancellation_removes_interference() {
        let mut rng = trial_rng(5, 0, 0);
        for _ in 0..1000 {
            let h = [random_block(&mut rng), random_block(&mut rng)];
            let g = [random_block(&mut rng), random_block(&mut rng)];
            let c = [complex_gaussian(&mut rng), complex_gaussian(&mut rng)];
            let s = [complex_gaussian(&mut rng), complex_gaussian(&mut rng)];
            let rx = |k: usize| {
                let (a, b) = (h[k].apply(c), g[k].apply(s));
                [a[0] + b[0], a[1] + b[1]]
            };
            let (sc, ss) = ap_cancel_pair(rx(0), rx(1), h, g, 1.0).unwrap();
            let want_c = sc.channel.matmul(&ComplexMat::column(&c)).unwrap();
            let want_s = ss.channel.matmul(&ComplexMat::column(&s)).unwrap();
            assert!(sc.observations.max_abs_diff(&want_c) < 1e-12);
            assert!(ss.observations.max_abs_diff(&want_s) < 1e-12);
            assert!(sc.leakage(&stacked(&g)).unwrap() < 1e-12);
            assert!(ss.leakage(&stacked(&h)).unwrap() < 1e-12);
            // unnormalized row is -G1 times the normalized G2^-1 H2 - G1^-1 H1 form
            let norm = g[1]
                .inverse()
                .unwrap()
                .mul(&h[1])
                .sub(&g[0].inverse().unwrap().mul(&h[0]));
            let scaled = g[0].mul(&norm).scale(-1.0);
            assert!(sc.channel.max_abs_diff(&scaled.to_mat()) < 1e-12);
            let expect_var = 1.0 + g[0].norm_sq() / g[1].norm_sq();
            assert!(
                sc.noise_cov
                    .max_abs_diff(&ComplexMat::identity(2).scale_real(expect_var))
                    < 1e-12
            );
        }
    }

    #[test]
    fn pair_cancellation_degenerate_case() {
        let mut rng = trial_rng(6, 0, 0);
        let (h1, g1) = (random_block(&mut rng), random_block(&mut rng));
        let zero = [ZERO; 2];
        let (sc, _) = ap_cancel_pair(zero, zero, [h1, h1], [g1, g1], 1.0).unwrap();
        assert!(sc.is_degenerate());
        assert!(ap_cancel_pair(zero, zero, [h1, h1], [g1, AlamoutiBlock::ZERO], 1.0).is_err());
    }

    #[test]
    fn general_matches_pair_decisions() {
        let q = Constellation::qpsk();
        let mut rng = trial_rng(7, 0, 0);
        let noise = NoiseMode::Awgn(NoiseModel::from_db(8.0).unwrap());
        let var = NoiseModel::from_db(8.0).unwrap().per_sample_variance;
        for _ in 0..1000 {
            let s = scenario(2, 2, 2, noise, &q, &mut rng);
            let (h, g) = (s.channel.alamouti_blocks(0), s.channel.alamouti_blocks(1));
            let y = conjugate_odd_slots(&s.received).col(0);
            let (sc, ss) =
                ap_cancel_pair([y[0], y[1]], [y[2], y[3]], [h[0], h[1]], [g[0], g[1]], var)
                    .unwrap();
            let gen_c =
                ap_cancel_general(&s.received, &s.channel, 0, var, &CancelOptions::default())
                    .unwrap();
            let gen_s =
                ap_cancel_general(&s.received, &s.channel, 1, var, &CancelOptions::default())
                    .unwrap();
            for (pair, general) in [(&sc, &gen_c), (&ss, &gen_s)] {
                for whitened in [false, true] {
                    let a = separable_decode(pair, &q, whitened).unwrap();
                    let b = separable_decode(general, &q, whitened).unwrap();
                    assert_eq!(a.indices, b.indices);
                }
            }
        }
    }

    #[test]
    fn general_three_antennas_matches_direct_formula() {
        let mut rng = trial_rng(8, 0, 0);
        let q = Constellation::qpsk();
        for _ in 0..200 {
            let s = scenario(2, 2, 3, NoiseMode::Off, &q, &mut rng);
            let sys = ap_cancel_general(&s.received, &s.channel, 0, 1.0, &CancelOptions::default())
                .unwrap();
            let (h, g) = (s.channel.alamouti_blocks(0), s.channel.alamouti_blocks(1));
            let y = conjugate_odd_slots(&s.received).col(0);
            for i in 0..2 {
                let gi = g[i + 1].inverse().unwrap();
                let g1 = g[0].inverse().unwrap();
                let ch = gi.mul(&h[i + 1]).sub(&g1.mul(&h[0]));
                let a = gi.apply([y[2 * i + 2], y[2 * i + 3]]);
                let b = g1.apply([y[0], y[1]]);
                assert!(sys.channel.block(2 * i, 0, 2, 2).max_abs_diff(&ch.to_mat()) < 1e-12);
                assert!((sys.observations[(2 * i, 0)] - (a[0] - b[0])).norm() < 1e-12);
                assert!((sys.observations[(2 * i + 1, 0)] - (a[1] - b[1])).norm() < 1e-12);
            }
            assert!(sys.leakage(&stacked(&g)).unwrap() < 1e-12);
            let closed = noise_correlation(&g, 0.7).unwrap();
            let from_map = sys
                .transform
                .matmul(&sys.transform.hermitian())
                .unwrap()
                .scale_real(0.7);
            assert!(closed.max_abs_diff(&from_map) < 1e-12 * closed.max_abs());
        }
    }

    #[test]
    fn three_users_noiseless() {
        let q = Constellation::qpsk();
        let mut rng = trial_rng(9, 0, 0);
        for reference in [Reference::First, Reference::Last] {
            let opts = CancelOptions {
                reference,
                order: None,
            };
            for _ in 0..1000 {
                let s = scenario(3, 2, 3, NoiseMode::Off, &q, &mut rng);
                for target in 0..3 {
                    let sys =
                        ap_cancel_general(&s.received, &s.channel, target, 1.0, &opts).unwrap();
                    assert_eq!(sys.channel.rows(), 2);
                    for other in (0..3).filter(|&u| u != target) {
                        assert!(
                            sys.leakage(&stacked(&s.channel.alamouti_blocks(other)))
                                .unwrap()
                                < 1e-10
                        );
                    }
                    let d = separable_decode(&sys, &q, true).unwrap();
                    assert_eq!(d.indices[0], s.symbols[target].indices);
                }
            }
        }
    }

    #[test]
    fn cancellation_rejects_bad_input() {
        let q = Constellation::qpsk();
        let mut rng = trial_rng(10, 0, 0);
        let s = scenario(3, 2, 2, NoiseMode::Off, &q, &mut rng);
        assert!(matches!(
            ap_cancel_general(&s.received, &s.channel, 0, 1.0, &CancelOptions::default()),
            Err(Error::InsufficientAntennas { .. })
        ));
        let bad = CancelOptions {
            order: Some(vec![0]),
            ..Default::default()
        };
        let s2 = scenario(2, 2, 2, NoiseMode::Off, &q, &mut rng);
        assert!(ap_cancel_general(&s2.received, &s2.channel, 0, 1.0, &bad).is_err());
        let mut zeroed = vec![s2.channel.user_coeffs(0)];
        zeroed.push(vec![vec![ZERO; 2], vec![ZERO; 2]]);
        let zc = ChannelRealization::from_nested(&zeroed).unwrap();
        assert!(matches!(
            ap_cancel_general(&s2.received, &zc, 0, 1.0, &CancelOptions::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn noise_correlation_examples() {
        let unit = AlamoutiBlock::IDENTITY;
        let c = noise_correlation(&[unit; 3], 1.0).unwrap();
        let want = ComplexMat::from_real(2, 2, &[2.0, 1.0, 1.0, 2.0])
            .unwrap()
            .kron(&ComplexMat::identity(2));
        assert_eq!(c, want);
        let mut rng = trial_rng(11, 0, 0);
        let g = [random_block(&mut rng), random_block(&mut rng)];
        let c2 = noise_correlation(&g, 0.5).unwrap();
        let v = 0.5 / g[1].norm_sq() + 0.5 / g[0].norm_sq();
        assert!(c2.max_abs_diff(&ComplexMat::identity(2).scale_real(v)) < 1e-15);
        assert!(noise_correlation(&[unit, AlamoutiBlock::ZERO], 1.0).is_err());

        let g4: Vec<AlamoutiBlock> = (0..4).map(|_| random_block(&mut rng)).collect();
        let c4 = noise_correlation(&g4, 1.0).unwrap();
        let eig = c4.eig_real_sym().unwrap();
        assert_eq!(eig.len(), 6);
        assert!(eig.iter().all(|(l, _)| *l > 0.0));
        assert_eq!(c4.numerical_rank(1e-9), 6);
    }

    #[test]
    fn noise_correlation_matches_monte_carlo() {
        let mut rng = trial_rng(12, 0, 0);
        let g: Vec<AlamoutiBlock> = (0..3).map(|_| random_block(&mut rng)).collect();
        let h: Vec<AlamoutiBlock> = (0..3).map(|_| random_block(&mut rng)).collect();
        let sigma_sq = 0.8;
        let closed = noise_correlation(&g, sigma_sq).unwrap();
        let n = 100_000;
        let mut acc = ComplexMat::zeros(4, 4);
        for _ in 0..n {
            let obs: Vec<[Complex64; 2]> = (0..3)
                .map(|_| {
                    let s = sigma_sq.sqrt();
                    [
                        complex_gaussian(&mut rng) * s,
                        complex_gaussian(&mut rng) * s,
                    ]
                })
                .collect();
            let mut dom = AlamoutiDomain::new(obs, vec![h.clone(), g.clone()], sigma_sq).unwrap();
            dom.cancel(1, Reference::First).unwrap();
            let v: Vec<Complex64> = dom.observations.iter().flatten().copied().collect();
            for i in 0..4 {
                for k in 0..4 {
                    acc[(i, k)] += v[i] * v[k].conj();
                }
            }
        }
        let emp = acc.scale_real(1.0 / n as f64);
        for i in 0..4 {
            assert!((emp[(i, i)].re - closed[(i, i)].re).abs() < 0.02 * closed[(i, i)].re);
        }
        assert!(emp.max_abs_diff(&closed) < 0.02 * closed.max_abs());
    }

    #[test]
    fn whitened_equals_euclidean_for_white_noise() {
        let q = Constellation::qpsk();
        let mut rng = trial_rng(13, 0, 0);
        for _ in 0..500 {
            let blocks: Vec<AlamoutiBlock> = (0..2).map(|_| random_block(&mut rng)).collect();
            let obs: Vec<Complex64> = (0..4).map(|_| complex_gaussian(&mut rng)).collect();
            let sys = EquivalentSystem {
                user: 0,
                channel: stacked(&blocks),
                observations: ComplexMat::column(&obs),
                noise_cov: ComplexMat::identity(4).scale_real(0.3),
                transform: ComplexMat::identity(4),
                steps: vec![],
            };
            let w = whitened_ml_decode(&sys, &q).unwrap();
            let e = separable_decode(&sys, &q, false).unwrap();
            assert_eq!(w.indices, e.indices);
        }
    }

    #[test]
    fn whitened_joint_equals_separate_decoding() {
        let q = Constellation::qpsk();
        let mut rng = trial_rng(14, 0, 0);
        let noise = NoiseModel::from_db(4.0).unwrap();
        for _ in 0..10_000 {
            let s = scenario(2, 2, 3, NoiseMode::Awgn(noise), &q, &mut rng);
            let sys = ap_cancel_general(
                &s.received,
                &s.channel,
                0,
                noise.per_sample_variance,
                &CancelOptions::default(),
            )
            .unwrap();
            let joint = whitened_ml_decode(&sys, &q).unwrap();
            let sep = separable_decode(&sys, &q, true).unwrap();
            assert_eq!(joint.indices, sep.indices);
        }
    }

    #[test]
    fn inverse_noise_correlation_has_real_scalar_blocks() {
        let mut rng = trial_rng(15, 0, 0);
        for _ in 0..100 {
            let g: Vec<AlamoutiBlock> = (0..3).map(|_| random_block(&mut rng)).collect();
            let inv = noise_correlation(&g, 1.3).unwrap().inverse().unwrap();
            for (bi, bk) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
                let blk = inv.block(bi, bk, 2, 2);
                assert!(blk.max_imag() < 1e-12);
                assert!((blk[(0, 0)] - blk[(1, 1)]).norm() < 1e-12);
                assert!(blk[(0, 1)].norm() < 1e-12 && blk[(1, 0)].norm() < 1e-12);
            }
            assert!((inv[(0, 2)] - inv[(2, 0)]).norm() < 1e-12);
        }
    }

    #[test]
    fn qostbc_noiseless_recovery() {
        let q = Constellation::qpsk().with_rotation(FRAC_PI_4);
        let mut rng = trial_rng(16, 0, 0);
        for (users, rx) in [(1, 1), (2, 2), (2, 3), (3, 3)] {
            for _ in 0..300 {
                let s = scenario(users, 4, rx, NoiseMode::Off, &q, &mut rng);
                for target in 0..users {
                    for whitened in [false, true] {
                        let d = qostbc_ap_detect(
                            &s.received,
                            &s.channel,
                            target,
                            1.0,
                            &q,
                            &CancelOptions::default(),
                            whitened,
                        )
                        .unwrap();
                        assert_eq!(d.indices[0], s.symbols[target].indices, "J={users} M={rx}");
                    }
                }
            }
        }
    }

    #[test]
    fn qostbc_merged_system_is_consistent() {
        let q = Constellation::qpsk().with_rotation(FRAC_PI_4);
        let mut rng = trial_rng(17, 0, 0);
        for _ in 0..200 {
            let s = scenario(2, 4, 3, NoiseMode::Off, &q, &mut rng);
            let sys = qostbc_ap_system(
                &s.received,
                &s.channel,
                0,
                1.0,
                FRAC_PI_4,
                &CancelOptions::default(),
            )
            .unwrap();
            let merged = sys.merged_channels();
            assert_eq!(merged.len(), 2);
            let x = qostbc_encode(&s.symbols[0].symbols, FRAC_PI_4).unwrap();
            for (i, (hc, obs)) in merged.iter().zip(sys.merged_observations()).enumerate() {
                // entries are ((a + a')/2, (b + b')/2, (a - a')/2, (b - b')/2) of the branch blocks
                let (p, m) = (sys.plus.blocks[0][i], sys.minus.blocks[0][i]);
                assert!((hc[0] - (p.a + m.a) * 0.5).norm() < 1e-15);
                assert!((hc[3] - (p.b - m.b) * 0.5).norm() < 1e-15);
                for t in 0..4 {
                    let direct: Complex64 = (0..4).map(|n| x[(t, n)] * hc[n]).sum();
                    assert!((direct - obs[t]).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn qostbc_pair_decode_matches_merged_exhaustive_search() {
        let q = Constellation::qpsk().with_rotation(FRAC_PI_4);
        let mut rng = trial_rng(18, 0, 0);
        let noise = NoiseModel::from_db(5.0).unwrap();
        for _ in 0..300 {
            let s = scenario(2, 4, 2, NoiseMode::Awgn(noise), &q, &mut rng);
            let sys = qostbc_ap_system(
                &s.received,
                &s.channel,
                0,
                noise.per_sample_variance,
                FRAC_PI_4,
                &CancelOptions::default(),
            )
            .unwrap();
            let pair = qostbc_pair_decode(&sys, &q, false).unwrap();
            let merged = sys.merged_channels();
            let obs = sys.merged_observations();
            let mut best = (f64::INFINITY, vec![]);
            for t in 0..256usize {
                let idx = vec![t >> 6 & 3, t >> 4 & 3, t >> 2 & 3, t & 3];
                let c: Vec<Complex64> = idx.iter().map(|&i| q.point(i)).collect();
                let x = qostbc_encode(&c, FRAC_PI_4).unwrap();
                let mut m = 0.0;
                for (hc, o) in merged.iter().zip(&obs) {
                    for tt in 0..4 {
                        let pred: Complex64 = (0..4).map(|n| x[(tt, n)] * hc[n]).sum();
                        m += (o[tt] - pred).norm_sqr();
                    }
                }
                if m < best.0 {
                    best = (m, idx);
                }
            }
            assert_eq!(pair.indices[0], best.1);
        }
    }
}
