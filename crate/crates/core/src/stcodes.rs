//! Constellations and space-time codewords: Alamouti, the 4x4 quasi-orthogonal
//! ABBA code, and the sum/difference transform that splits a 4-antenna
//! quasi-orthogonal system into two Alamouti systems.
//!
//! Codeword matrices are indexed `[time slot][transmit antenna]`. Receivers
//! work in the "conjugated" domain where every second time slot is replaced by
//! `-r*`, which makes the received vector linear in the symbols.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cxmat::{AlamoutiBlock, ComplexMat};
use crate::error::{Error, Result};

/// A unit-energy constellation with an optional rotation used for the second
/// symbol pair of the quasi-orthogonal code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    pub name: String,
    pub points: Vec<Complex64>,
    /// Radians applied to the rotated variant.
    pub rotation: f64,
}

impl Constellation {
    /// `{(±1 ± j)/√2}` in Gray order.
    pub fn qpsk() -> Self {
        let s = FRAC_1_SQRT_2;
        Self {
            name: "qpsk".into(),
            points: vec![
                Complex64::new(s, s),
                Complex64::new(-s, s),
                Complex64::new(-s, -s),
                Complex64::new(s, -s),
            ],
            rotation: 0.0,
        }
    }

    /// Square 16-QAM scaled to unit average energy.
    pub fn qam16() -> Self {
        let norm = 1.0 / 10f64.sqrt();
        let levels = [-3.0, -1.0, 1.0, 3.0];
        let points = levels
            .iter()
            .flat_map(|&i| {
                levels
                    .iter()
                    .map(move |&q| Complex64::new(i * norm, q * norm))
            })
            .collect();
        Self {
            name: "qam16".into(),
            points,
            rotation: 0.0,
        }
    }

    pub fn from_name(name: &str, rotation: f64) -> Result<Self> {
        let base = match name.to_ascii_lowercase().as_str() {
            "qpsk" => Self::qpsk(),
            "qam16" | "16qam" | "16-qam" => Self::qam16(),
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown constellation `{other}`"
                )))
            }
        };
        if !rotation.is_finite() {
            return Err(Error::InvalidInput("rotation must be finite".into()));
        }
        Ok(base.with_rotation(rotation))
    }

    pub fn with_rotation(mut self, rotation: f64) -> Self {
        self.rotation = rotation;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, idx: usize) -> Complex64 {
        self.points[idx]
    }

    pub fn rotated_point(&self, idx: usize) -> Complex64 {
        self.points[idx] * Complex64::from_polar(1.0, self.rotation)
    }

    pub fn rotated_points(&self) -> Vec<Complex64> {
        (0..self.len()).map(|i| self.rotated_point(i)).collect()
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.len() as f64
    }

    pub fn random_index(&self, rng: &mut impl Rng) -> usize {
        rng.random_range(0..self.len())
    }
}

/// One user's block of symbols, carried with the constellation indices that
/// generated them so decoder output can be compared exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolVector {
    pub user_id: usize,
    pub indices: Vec<usize>,
    pub symbols: Vec<Complex64>,
}

impl SymbolVector {
    pub fn from_indices(
        constellation: &Constellation,
        indices: Vec<usize>,
        user_id: usize,
    ) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= constellation.len()) {
            return Err(Error::InvalidInput(format!(
                "symbol index {bad} outside constellation of size {}",
                constellation.len()
            )));
        }
        let symbols = indices.iter().map(|&i| constellation.point(i)).collect();
        Ok(Self {
            user_id,
            indices,
            symbols,
        })
    }

    pub fn random(
        constellation: &Constellation,
        count: usize,
        user_id: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let indices = (0..count)
            .map(|_| constellation.random_index(rng))
            .collect();
        Self::from_indices(constellation, indices, user_id).expect("indices drawn in range")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Space-time code used by every user of a simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StCode {
    Alamouti,
    /// 4x4 ABBA code; the rotation applies to the third and fourth symbols.
    Qostbc {
        rotation: f64,
    },
}

impl StCode {
    pub fn for_antennas(tx: usize, rotation: f64) -> Result<Self> {
        match tx {
            2 => Ok(Self::Alamouti),
            4 => Ok(Self::Qostbc { rotation }),
            n => Err(Error::InvalidInput(format!(
                "no code wired for {n} transmit antennas"
            ))),
        }
    }

    /// Symbols per codeword, which also equals its time span and antenna count.
    pub fn symbols(&self) -> usize {
        match self {
            Self::Alamouti => 2,
            Self::Qostbc { .. } => 4,
        }
    }

    /// Candidate transmitted values for symbol slot `slot`.
    pub fn slot_points(&self, constellation: &Constellation, slot: usize) -> Vec<Complex64> {
        match self {
            Self::Qostbc { rotation } if slot >= 2 => {
                let r = Complex64::from_polar(1.0, *rotation);
                constellation.points.iter().map(|p| p * r).collect()
            }
            _ => constellation.points.clone(),
        }
    }

    pub fn encode(&self, symbols: &[Complex64]) -> Result<ComplexMat> {
        match self {
            Self::Alamouti => alamouti_encode(symbols),
            Self::Qostbc { rotation } => qostbc_encode(symbols, *rotation),
        }
    }

    /// Conjugated-domain receive vector for a `T x M` block of raw samples.
    pub fn receive_vector(&self, received: &ComplexMat) -> ComplexMat {
        conjugate_odd_slots(received)
    }

    /// Conjugated-domain channel, `(T*M) x K`, for one user's coefficients
    /// `coeffs[tx][rx]`.
    pub fn equivalent_channel(&self, coeffs: &[Vec<Complex64>]) -> Result<ComplexMat> {
        match self {
            Self::Alamouti => {
                let rx = coeffs.first().map_or(0, Vec::len);
                if coeffs.len() != 2 {
                    return Err(Error::InvalidInput(
                        "Alamouti needs 2 transmit antennas".into(),
                    ));
                }
                let blocks: Vec<AlamoutiBlock> = (0..rx)
                    .map(|m| AlamoutiBlock::new(coeffs[0][m], coeffs[1][m]))
                    .collect();
                Ok(equivalent_channel(&blocks))
            }
            Self::Qostbc { .. } => {
                if coeffs.len() != 4 {
                    return Err(Error::InvalidInput(
                        "QOSTBC needs 4 transmit antennas".into(),
                    ));
                }
                let rx = coeffs[0].len();
                let per_antenna: Vec<[Complex64; 4]> = (0..rx)
                    .map(|m| [coeffs[0][m], coeffs[1][m], coeffs[2][m], coeffs[3][m]])
                    .collect();
                Ok(qostbc_equivalent_channel(&per_antenna))
            }
        }
    }
}

/// `[[c1, c2], [-c2*, c1*]]`.
pub fn alamouti_encode(c: &[Complex64]) -> Result<ComplexMat> {
    let &[c1, c2] = c else {
        return Err(Error::InvalidInput(format!(
            "Alamouti takes 2 symbols, got {}",
            c.len()
        )));
    };
    Ok(AlamoutiBlock::new(c1, c2).to_mat())
}

/// The 4x4 quasi-orthogonal codeword `[[A, B], [B, A]]` with
/// `A = alamouti(c1, c2)` and `B = alamouti(c3 e^{jθ}, c4 e^{jθ})`.
pub fn qostbc_encode(c: &[Complex64], rotation: f64) -> Result<ComplexMat> {
    let &[c1, c2, c3, c4] = c else {
        return Err(Error::InvalidInput(format!(
            "QOSTBC takes 4 symbols, got {}",
            c.len()
        )));
    };
    let r = Complex64::from_polar(1.0, rotation);
    abba_construct(
        &alamouti_encode(&[c1, c2])?,
        &alamouti_encode(&[c3 * r, c4 * r])?,
    )
}

/// Block matrix `[[A, B], [B, A]]`.
pub fn abba_construct(sub_a: &ComplexMat, sub_b: &ComplexMat) -> Result<ComplexMat> {
    if !sub_a.is_square() || sub_a.shape() != sub_b.shape() {
        return Err(Error::DimensionMismatch {
            op: "abba_construct",
            left: sub_a.shape(),
            right: sub_b.shape(),
        });
    }
    let n = sub_a.rows();
    let mut out = ComplexMat::zeros(2 * n, 2 * n);
    out.set_block(0, 0, sub_a);
    out.set_block(0, n, sub_b);
    out.set_block(n, 0, sub_b);
    out.set_block(n, n, sub_a);
    Ok(out)
}

/// Recursive ABBA codeword for `N = 2^k` symbols (`N >= 2`): Alamouti blocks
/// at the leaves, `[[A, B], [B, A]]` at every level above.
pub fn abba_code(symbols: &[Complex64]) -> Result<ComplexMat> {
    let n = symbols.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "ABBA recursion needs 2^k >= 2 symbols, got {n}"
        )));
    }
    if n == 2 {
        return alamouti_encode(symbols);
    }
    let (lo, hi) = symbols.split_at(n / 2);
    abba_construct(&abba_code(lo)?, &abba_code(hi)?)
}

/// Stacked Alamouti equivalent channel, `2M x 2`, one block per receive antenna.
pub fn equivalent_channel(h: &[AlamoutiBlock]) -> ComplexMat {
    let mut out = ComplexMat::zeros(2 * h.len(), 2);
    for (i, blk) in h.iter().enumerate() {
        out.set_block(2 * i, 0, &blk.to_mat());
    }
    out
}

/// Conjugated-domain quasi-orthogonal channel, `4M x 4`; per antenna the rows
/// map `(c1..c4)` to `(r1, -r2*, r3, -r4*)`.
pub fn qostbc_equivalent_channel(h: &[[Complex64; 4]]) -> ComplexMat {
    let mut out = ComplexMat::zeros(4 * h.len(), 4);
    for (m, &[h1, h2, h3, h4]) in h.iter().enumerate() {
        let rows = [
            [h1, h2, h3, h4],
            [-h2.conj(), h1.conj(), -h4.conj(), h3.conj()],
            [h3, h4, h1, h2],
            [-h4.conj(), h3.conj(), -h2.conj(), h1.conj()],
        ];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                out[(4 * m + i, j)] = v;
            }
        }
    }
    out
}

/// Maps raw `T x M` samples to the stacked conjugated-domain column
/// (antenna-major): odd time slots become `-r*`.
pub fn conjugate_odd_slots(received: &ComplexMat) -> ComplexMat {
    let (t, m) = received.shape();
    let mut out = Vec::with_capacity(t * m);
    for ant in 0..m {
        for slot in 0..t {
            let r = received[(slot, ant)];
            out.push(if slot % 2 == 1 { -r.conj() } else { r });
        }
    }
    ComplexMat::column(&out)
}

/// Inverse of [`conjugate_odd_slots`] for one antenna's samples.
pub fn unconjugate_odd_slots(v: &[Complex64]) -> Vec<Complex64> {
    v.iter()
        .enumerate()
        .map(|(slot, &z)| if slot % 2 == 1 { -z.conj() } else { z })
        .collect()
}

/// `plus = (v1 + v3, v2 + v4)`, `minus = (v1 - v3, v2 - v4)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumDifferencePair {
    pub plus: [Complex64; 2],
    pub minus: [Complex64; 2],
}

impl SumDifferencePair {
    pub fn from_vector(v: [Complex64; 4]) -> Self {
        Self {
            plus: [v[0] + v[2], v[1] + v[3]],
            minus: [v[0] - v[2], v[1] - v[3]],
        }
    }

    /// `((plus + minus)/2, (plus - minus)/2)`.
    pub fn reconstruct(&self) -> [Complex64; 4] {
        let (p, m) = (self.plus, self.minus);
        [
            (p[0] + m[0]) * 0.5,
            (p[1] + m[1]) * 0.5,
            (p[0] - m[0]) * 0.5,
            (p[1] - m[1]) * 0.5,
        ]
    }
}

/// One Alamouti branch of a split quasi-orthogonal reception.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSystem {
    pub observation: [Complex64; 2],
    pub channel: AlamoutiBlock,
}

/// Sum and difference branches carrying `c+` and `c-`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSystem {
    pub plus: BranchSystem,
    pub minus: BranchSystem,
}

/// Channel half of the split: `(h1 ± h3, h2 ± h4)` as Alamouti blocks.
pub fn split_channel(h: [Complex64; 4]) -> (AlamoutiBlock, AlamoutiBlock) {
    let sd = SumDifferencePair::from_vector(h);
    (
        AlamoutiBlock::new(sd.plus[0], sd.plus[1]),
        AlamoutiBlock::new(sd.minus[0], sd.minus[1]),
    )
}

/// Observation half of the split, from one antenna's 4 raw samples:
/// `(r1 + r3, -r2* - r4*)` and `(r1 - r3, -r2* + r4*)`.
pub fn split_received(r: [Complex64; 4]) -> SumDifferencePair {
    let v = [r[0], -r[1].conj(), r[2], -r[3].conj()];
    SumDifferencePair::from_vector(v)
}

/// Inverse of [`split_received`].
pub fn unsplit_received(pair: &SumDifferencePair) -> [Complex64; 4] {
    let v = pair.reconstruct();
    [v[0], -v[1].conj(), v[2], -v[3].conj()]
}

/// Splits one antenna of a single-user quasi-orthogonal reception into the
/// `c+` and `c-` Alamouti systems.
pub fn qostbc_split(r: [Complex64; 4], h: [Complex64; 4]) -> SplitSystem {
    let obs = split_received(r);
    let (plus_ch, minus_ch) = split_channel(h);
    SplitSystem {
        plus: BranchSystem {
            observation: obs.plus,
            channel: plus_ch,
        },
        minus: BranchSystem {
            observation: obs.minus,
            channel: minus_ch,
        },
    }
}

/// Reverse conversion of branch channels into a 4-antenna channel vector
/// `((α1+α1')/2, (α2+α2')/2, (α1-α1')/2, (α2-α2')/2)`.
pub fn qostbc_merge(plus_channel: &AlamoutiBlock, minus_channel: &AlamoutiBlock) -> [Complex64; 4] {
    SumDifferencePair {
        plus: [plus_channel.a, plus_channel.b],
        minus: [minus_channel.a, minus_channel.b],
    }
    .reconstruct()
}

/// `c+` and `c-` of a (rotated) 4-symbol block.
pub fn sum_difference_symbols(c: [Complex64; 4], rotation: f64) -> SumDifferencePair {
    let r = Complex64::from_polar(1.0, rotation);
    SumDifferencePair::from_vector([c[0], c[1], c[2] * r, c[3] * r])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cn(rng: &mut impl Rng) -> Complex64 {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    /// Raw samples `X h` for one antenna.
    fn transmit_one(x: &ComplexMat, h: &[Complex64]) -> Vec<Complex64> {
        (0..x.rows())
            .map(|t| (0..x.cols()).map(|n| x[(t, n)] * h[n]).sum())
            .collect()
    }

    #[test]
    fn constellations_have_unit_energy() {
        assert!((Constellation::qpsk().mean_energy() - 1.0).abs() < 1e-12);
        assert!((Constellation::qam16().mean_energy() - 1.0).abs() < 1e-12);
        let q = Constellation::from_name("QPSK", FRAC_PI_4).unwrap();
        for i in 0..q.len() {
            assert!(
                (q.rotated_point(i) - q.point(i) * Complex64::from_polar(1.0, FRAC_PI_4)).norm()
                    < 1e-15
            );
        }
        assert!(Constellation::from_name("bpsk", 0.0).is_err());
    }

    #[test]
    fn symbol_vector_indices_are_checked() {
        let q = Constellation::qpsk();
        let v = SymbolVector::from_indices(&q, vec![0, 3], 1).unwrap();
        assert_eq!(v.symbols, vec![q.point(0), q.point(3)]);
        assert!(SymbolVector::from_indices(&q, vec![4], 0).is_err());
    }

    #[test]
    fn alamouti_encode_examples() {
        let one = c(1.0, 0.0);
        let zero = c(0.0, 0.0);
        assert_eq!(
            alamouti_encode(&[one, zero]).unwrap(),
            ComplexMat::identity(2)
        );
        assert_eq!(
            alamouti_encode(&[zero, one]).unwrap(),
            ComplexMat::from_rows(&[[zero, one], [-one, zero]]).unwrap()
        );
        assert!(alamouti_encode(&[one]).is_err());

        let q = Constellation::qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s = SymbolVector::random(&q, 2, 0, &mut rng);
            let x = alamouti_encode(&s.symbols).unwrap();
            let inner: Complex64 = (0..2).map(|j| x[(0, j)] * x[(1, j)].conj()).sum();
            assert_eq!(inner, zero);
            let gram = x.hermitian().matmul(&x).unwrap();
            let e = s.symbols[0].norm_sqr() + s.symbols[1].norm_sqr();
            assert!(gram.max_abs_diff(&ComplexMat::identity(2).scale_real(e)) < 1e-15);
        }
    }

    #[test]
    fn qostbc_pattern_cell_by_cell() {
        let one = c(1.0, 0.0);
        let x = qostbc_encode(&[one; 4], 0.0).unwrap();
        // [[c1,c2,c3,c4],[-c2*,c1*,-c4*,c3*],[c3,c4,c1,c2],[-c4*,c3*,-c2*,c1*]] at c = 1.
        let want = [
            [1.0, 1.0, 1.0, 1.0],
            [-1.0, 1.0, -1.0, 1.0],
            [1.0, 1.0, 1.0, 1.0],
            [-1.0, 1.0, -1.0, 1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(x[(i, j)], c(want[i][j], 0.0), "cell ({i},{j})");
            }
        }

        let single = qostbc_encode(&[one, c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], 0.0).unwrap();
        assert_eq!(single, ComplexMat::identity(4));
        assert!(qostbc_encode(&[one; 3], 0.0).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s: Vec<Complex64> = (0..4).map(|_| cn(&mut rng)).collect();
        let x = qostbc_encode(&s, 0.3).unwrap();
        let r = Complex64::from_polar(1.0, 0.3);
        let a = alamouti_encode(&s[..2]).unwrap();
        let b = alamouti_encode(&[s[2] * r, s[3] * r]).unwrap();
        assert_eq!(x.block(0, 0, 2, 2), a);
        assert_eq!(x.block(0, 2, 2, 2), b);
        assert_eq!(x.block(2, 0, 2, 2), b);
        assert_eq!(x.block(2, 2, 2, 2), a);
        // explicit entries of the displayed pattern
        let (c1, c2, c3, c4) = (s[0], s[1], s[2] * r, s[3] * r);
        assert_eq!(x[(1, 2)], -c4.conj());
        assert_eq!(x[(3, 1)], c3.conj());
        assert_eq!(x[(3, 2)], -c2.conj());
        assert_eq!(x[(2, 3)], c2);
        assert_eq!(x[(0, 0)], c1);
    }

    #[test]
    fn abba_construction() {
        let id = ComplexMat::identity(2);
        assert_eq!(
            abba_construct(&id, &ComplexMat::zeros(2, 2)).unwrap(),
            ComplexMat::identity(4)
        );
        assert!(abba_construct(&id, &ComplexMat::zeros(3, 3)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<Complex64> = (0..4).map(|_| cn(&mut rng)).collect();
        let a = alamouti_encode(&s[..2]).unwrap();
        let b = alamouti_encode(&s[2..]).unwrap();
        assert_eq!(
            abba_construct(&a, &b).unwrap(),
            qostbc_encode(&s, 0.0).unwrap()
        );
        assert_eq!(abba_code(&s).unwrap(), qostbc_encode(&s, 0.0).unwrap());

        let s8: Vec<Complex64> = (0..8).map(|_| cn(&mut rng)).collect();
        let x8 = abba_code(&s8).unwrap();
        assert_eq!(x8.shape(), (8, 8));
        let top = abba_code(&s8[..4]).unwrap();
        let bottom = abba_code(&s8[4..]).unwrap();
        assert_eq!(x8.block(0, 0, 4, 4), top);
        assert_eq!(x8.block(4, 4, 4, 4), top);
        assert_eq!(x8.block(0, 4, 4, 4), bottom);
        assert_eq!(x8.block(4, 0, 4, 4), bottom);
        assert!(abba_code(&s8[..6]).is_err());
    }

    #[test]
    fn equivalent_channel_matches_direct_transmission() {
        let one = c(1.0, 0.0);
        let zero = c(0.0, 0.0);
        assert_eq!(
            equivalent_channel(&[AlamoutiBlock::new(one, zero)]),
            ComplexMat::identity(2)
        );

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in 1..=3 {
            let blocks: Vec<AlamoutiBlock> = (0..m)
                .map(|_| AlamoutiBlock::new(cn(&mut rng), cn(&mut rng)))
                .collect();
            let h = equivalent_channel(&blocks);
            assert_eq!(h.shape(), (2 * m, 2));
            let sym = [cn(&mut rng), cn(&mut rng)];
            let x = alamouti_encode(&sym).unwrap();
            let mut raw = ComplexMat::zeros(2, m);
            for (ant, blk) in blocks.iter().enumerate() {
                let r = transmit_one(&x, &[blk.a, blk.b]);
                raw[(0, ant)] = r[0];
                raw[(1, ant)] = r[1];
            }
            let y = StCode::Alamouti.receive_vector(&raw);
            let hc = h.matmul(&ComplexMat::column(&sym)).unwrap();
            assert!(y.max_abs_diff(&hc) < 1e-14);
        }
    }

    #[test]
    fn qostbc_equivalent_channel_matches_direct_transmission() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h: Vec<[Complex64; 4]> = (0..2)
            .map(|_| [cn(&mut rng), cn(&mut rng), cn(&mut rng), cn(&mut rng)])
            .collect();
        let s: Vec<Complex64> = (0..4).map(|_| cn(&mut rng)).collect();
        let x = qostbc_encode(&s, 0.0).unwrap();
        let mut raw = ComplexMat::zeros(4, 2);
        for (ant, hh) in h.iter().enumerate() {
            for (t, r) in transmit_one(&x, hh).into_iter().enumerate() {
                raw[(t, ant)] = r;
            }
        }
        let y = conjugate_odd_slots(&raw);
        let hc = qostbc_equivalent_channel(&h)
            .matmul(&ComplexMat::column(&s))
            .unwrap();
        assert!(y.max_abs_diff(&hc) < 1e-14);
    }

    #[test]
    fn split_examples() {
        let one = c(1.0, 0.0);
        let zero = c(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);

        // identity-like channel: both branches see the identity on c+ / c-
        let h = [one, zero, zero, zero];
        let s: Vec<Complex64> = (0..4).map(|_| cn(&mut rng)).collect();
        let r = transmit_one(&qostbc_encode(&s, 0.0).unwrap(), &h);
        let split = qostbc_split([r[0], r[1], r[2], r[3]], h);
        assert_eq!(split.plus.channel, AlamoutiBlock::IDENTITY);
        assert_eq!(split.minus.channel, AlamoutiBlock::IDENTITY);
        let sd = sum_difference_symbols([s[0], s[1], s[2], s[3]], 0.0);
        for k in 0..2 {
            assert!((split.plus.observation[k] - sd.plus[k]).norm() < 1e-15);
            assert!((split.minus.observation[k] - sd.minus[k]).norm() < 1e-15);
        }

        // mirrored coefficients null the difference branch
        let (h1, h2) = (cn(&mut rng), cn(&mut rng));
        let (_, minus) = split_channel([h1, h2, h1, h2]);
        assert_eq!(minus, AlamoutiBlock::ZERO);
    }

    #[test]
    fn split_residual_is_zero_on_noiseless_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let h = [cn(&mut rng), cn(&mut rng), cn(&mut rng), cn(&mut rng)];
            let s = [cn(&mut rng), cn(&mut rng), cn(&mut rng), cn(&mut rng)];
            let rot = rng.random_range(0.0..1.0);
            let r = transmit_one(&qostbc_encode(&s, rot).unwrap(), &h);
            let split = qostbc_split([r[0], r[1], r[2], r[3]], h);
            let sd = sum_difference_symbols(s, rot);
            let p = split.plus.channel.apply(sd.plus);
            let m = split.minus.channel.apply(sd.minus);
            for k in 0..2 {
                assert!((split.plus.observation[k] - p[k]).norm() < 1e-12);
                assert!((split.minus.observation[k] - m[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn merge_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let alpha = AlamoutiBlock::new(cn(&mut rng), cn(&mut rng));
        let same = qostbc_merge(&alpha, &alpha);
        assert_eq!(same[2], c(0.0, 0.0));
        assert_eq!(same[3], c(0.0, 0.0));
        let opposite = qostbc_merge(&alpha, &alpha.scale(-1.0));
        assert_eq!(opposite[0], c(0.0, 0.0));
        assert_eq!(opposite[1], c(0.0, 0.0));
    }

    #[test]
    fn merged_channel_reproduces_branch_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let plus = AlamoutiBlock::new(cn(&mut rng), cn(&mut rng));
            let minus = AlamoutiBlock::new(cn(&mut rng), cn(&mut rng));
            let s = [cn(&mut rng), cn(&mut rng), cn(&mut rng), cn(&mut rng)];
            let sd = sum_difference_symbols(s, FRAC_PI_4);
            let branch = SumDifferencePair {
                plus: plus.apply(sd.plus),
                minus: minus.apply(sd.minus),
            };
            let merged = qostbc_merge(&plus, &minus);
            let direct = transmit_one(&qostbc_encode(&s, FRAC_PI_4).unwrap(), &merged);
            let recombined = unsplit_received(&branch);
            for k in 0..4 {
                assert!((direct[k] - recombined[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sum_difference_reconstruction_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let v = [cn(&mut rng), cn(&mut rng), cn(&mut rng), cn(&mut rng)];
            let back = SumDifferencePair::from_vector(v).reconstruct();
            for k in 0..4 {
                assert!((back[k] - v[k]).norm() <= 4.0 * f64::EPSILON);
            }
        }
    }

    #[test]
    fn rotated_qpsk_differences_are_full_rank() {
        let q = Constellation::qpsk();
        let all: Vec<Vec<Complex64>> = (0..256usize)
            .map(|m| (0..4).map(|k| q.point((m >> (2 * k)) & 3)).collect())
            .collect();
        let codes: Vec<ComplexMat> = all
            .iter()
            .map(|s| qostbc_encode(s, FRAC_PI_4).unwrap())
            .collect();
        let mut min_rank = 4;
        for i in 0..256 {
            for j in 0..256 {
                if i == j {
                    continue;
                }
                let d = codes[i].sub(&codes[j]).unwrap();
                min_rank = min_rank.min(d.numerical_rank(1e-9));
            }
        }
        assert_eq!(min_rank, 4);
    }

    #[test]
    fn unrotated_qpsk_loses_rank() {
        let q = Constellation::qpsk();
        let a = qostbc_encode(&[q.point(0), q.point(0), q.point(1), q.point(1)], 0.0).unwrap();
        let b = qostbc_encode(&[q.point(1), q.point(1), q.point(0), q.point(0)], 0.0).unwrap();
        assert!(a.sub(&b).unwrap().numerical_rank(1e-9) < 4);
    }
}
