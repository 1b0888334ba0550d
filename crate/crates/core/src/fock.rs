//! Truncated Fock-space reference engine.
//!
//! Builds two-mode squeezed vacua in the number basis, applies the heralded
//! beam-splitter operations photon by photon, and extracts covariance
//! matrices from quadrature second moments. Nothing here touches the closed
//! forms in [`crate::ops`]; it exists to check them.
//!
//! Beam-splitter convention (real, transmissivity `T` on the signal):
//! `b† -> √T b† + √(1-T) c†`, `c† -> -√(1-T) b† + √T c†`.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::gaussian::{GeneralCm, TwoModeCm};

/// Truncation tail bound enforced by [`build_tmsv`].
pub const MIN_TAIL: f64 = 1e-10;
/// Tail bound used by [`default_cutoff`]. Tighter than [`MIN_TAIL`] so
/// second moments, which weight the tail by `n`, converge as well.
pub const DEFAULT_TAIL: f64 = 1e-14;

type C64 = Complex<f64>;

/// Smallest per-mode cutoff whose discarded TMSV probability mass is below
/// `tail`: `ceil(ln(tail) / (2 ln tanh r))`.
pub fn required_cutoff(r: f64, tail: f64) -> usize {
    let xi = r.tanh();
    if xi <= 0.0 {
        return 1;
    }
    let n = (tail.ln() / (2.0 * xi.ln())).ceil();
    (n.max(1.0)) as usize
}

pub fn default_cutoff(r: f64) -> usize {
    required_cutoff(r, DEFAULT_TAIL)
}

/// Pure two-mode state in a truncated number basis; `amplitudes[(n_a, n_b)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    amplitudes: DMatrix<C64>,
}

impl FockState {
    pub fn new(amplitudes: DMatrix<C64>) -> Self {
        Self { amplitudes }
    }

    /// Product number state `|n_a, n_b>` in a box of the given dimensions.
    pub fn number(n_a: usize, n_b: usize, dim_a: usize, dim_b: usize) -> Self {
        let mut amplitudes = DMatrix::zeros(dim_a, dim_b);
        amplitudes[(n_a, n_b)] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &DMatrix<C64> {
        &self.amplitudes
    }

    pub fn dims(&self) -> (usize, usize) {
        self.amplitudes.shape()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.amplitudes /= C64::new(n, 0.0);
        }
        self
    }

    /// Mean photon numbers `(<n_a>, <n_b>)`.
    pub fn mean_photons(&self) -> (f64, f64) {
        let mut na = 0.0;
        let mut nb = 0.0;
        for ((i, j), z) in indexed(&self.amplitudes) {
            let w = z.norm_sqr();
            na += i as f64 * w;
            nb += j as f64 * w;
        }
        (na, nb)
    }

    /// Quadrature first and second moments.
    pub fn moments(&self) -> Moments {
        let psi = &self.amplitudes;
        let (da, db) = psi.shape();
        let sq = |n: usize| (n as f64).sqrt();
        let get = |i: usize, j: usize| -> C64 {
            if i < da && j < db {
                psi[(i, j)]
            } else {
                C64::new(0.0, 0.0)
            }
        };

        // Expectation values of normally ordered ladder products.
        let mut a = C64::new(0.0, 0.0);
        let mut b = C64::new(0.0, 0.0);
        let mut aa = C64::new(0.0, 0.0);
        let mut bb = C64::new(0.0, 0.0);
        let mut ab = C64::new(0.0, 0.0);
        let mut ab_dag = C64::new(0.0, 0.0);
        let (mut na, mut nb) = (0.0, 0.0);
        for i in 0..da {
            for j in 0..db {
                let bra = psi[(i, j)].conj();
                if bra == C64::new(0.0, 0.0) {
                    continue;
                }
                let w = bra.norm_sqr();
                na += i as f64 * w;
                nb += j as f64 * w;
                // <i,j| a |i+1,j> = √(i+1)
                a += bra * get(i + 1, j) * sq(i + 1);
                b += bra * get(i, j + 1) * sq(j + 1);
                aa += bra * get(i + 2, j) * sq(i + 1) * sq(i + 2);
                bb += bra * get(i, j + 2) * sq(j + 1) * sq(j + 2);
                ab += bra * get(i + 1, j + 1) * sq(i + 1) * sq(j + 1);
                if j >= 1 {
                    // <i,j| a b† |i+1,j-1> = √(i+1) √j
                    ab_dag += bra * get(i + 1, j - 1) * sq(i + 1) * sq(j);
                }
            }
        }
        let norm = self.norm_sqr();
        let scale = |z: C64| z / norm;
        let (a, b, aa, bb, ab, ab_dag) = (
            scale(a),
            scale(b),
            scale(aa),
            scale(bb),
            scale(ab),
            scale(ab_dag),
        );
        let (na, nb) = (na / norm, nb / norm);

        let mean = [2.0 * a.re, 2.0 * a.im, 2.0 * b.re, 2.0 * b.im];
        let mut cov = DMatrix::zeros(4, 4);
        cov[(0, 0)] = 2.0 * aa.re + 2.0 * na + 1.0;
        cov[(1, 1)] = -2.0 * aa.re + 2.0 * na + 1.0;
        cov[(0, 1)] = 2.0 * aa.im;
        cov[(2, 2)] = 2.0 * bb.re + 2.0 * nb + 1.0;
        cov[(3, 3)] = -2.0 * bb.re + 2.0 * nb + 1.0;
        cov[(2, 3)] = 2.0 * bb.im;
        cov[(0, 2)] = 2.0 * ab.re + 2.0 * ab_dag.re;
        cov[(0, 3)] = 2.0 * ab.im - 2.0 * ab_dag.im;
        cov[(1, 2)] = 2.0 * ab.im + 2.0 * ab_dag.im;
        cov[(1, 3)] = -2.0 * ab.re + 2.0 * ab_dag.re;
        for i in 0..4 {
            for j in 0..i {
                cov[(i, j)] = cov[(j, i)];
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                cov[(i, j)] -= mean[i] * mean[j];
            }
        }
        Moments {
            mean,
            covariance: GeneralCm::new(cov).expect("constructed symmetric"),
        }
    }
}

fn indexed(m: &DMatrix<C64>) -> impl Iterator<Item = ((usize, usize), &C64)> {
    let rows = m.nrows();
    m.iter()
        .enumerate()
        .map(move |(k, z)| ((k % rows, k / rows), z))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    /// `(<x_A>, <p_A>, <x_B>, <p_B>)`.
    pub mean: [f64; 4],
    pub covariance: GeneralCm,
}

impl Moments {
    pub fn max_abs_mean(&self) -> f64 {
        self.mean.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Two-mode squeezed vacuum `√(1-ξ²) Σ ξ^n |n,n>` truncated at `cutoff`
/// photons per mode and renormalized.
pub fn build_tmsv(r: f64, cutoff: usize) -> Result<FockState> {
    if !(r >= 0.0) {
        return Err(Error::NegativeSqueezing(r));
    }
    let required = required_cutoff(r, MIN_TAIL);
    if cutoff < required {
        return Err(Error::InsufficientTruncation { cutoff, required });
    }
    let xi = r.tanh();
    let lead = (1.0 - xi * xi).sqrt();
    let dim = cutoff + 1;
    let mut amplitudes = DMatrix::zeros(dim, dim);
    let mut amp = lead;
    for n in 0..dim {
        amplitudes[(n, n)] = C64::new(amp, 0.0);
        amp *= xi;
    }
    Ok(FockState { amplitudes }.normalized())
}

/// Covariance matrix of a two-mode Fock state, assuming zero mean.
pub fn extract_cm(state: &FockState) -> TwoModeCm {
    let m = state.moments();
    let s = m.covariance;
    TwoModeCm::new(
        0.5 * (s.get(0, 0) + s.get(1, 1)),
        0.5 * (s.get(2, 2) + s.get(3, 3)),
        0.5 * (s.get(0, 2) - s.get(1, 3)),
    )
}

/// `p! / q!` as a direct product over the non-overlapping range.
fn factorial_ratio(p: usize, q: usize) -> f64 {
    if p >= q {
        (q + 1..=p).map(|k| k as f64).product()
    } else {
        1.0 / factorial_ratio(q, p)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
}

/// Matrix element `<k, m| U(T) |n, anc>` of the beam splitter, with the
/// first slot the signal and the second the ancilla port.
pub fn beam_splitter_element(n: usize, anc: usize, k: usize, m: usize, t: f64) -> f64 {
    if k + m != n + anc {
        return 0.0;
    }
    let st = t.sqrt();
    let sq = (1.0 - t).max(0.0).sqrt();
    let mut sum = 0.0;
    // i photons of the signal stay, j ancilla photons cross into the signal.
    for i in 0..=n.min(k) {
        let j = k - i;
        if j > anc {
            continue;
        }
        let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
        sum += sign
            * binomial(n, i)
            * binomial(anc, j)
            * st.powi(i as i32)
            * sq.powi((n - i) as i32)
            * sq.powi(j as i32)
            * st.powi((anc - j) as i32);
    }
    sum * (factorial_ratio(k, n) * factorial_ratio(m, anc)).sqrt()
}

/// Heralded branch of a beam-splitter operation on mode B.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldResult {
    /// `None` when the heralded branch has zero norm.
    pub cm: Option<TwoModeCm>,
    pub probability: f64,
    pub state: Option<FockState>,
    /// Largest `|<q>|` over the four quadratures of the heralded state.
    pub max_first_moment: f64,
}

/// Mixes mode B of `state` with an `ancilla_photons` Fock state, projects
/// the ancilla output on `detect_photons`, and renormalizes.
pub fn herald(
    state: &FockState,
    ancilla_photons: usize,
    detect_photons: usize,
    t: f64,
) -> Result<HeraldResult> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidTransmissivity(t));
    }
    let (da, db) = state.dims();
    let out_b = db + ancilla_photons;
    let mut out = DMatrix::<C64>::zeros(da, out_b);
    for nb in 0..db {
        let Some(k) = (nb + ancilla_photons).checked_sub(detect_photons) else {
            continue;
        };
        let amp = beam_splitter_element(nb, ancilla_photons, k, detect_photons, t);
        if amp == 0.0 {
            continue;
        }
        for na in 0..da {
            out[(na, k)] += state.amplitudes[(na, nb)] * amp;
        }
    }
    let heralded = FockState::new(out);
    let probability = heralded.norm_sqr() / state.norm_sqr();
    if probability <= 0.0 {
        return Ok(HeraldResult {
            cm: None,
            probability: 0.0,
            state: None,
            max_first_moment: 0.0,
        });
    }
    let heralded = heralded.normalized();
    let moments = heralded.moments();
    Ok(HeraldResult {
        cm: Some(extract_cm(&heralded)),
        probability,
        max_first_moment: moments.max_abs_mean(),
        state: Some(heralded),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cutoff_rule() {
        assert_eq!(required_cutoff(0.0, MIN_TAIL), 1);
        // ln(1e-10) / (2 ln tanh 1.2) = 63.3
        assert_eq!(required_cutoff(1.2, MIN_TAIL), 64);
        assert!(matches!(
            build_tmsv(1.2, 40),
            Err(Error::InsufficientTruncation {
                cutoff: 40,
                required: 64
            })
        ));
    }

    #[test]
    fn vacuum_and_single_photon() {
        let vac = build_tmsv(0.0, 4).unwrap();
        assert_eq!(vac.amplitudes()[(0, 0)], C64::new(1.0, 0.0));
        let cm = extract_cm(&vac);
        assert_abs_diff_eq!(cm.a, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cm.b, 1.0, epsilon = 1e-15);
        assert_eq!(cm.c, 0.0);

        let one = FockState::number(1, 0, 4, 4);
        let m = one.moments();
        let expected = [3.0, 3.0, 1.0, 1.0];
        for (i, e) in expected.iter().enumerate() {
            assert_abs_diff_eq!(m.covariance.get(i, i), *e, epsilon = 1e-15);
        }
        assert_eq!(m.max_abs_mean(), 0.0);
    }

    #[test]
    fn tmsv_photon_number_and_cm() {
        let r = 0.8_f64;
        let state = build_tmsv(r, default_cutoff(r)).unwrap();
        let (na, nb) = state.mean_photons();
        assert_abs_diff_eq!(na, r.sinh().powi(2), epsilon = 1e-8);
        assert_abs_diff_eq!(nb, r.sinh().powi(2), epsilon = 1e-8);
        let m = state.moments();
        assert!(m.max_abs_mean() < 1e-10);
        let cm = extract_cm(&state);
        assert_abs_diff_eq!(cm.a, (2.0 * r).cosh(), epsilon = 1e-8);
        assert_abs_diff_eq!(cm.c, (2.0 * r).sinh(), epsilon = 1e-8);
        assert_abs_diff_eq!(m.covariance.get(1, 3), -(2.0 * r).sinh(), epsilon = 1e-8);
    }

    #[test]
    fn beam_splitter_is_unitary_on_small_blocks() {
        let t = 0.37;
        for total in 0..6 {
            for (n, anc) in (0..=total).map(|n| (n, total - n)) {
                let norm: f64 = (0..=total)
                    .map(|k| beam_splitter_element(n, anc, k, total - k, t).powi(2))
                    .sum();
                assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn transparent_splitter_is_identity() {
        let state = build_tmsv(0.6, default_cutoff(0.6)).unwrap();
        let res = herald(&state, 0, 0, 1.0).unwrap();
        assert_abs_diff_eq!(res.probability, 1.0, epsilon = 1e-14);
        let cm = res.cm.unwrap();
        let input = extract_cm(&state);
        assert_abs_diff_eq!(cm.a, input.a, epsilon = 1e-12);
        assert_abs_diff_eq!(cm.c, input.c, epsilon = 1e-12);
    }

    #[test]
    fn zero_norm_branch_is_flagged() {
        let vac = build_tmsv(0.0, 3).unwrap();
        let res = herald(&vac, 0, 1, 0.5).unwrap();
        assert_eq!(res.probability, 0.0);
        assert!(res.cm.is_none());
    }

    #[test]
    fn catalysis_on_vacuum() {
        let vac = build_tmsv(0.0, 3).unwrap();
        let res = herald(&vac, 1, 1, 0.7).unwrap();
        assert_abs_diff_eq!(res.probability, 0.7, epsilon = 1e-15);
        let cm = res.cm.unwrap();
        assert_abs_diff_eq!(cm.a, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cm.b, 1.0, epsilon = 1e-15);
    }
}
