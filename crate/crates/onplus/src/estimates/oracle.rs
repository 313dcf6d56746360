//! Exhaustive comparison of Haar moments in the Fourier model against the
//! exact Weingarten oracle.

use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::Check;
use crate::fourier::{character_moment, FourierAlgebra, FourierElement};
use crate::linalg::Mat;
use crate::qcore::{catalan, semicircle_moment};
use crate::rep::RepBackend;
use crate::scalar::{to_f64, Real};
use crate::weingarten::WeingartenOracle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeRow {
    pub degree: usize,
    pub moments: u64,
    pub nonzero: u64,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalanRow {
    pub m: usize,
    pub exact: u128,
    pub fusion: f64,
    pub weingarten: f64,
    pub quadrature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub degrees: Vec<DegreeRow>,
    pub catalan: Vec<CatalanRow>,
    pub adjoint_defect: f64,
    pub mask_spot_checks: usize,
    pub checks: Vec<Check>,
}

/// Words of length `p` over the `N^2` generators, first letter most significant.
fn all_words<T: Real>(alg: &FourierAlgebra<'_, T>, nn: usize, p_max: usize) -> Result<Vec<Vec<FourierElement<T>>>> {
    let g = nn * nn;
    let gens: Vec<FourierElement<T>> = (0..g).map(|x| alg.generator(x / nn, x % nn)).collect();
    let mut out = vec![vec![alg.unit()]];
    for p in 1..=p_max {
        let prev = &out[p - 1];
        let next: Vec<FourierElement<T>> =
            (0..prev.len() * g).into_par_iter().map(|w| alg.multiply(&prev[w / g], &gens[w % g])).collect::<Result<_>>()?;
        out.push(next);
    }
    Ok(out)
}

fn digits(mut w: usize, base: usize, len: usize) -> Vec<usize> {
    let mut d = vec![0; len];
    for t in (0..len).rev() {
        d[t] = w % base;
        w /= base;
    }
    d
}

fn reverse_word(w: usize, base: usize, len: usize) -> usize {
    digits(w, base, len).iter().rev().fold(0, |acc, x| acc * base + x)
}

/// Columns: flattened blocks `n = p, p-2, ...` of each word, optionally weighted by `1/d_n`.
fn flatten<T: Real>(words: &[FourierElement<T>], b: &dyn RepBackend<T>, p: usize, weighted: bool) -> Result<Mat<T>> {
    let labels: Vec<usize> = (0..=p).filter(|n| (p - n).is_multiple_of(2)).collect();
    let len: usize = labels.iter().map(|&n| b.dim(n).pow(2)).sum();
    let mut m = Mat::<T>::zeros(len, words.len());
    for (c, w) in words.iter().enumerate() {
        let mut off = 0;
        for &n in &labels {
            let d = b.dim(n);
            if let Some(blk) = w.block(n) {
                if !blk.im.iter().all(|x| *x == T::zero()) {
                    return Err(Error::Invariant("generator words are expected to have real Fourier blocks".into()));
                }
                let s = if weighted { T::one() / b.params().dim(n) } else { T::one() };
                for (i, x) in blk.re.iter().enumerate() {
                    m[(off + i, c)] = *x * s;
                }
            }
            off += d * d;
        }
        if w.blocks.keys().any(|n| !labels.contains(n)) {
            return Err(Error::Invariant(format!("word of length {p} has a block of the wrong parity")));
        }
    }
    Ok(m)
}

/// Bitmask of the noncrossing pairings respected by each index sequence of length `k`.
fn masks(oracle: &WeingartenOracle, nn: usize, k: usize) -> Result<Vec<u32>> {
    let t = oracle.table(k / 2)?;
    if t.pairings.len() > 32 {
        return Err(Error::OutOfRange("too many pairings for a 32-bit mask".into()));
    }
    Ok((0..nn.pow(k as u32))
        .into_par_iter()
        .map(|s| {
            let idx = digits(s, nn, k);
            t.pairings.iter().enumerate().fold(0u32, |acc, (i, p)| if p.respects(&idx) { acc | (1 << i) } else { acc })
        })
        .collect())
}

/// `sum_{pi in mi, sigma in mj} W(pi, sigma)` for every pair of occurring masks.
fn mask_sums(oracle: &WeingartenOracle, k: usize, ms: &[u32]) -> Result<HashMap<(u32, u32), f64>> {
    let t = oracle.table(k / 2)?;
    let mut uniq: Vec<u32> = ms.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let pairs: Vec<(u32, u32)> = uniq.iter().flat_map(|a| uniq.iter().map(move |b| (*a, *b))).collect();
    Ok(pairs
        .into_par_iter()
        .map(|(a, bm)| {
            let mut s = BigRational::zero();
            for i in (0..t.pairings.len()).filter(|i| a >> i & 1 == 1) {
                for j in (0..t.pairings.len()).filter(|j| bm >> j & 1 == 1) {
                    s += &t.wg[i][j];
                }
            }
            ((a, bm), s.to_f64().unwrap_or(f64::NAN))
        })
        .collect())
}

/// Every Haar moment of degree `<= max_degree` in the generators, plus the
/// three routes to `h(chi_1^{2m})`.
pub fn haar_oracle_comparison<T: Real>(
    b: &dyn RepBackend<T>,
    oracle: &WeingartenOracle,
    max_degree: usize,
    seed: u64,
) -> Result<OracleReport> {
    let nn = b.params().N();
    let g = nn * nn;
    let alg = FourierAlgebra::new(b);
    let p_max = max_degree.div_ceil(2);
    let words = all_words(&alg, nn, p_max)?;

    let mut adjoint_defect = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in 1..=p_max {
        for _ in 0..20 {
            let w = rng.random_range(0..words[p].len());
            let adj = alg.adjoint(&words[p][w])?;
            adjoint_defect = adjoint_defect.max(to_f64(adj.sub(&words[p][reverse_word(w, g, p)]).max_abs()));
        }
    }

    let mut degrees = Vec::new();
    let mut spot = 0usize;
    for deg in 0..=max_degree {
        let total = (g as u64).pow(deg as u32);
        if deg % 2 == 1 {
            // supports of words of lengths of different parity are disjoint
            degrees.push(DegreeRow { degree: deg, moments: total, nonzero: 0, max_error: 0.0 });
            continue;
        }
        let p = deg / 2;
        let ms = masks(oracle, nn, deg)?;
        let sums = mask_sums(oracle, deg, &ms)?;
        let seq = |w: usize, pick: usize| digits(w, g, p).iter().fold(0, |acc, x| acc * nn + if pick == 0 { x / nn } else { x % nn });
        let shift = nn.pow(p as u32);
        let wcount = words[p].len();
        let iseq: Vec<usize> = (0..wcount).map(|w| seq(w, 0)).collect();
        let jseq: Vec<usize> = (0..wcount).map(|w| seq(w, 1)).collect();
        let weingarten = |w1: usize, w2: usize| {
            let mi = ms[iseq[w1] * shift + iseq[w2]];
            let mj = ms[jseq[w1] * shift + jseq[w2]];
            sums[&(mi, mj)]
        };
        for _ in 0..50 {
            let (w1, w2) = (rng.random_range(0..wcount), rng.random_range(0..wcount));
            let word: Vec<(usize, usize)> =
                digits(w1, g, p).into_iter().chain(digits(w2, g, p)).map(|x| (x / nn, x % nn)).collect();
            if (oracle.haar_moment_f64(&word)? - weingarten(w1, w2)).abs() > 1e-15 {
                return Err(Error::Invariant("pairing-mask table disagrees with the Weingarten oracle".into()));
            }
            spot += 1;
        }
        let fw = flatten(&words[p], b, p, false)?;
        let rev: Vec<usize> = (0..wcount).map(|w| reverse_word(w, g, p)).collect();
        let chunk = 64;
        let (err, nonzero) = (0..wcount.div_ceil(chunk))
            .into_par_iter()
            .map(|c| -> Result<(f64, u64)> {
                let lo = c * chunk;
                let hi = (lo + chunk).min(wcount);
                let adj: Vec<FourierElement<T>> = (lo..hi).map(|w1| words[p][rev[w1]].clone()).collect();
                let a = flatten(&adj, b, p, true)?;
                let h = a.tr_mul(&fw);
                let mut err = 0.0f64;
                let mut nz = 0u64;
                for (r, w1) in (lo..hi).enumerate() {
                    for w2 in 0..wcount {
                        let want = weingarten(w1, w2);
                        if want != 0.0 {
                            nz += 1;
                        }
                        err = err.max((to_f64(h[(r, w2)]) - want).abs());
                    }
                }
                Ok((err, nz))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold((0.0f64, 0u64), |a, x| (a.0.max(x.0), a.1 + x.1));
        degrees.push(DegreeRow { degree: deg, moments: total, nonzero, max_error: err });
    }

    let mut cat = Vec::new();
    for m in 1..=4usize {
        let fusion = to_f64(character_moment(&alg, 2 * m)?);
        let mut s = BigRational::zero();
        for w in 0..nn.pow(2 * m as u32) {
            let word: Vec<(usize, usize)> = digits(w, nn, 2 * m).into_iter().map(|i| (i, i)).collect();
            s += oracle.haar_moment(&word)?;
        }
        cat.push(CatalanRow {
            m,
            exact: catalan(m),
            fusion,
            weingarten: s.to_f64().unwrap_or(f64::NAN),
            quadrature: semicircle_moment::<f64>(2 * m),
        });
    }
    let max_err = degrees.iter().fold(0.0f64, |a, r| a.max(r.max_error));
    let count: u64 = degrees.iter().map(|r| r.moments).sum();
    let cat_ok = cat.iter().all(|r| {
        let e = r.exact as f64;
        [r.fusion, r.weingarten, r.quadrature].iter().all(|v| (v - e).abs() <= 1e-10 * e.max(1.0))
    });
    let checks = vec![
        Check::new(
            "Haar moments: Fourier model vs Weingarten",
            max_err <= 1e-10,
            format!("{count} moments of degree <= {max_degree}, max error {max_err:.3e}"),
        ),
        Check::new("generator words are self-adjoint up to reversal", adjoint_defect <= 1e-12, format!("{adjoint_defect:.3e}")),
        Check::new("h(chi_1^2m) = Catalan(m), three routes", cat_ok, format!("{:?}", cat.iter().map(|r| r.exact).collect::<Vec<_>>())),
    ];
    Ok(OracleReport { degrees, catalan: cat, adjoint_defect, mask_spot_checks: spot, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::make_params;
    use crate::rep::coupled::CoupledBackend;

    #[test]
    fn low_degrees_exhaustive() {
        let b = CoupledBackend::new(make_params::<f64>(3).unwrap());
        let o = WeingartenOracle::new(3).unwrap();
        let r = haar_oracle_comparison(&b, &o, 4, 1).unwrap();
        assert!(r.checks.iter().all(|c| c.pass), "{:?}", r.checks);
        assert_eq!(r.degrees[2].moments, 81);
        assert_eq!(r.degrees[2].nonzero, 9);
    }

    #[test]
    fn word_digits() {
        assert_eq!(digits(5, 3, 3), vec![0, 1, 2]);
        assert_eq!(reverse_word(5, 3, 3), 21);
    }
}
