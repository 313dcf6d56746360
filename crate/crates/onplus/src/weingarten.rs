//! Exact Haar moments of monomials in the generators `u_ij` via noncrossing
//! pairings and the inverse of their loop Gram matrix.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub const MAX_K: usize = 8;

/// A noncrossing pairing of the points `0..2k`, stored as sorted pairs `(a, b)` with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NoncrossingPairing {
    pub k: usize,
    pub pairs: Vec<(usize, usize)>,
}

impl NoncrossingPairing {
    /// Partner of each point.
    pub fn partner(&self) -> Vec<usize> {
        let mut p = vec![0; 2 * self.k];
        for &(a, b) in &self.pairs {
            p[a] = b;
            p[b] = a;
        }
        p
    }

    pub fn is_valid(&self) -> bool {
        let mut seen = vec![false; 2 * self.k];
        for &(a, b) in &self.pairs {
            if a >= b || b >= 2 * self.k || seen[a] || seen[b] {
                return false;
            }
            seen[a] = true;
            seen[b] = true;
        }
        if !seen.iter().all(|&s| s) {
            return false;
        }
        for &(a, b) in &self.pairs {
            for &(c, d) in &self.pairs {
                if a < c && c < b && b < d {
                    return false;
                }
            }
        }
        true
    }

    /// `delta_p(idx)`: indices agree along every pair.
    pub fn respects(&self, idx: &[usize]) -> bool {
        self.pairs.iter().all(|&(a, b)| idx[a] == idx[b])
    }
}

fn pairings_of(points: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if points.is_empty() {
        return vec![vec![]];
    }
    let first = points[0];
    let mut out = Vec::new();
    for j in (1..points.len()).step_by(2) {
        let inner = pairings_of(&points[1..j]);
        let outer = pairings_of(&points[j + 1..]);
        for i in &inner {
            for o in &outer {
                let mut v = Vec::with_capacity(points.len() / 2);
                v.push((first, points[j]));
                v.extend_from_slice(i);
                v.extend_from_slice(o);
                v.sort_unstable();
                out.push(v);
            }
        }
    }
    out
}

/// All noncrossing pairings of `2k` points in lexicographic order of their pair lists.
pub fn enumerate_pairings(k: usize) -> Result<Vec<NoncrossingPairing>> {
    if k > MAX_K {
        return Err(Error::OutOfRange(format!("k={k} > {MAX_K}")));
    }
    let pts: Vec<usize> = (0..2 * k).collect();
    let mut v: Vec<NoncrossingPairing> = pairings_of(&pts)
        .into_iter()
        .map(|pairs| NoncrossingPairing { k, pairs })
        .collect();
    v.sort();
    Ok(v)
}

/// Number of closed loops formed by gluing `p` to `q`.
pub fn loop_count(p: &NoncrossingPairing, q: &NoncrossingPairing) -> Result<usize> {
    if p.k != q.k {
        return Err(Error::Precondition(format!("pairings on {} vs {} points", 2 * p.k, 2 * q.k)));
    }
    let (pp, qp) = (p.partner(), q.partner());
    let mut seen = vec![false; 2 * p.k];
    let mut loops = 0;
    for s in 0..2 * p.k {
        if seen[s] {
            continue;
        }
        loops += 1;
        let mut x = s;
        loop {
            seen[x] = true;
            let y = pp[x];
            seen[y] = true;
            x = qp[y];
            if x == s {
                break;
            }
        }
    }
    Ok(loops)
}

/// Gram matrix of the pairings and its exact inverse.
#[derive(Debug, Clone)]
pub struct WeingartenTable {
    pub k: usize,
    pub n: usize,
    pub pairings: Vec<NoncrossingPairing>,
    pub gram: Vec<Vec<BigRational>>,
    pub wg: Vec<Vec<BigRational>>,
}

fn invert_exact(a: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let n = a.len();
    let mut m: Vec<Vec<BigRational>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, piv);
        let inv = m[col][col].recip();
        for x in m[col].iter_mut() {
            *x = &*x * &inv;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                let (src, dst) = if r < col {
                    let (lo, hi) = m.split_at_mut(col);
                    (&hi[0], &mut lo[r])
                } else {
                    let (lo, hi) = m.split_at_mut(r);
                    (&lo[col], &mut hi[0])
                };
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    if !s.is_zero() {
                        *d = &*d - &f * s;
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn weingarten_table(k: usize, n: usize) -> Result<WeingartenTable> {
    let pairings = enumerate_pairings(k)?;
    let nb = BigInt::from(n);
    let gram: Vec<Vec<BigRational>> = pairings
        .iter()
        .map(|p| {
            pairings
                .iter()
                .map(|q| {
                    let l = loop_count(p, q).expect("same size");
                    BigRational::from_integer(num_traits::pow(nb.clone(), l))
                })
                .collect()
        })
        .collect();
    let wg = invert_exact(&gram).ok_or_else(|| Error::Degenerate(format!("singular Gram matrix for k={k}, N={n}")))?;
    Ok(WeingartenTable { k, n, pairings, gram, wg })
}

impl WeingartenTable {
    /// Checks `gram * wg == id` exactly.
    pub fn is_exact_inverse(&self) -> bool {
        let c = self.gram.len();
        (0..c).all(|i| {
            (0..c).all(|j| {
                let s = (0..c).fold(BigRational::zero(), |acc, t| acc + &self.gram[i][t] * &self.wg[t][j]);
                if i == j { s.is_one() } else { s.is_zero() }
            })
        })
    }
}

/// Shared, lazily built Weingarten tables for a fixed `N`.
#[derive(Debug)]
pub struct WeingartenOracle {
    n: usize,
    tables: RwLock<HashMap<usize, Arc<WeingartenTable>>>,
    memo: RwLock<HashMap<(Vec<u8>, Vec<u8>), BigRational>>,
}

fn kernel(idx: &[usize]) -> Vec<u8> {
    let mut map = HashMap::new();
    idx.iter()
        .map(|i| {
            let next = map.len() as u8;
            *map.entry(*i).or_insert(next)
        })
        .collect()
}

impl WeingartenOracle {
    pub fn new(n: usize) -> Result<Self> {
        if n <= 2 {
            return Err(Error::InvalidN(n));
        }
        let o = WeingartenOracle { n, tables: RwLock::new(HashMap::new()), memo: RwLock::new(HashMap::new()) };
        o.convention_self_test()?;
        Ok(o)
    }

    pub fn table(&self, k: usize) -> Result<Arc<WeingartenTable>> {
        if let Some(t) = self.tables.read().unwrap().get(&k) {
            return Ok(t.clone());
        }
        let t = Arc::new(weingarten_table(k, self.n)?);
        self.tables.write().unwrap().entry(k).or_insert_with(|| t.clone());
        Ok(t)
    }

    /// `h(u_{i1 j1} ... u_{ip jp})` with 0-based indices.
    pub fn haar_moment(&self, word: &[(usize, usize)]) -> Result<BigRational> {
        if let Some(&(i, j)) = word.iter().find(|&&(i, j)| i >= self.n || j >= self.n) {
            return Err(Error::OutOfRange(format!("index ({i},{j}) outside 0..{}", self.n)));
        }
        if word.len() % 2 == 1 {
            return Ok(BigRational::zero());
        }
        let is: Vec<usize> = word.iter().map(|w| w.0).collect();
        let js: Vec<usize> = word.iter().map(|w| w.1).collect();
        let key = (kernel(&is), kernel(&js));
        if let Some(v) = self.memo.read().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let t = self.table(word.len() / 2)?;
        let ps: Vec<usize> = (0..t.pairings.len()).filter(|&a| t.pairings[a].respects(&is)).collect();
        let qs: Vec<usize> = (0..t.pairings.len()).filter(|&b| t.pairings[b].respects(&js)).collect();
        let mut s = BigRational::zero();
        for &a in &ps {
            for &b in &qs {
                s += &t.wg[a][b];
            }
        }
        self.memo.write().unwrap().insert(key, s.clone());
        Ok(s)
    }

    pub fn haar_moment_f64(&self, word: &[(usize, usize)]) -> Result<f64> {
        Ok(self.haar_moment(word)?.to_f64().unwrap_or(f64::NAN))
    }

    /// `h(u_{xi eta} u_{xi' eta'}^*)` expanding `u_{xi eta} = sum_ij xi_j conj(eta_i) u_ij`.
    pub fn coefficient_pair_moment(
        &self,
        xi: &[Complex64],
        eta: &[Complex64],
        xi2: &[Complex64],
        eta2: &[Complex64],
    ) -> Result<Complex64> {
        let n = self.n;
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let c1 = xi[j] * eta[i].conj();
                if c1.norm() == 0.0 {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        let c2 = (xi2[l] * eta2[k].conj()).conj();
                        if c2.norm() == 0.0 {
                            continue;
                        }
                        s += c1 * c2 * self.haar_moment_f64(&[(i, j), (k, l)])?;
                    }
                }
            }
        }
        Ok(s)
    }

    /// Fails if the coefficient expansion used here is the transposed one.
    fn convention_self_test(&self) -> Result<()> {
        let n = self.n;
        let z = Complex64::new(0.0, 0.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut xi = vec![z; n];
        xi[0] = Complex64::new(r, 0.0);
        xi[1] = Complex64::new(0.0, r);
        let mut eta = vec![z; n];
        eta[0] = Complex64::new(1.0, 0.0);
        let mut xi2 = vec![z; n];
        xi2[1] = Complex64::new(1.0, 0.0);
        let mut eta2 = vec![z; n];
        eta2[0] = Complex64::new(r, 0.0);
        eta2[2] = Complex64::new(0.0, r);
        let got = self.coefficient_pair_moment(&xi, &eta, &xi2, &eta2)?;
        let ip = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>();
        let want = ip(&xi, &xi2) * ip(&eta2, &eta) / n as f64;
        let transposed = ip(&eta, &eta2) * ip(&xi2, &xi) / n as f64;
        if (got - want).norm() > 1e-12 || (want - transposed).norm() < 1e-6 {
            return Err(Error::Invariant(format!(
                "coefficient convention self-test failed: got {got}, expected {want}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn pairing_counts() {
        for k in 0..=6 {
            let v = enumerate_pairings(k).unwrap();
            assert_eq!(v.len() as u128, crate::qcore::catalan(k));
            assert!(v.iter().all(|p| p.is_valid()));
        }
        let two = enumerate_pairings(2).unwrap();
        assert_eq!(two[0].pairs, vec![(0, 1), (2, 3)]);
        assert_eq!(two[1].pairs, vec![(0, 3), (1, 2)]);
        assert!(enumerate_pairings(9).is_err());
        assert_eq!(enumerate_pairings(0).unwrap()[0].pairs, vec![]);
    }

    #[test]
    fn loops() {
        let two = enumerate_pairings(2).unwrap();
        assert_eq!(loop_count(&two[0], &two[1]).unwrap(), 1);
        for k in 0..5 {
            for p in enumerate_pairings(k).unwrap() {
                assert_eq!(loop_count(&p, &p).unwrap(), k);
            }
        }
        let one = enumerate_pairings(1).unwrap();
        assert!(loop_count(&one[0], &two[0]).is_err());
    }

    #[test]
    fn small_tables() {
        let t1 = weingarten_table(1, 3).unwrap();
        assert_eq!(t1.gram[0][0], q(3, 1));
        assert_eq!(t1.wg[0][0], q(1, 3));
        let t2 = weingarten_table(2, 3).unwrap();
        assert_eq!(t2.gram, vec![vec![q(9, 1), q(3, 1)], vec![q(3, 1), q(9, 1)]]);
        assert_eq!(t2.wg, vec![vec![q(9, 72), q(-3, 72)], vec![q(-3, 72), q(9, 72)]]);
        let t0 = weingarten_table(0, 3).unwrap();
        assert_eq!(t0.wg, vec![vec![q(1, 1)]]);
        for k in 0..=4 {
            assert!(weingarten_table(k, 3).unwrap().is_exact_inverse());
        }
    }

    #[test]
    fn moments() {
        let o = WeingartenOracle::new(3).unwrap();
        assert!(o.haar_moment(&[(0, 0)]).unwrap().is_zero());
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let want = if i == k && j == l { q(1, 3) } else { q(0, 1) };
                        assert_eq!(o.haar_moment(&[(i, j), (k, l)]).unwrap(), want);
                    }
                }
            }
        }
        assert!(o.haar_moment(&[(3, 0), (0, 0)]).is_err());
    }

    #[test]
    fn character_fourth_moment() {
        let o = WeingartenOracle::new(3).unwrap();
        let mut s = BigRational::zero();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        s += o.haar_moment(&[(a, a), (b, b), (c, c), (d, d)]).unwrap();
                    }
                }
            }
        }
        assert_eq!(s, q(2, 1));
    }

    #[test]
    fn rejects_n2() {
        assert!(WeingartenOracle::new(2).is_err());
    }
}
