//! Open-boundary matrix product states for qubit chains.
//!
//! Site `i` stores two matrices `A[i][s]` (`s ∈ {0, 1}`) of shape `χ_i × χ_{i+1}`
//! with `χ_0 = χ_n = 1`, so the amplitude of a basis string is the ordered
//! product `A[0][s_0] · A[1][s_1] ⋯ A[n-1][s_{n-1}]`. Site 0 is the leftmost
//! character of a basis string.
//!
//! The state is kept in mixed canonical form around an optional orthogonality
//! center. Two-site gates move the center instead of re-canonicalizing the
//! whole chain.

use faer::Mat;
use log::trace;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{unitarity_error2, unitarity_error4, Mat2, Mat4, ONE, ZERO};

/// Tolerance used when validating caller-supplied gates.
pub const UNITARY_TOL: f64 = 1e-10;

type Site = [Mat<C64>; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Maximum bond dimension; `None` means unbounded.
    pub chi_max: Option<usize>,
    /// Singular values below `cutoff × s_max` are discarded.
    pub cutoff: f64,
    pub renormalize: bool,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            chi_max: None,
            cutoff: 1e-12,
            renormalize: true,
        }
    }
}

impl TruncationPolicy {
    pub fn new(chi_max: Option<usize>, cutoff: f64, renormalize: bool) -> Result<Self> {
        let p = TruncationPolicy {
            chi_max,
            cutoff,
            renormalize,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn unbounded() -> Self {
        Self::default()
    }

    pub fn with_chi(chi_max: usize) -> Self {
        TruncationPolicy {
            chi_max: Some(chi_max),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chi_max == Some(0) {
            return Err(Error::invalid("chi_max must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.cutoff) {
            return Err(Error::invalid(format!(
                "cutoff must lie in [0, 1), got {}",
                self.cutoff
            )));
        }
        Ok(())
    }

    /// Number of singular values to keep from a non-increasing list.
    fn keep_count(&self, s: &[f64]) -> usize {
        let Some(&s0) = s.first() else { return 0 };
        let threshold = self.cutoff * s0;
        let mut keep = s.iter().take_while(|&&x| x > threshold).count().max(1);
        if let Some(chi) = self.chi_max {
            keep = keep.min(chi);
        }
        keep
    }
}

#[derive(Clone, Debug)]
pub struct Mps {
    sites: Vec<Site>,
    center: Option<usize>,
    discarded: f64,
}

pub(crate) fn parse_bits(bits: &str) -> Result<Vec<usize>> {
    if bits.is_empty() {
        return Err(Error::invalid("basis string must be nonempty"));
    }
    bits.chars()
        .map(|ch| match ch {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::invalid(format!(
                "basis string may only contain 0 or 1, found {other:?}"
            ))),
        })
        .collect()
}

fn scalar_mat(z: C64) -> Mat<C64> {
    Mat::from_fn(1, 1, |_, _| z)
}

fn scale_in_place(m: &mut Mat<C64>, z: C64) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= z;
        }
    }
}

fn frob_sq(m: &Mat<C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc
}

impl Mps {
    /// Product state from a binary string such as `"1010"`.
    pub fn from_product_state(bits: &str) -> Result<Self> {
        let bits = parse_bits(bits)?;
        Ok(Self::from_bit_vec(&bits))
    }

    pub(crate) fn from_bit_vec(bits: &[usize]) -> Self {
        let sites = bits
            .iter()
            .map(|&b| {
                let mut site: Site = [Mat::zeros(1, 1), Mat::zeros(1, 1)];
                site[b][(0, 0)] = ONE;
                site
            })
            .collect();
        Mps {
            sites,
            center: Some(0),
            discarded: 0.0,
        }
    }

    /// `|0…0⟩` on `n` qubits.
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("qubit count must be positive"));
        }
        Ok(Self::from_bit_vec(&vec![0; n]))
    }

    /// Random normalized MPS with the given internal bond dimension cap.
    pub fn random<R: Rng + ?Sized>(n: usize, chi: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || chi == 0 {
            return Err(Error::invalid("random MPS needs n ≥ 1 and chi ≥ 1"));
        }
        let mut dims = vec![1usize; n + 1];
        for (j, d) in dims.iter_mut().enumerate().take(n).skip(1) {
            let left_cap = 1usize.checked_shl(j as u32).unwrap_or(usize::MAX);
            let right_cap = 1usize.checked_shl((n - j) as u32).unwrap_or(usize::MAX);
            *d = chi.min(left_cap).min(right_cap);
        }
        let sites = (0..n)
            .map(|i| {
                let mk = |rng: &mut R| {
                    Mat::from_fn(dims[i], dims[i + 1], |_, _| {
                        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                    })
                };
                [mk(rng), mk(rng)]
            })
            .collect();
        let mut psi = Mps {
            sites,
            center: None,
            discarded: 0.0,
        };
        psi.normalize();
        Ok(psi)
    }

    pub fn n(&self) -> usize {
        self.sites.len()
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    /// Accumulated discarded weight from every truncating gate application.
    pub fn discarded_weight(&self) -> f64 {
        self.discarded
    }

    pub fn reset_discarded_weight(&mut self) {
        self.discarded = 0.0;
    }

    /// Internal bond dimensions `χ_1 … χ_{n-1}`.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites.iter().skip(1).map(|s| s[0].nrows()).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn site_matrix(&self, site: usize, s: usize) -> &Mat<C64> {
        &self.sites[site][s]
    }

    fn check_bits(&self, bits: &[usize]) -> Result<()> {
        if bits.len() != self.n() {
            return Err(Error::invalid(format!(
                "basis string has length {}, state has {} qubits",
                bits.len(),
                self.n()
            )));
        }
        Ok(())
    }

    pub fn amplitude(&self, bits: &str) -> Result<C64> {
        let bits = parse_bits(bits)?;
        self.check_bits(&bits)?;
        Ok(self.amplitude_of(&bits))
    }

    /// Amplitude for an index assignment given as 0/1 values, no validation.
    pub(crate) fn amplitude_of(&self, bits: &[usize]) -> C64 {
        let mut row: Vec<C64> = vec![ONE];
        for (site, &b) in self.sites.iter().zip(bits) {
            let m = &site[b];
            let mut next = vec![ZERO; m.ncols()];
            for (i, &r) in row.iter().enumerate() {
                if r == ZERO {
                    continue;
                }
                for (j, nx) in next.iter_mut().enumerate() {
                    *nx += r * m[(i, j)];
                }
            }
            row = next;
        }
        row[0]
    }

    /// Amplitudes of every basis string with at most `k` ones, grouped by
    /// Hamming weight. Each entry is `(positions of the ones, amplitude)`.
    ///
    /// Prefixes along the all-zero path are shared and a suffix of zeros is
    /// closed off with a cached right vector, so `k = 1` costs `O(n·χ²)`.
    pub fn low_weight_amplitudes(&self, k: usize) -> Vec<Vec<(Vec<usize>, C64)>> {
        let n = self.n();
        let k = k.min(n);
        // zero_right[i] = A0[i] · … · A0[n-1] as a column vector
        let mut zero_right: Vec<Vec<C64>> = vec![vec![ONE]; n + 1];
        for i in (0..n).rev() {
            let m = &self.sites[i][0];
            let next = &zero_right[i + 1];
            zero_right[i] = (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| m[(r, c)] * next[c]).sum())
                .collect();
        }
        let mut out: Vec<Vec<(Vec<usize>, C64)>> = vec![Vec::new(); k + 1];
        let mut stack: Vec<(usize, Vec<usize>, Vec<C64>)> = vec![(0, Vec::new(), vec![ONE])];
        while let Some((site, ones, row)) = stack.pop() {
            // close with zeros from here on
            let amp: C64 = row.iter().zip(&zero_right[site]).map(|(a, b)| a * b).sum();
            if ones.len() <= k {
                out[ones.len()].push((ones.clone(), amp));
            }
            if ones.len() == k {
                continue;
            }
            // branch: the next one sits at position p ≥ site
            let mut prefix = row;
            for p in site..n {
                let with_one = row_times(&prefix, &self.sites[p][1]);
                let mut o = ones.clone();
                o.push(p);
                stack.push((p + 1, o, with_one));
                prefix = row_times(&prefix, &self.sites[p][0]);
            }
        }
        for group in out.iter_mut() {
            group.sort_by(|a, b| a.0.cmp(&b.0));
        }
        out
    }

    /// `⟨self|other⟩` by left-to-right transfer-matrix contraction.
    pub fn inner_product(&self, other: &Mps) -> Result<C64> {
        if self.n() != other.n() {
            return Err(Error::invalid(format!(
                "qubit counts differ: {} vs {}",
                self.n(),
                other.n()
            )));
        }
        let mut env = scalar_mat(ONE);
        for (a, b) in self.sites.iter().zip(&other.sites) {
            env = transfer(&env, a, b);
        }
        Ok(env[(0, 0)])
    }

    pub fn fidelity(&self, other: &Mps) -> Result<f64> {
        Ok(self.inner_product(other)?.norm_sqr())
    }

    pub fn norm(&self) -> f64 {
        match self.center {
            Some(c) => (frob_sq(&self.sites[c][0]) + frob_sq(&self.sites[c][1])).sqrt(),
            None => self
                .inner_product(self)
                .map(|z| z.re.max(0.0).sqrt())
                .unwrap_or(0.0),
        }
    }

    pub fn normalize(&mut self) {
        if self.center.is_none() {
            self.move_center(0);
        }
        let c = self.center.unwrap_or(0);
        let nrm = self.norm();
        if nrm > 0.0 {
            let inv = C64::new(1.0 / nrm, 0.0);
            scale_in_place(&mut self.sites[c][0], inv);
            scale_in_place(&mut self.sites[c][1], inv);
        }
    }

    /// Multiply the whole state by a scalar (applied to one tensor).
    pub fn scale(&mut self, z: C64) {
        let c = self.center.unwrap_or(0);
        scale_in_place(&mut self.sites[c][0], z);
        scale_in_place(&mut self.sites[c][1], z);
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n() {
            return Err(Error::invalid(format!(
                "site {site} out of range for {} qubits",
                self.n()
            )));
        }
        Ok(())
    }

    pub fn apply_single_site_gate(&mut self, u: &Mat2, site: usize) -> Result<()> {
        self.check_site(site)?;
        let err = unitarity_error2(u);
        if err > UNITARY_TOL {
            return Err(Error::NonUnitary(err));
        }
        self.apply_single_unchecked(u, site);
        Ok(())
    }

    /// Single-site update; preserves every orthonormality property because
    /// it mixes the two physical slices unitarily.
    pub(crate) fn apply_single_unchecked(&mut self, u: &Mat2, site: usize) {
        let [a0, a1] = &self.sites[site];
        let (r, c) = (a0.nrows(), a0.ncols());
        let b0 = Mat::from_fn(r, c, |i, j| u[(0, 0)] * a0[(i, j)] + u[(0, 1)] * a1[(i, j)]);
        let b1 = Mat::from_fn(r, c, |i, j| u[(1, 0)] * a0[(i, j)] + u[(1, 1)] * a1[(i, j)]);
        self.sites[site] = [b0, b1];
    }

    /// Apply a 4×4 gate to `(left_site, left_site + 1)`, split by SVD and
    /// truncate per `policy`. Returns the discarded weight of this step.
    ///
    /// The orthogonality center ends on the touched site farther from where
    /// it was: on `left_site + 1` if the center was at or left of
    /// `left_site`, otherwise on `left_site`.
    pub fn apply_two_site_gate(
        &mut self,
        u: &Mat4,
        left_site: usize,
        policy: &TruncationPolicy,
    ) -> Result<f64> {
        if self.n() < 2 || left_site + 1 >= self.n() {
            return Err(Error::invalid(format!(
                "two-site gate at {left_site} out of range for {} qubits",
                self.n()
            )));
        }
        policy.validate()?;
        let err = unitarity_error4(u);
        if err > UNITARY_TOL {
            return Err(Error::NonUnitary(err));
        }
        self.apply_two_unchecked(u, left_site, policy)
    }

    pub(crate) fn apply_two_unchecked(
        &mut self,
        u: &Mat4,
        i: usize,
        policy: &TruncationPolicy,
    ) -> Result<f64> {
        let sweep_right = match self.center {
            Some(c) => c <= i,
            None => true,
        };
        let anchor = if sweep_right { i } else { i + 1 };
        self.move_center(anchor);

        let dl = self.sites[i][0].nrows();
        let dr = self.sites[i + 1][0].ncols();
        let pairs: [[Mat<C64>; 2]; 2] = std::array::from_fn(|t1| {
            std::array::from_fn(|t2| &self.sites[i][t1] * &self.sites[i + 1][t2])
        });
        let mut theta = Mat::<C64>::zeros(2 * dl, 2 * dr);
        for s1 in 0..2 {
            for s2 in 0..2 {
                let row = 2 * s1 + s2;
                for t1 in 0..2 {
                    for t2 in 0..2 {
                        let w = u[(row, 2 * t1 + t2)];
                        if w == ZERO {
                            continue;
                        }
                        let p = &pairs[t1][t2];
                        for col in 0..dr {
                            for r in 0..dl {
                                theta[(s1 * dl + r, s2 * dr + col)] += w * p[(r, col)];
                            }
                        }
                    }
                }
            }
        }

        let svd = theta
            .thin_svd()
            .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
        let sv: Vec<f64> = {
            let col = svd.S().column_vector();
            (0..col.nrows()).map(|k| col[k].re).collect()
        };
        let total: f64 = sv.iter().map(|x| x * x).sum();
        let keep = policy.keep_count(&sv);
        let kept: f64 = sv[..keep].iter().map(|x| x * x).sum();
        let tail: f64 = sv[keep..].iter().map(|x| x * x).sum();
        let discarded = if total > 0.0 { tail / total } else { 0.0 };
        if discarded > 0.0 {
            trace!(
                "truncated bond ({i},{}) to {keep}, discarded weight {discarded:.3e}",
                i + 1
            );
        }
        self.discarded += discarded;
        let norm_factor = if policy.renormalize && kept > 0.0 {
            1.0 / kept.sqrt()
        } else {
            1.0
        };

        let uu = svd.U();
        let vv = svd.V();
        let weight = |k: usize| sv[k] * norm_factor;
        if sweep_right {
            // left site gets U, right site gets S·V†
            self.sites[i] = [
                Mat::from_fn(dl, keep, |r, k| uu[(r, k)]),
                Mat::from_fn(dl, keep, |r, k| uu[(dl + r, k)]),
            ];
            self.sites[i + 1] = [
                Mat::from_fn(keep, dr, |k, col| vv[(col, k)].conj() * weight(k)),
                Mat::from_fn(keep, dr, |k, col| vv[(dr + col, k)].conj() * weight(k)),
            ];
            self.center = Some(i + 1);
        } else {
            self.sites[i] = [
                Mat::from_fn(dl, keep, |r, k| uu[(r, k)] * weight(k)),
                Mat::from_fn(dl, keep, |r, k| uu[(dl + r, k)] * weight(k)),
            ];
            self.sites[i + 1] = [
                Mat::from_fn(keep, dr, |k, col| vv[(col, k)].conj()),
                Mat::from_fn(keep, dr, |k, col| vv[(dr + col, k)].conj()),
            ];
            self.center = Some(i);
        }
        Ok(discarded)
    }

    /// Bring the state into mixed canonical form with center `center`.
    pub fn canonicalize(&mut self, center: usize) -> Result<()> {
        self.check_site(center)?;
        self.move_center(center);
        Ok(())
    }

    pub(crate) fn move_center(&mut self, target: usize) {
        match self.center {
            None => {
                for i in 0..target {
                    self.shift_right(i);
                }
                for i in (target + 1..self.n()).rev() {
                    self.shift_left(i);
                }
            }
            Some(c) if c < target => {
                for i in c..target {
                    self.shift_right(i);
                }
            }
            Some(c) => {
                for i in (target + 1..=c).rev() {
                    self.shift_left(i);
                }
            }
        }
        self.center = Some(target);
    }

    /// QR of site `i` reshaped as `(2χ_i) × χ_{i+1}`; R is pushed into site `i+1`.
    fn shift_right(&mut self, i: usize) {
        let dl = self.sites[i][0].nrows();
        let dr = self.sites[i][0].ncols();
        let m = Mat::from_fn(2 * dl, dr, |r, c| {
            if r < dl {
                self.sites[i][0][(r, c)]
            } else {
                self.sites[i][1][(r - dl, c)]
            }
        });
        let qr = m.qr();
        let q = qr.compute_thin_Q();
        let rr = qr.thin_R().to_owned();
        let k = q.ncols();
        self.sites[i] = [
            Mat::from_fn(dl, k, |r, c| q[(r, c)]),
            Mat::from_fn(dl, k, |r, c| q[(dl + r, c)]),
        ];
        if i + 1 < self.n() {
            let next = &self.sites[i + 1];
            self.sites[i + 1] = [&rr * &next[0], &rr * &next[1]];
        } else {
            // Chain end: R is the 1×1 norm factor, fold it back in.
            let z = rr[(0, 0)];
            scale_in_place(&mut self.sites[i][0], z);
            scale_in_place(&mut self.sites[i][1], z);
        }
    }

    /// LQ of site `i` reshaped as `χ_i × (2χ_{i+1})`; L is pushed into site `i-1`.
    fn shift_left(&mut self, i: usize) {
        let dl = self.sites[i][0].nrows();
        let dr = self.sites[i][0].ncols();
        // QR of the adjoint: M† = Q R  ⇒  M = R† Q†
        let mh = Mat::from_fn(2 * dr, dl, |r, c| {
            if r < dr {
                self.sites[i][0][(c, r)].conj()
            } else {
                self.sites[i][1][(c, r - dr)].conj()
            }
        });
        let qr = mh.qr();
        let q = qr.compute_thin_Q();
        let l = qr.thin_R().adjoint().to_owned();
        let k = q.ncols();
        self.sites[i] = [
            Mat::from_fn(k, dr, |r, c| q[(c, r)].conj()),
            Mat::from_fn(k, dr, |r, c| q[(dr + c, r)].conj()),
        ];
        if i > 0 {
            let prev = &self.sites[i - 1];
            self.sites[i - 1] = [&prev[0] * &l, &prev[1] * &l];
        } else {
            let z = l[(0, 0)];
            scale_in_place(&mut self.sites[i][0], z);
            scale_in_place(&mut self.sites[i][1], z);
        }
    }

    /// Max deviation of `Σ_s A[s]† A[s]` from the identity.
    pub fn left_orthonormality_error(&self, site: usize) -> f64 {
        let [a0, a1] = &self.sites[site];
        let g = a0.adjoint() * a0 + a1.adjoint() * a1;
        identity_error(&g)
    }

    /// Max deviation of `Σ_s A[s] A[s]†` from the identity.
    pub fn right_orthonormality_error(&self, site: usize) -> f64 {
        let [a0, a1] = &self.sites[site];
        let g = a0 * a0.adjoint() + a1 * a1.adjoint();
        identity_error(&g)
    }

    /// Dense amplitude vector, index `Σ_i s_i 2^{n-1-i}`.
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        let n = self.n();
        if n > 24 {
            return Err(Error::SizeLimit {
                what: "dense conversion",
                requested: n,
                limit: 24,
            });
        }
        // Grow a (2^k × χ) matrix site by site.
        let mut acc: Vec<Vec<C64>> = vec![vec![ONE]];
        for site in &self.sites {
            let dr = site[0].ncols();
            let mut next = Vec::with_capacity(acc.len() * 2);
            for row in &acc {
                for m in site.iter() {
                    let mut v = vec![ZERO; dr];
                    for (i, &r) in row.iter().enumerate() {
                        for (j, x) in v.iter_mut().enumerate() {
                            *x += r * m[(i, j)];
                        }
                    }
                    next.push(v);
                }
            }
            acc = next;
        }
        Ok(acc.into_iter().map(|v| v[0]).collect())
    }

    /// Exact MPS from a dense amplitude vector of length `2^n`, using
    /// successive SVDs truncated per `policy` (no renormalization).
    pub fn from_dense(amps: &[C64], policy: &TruncationPolicy) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::invalid(
                "dense state length must be a power of two ≥ 2",
            ));
        }
        let n = len.trailing_zeros() as usize;
        let mut sites = Vec::with_capacity(n);
        let mut rest = Mat::from_fn(1, len, |_, c| amps[c]);
        let mut discarded = 0.0;
        for _ in 0..n - 1 {
            let dl = rest.nrows();
            let cols = rest.ncols() / 2;
            // rows (s, l) with the site's physical index as the slow index
            let m = Mat::from_fn(2 * dl, cols, |r, c| {
                let (s, l) = (r / dl, r % dl);
                rest[(l, s * cols + c)]
            });
            let svd = m
                .thin_svd()
                .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
            let col = svd.S().column_vector();
            let sv: Vec<f64> = (0..col.nrows()).map(|k| col[k].re).collect();
            let keep = policy.keep_count(&sv).max(1);
            let total: f64 = sv.iter().map(|x| x * x).sum();
            let tail: f64 = sv[keep..].iter().map(|x| x * x).sum();
            if total > 0.0 {
                discarded += tail / total;
            }
            let uu = svd.U();
            let vv = svd.V();
            sites.push([
                Mat::from_fn(dl, keep, |r, k| uu[(r, k)]),
                Mat::from_fn(dl, keep, |r, k| uu[(dl + r, k)]),
            ]);
            rest = Mat::from_fn(keep, cols, |k, c| vv[(c, k)].conj() * sv[k]);
        }
        let dl = rest.nrows();
        sites.push([
            Mat::from_fn(dl, 1, |r, _| rest[(r, 0)]),
            Mat::from_fn(dl, 1, |r, _| rest[(r, 1)]),
        ]);
        Ok(Mps {
            sites,
            center: Some(n - 1),
            discarded,
        })
    }

    pub fn to_data(&self) -> MpsData {
        MpsData {
            n: self.n(),
            tensors: self
                .sites
                .iter()
                .map(|s| TensorData {
                    rows: s[0].nrows(),
                    cols: s[0].ncols(),
                    data: s
                        .iter()
                        .flat_map(|m| {
                            (0..m.nrows()).flat_map(move |r| (0..m.ncols()).map(move |c| m[(r, c)]))
                        })
                        .map(|z| [z.re, z.im])
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_data(data: &MpsData) -> Result<Self> {
        if data.tensors.len() != data.n || data.n == 0 {
            return Err(Error::invalid("tensor count does not match qubit count"));
        }
        let mut prev = 1;
        let mut sites = Vec::with_capacity(data.n);
        for t in &data.tensors {
            if t.rows != prev || t.data.len() != 2 * t.rows * t.cols {
                return Err(Error::invalid("inconsistent tensor shapes"));
            }
            prev = t.cols;
            let at = |s: usize, r: usize, c: usize| {
                let [re, im] = t.data[s * t.rows * t.cols + r * t.cols + c];
                C64::new(re, im)
            };
            sites.push([
                Mat::from_fn(t.rows, t.cols, |r, c| at(0, r, c)),
                Mat::from_fn(t.rows, t.cols, |r, c| at(1, r, c)),
            ]);
        }
        if prev != 1 {
            return Err(Error::invalid("right boundary bond must be 1"));
        }
        Ok(Mps {
            sites,
            center: None,
            discarded: 0.0,
        })
    }
}

fn row_times(row: &[C64], m: &Mat<C64>) -> Vec<C64> {
    let mut next = vec![ZERO; m.ncols()];
    for (i, &r) in row.iter().enumerate() {
        if r == ZERO {
            continue;
        }
        for (j, nx) in next.iter_mut().enumerate() {
            *nx += r * m[(i, j)];
        }
    }
    next
}

impl Mps {
    /// Build from raw site tensors `[A[0], A[1]]` with matching bond shapes.
    pub(crate) fn from_sites(sites: Vec<[Mat<C64>; 2]>) -> Result<Self> {
        let mut prev = 1;
        for s in &sites {
            if s[0].nrows() != prev || s[1].nrows() != prev || s[0].ncols() != s[1].ncols() {
                return Err(Error::invalid("inconsistent tensor shapes"));
            }
            prev = s[0].ncols();
        }
        if sites.is_empty() || prev != 1 {
            return Err(Error::invalid("boundary bonds must be 1"));
        }
        Ok(Mps {
            sites,
            center: None,
            discarded: 0.0,
        })
    }
}

/// Serializable form of an MPS (row-major slices, `[re, im]` pairs).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MpsData {
    pub n: usize,
    pub tensors: Vec<TensorData>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

fn identity_error(g: &Mat<C64>) -> f64 {
    let mut err: f64 = 0.0;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let t = if i == j { ONE } else { ZERO };
            err = err.max((g[(i, j)] - t).norm());
        }
    }
    err
}

/// `E' = Σ_s A[s]† E B[s]`
fn transfer(env: &Mat<C64>, a: &Site, b: &Site) -> Mat<C64> {
    a[0].adjoint() * env * &b[0] + a[1].adjoint() * env * &b[1]
}

/// `F' = Σ_s K[s] F B[s]†` (ket on the left, bra conjugated on the right)
fn transfer_right(env: &Mat<C64>, bra: &Site, ket: &Site) -> Mat<C64> {
    &ket[0] * env * bra[0].adjoint() + &ket[1] * env * bra[1].adjoint()
}

/// Left/right transfer environments for the mixed overlap `⟨bra| · |ket⟩`.
///
/// `reduced_*` return the tensor `T[s][t]` such that
/// `⟨bra| O |ket⟩ = Σ_{s,t} O[s,t] · T[s][t]` for an operator `O` on the
/// given site(s).
pub struct TransitionEnv<'a> {
    bra: &'a Mps,
    ket: &'a Mps,
    left: Vec<Mat<C64>>,
    right: Vec<Mat<C64>>,
}

impl<'a> TransitionEnv<'a> {
    pub fn new(bra: &'a Mps, ket: &'a Mps) -> Result<Self> {
        let n = bra.n();
        if ket.n() != n {
            return Err(Error::invalid("qubit counts differ"));
        }
        let mut left = Vec::with_capacity(n + 1);
        left.push(scalar_mat(ONE));
        for i in 0..n {
            let next = transfer(&left[i], &bra.sites[i], &ket.sites[i]);
            left.push(next);
        }
        let mut right = vec![scalar_mat(ONE); n + 1];
        for i in (0..n).rev() {
            right[i] = transfer_right(&right[i + 1], &bra.sites[i], &ket.sites[i]);
        }
        Ok(TransitionEnv {
            bra,
            ket,
            left,
            right,
        })
    }

    pub fn overlap(&self) -> C64 {
        self.left[self.bra.n()][(0, 0)]
    }

    pub fn reduced_one_site(&self, i: usize) -> [[C64; 2]; 2] {
        let mut t = [[ZERO; 2]; 2];
        for (tk, row) in (0..2)
            .map(|tk| (tk, &self.ket.sites[i][tk]))
            .map(|(tk, k)| {
                let x = &self.left[i] * k * &self.right[i + 1];
                (tk, x)
            })
        {
            for (s, ts) in t.iter_mut().enumerate() {
                ts[tk] = frob_dot(&row, &self.bra.sites[i][s]);
            }
        }
        t
    }

    pub fn reduced_two_site(&self, i: usize) -> [[C64; 4]; 4] {
        let mut t = [[ZERO; 4]; 4];
        let mut bra_pairs: Vec<Mat<C64>> = Vec::with_capacity(4);
        for s1 in 0..2 {
            for s2 in 0..2 {
                bra_pairs.push(&self.bra.sites[i][s1] * &self.bra.sites[i + 1][s2]);
            }
        }
        for t1 in 0..2 {
            let lk = &self.left[i] * &self.ket.sites[i][t1];
            for t2 in 0..2 {
                let x = &lk * &self.ket.sites[i + 1][t2] * &self.right[i + 2];
                for (s, b) in bra_pairs.iter().enumerate() {
                    t[s][2 * t1 + t2] = frob_dot(&x, b);
                }
            }
        }
        t
    }
}

/// `Σ_{ab} x[a,b] · conj(b[a,b])`
fn frob_dot(x: &Mat<C64>, b: &Mat<C64>) -> C64 {
    let mut acc = ZERO;
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            acc += x[(i, j)] * b[(i, j)].conj();
        }
    }
    acc
}

impl Mps {
    /// `⟨ψ|O|ψ⟩` for a single-site operator.
    pub fn expectation_one_site(&self, op: &Mat2, site: usize) -> Result<C64> {
        self.check_site(site)?;
        let env = TransitionEnv::new(self, self)?;
        let t = env.reduced_one_site(site);
        let mut acc = ZERO;
        for (s, ts) in t.iter().enumerate() {
            for (tk, v) in ts.iter().enumerate() {
                acc += op[(s, tk)] * v;
            }
        }
        Ok(acc)
    }

    /// `⟨ψ|O|ψ⟩` for an operator on `(left, left+1)`.
    pub fn expectation_two_site(&self, op: &Mat4, left: usize) -> Result<C64> {
        if left + 1 >= self.n() {
            return Err(Error::invalid("two-site operator out of range"));
        }
        let env = TransitionEnv::new(self, self)?;
        Ok(contract4(op, &env.reduced_two_site(left)))
    }
}

pub(crate) fn contract4(op: &Mat4, t: &[[C64; 4]; 4]) -> C64 {
    let mut acc = ZERO;
    for (s, ts) in t.iter().enumerate() {
        for (tk, v) in ts.iter().enumerate() {
            acc += op[(s, tk)] * v;
        }
    }
    acc
}

pub(crate) fn contract2(op: &Mat2, t: &[[C64; 2]; 2]) -> C64 {
    let mut acc = ZERO;
    for (s, ts) in t.iter().enumerate() {
        for (tk, v) in ts.iter().enumerate() {
            acc += op[(s, tk)] * v;
        }
    }
    acc
}
