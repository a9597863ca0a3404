//! Open XYZ spin chains
//!
//! `H = -Σ_{i=0}^{L-2} (α_i SxSx + β_i SySy + Δ_i SzSz)_{i,i+1} + Σ_i h_i Sz_i`
//! with spin operators `S = σ/2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, kron2, pauli_x, pauli_y, pauli_z, Mat2, Mat4, ZERO};
use crate::mps::Mps;

/// Coupling used by the uniform presets.
pub const PRESET_COUPLING: f64 = 0.75;
/// Range of the random-coupling preset.
pub const RANDOM_RANGE: (f64, f64) = (0.375, 1.125);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XyzHamiltonian {
    pub n: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    pub h: Vec<f64>,
    /// Seed used to draw random couplings, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    RandomXyz,
    Xxx,
    Xxz,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-xyz" => Ok(Preset::RandomXyz),
            "xxx" => Ok(Preset::Xxx),
            "xxz" => Ok(Preset::Xxz),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected random-xyz, xxx or xxz)"
            ))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Preset::RandomXyz => "random-xyz",
            Preset::Xxx => "xxx",
            Preset::Xxz => "xxz",
        })
    }
}

impl XyzHamiltonian {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, delta: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        let ham = XyzHamiltonian {
            n: h.len(),
            alpha,
            beta,
            delta,
            h,
            seed: None,
        };
        ham.validate()?;
        Ok(ham)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::invalid("Hamiltonian needs at least one site"));
        }
        let bonds = self.n - 1;
        if self.alpha.len() != bonds || self.beta.len() != bonds || self.delta.len() != bonds {
            return Err(Error::invalid(format!(
                "coupling lists must have length {bonds} for {} sites",
                self.n
            )));
        }
        if self.h.len() != self.n {
            return Err(Error::invalid(format!(
                "field list must have length {}",
                self.n
            )));
        }
        let all = self
            .alpha
            .iter()
            .chain(&self.beta)
            .chain(&self.delta)
            .chain(&self.h);
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("Hamiltonian entries must be finite"));
        }
        Ok(())
    }

    /// Same couplings on every bond, no field.
    pub fn uniform(n: usize, alpha: f64, beta: f64, delta: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("Hamiltonian needs at least one site"));
        }
        let b = n - 1;
        Self::new(vec![alpha; b], vec![beta; b], vec![delta; b], vec![0.0; n])
    }

    pub fn xxx(n: usize) -> Result<Self> {
        Self::uniform(n, PRESET_COUPLING, PRESET_COUPLING, PRESET_COUPLING)
    }

    pub fn xxz(n: usize) -> Result<Self> {
        Self::uniform(n, PRESET_COUPLING, PRESET_COUPLING, 2.0 * PRESET_COUPLING)
    }

    pub fn preset(preset: Preset, n: usize, seed: u64) -> Result<Self> {
        match preset {
            Preset::Xxx => Self::xxx(n),
            Preset::Xxz => Self::xxz(n),
            Preset::RandomXyz => random_xyz(n, RANDOM_RANGE.0, RANDOM_RANGE.1, seed),
        }
    }

    pub fn with_fields(mut self, h: Vec<f64>) -> Result<Self> {
        self.h = h;
        self.validate()?;
        Ok(self)
    }

    /// Bond term `h_{i,i+1} = α SxSx + β SySy + Δ SzSz` as a dense 4×4 matrix.
    pub fn bond_term(&self, i: usize) -> Mat4 {
        bond_generator(self.alpha[i], self.beta[i], self.delta[i])
    }

    /// `⟨H⟩` from two-site and one-site expectation values.
    pub fn energy(&self, psi: &Mps) -> Result<f64> {
        if psi.n() != self.n {
            return Err(Error::invalid("state and Hamiltonian sizes differ"));
        }
        let mut e = 0.0;
        for i in 0..self.n.saturating_sub(1) {
            e -= psi.expectation_two_site(&self.bond_term(i), i)?.re;
        }
        let sz = pauli_z() * c(0.5, 0.0);
        for (i, &hi) in self.h.iter().enumerate() {
            if hi != 0.0 {
                e += hi * psi.expectation_one_site(&sz, i)?.re;
            }
        }
        Ok(e)
    }
}

/// Total `Σ_i ⟨Sz_i⟩`.
pub fn total_sz(psi: &Mps) -> Result<f64> {
    let sz = pauli_z() * c(0.5, 0.0);
    let mut acc = 0.0;
    for i in 0..psi.n() {
        acc += psi.expectation_one_site(&sz, i)?.re;
    }
    Ok(acc)
}

pub fn bond_generator(alpha: f64, beta: f64, delta: f64) -> Mat4 {
    let q = c(0.25, 0.0);
    (kron2(&pauli_x(), &pauli_x()) * c(alpha, 0.0)
        + kron2(&pauli_y(), &pauli_y()) * c(beta, 0.0)
        + kron2(&pauli_z(), &pauli_z()) * c(delta, 0.0))
        * q
}

/// `exp(i·dt·(α SxSx + β SySy + Δ SzSz))`.
///
/// The generator splits into two commuting 2×2 blocks on `{|00⟩,|11⟩}` and
/// `{|01⟩,|10⟩}`, each of the form `a·I + b·σx`.
pub fn two_site_unitary(alpha: f64, beta: f64, delta: f64, dt: f64) -> Mat4 {
    let mut u = Mat4::zeros();
    let block = |diag: f64, off: f64| {
        let phase = c(0.0, dt * diag / 4.0).exp();
        let (s, co) = (dt * off / 4.0).sin_cos();
        (phase * co, phase * c(0.0, s))
    };
    let (d, o) = block(delta, alpha - beta);
    u[(0, 0)] = d;
    u[(3, 3)] = d;
    u[(0, 3)] = o;
    u[(3, 0)] = o;
    let (d, o) = block(-delta, alpha + beta);
    u[(1, 1)] = d;
    u[(2, 2)] = d;
    u[(1, 2)] = o;
    u[(2, 1)] = o;
    u
}

/// Field rotation `exp(-i·h·Sz·dt)`, or its square root `exp(-i·h·Sz·dt/2)`
/// when `half` is set.
pub fn field_rotation(h: f64, dt: f64, half: bool) -> Mat2 {
    let angle = if half { h * dt / 2.0 } else { h * dt };
    let e = c(0.0, -angle / 2.0).exp();
    Mat2::new(e, ZERO, ZERO, e.conj())
}

/// Couplings drawn i.i.d. uniform in `[lo, hi]` from a ChaCha8 stream; fields zero.
pub fn random_xyz(n: usize, lo: f64, hi: f64, seed: u64) -> Result<XyzHamiltonian> {
    if lo > hi {
        return Err(Error::invalid(format!("empty coupling range [{lo}, {hi}]")));
    }
    if n < 1 {
        return Err(Error::invalid("Hamiltonian needs at least one site"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |len: usize| -> Vec<f64> {
        (0..len)
            .map(|_| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
            .collect()
    };
    let alpha = draw(n - 1);
    let beta = draw(n - 1);
    let delta = draw(n - 1);
    let mut ham = XyzHamiltonian::new(alpha, beta, delta, vec![0.0; n])?;
    ham.seed = Some(seed);
    Ok(ham)
}
