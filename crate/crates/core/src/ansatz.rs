//! Brickwork ansatz of CNOT blocks laid out like the fused Trotter circuit.
//!
//! A CNOT block is a CNOT followed by `Ry(θ1)·Rz(θ2)` on the control line and
//! `Ry(θ3)·Rz(θ4)` on the target line (matrix order, so `Rz` acts first).
//! Every Trotter bond gate becomes a slot of `b` blocks; with `b = 3` the two
//! outer blocks have control and target swapped relative to the middle one,
//! which is enough to represent the bond gate exactly. The circuit starts
//! with `Rz(θ1)·Ry(θ2)·Rz(θ3)` on every qubit acting on `|0…0⟩`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};

use crate::circuit::{self, Column, ColumnTag, Gate, GateList, Primitive};
use crate::error::{Error, Result};
use crate::hamiltonian::{two_site_unitary, XyzHamiltonian};
use crate::linalg::{
    c, cnot_left_control, cnot_right_control, kron2, phase_distance4, ry, rz, Mat2, Mat4, C64,
};
use crate::mps::{parse_bits, Mps, TruncationPolicy};
use crate::statevector::{self, DenseState};
use crate::trotter::{bond_layer, column_layout};

pub type ParamVector = Vec<f64>;

/// Target accuracy of the per-slot initialization solve.
pub const INIT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CnotBlock {
    pub control: usize,
    pub target: usize,
    pub param_offset: usize,
}

impl CnotBlock {
    pub fn reversed(&self) -> bool {
        self.control > self.target
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Slot {
    pub left: usize,
    pub blocks: Vec<CnotBlock>,
    /// Time span of the Trotter gate this slot replaces.
    pub span: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldRotation {
    pub site: usize,
    /// Fixed `Rz` angle, used unless the rotation is trainable.
    pub angle: f64,
    pub param: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Initial,
    Slots { tag: ColumnTag, slots: Vec<Slot> },
    Field(Vec<FieldRotation>),
}

impl Layer {
    pub fn tag(&self) -> ColumnTag {
        match self {
            Layer::Initial => ColumnTag::Initial,
            Layer::Slots { tag, .. } => *tag,
            Layer::Field(_) => ColumnTag::Field,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ansatz {
    pub n: usize,
    pub l: usize,
    /// Blocks per slot.
    pub b: usize,
    pub dt: f64,
    pub layers: Vec<Layer>,
    n_params: usize,
    ham: XyzHamiltonian,
    /// `(layer, gate index within the lowered column)` for every parameter.
    owner: Vec<(usize, usize)>,
}

/// Reversal pattern of the blocks in one slot.
fn reversal_pattern(b: usize) -> Vec<bool> {
    (0..b).map(|k| b >= 2 && (k == 0 || k + 1 == b)).collect()
}

pub fn build_brickwork_ansatz(n: usize, l: usize, h: &XyzHamiltonian, dt: f64) -> Result<Ansatz> {
    build_ansatz(n, l, 3, h, dt, false)
}

/// General builder: `b` blocks per slot and optionally trainable field rotations.
pub fn build_ansatz(
    n: usize,
    l: usize,
    b: usize,
    h: &XyzHamiltonian,
    dt: f64,
    trainable_fields: bool,
) -> Result<Ansatz> {
    if n < 2 {
        return Err(Error::invalid("the ansatz needs at least two qubits"));
    }
    if l < 1 || b < 1 {
        return Err(Error::invalid(
            "layers and blocks per slot must be positive",
        ));
    }
    if h.n != n {
        return Err(Error::invalid("Hamiltonian size does not match n"));
    }
    if !dt.is_finite() {
        return Err(Error::invalid("time step must be finite"));
    }
    h.validate()?;

    let mut layers = vec![Layer::Initial];
    let mut owner: Vec<(usize, usize)> = (0..n).flat_map(|q| [(0, q); 3]).collect();
    let mut offset = 3 * n;
    let pattern = reversal_pattern(b);
    let mut field_layers = Vec::new();
    for tag in column_layout(l) {
        let li = layers.len();
        if tag == ColumnTag::Field {
            field_layers.push(li);
            layers.push(Layer::Field(
                (0..n)
                    .map(|i| FieldRotation {
                        site: i,
                        angle: h.h[i] * dt / 2.0,
                        param: None,
                    })
                    .collect(),
            ));
            continue;
        }
        let (parity, span) = match tag {
            ColumnTag::EvenHalf => (0, dt / 2.0),
            ColumnTag::EvenFull => (0, dt),
            _ => (1, dt),
        };
        let mut slots = Vec::new();
        for (gi, left) in bond_layer(n, parity).enumerate() {
            let blocks = pattern
                .iter()
                .map(|&rev| {
                    let blk = CnotBlock {
                        control: if rev { left + 1 } else { left },
                        target: if rev { left } else { left + 1 },
                        param_offset: offset,
                    };
                    owner.extend([(li, gi); 4]);
                    offset += 4;
                    blk
                })
                .collect();
            slots.push(Slot { left, blocks, span });
        }
        layers.push(Layer::Slots { tag, slots });
    }
    if trainable_fields {
        for li in field_layers {
            if let Layer::Field(rots) = &mut layers[li] {
                for (gi, r) in rots.iter_mut().enumerate() {
                    r.param = Some(offset);
                    owner.push((li, gi));
                    offset += 1;
                }
            }
        }
    }
    Ok(Ansatz {
        n,
        l,
        b,
        dt,
        layers,
        n_params: offset,
        ham: h.clone(),
        owner,
    })
}

/// One CNOT block as a 4×4 matrix on `(left, left + 1)`.
pub fn block_unitary(theta: &[f64], reversed: bool) -> Mat4 {
    let ctrl = ry(theta[0]) * rz(theta[1]);
    let targ = ry(theta[2]) * rz(theta[3]);
    if reversed {
        kron2(&targ, &ctrl) * cnot_right_control()
    } else {
        kron2(&ctrl, &targ) * cnot_left_control()
    }
}

fn initial_rotation(t: &[f64]) -> Mat2 {
    rz(t[0]) * ry(t[1]) * rz(t[2])
}

fn slot_unitary(slot: &Slot, theta: &[f64]) -> Mat4 {
    slot.blocks.iter().fold(Mat4::identity(), |acc, blk| {
        block_unitary(
            &theta[blk.param_offset..blk.param_offset + 4],
            blk.reversed(),
        ) * acc
    })
}

impl Ansatz {
    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn hamiltonian(&self) -> &XyzHamiltonian {
        &self.ham
    }

    pub fn blocks(&self) -> impl Iterator<Item = &CnotBlock> {
        self.slots().flat_map(|s| s.blocks.iter())
    }

    pub fn slots(&self) -> impl Iterator<Item = &Slot> {
        self.layers.iter().flat_map(|l| match l {
            Layer::Slots { slots, .. } => slots.as_slice(),
            _ => &[],
        })
    }

    pub fn block_count(&self) -> usize {
        self.blocks().count()
    }

    pub fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.n_params,
                theta.len()
            )));
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("parameters must be finite"));
        }
        Ok(())
    }

    fn lower_layer(&self, li: usize, theta: &[f64]) -> Column {
        let layer = &self.layers[li];
        let gates = match layer {
            Layer::Initial => (0..self.n)
                .map(|q| Gate::Single {
                    site: q,
                    u: initial_rotation(&theta[3 * q..3 * q + 3]),
                })
                .collect(),
            Layer::Slots { slots, .. } => slots
                .iter()
                .map(|s| Gate::Two {
                    left: s.left,
                    u: slot_unitary(s, theta),
                })
                .collect(),
            Layer::Field(rots) => rots
                .iter()
                .map(|r| Gate::Single {
                    site: r.site,
                    u: rz(r.param.map_or(r.angle, |p| theta[p])),
                })
                .collect(),
        };
        Column {
            tag: layer.tag(),
            gates,
        }
    }

    /// The circuit as columns of fused gates (one 4×4 per slot).
    pub fn columns(&self, theta: &[f64]) -> Result<Vec<Column>> {
        self.check_params(theta)?;
        Ok((0..self.layers.len())
            .map(|li| self.lower_layer(li, theta))
            .collect())
    }

    /// `(column index, gate index)` of the gate that depends on parameter `j`.
    pub fn owner_of(&self, j: usize) -> (usize, usize) {
        self.owner[j]
    }

    /// `∂g/∂θ_j` for the gate owning parameter `j`. Every parameter enters a
    /// single rotation `exp(-iθP/2)`, whose derivative is half the rotation
    /// at `θ + π`.
    pub fn gate_derivative(&self, theta: &[f64], j: usize) -> Gate {
        let mut shifted = theta.to_vec();
        shifted[j] += PI;
        let (li, gi) = self.owner[j];
        match &self.lower_layer(li, &shifted).gates[gi] {
            Gate::Single { site, u } => Gate::Single {
                site: *site,
                u: u * c(0.5, 0.0),
            },
            Gate::Two { left, u } => Gate::Two {
                left: *left,
                u: u * c(0.5, 0.0),
            },
        }
    }

    /// `(left, right, blocks)` for every slot, in circuit order.
    pub fn cnot_ops(&self) -> Vec<(usize, usize, usize)> {
        self.slots()
            .map(|s| (s.left, s.left + 1, s.blocks.len()))
            .collect()
    }

    /// CNOT depth with one CNOT per block.
    pub fn cnot_depth(&self) -> usize {
        circuit::cnot_depth(self.n, self.cnot_ops())
    }

    /// Export as a primitive gate list in time order.
    pub fn to_gate_list(&self, theta: &[f64]) -> Result<GateList> {
        self.check_params(theta)?;
        let mut gates = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Initial => {
                    for q in 0..self.n {
                        let t = &theta[3 * q..3 * q + 3];
                        gates.push(Primitive::Rz(q, t[2]));
                        gates.push(Primitive::Ry(q, t[1]));
                        gates.push(Primitive::Rz(q, t[0]));
                    }
                }
                Layer::Slots { slots, .. } => {
                    for blk in slots.iter().flat_map(|s| &s.blocks) {
                        let t = &theta[blk.param_offset..blk.param_offset + 4];
                        gates.push(Primitive::Cx {
                            control: blk.control,
                            target: blk.target,
                        });
                        gates.push(Primitive::Rz(blk.control, t[1]));
                        gates.push(Primitive::Ry(blk.control, t[0]));
                        gates.push(Primitive::Rz(blk.target, t[3]));
                        gates.push(Primitive::Ry(blk.target, t[2]));
                    }
                }
                Layer::Field(rots) => {
                    for r in rots {
                        let a = r.param.map_or(r.angle, |p| theta[p]);
                        if a != 0.0 || r.param.is_some() {
                            gates.push(Primitive::Rz(r.site, a));
                        }
                    }
                }
            }
        }
        Ok(GateList { n: self.n, gates })
    }
}

/// Solve the 4·b slot angles so that the slot equals `target` up to phase.
/// Levenberg–Marquardt on the residual `T(θ) − e^{iφ}·target`, starting from
/// `seed`.
pub fn fit_slot(target: &Mat4, seed: &[f64], reversed: &[bool]) -> Result<(Vec<f64>, f64)> {
    let b = reversed.len();
    let np = 4 * b;
    if seed.len() != np {
        return Err(Error::invalid("seed length must be 4 per block"));
    }
    let slot = Slot {
        left: 0,
        blocks: reversed
            .iter()
            .enumerate()
            .map(|(k, &rev)| CnotBlock {
                control: usize::from(rev),
                target: usize::from(!rev),
                param_offset: 4 * k,
            })
            .collect(),
        span: 0.0,
    };
    let eval = |x: &[f64]| slot_unitary(&slot, x);
    let residual = |x: &[f64], phi: f64| -> DVector<f64> {
        let d = eval(x) - target * C64::from_polar(1.0, phi);
        DVector::from_iterator(32, d.iter().flat_map(|z| [z.re, z.im]))
    };
    let best_phase = |x: &[f64]| -> f64 {
        let ov: C64 = target
            .iter()
            .zip(eval(x).iter())
            .map(|(u, t)| u.conj() * t)
            .sum();
        ov.arg()
    };

    let mut x = seed.to_vec();
    let mut phi = best_phase(&x);
    let mut r = residual(&x, phi);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        if r.norm() < 1e-14 {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(32, np + 1);
        for j in 0..np {
            let mut xs = x.clone();
            xs[j] += PI;
            let d = eval(&xs) * c(0.5, 0.0);
            for (k, z) in d.iter().enumerate() {
                jac[(2 * k, j)] = z.re;
                jac[(2 * k + 1, j)] = z.im;
            }
        }
        let dphi = target * (C64::from_polar(1.0, phi) * c(0.0, -1.0));
        for (k, z) in dphi.iter().enumerate() {
            jac[(2 * k, np)] = z.re;
            jac[(2 * k + 1, np)] = z.im;
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..=np {
                a[(i, i)] += lambda * (1.0 + jtj[(i, i)]);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + s).collect();
            let phin = phi + step[np];
            let rn = residual(&xn, phin);
            if rn.norm() < r.norm() {
                x = xn;
                phi = phin;
                r = rn;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let err = phase_distance4(&eval(&x), target);
    Ok((x, err))
}

/// Closed-form triplet angles reproducing `two_site_unitary(α, β, Δ, span)`
/// up to a global phase (blocks: reversed, normal, reversed).
pub fn analytic_triplet_seed(alpha: f64, beta: f64, delta: f64, span: f64) -> [f64; 12] {
    let a = -FRAC_PI_2 - alpha * span / 2.0;
    let cz = -FRAC_PI_2 - delta * span / 2.0;
    let bb = FRAC_PI_2 + beta * span / 2.0;
    [
        a, FRAC_PI_2, 0.0, cz, //
        0.0, 0.0, bb, 0.0, //
        0.0, 0.0, 0.0, -FRAC_PI_2,
    ]
}

/// Parameters for which the ansatz applied to `|0…0⟩` reproduces the
/// `l`-step Trotter circuit applied to the basis state `initial`.
pub fn trotter_initialize(
    a: &Ansatz,
    h: &XyzHamiltonian,
    dt: f64,
    initial: &str,
) -> Result<ParamVector> {
    if a.ham != *h || a.dt != dt {
        return Err(Error::invalid(
            "ansatz was built for a different Hamiltonian or time step",
        ));
    }
    if a.b != 3 {
        return Err(Error::invalid(
            "Trotter initialization needs three blocks per slot",
        ));
    }
    let bits = parse_bits(initial)?;
    if bits.len() != a.n {
        return Err(Error::invalid("initial state length differs from n"));
    }
    let mut theta = vec![0.0; a.n_params];
    for (q, &bit) in bits.iter().enumerate() {
        // Ry(π)|0⟩ = |1⟩ exactly
        theta[3 * q + 1] = if bit == 1 { PI } else { 0.0 };
    }
    let pattern = reversal_pattern(3);
    for slot in a.slots() {
        let i = slot.left;
        let (al, be, de) = (h.alpha[i], h.beta[i], h.delta[i]);
        let target = two_site_unitary(al, be, de, slot.span);
        let seed = analytic_triplet_seed(al, be, de, slot.span);
        let (x, err) = fit_slot(&target, &seed, &pattern)?;
        if err > INIT_TOL {
            return Err(Error::Numerical(format!(
                "slot on bond {i} reached only {err:.2e}"
            )));
        }
        let off = slot.blocks[0].param_offset;
        theta[off..off + 12].copy_from_slice(&x);
    }
    for layer in &a.layers {
        if let Layer::Field(rots) = layer {
            for r in rots {
                if let Some(p) = r.param {
                    theta[p] = r.angle;
                }
            }
        }
    }
    Ok(theta)
}

/// `V(θ)|ψ_in⟩`, normalized.
pub fn apply_ansatz(
    a: &Ansatz,
    theta: &[f64],
    psi_in: &Mps,
    policy: &TruncationPolicy,
) -> Result<Mps> {
    if psi_in.n() != a.n {
        return Err(Error::invalid("state size differs from the ansatz"));
    }
    let mut psi = psi_in.clone();
    for col in a.columns(theta)? {
        circuit::apply_column(&mut psi, &col.gates, policy)?;
    }
    psi.normalize();
    Ok(psi)
}

/// `V(θ)†|target⟩`, normalized.
pub fn apply_ansatz_adjoint(
    a: &Ansatz,
    theta: &[f64],
    target: &Mps,
    policy: &TruncationPolicy,
) -> Result<Mps> {
    if target.n() != a.n {
        return Err(Error::invalid("state size differs from the ansatz"));
    }
    let mut psi = target.clone();
    for col in a.columns(theta)?.iter().rev() {
        circuit::apply_column_adjoint(&mut psi, &col.gates, policy)?;
    }
    psi.normalize();
    Ok(psi)
}

/// Dense `V(θ)|ψ⟩`.
pub fn sv_apply_ansatz(a: &Ansatz, theta: &[f64], state: &DenseState) -> Result<DenseState> {
    statevector::sv_apply_schedule(state, &a.columns(theta)?)
}

/// Dense `V(θ)†|ψ⟩`.
pub fn sv_apply_ansatz_adjoint(
    a: &Ansatz,
    theta: &[f64],
    state: &DenseState,
) -> Result<DenseState> {
    let cols: Vec<Column> = a
        .columns(theta)?
        .into_iter()
        .rev()
        .map(|col| Column {
            tag: col.tag,
            gates: col.gates.iter().map(Gate::adjoint).collect(),
        })
        .collect();
    statevector::sv_apply_schedule(state, &cols)
}
