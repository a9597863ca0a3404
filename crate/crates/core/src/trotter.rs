//! Second-order Suzuki-Trotter circuits and TEBD.
//!
//! One step is `E(dt/2) F(dt/2) O(dt) F(dt/2) E(dt/2)` where `E`/`O` are the
//! even/odd bond layers and `F` the field layer. Consecutive half even layers
//! are merged, so `s` steps become `s + 1` even columns, `s` odd columns and
//! `2s` field columns.

use crate::circuit::{self, trotter_bond_primitives, Column, ColumnTag, Gate, GateList, Primitive};
use crate::error::{Error, Result};
use crate::hamiltonian::{field_rotation, two_site_unitary, XyzHamiltonian};
use crate::mps::{Mps, TruncationPolicy};

#[derive(Clone, Debug)]
pub struct GateSchedule {
    pub n: usize,
    pub dt: f64,
    pub steps: usize,
    pub columns: Vec<Column>,
    /// Per column: the time span carried by its gates (`dt/2` or `dt`).
    spans: Vec<f64>,
    ham: XyzHamiltonian,
}

/// Left sites of the bonds in the even (`parity = 0`) or odd layer.
pub fn bond_layer(n: usize, parity: usize) -> impl Iterator<Item = usize> {
    (parity..n.saturating_sub(1)).step_by(2)
}

/// The sequence of column tags for `steps` fused steps.
pub fn column_layout(steps: usize) -> Vec<ColumnTag> {
    let mut tags = vec![ColumnTag::EvenHalf];
    for s in 0..steps {
        tags.push(ColumnTag::Field);
        tags.push(ColumnTag::OddFull);
        tags.push(ColumnTag::Field);
        tags.push(if s + 1 == steps {
            ColumnTag::EvenHalf
        } else {
            ColumnTag::EvenFull
        });
    }
    tags
}

fn two_site_column(h: &XyzHamiltonian, tag: ColumnTag, dt: f64) -> (Column, f64) {
    let (parity, span) = match tag {
        ColumnTag::EvenHalf => (0, dt / 2.0),
        ColumnTag::EvenFull => (0, dt),
        _ => (1, dt),
    };
    let gates = bond_layer(h.n, parity)
        .map(|i| Gate::Two {
            left: i,
            u: two_site_unitary(h.alpha[i], h.beta[i], h.delta[i], span),
        })
        .collect();
    (Column { tag, gates }, span)
}

fn field_column(h: &XyzHamiltonian, dt: f64) -> Column {
    Column {
        tag: ColumnTag::Field,
        gates: (0..h.n)
            .map(|i| Gate::Single {
                site: i,
                u: field_rotation(h.h[i], dt, true),
            })
            .collect(),
    }
}

pub fn build_trotter_schedule(h: &XyzHamiltonian, dt: f64, steps: usize) -> Result<GateSchedule> {
    if steps < 1 {
        return Err(Error::invalid("a Trotter schedule needs at least one step"));
    }
    if !dt.is_finite() {
        return Err(Error::invalid("time step must be finite"));
    }
    h.validate()?;
    let mut columns = Vec::new();
    let mut spans = Vec::new();
    for tag in column_layout(steps) {
        if tag == ColumnTag::Field {
            columns.push(field_column(h, dt));
            spans.push(dt / 2.0);
        } else {
            let (col, span) = two_site_column(h, tag, dt);
            columns.push(col);
            spans.push(span);
        }
    }
    Ok(GateSchedule {
        n: h.n,
        dt,
        steps,
        columns,
        spans,
        ham: h.clone(),
    })
}

impl GateSchedule {
    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.columns.iter().flat_map(|c| c.gates.iter())
    }

    /// Number of columns holding two-site gates.
    pub fn two_site_column_count(&self) -> usize {
        self.columns
            .iter()
            .filter(|c| c.tag.is_two_site() && !c.gates.is_empty())
            .count()
    }

    /// `(left, right, 3)` for every bond gate, in circuit order.
    pub fn cnot_ops(&self) -> Vec<(usize, usize, usize)> {
        self.gates()
            .filter_map(|g| match g {
                Gate::Two { left, .. } => Some((*left, *left + 1, 3)),
                Gate::Single { .. } => None,
            })
            .collect()
    }

    /// CNOT depth when every bond gate is compiled with three CNOTs.
    pub fn cnot_depth(&self) -> usize {
        circuit::cnot_depth(self.n, self.cnot_ops())
    }

    pub fn apply(&self, psi: &mut Mps, policy: &TruncationPolicy) -> Result<f64> {
        if psi.n() != self.n {
            return Err(Error::invalid("state and schedule sizes differ"));
        }
        let mut discarded = 0.0;
        for col in &self.columns {
            discarded += circuit::apply_column(psi, &col.gates, policy)?;
        }
        Ok(discarded)
    }

    /// Gate list with each bond gate written as `rxx·ryy·rzz` and each field
    /// half-step as `rz(h·dt/2)`.
    pub fn to_gate_list(&self) -> GateList {
        let h = &self.ham;
        let mut gates = Vec::new();
        for (col, &span) in self.columns.iter().zip(&self.spans) {
            for g in &col.gates {
                match *g {
                    Gate::Two { left: i, .. } => gates.extend(trotter_bond_primitives(
                        i, h.alpha[i], h.beta[i], h.delta[i], span,
                    )),
                    Gate::Single { site, .. } => {
                        if h.h[site] != 0.0 {
                            gates.push(Primitive::Rz(site, h.h[site] * span));
                        }
                    }
                }
            }
        }
        GateList { n: self.n, gates }
    }
}

/// Prepend `X` gates for the ones of a basis string.
pub fn prepare_bits(bits: &[usize]) -> Vec<Primitive> {
    bits.iter()
        .enumerate()
        .filter(|(_, &b)| b == 1)
        .map(|(i, _)| Primitive::X(i))
        .collect()
}

/// Evolve `psi0` by `steps` second-order steps and return the normalized result.
pub fn tebd_evolve(
    psi0: &Mps,
    h: &XyzHamiltonian,
    dt: f64,
    steps: usize,
    policy: &TruncationPolicy,
) -> Result<Mps> {
    if psi0.n() != h.n {
        return Err(Error::invalid("state and Hamiltonian sizes differ"));
    }
    policy.validate()?;
    let mut psi = psi0.clone();
    if steps == 0 {
        return Ok(psi);
    }
    let sched = build_trotter_schedule(h, dt, steps)?;
    sched.apply(&mut psi, policy)?;
    psi.normalize();
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_for_one_and_two_steps() {
        use ColumnTag::*;
        assert_eq!(
            column_layout(1),
            vec![EvenHalf, Field, OddFull, Field, EvenHalf]
        );
        assert_eq!(
            column_layout(2),
            vec![EvenHalf, Field, OddFull, Field, EvenFull, Field, OddFull, Field, EvenHalf]
        );
    }

    #[test]
    fn column_counts() {
        let h = XyzHamiltonian::xxx(6).unwrap();
        let s = build_trotter_schedule(&h, 0.1, 3).unwrap();
        let count = |t: ColumnTag| s.columns.iter().filter(|c| c.tag == t).count();
        assert_eq!(count(ColumnTag::EvenHalf) + count(ColumnTag::EvenFull), 4);
        assert_eq!(count(ColumnTag::OddFull), 3);
        assert_eq!(count(ColumnTag::Field), 6);
        assert_eq!(s.two_site_column_count(), 7);
        assert!(build_trotter_schedule(&h, 0.1, 0).is_err());
    }

    #[test]
    fn depth_counts_three_cnots_per_bond_gate() {
        let h = XyzHamiltonian::xxx(5).unwrap();
        for l in 1..4 {
            let s = build_trotter_schedule(&h, 0.1, l).unwrap();
            assert_eq!(s.cnot_depth(), 3 * (2 * l + 1));
        }
        let h2 = XyzHamiltonian::xxx(2).unwrap();
        assert_eq!(build_trotter_schedule(&h2, 0.1, 1).unwrap().cnot_depth(), 6);
    }

    #[test]
    fn zero_time_is_identity() {
        let h = XyzHamiltonian::xxz(4).unwrap();
        let psi = Mps::from_product_state("0110").unwrap();
        let out = tebd_evolve(&psi, &h, 0.0, 3, &TruncationPolicy::unbounded()).unwrap();
        assert!((out.fidelity(&psi).unwrap() - 1.0).abs() < 1e-14);
    }
}
