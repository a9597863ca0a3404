//! Gate-level circuit representation shared by the Trotter schedule and the
//! ansatz, plus the plain-text gate-list exchange format.
//!
//! Gate-list format, one gate per line, `#` starts a comment:
//!
//! ```text
//! qubits 4
//! rz 0 1.5707963267948966
//! ry 0 3.141592653589793
//! cx 1 0
//! rxx 2 3 -0.0375
//! ```
//!
//! Supported names: `x`, `rx`, `ry`, `rz` (one qubit, one angle), `cx`
//! (control, target), `rxx`, `ryy`, `rzz` (two qubits, one angle). Angles are
//! radians with `R_P(θ) = exp(-i θ P / 2)`; qubit 0 is the leftmost character
//! of a basis string. The `qubits` header must come first.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cnot_left_control, cnot_right_control, kron2, pauli_x, pauli_y, pauli_z, rx, ry, rz, Mat2,
    Mat4, I,
};
use crate::mps::{Mps, TruncationPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnTag {
    /// Trainable single-qubit rotations at the start of the ansatz.
    Initial,
    EvenHalf,
    OddFull,
    EvenFull,
    Field,
}

impl ColumnTag {
    pub fn is_two_site(self) -> bool {
        matches!(
            self,
            ColumnTag::EvenHalf | ColumnTag::OddFull | ColumnTag::EvenFull
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    Single {
        site: usize,
        u: Mat2,
    },
    /// Acts on `(left, left + 1)` in the basis `2·s_left + s_right`.
    Two {
        left: usize,
        u: Mat4,
    },
}

impl Gate {
    pub fn adjoint(&self) -> Gate {
        match self {
            Gate::Single { site, u } => Gate::Single {
                site: *site,
                u: u.adjoint(),
            },
            Gate::Two { left, u } => Gate::Two {
                left: *left,
                u: u.adjoint(),
            },
        }
    }

    pub fn apply(&self, psi: &mut Mps, policy: &TruncationPolicy) -> Result<f64> {
        match self {
            Gate::Single { site, u } => {
                psi.apply_single_site_gate(u, *site)?;
                Ok(0.0)
            }
            Gate::Two { left, u } => psi.apply_two_site_gate(u, *left, policy),
        }
    }

    fn first_site(&self) -> usize {
        match self {
            Gate::Single { site, .. } => *site,
            Gate::Two { left, .. } => *left,
        }
    }
}

/// A set of gates acting on pairwise disjoint sites.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub tag: ColumnTag,
    pub gates: Vec<Gate>,
}

/// Apply one column to an MPS. The gates commute, so they are visited in
/// the direction that keeps the orthogonality center moving monotonically.
pub fn apply_column(psi: &mut Mps, gates: &[Gate], policy: &TruncationPolicy) -> Result<f64> {
    let mut discarded = 0.0;
    let from_right = match (psi.center(), gates.first(), gates.last()) {
        (Some(c), Some(first), Some(last)) => {
            c.abs_diff(last.first_site()) < c.abs_diff(first.first_site())
        }
        _ => false,
    };
    if from_right {
        for g in gates.iter().rev() {
            discarded += g.apply(psi, policy)?;
        }
    } else {
        for g in gates {
            discarded += g.apply(psi, policy)?;
        }
    }
    Ok(discarded)
}

/// Apply the adjoint of a column (gates are disjoint, so order is free).
pub fn apply_column_adjoint(
    psi: &mut Mps,
    gates: &[Gate],
    policy: &TruncationPolicy,
) -> Result<f64> {
    let adj: Vec<Gate> = gates.iter().map(Gate::adjoint).collect();
    apply_column(psi, &adj, policy)
}

/// CNOT depth by as-soon-as-possible layering: each entry is
/// `(qubit_a, qubit_b, cnot_count)` in circuit order.
pub fn cnot_depth(n: usize, ops: impl IntoIterator<Item = (usize, usize, usize)>) -> usize {
    let mut depth = vec![0usize; n];
    for (a, b, count) in ops {
        let d = depth[a].max(depth[b]) + count;
        depth[a] = d;
        depth[b] = d;
    }
    depth.into_iter().max().unwrap_or(0)
}

/// Primitive gates of the exchange format.
#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    X(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    Cx { control: usize, target: usize },
    Rxx(usize, usize, f64),
    Ryy(usize, usize, f64),
    Rzz(usize, usize, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateList {
    pub n: usize,
    pub gates: Vec<Primitive>,
}

fn pauli_pair_rotation(p: &Mat2, theta: f64) -> Mat4 {
    let pp = kron2(p, p);
    let (s, c) = (theta / 2.0).sin_cos();
    Mat4::identity() * crate::linalg::c(c, 0.0) - pp * (I * s)
}

impl Primitive {
    fn qubits(&self) -> Vec<usize> {
        match *self {
            Primitive::X(q) | Primitive::Rx(q, _) | Primitive::Ry(q, _) | Primitive::Rz(q, _) => {
                vec![q]
            }
            Primitive::Cx { control, target } => vec![control, target],
            Primitive::Rxx(a, b, _) | Primitive::Ryy(a, b, _) | Primitive::Rzz(a, b, _) => {
                vec![a, b]
            }
        }
    }

    /// Lower to a nearest-neighbour [`Gate`].
    pub fn to_gate(&self) -> Result<Gate> {
        let two = |a: usize, b: usize, m: Mat4| -> Result<Gate> {
            if a.abs_diff(b) != 1 {
                return Err(Error::invalid(format!(
                    "two-qubit gate on ({a}, {b}) is not nearest-neighbour"
                )));
            }
            // symmetric gates do not care about orientation
            Ok(Gate::Two {
                left: a.min(b),
                u: m,
            })
        };
        match *self {
            Primitive::X(q) => Ok(Gate::Single {
                site: q,
                u: pauli_x(),
            }),
            Primitive::Rx(q, t) => Ok(Gate::Single { site: q, u: rx(t) }),
            Primitive::Ry(q, t) => Ok(Gate::Single { site: q, u: ry(t) }),
            Primitive::Rz(q, t) => Ok(Gate::Single { site: q, u: rz(t) }),
            Primitive::Cx { control, target } => {
                let m = if control < target {
                    cnot_left_control()
                } else {
                    cnot_right_control()
                };
                two(control, target, m)
            }
            Primitive::Rxx(a, b, t) => two(a, b, pauli_pair_rotation(&pauli_x(), t)),
            Primitive::Ryy(a, b, t) => two(a, b, pauli_pair_rotation(&pauli_y(), t)),
            Primitive::Rzz(a, b, t) => two(a, b, pauli_pair_rotation(&pauli_z(), t)),
        }
    }
}

impl GateList {
    pub fn cnot_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Primitive::Cx { .. }))
            .count()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "qubits {}", self.n);
        for g in &self.gates {
            let _ = match *g {
                Primitive::X(q) => writeln!(out, "x {q}"),
                Primitive::Rx(q, t) => writeln!(out, "rx {q} {t:?}"),
                Primitive::Ry(q, t) => writeln!(out, "ry {q} {t:?}"),
                Primitive::Rz(q, t) => writeln!(out, "rz {q} {t:?}"),
                Primitive::Cx { control, target } => writeln!(out, "cx {control} {target}"),
                Primitive::Rxx(a, b, t) => writeln!(out, "rxx {a} {b} {t:?}"),
                Primitive::Ryy(a, b, t) => writeln!(out, "ryy {a} {b} {t:?}"),
                Primitive::Rzz(a, b, t) => writeln!(out, "rzz {a} {b} {t:?}"),
            };
        }
        out
    }

    pub fn parse(text: &str) -> Result<GateList> {
        let mut n: Option<usize> = None;
        let mut gates = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let toks: Vec<&str> = line.split_whitespace().collect();
            let uint = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| err(format!("bad qubit {s:?}: {e}")))
            };
            let real = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| err(format!("bad angle {s:?}: {e}")))
            };
            let want = |k: usize| {
                if toks.len() == k {
                    Ok(())
                } else {
                    Err(err(format!(
                        "{} expects {} fields, got {}",
                        toks[0],
                        k - 1,
                        toks.len() - 1
                    )))
                }
            };
            if toks[0] == "qubits" {
                want(2)?;
                if n.is_some() || !gates.is_empty() {
                    return Err(err("duplicate or late qubits header".into()));
                }
                n = Some(uint(toks[1])?);
                continue;
            }
            if n.is_none() {
                return Err(err("missing qubits header".into()));
            }
            let g = match toks[0] {
                "x" => {
                    want(2)?;
                    Primitive::X(uint(toks[1])?)
                }
                "rx" | "ry" | "rz" => {
                    want(3)?;
                    let (q, t) = (uint(toks[1])?, real(toks[2])?);
                    match toks[0] {
                        "rx" => Primitive::Rx(q, t),
                        "ry" => Primitive::Ry(q, t),
                        _ => Primitive::Rz(q, t),
                    }
                }
                "cx" => {
                    want(3)?;
                    Primitive::Cx {
                        control: uint(toks[1])?,
                        target: uint(toks[2])?,
                    }
                }
                "rxx" | "ryy" | "rzz" => {
                    want(4)?;
                    let (a, b, t) = (uint(toks[1])?, uint(toks[2])?, real(toks[3])?);
                    match toks[0] {
                        "rxx" => Primitive::Rxx(a, b, t),
                        "ryy" => Primitive::Ryy(a, b, t),
                        _ => Primitive::Rzz(a, b, t),
                    }
                }
                other => return Err(err(format!("unknown gate {other:?}"))),
            };
            let nq = n.unwrap_or(0);
            let qs = g.qubits();
            if qs.iter().any(|&q| q >= nq) {
                return Err(err(format!("qubit index out of range for {nq} qubits")));
            }
            if qs.len() == 2 && qs[0] == qs[1] {
                return Err(err("two-qubit gate on a single qubit".into()));
            }
            gates.push(g);
        }
        let n = n.ok_or(Error::Parse {
            line: 0,
            msg: "empty gate list".into(),
        })?;
        Ok(GateList { n, gates })
    }

    /// Run the gate list on an MPS, one primitive at a time.
    pub fn apply(&self, psi: &mut Mps, policy: &TruncationPolicy) -> Result<()> {
        if psi.n() != self.n {
            return Err(Error::invalid("gate list and state sizes differ"));
        }
        for g in &self.gates {
            g.to_gate()?.apply(psi, policy)?;
        }
        Ok(())
    }
}

/// `exp(i·dt·(α SxSx + β SySy + Δ SzSz))` as commuting two-qubit Pauli rotations.
pub(crate) fn trotter_bond_primitives(
    a: usize,
    alpha: f64,
    beta: f64,
    delta: f64,
    dt: f64,
) -> [Primitive; 3] {
    // exp(i·dt·c·PP/4) = R_PP(-c·dt/2)
    [
        Primitive::Rxx(a, a + 1, -alpha * dt / 2.0),
        Primitive::Ryy(a, a + 1, -beta * dt / 2.0),
        Primitive::Rzz(a, a + 1, -delta * dt / 2.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::two_site_unitary;
    use crate::linalg::phase_distance4;

    #[test]
    fn depth_of_a_chain() {
        // three slots on (0,1), (1,2), (0,1) with three CNOTs each
        assert_eq!(cnot_depth(3, [(0, 1, 3), (1, 2, 3), (0, 1, 3)]), 9);
        // disjoint pairs run in parallel
        assert_eq!(cnot_depth(4, [(0, 1, 1), (2, 3, 1)]), 1);
        assert_eq!(cnot_depth(2, []), 0);
    }

    #[test]
    fn bond_primitives_reproduce_trotter_gate() {
        let (a, b, d, dt) = (0.6, 0.9, 1.3, 0.27);
        let prims = trotter_bond_primitives(0, a, b, d, dt);
        let mut m = Mat4::identity();
        for p in &prims {
            if let Gate::Two { u, .. } = p.to_gate().unwrap() {
                m = u * m;
            }
        }
        assert!(phase_distance4(&m, &two_site_unitary(a, b, d, dt)) < 1e-14);
        assert!((m - two_site_unitary(a, b, d, dt)).norm() < 1e-14);
        assert!(crate::linalg::unitarity_error4(&m) < 1e-14);
    }

    #[test]
    fn text_round_trip() {
        let list = GateList {
            n: 3,
            gates: vec![
                Primitive::X(0),
                Primitive::Rz(1, 0.1),
                Primitive::Cx {
                    control: 2,
                    target: 1,
                },
                Primitive::Rxx(0, 1, -1.0 / 3.0),
            ],
        };
        let back = GateList::parse(&list.to_text()).unwrap();
        assert_eq!(back, list);
        assert_eq!(back.cnot_count(), 1);
    }

    #[test]
    fn parser_reports_line_numbers() {
        let err = GateList::parse("qubits 2\nrz 0 0.1\nfoo 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(GateList::parse("rz 0 0.1\n").is_err());
        assert!(GateList::parse("qubits 2\ncx 0 2\n").is_err());
        assert!(GateList::parse("qubits 2\nrz 0\n").is_err());
        assert!(GateList::parse("qubits 2\n# comment only\n\nrz 1 2.0 # trailing\n").is_ok());
    }
}
