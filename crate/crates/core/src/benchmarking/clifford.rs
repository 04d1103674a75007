use std::f64::consts::FRAC_PI_4;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::hilbert::CMatrix;

/// Physical and virtual gates the Cliffords are compiled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Primitive {
    /// `exp(-i pi/4 X_L)`, the only physical pulse.
    XHalf,
    /// `exp(-i pi/4 Z_L)`, a frame change.
    ZHalf,
    /// `exp(+i pi/4 Z_L)`.
    MinusZHalf,
    /// `exp(-i pi/2 Z_L)`.
    Z,
    I,
}

impl Primitive {
    pub fn is_physical(self) -> bool {
        self == Primitive::XHalf
    }

    /// 2x2 unitary in the basis `(|0_L>, |1_L>) = (|0>, |2>)`.
    pub fn unitary(self) -> CMatrix {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let (cos, sin) = (FRAC_PI_4.cos(), FRAC_PI_4.sin());
        match self {
            Primitive::XHalf => CMatrix::from_row_slice(2, 2, &[c(cos, 0.0), c(0.0, -sin), c(0.0, -sin), c(cos, 0.0)]),
            Primitive::ZHalf => rz(FRAC_PI_4 * 2.0),
            Primitive::MinusZHalf => rz(-FRAC_PI_4 * 2.0),
            Primitive::Z => rz(FRAC_PI_4 * 4.0),
            Primitive::I => CMatrix::identity(2, 2),
        }
    }
}

fn rz(theta: f64) -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 0)] = Complex64::from_polar(1.0, -theta / 2.0);
    m[(1, 1)] = Complex64::from_polar(1.0, theta / 2.0);
    m
}

/// One element of the single-qubit Clifford group.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordElement {
    pub index: usize,
    /// Rotation angle in radians; zero for the identity.
    pub angle: f64,
    /// Unnormalized rotation axis.
    pub axis: [i8; 3],
    /// Primitives in time order.
    pub decomposition: Vec<Primitive>,
    /// Product of the primitive unitaries, last primitive leftmost.
    pub su2: CMatrix,
}

impl CliffordElement {
    pub fn physical_gates(&self) -> usize {
        self.decomposition.iter().filter(|p| p.is_physical()).count()
    }
}

/// `|Tr(U† V)| / 2 >= 1 - 1e-10`.
pub fn equal_up_to_phase(u: &CMatrix, v: &CMatrix) -> bool {
    (u.adjoint() * v).trace().norm() / 2.0 >= 1.0 - 1e-10
}

use Primitive::{MinusZHalf as MZ2, XHalf as X2, ZHalf as Z2, I, Z};

type Row = (f64, [i8; 3], &'static [Primitive]);

const PI: f64 = std::f64::consts::PI;

/// Angle and axis give the rotation each decomposition performs.
const TABLE: [Row; 24] = [
    (0.0, [0, 0, 0], &[I]),
    (PI, [1, 0, 0], &[X2, X2]),
    (PI, [0, 1, 0], &[MZ2, X2, X2, Z2]),
    (PI, [0, 0, 1], &[MZ2, X2, X2, Z2, X2, X2]),
    (PI / 2.0, [1, 0, 0], &[X2]),
    (PI / 2.0, [-1, 0, 0], &[Z, X2, Z]),
    (PI / 2.0, [0, 1, 0], &[MZ2, X2, Z2]),
    (PI / 2.0, [0, -1, 0], &[Z2, X2, MZ2]),
    (PI / 2.0, [0, 0, 1], &[Z, X2, Z, MZ2, X2, Z2, X2]),
    (PI / 2.0, [0, 0, -1], &[Z, X2, Z, Z2, X2, MZ2, X2]),
    (PI, [1, 0, 1], &[X2, X2, Z2, X2, MZ2]),
    (PI, [-1, 0, 1], &[X2, X2, MZ2, X2, Z2]),
    (PI, [0, 1, 1], &[MZ2, X2, X2, Z2, X2]),
    (PI, [0, -1, 1], &[MZ2, X2, X2, Z2, Z, X2, Z]),
    (PI, [1, 1, 0], &[X2, MZ2, X2, Z2, X2]),
    (PI, [1, -1, 0], &[Z, X2, Z, MZ2, X2, Z2, Z, X2, Z]),
    (2.0 * PI / 3.0, [1, 1, 1], &[MZ2, X2, Z2, X2]),
    (-2.0 * PI / 3.0, [1, -1, 1], &[MZ2, X2, Z2, Z, X2, Z]),
    (-2.0 * PI / 3.0, [-1, 1, 1], &[Z2, X2, MZ2, X2]),
    (2.0 * PI / 3.0, [-1, -1, 1], &[Z2, X2, MZ2, Z, X2, Z]),
    (-2.0 * PI / 3.0, [1, 1, 1], &[Z, X2, Z, Z2, X2, MZ2]),
    (2.0 * PI / 3.0, [1, -1, 1], &[X2, Z2, X2, MZ2]),
    (2.0 * PI / 3.0, [-1, 1, 1], &[Z, X2, Z, MZ2, X2, Z2]),
    (-2.0 * PI / 3.0, [-1, -1, 1], &[X2, MZ2, X2, Z2]),
];

/// Product of primitive unitaries applied in time order.
pub fn compose(decomposition: &[Primitive]) -> CMatrix {
    decomposition
        .iter()
        .fold(CMatrix::identity(2, 2), |acc, p| p.unitary() * acc)
}

/// The 24 single-qubit Cliffords, each built from `X_L/2` pulses and virtual
/// `Z` rotations.
pub fn clifford_table() -> &'static [CliffordElement] {
    static TABLE_CELL: OnceLock<Vec<CliffordElement>> = OnceLock::new();
    TABLE_CELL.get_or_init(|| {
        TABLE
            .iter()
            .enumerate()
            .map(|(index, (angle, axis, decomposition))| CliffordElement {
                index,
                angle: *angle,
                axis: *axis,
                decomposition: decomposition.to_vec(),
                su2: compose(decomposition),
            })
            .collect()
    })
}

/// Average number of physical `X_L/2` pulses per Clifford.
pub fn mean_physical_gates() -> f64 {
    let table = clifford_table();
    table.iter().map(|c| c.physical_gates()).sum::<usize>() as f64 / table.len() as f64
}

/// Index of the table element equal to `u` up to global phase.
pub fn find_element(u: &CMatrix) -> Option<usize> {
    clifford_table().iter().position(|c| equal_up_to_phase(&c.su2, u))
}

struct GroupTables {
    /// `product[a][b]` is the element for "apply `a`, then `b`".
    product: Vec<[usize; 24]>,
    inverse: [usize; 24],
}

fn group_tables() -> &'static GroupTables {
    static CELL: OnceLock<GroupTables> = OnceLock::new();
    CELL.get_or_init(|| {
        let table = clifford_table();
        let mut product = vec![[0usize; 24]; 24];
        let mut inverse = [0usize; 24];
        for a in 0..24 {
            for b in 0..24 {
                let u = &table[b].su2 * &table[a].su2;
                product[a][b] = find_element(&u).expect("Clifford group is closed");
            }
            inverse[a] = find_element(&table[a].su2.adjoint()).expect("Clifford group is closed");
        }
        GroupTables { product, inverse }
    })
}

/// Element equal to "apply `a`, then `b`".
pub fn compose_elements(a: usize, b: usize) -> usize {
    group_tables().product[a][b]
}

pub fn inverse_element(a: usize) -> usize {
    group_tables().inverse[a]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::hermitian_map;

    fn paulis() -> [CMatrix; 3] {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        [
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]),
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]),
        ]
    }

    #[test]
    fn table_size_and_gate_count() {
        assert_eq!(clifford_table().len(), 24);
        assert!((mean_physical_gates() - 52.0 / 24.0).abs() < 1e-15);
        assert!((mean_physical_gates() - 2.17).abs() < 5e-3);
    }

    #[test]
    fn elements_match_their_rotation_labels() {
        let s = paulis();
        for c in clifford_table() {
            let norm = c.axis.iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
            let generator = if norm == 0.0 {
                CMatrix::zeros(2, 2)
            } else {
                (0..3).fold(CMatrix::zeros(2, 2), |acc, k| {
                    acc + s[k].scale(c.axis[k] as f64 / norm)
                })
            };
            let rotation = hermitian_map(&generator, |x| Complex64::from_polar(1.0, -c.angle * x / 2.0));
            assert!(equal_up_to_phase(&rotation, &c.su2), "element {}", c.index);
        }
    }

    #[test]
    fn elements_permute_pauli_axes() {
        let s = paulis();
        for c in clifford_table() {
            for p in [&s[0], &s[2]] {
                let image = &c.su2 * p * c.su2.adjoint();
                let hit = s.iter().any(|q| {
                    (&image - q).norm() < 1e-12 || (&image + q).norm() < 1e-12
                });
                assert!(hit, "element {}", c.index);
            }
        }
    }

    #[test]
    fn group_is_closed_and_distinct() {
        let table = clifford_table();
        for a in 0..24 {
            for b in 0..24 {
                let u = &table[b].su2 * &table[a].su2;
                assert!(equal_up_to_phase(&u, &table[compose_elements(a, b)].su2));
            }
            assert_eq!(compose_elements(a, inverse_element(a)), 0);
            for b in 0..a {
                assert!(!equal_up_to_phase(&table[a].su2, &table[b].su2));
            }
        }
    }
}
