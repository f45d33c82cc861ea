//! Linear systems over GF(2) with at most 64 unknowns, rows stored as bit masks.

use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("linear system is inconsistent")]
pub struct Inconsistent;

/// Rows `(coefficients, rhs)` over `width` unknowns.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Gf2System {
    pub width: u32,
    pub rows: Vec<(u64, bool)>,
}

impl Gf2System {
    pub fn new(width: u32) -> Self {
        assert!(width <= 64);
        Gf2System { width, rows: Vec::new() }
    }

    pub fn push(&mut self, coefficients: u64, rhs: bool) {
        self.rows.push((coefficients, rhs));
    }
}

/// Affine solution set: `particular ^ span(basis)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf2Solution {
    pub particular: u64,
    pub basis: Vec<u64>,
}

impl Gf2Solution {
    pub fn count_log2(&self) -> u32 {
        self.basis.len() as u32
    }

    /// Every solution, in Gray-code order.
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        let n = self.basis.len();
        let mut current = self.particular;
        let total: u64 = 1u64.checked_shl(n as u32).unwrap_or(0);
        (0..total).map(move |i| {
            if i > 0 {
                current ^= self.basis[i.trailing_zeros() as usize];
            }
            current
        })
    }
}

/// Row-echelon form built one row at a time, so contradictions surface as
/// soon as the offending row arrives.
#[derive(Debug, Clone)]
pub struct Echelon {
    width: u32,
    // pivots[p] holds the row whose highest set bit is p
    pivots: [(u64, bool); 64],
    present: u64,
}

impl Echelon {
    pub fn new(width: u32) -> Self {
        assert!(width <= 64);
        Echelon { width, pivots: [(0, false); 64], present: 0 }
    }

    pub fn rank(&self) -> u32 {
        self.present.count_ones()
    }

    /// Adds a row; `Err` when it contradicts the rows already present.
    #[inline]
    pub fn insert(&mut self, mut row: u64, mut rhs: bool) -> Result<(), Inconsistent> {
        while row != 0 {
            let p = 63 - row.leading_zeros();
            if self.present >> p & 1 == 1 {
                let (r, b) = self.pivots[p as usize];
                row ^= r;
                rhs ^= b;
            } else {
                self.pivots[p as usize] = (row, rhs);
                self.present |= 1 << p;
                return Ok(());
            }
        }
        if rhs {
            Err(Inconsistent)
        } else {
            Ok(())
        }
    }

    fn back_substitute(&self, mut x: u64, homogeneous: bool) -> u64 {
        // pivot rows only reference lower bits, so solve bottom-up
        let mut pending = self.present;
        while pending != 0 {
            let p = pending.trailing_zeros();
            pending &= pending - 1;
            let (row, rhs) = self.pivots[p as usize];
            let rest = row & !(1u64 << p);
            let bit = ((rest & x).count_ones() & 1 == 1) ^ (rhs && !homogeneous);
            x = (x & !(1u64 << p)) | (u64::from(bit) << p);
        }
        x
    }

    pub fn solve(&self) -> Gf2Solution {
        let all = if self.width == 64 { u64::MAX } else { (1u64 << self.width) - 1 };
        let free = all & !self.present;
        let particular = self.back_substitute(0, false);
        let basis = (0..self.width)
            .filter(|f| free >> f & 1 == 1)
            .map(|f| self.back_substitute(1u64 << f, true))
            .collect();
        Gf2Solution { particular, basis }
    }
}

/// Gaussian elimination over GF(2).
pub fn gf2_solve(system: &Gf2System) -> Result<Gf2Solution, Inconsistent> {
    let mut ech = Echelon::new(system.width);
    for &(row, rhs) in &system.rows {
        ech.insert(row, rhs)?;
    }
    Ok(ech.solve())
}
