use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::junction::Spin;
use crate::linalg::ComplexMatrix;

/// Scattering matrix over orders `-M..=M` in the angular-momentum basis.
///
/// Entry `(m, l)` is the amplitude of the outgoing wave of order `m` for a
/// unit-flux incoming wave of order `l`. The partial-wave phases are chosen so
/// that `(4 pi k)^{-1/2} sum (S - I)_{ml} e^{i(m theta - l theta')}` is the
/// far-field amplitude for a plane wave incident along `theta'`.
#[derive(Debug, Clone, PartialEq)]
pub struct SMatrix {
    pub eps: f64,
    pub spin: Spin,
    pub order: usize,
    /// Exterior wavenumber.
    pub k: f64,
    pub mat: ComplexMatrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SMatrixJson {
    eps: f64,
    spin: Spin,
    #[serde(rename = "M")]
    order: usize,
    s: Vec<[f64; 2]>,
}

impl SMatrix {
    pub fn dim(&self) -> usize {
        2 * self.order + 1
    }

    /// Row/column index of order `m`.
    pub fn index(&self, m: i32) -> Result<usize> {
        if m.unsigned_abs() as usize > self.order {
            return Err(Error::Domain(format!("order {m} outside truncation M = {}", self.order)));
        }
        Ok((m + self.order as i32) as usize)
    }

    pub fn get(&self, m: i32, l: i32) -> Result<Complex64> {
        Ok(self.mat[(self.index(m)?, self.index(l)?)])
    }

    /// `max |S^dagger S - I|`
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.mat.adjoint().matmul(&self.mat).expect("square");
        prod.max_abs_diff(&ComplexMatrix::identity(self.dim())).expect("square")
    }

    /// `{eps, spin, M, s}` with `s` row-major `[re, im]` pairs.
    pub fn to_json(&self) -> Result<String> {
        let doc = SMatrixJson {
            eps: self.eps,
            spin: self.spin,
            order: self.order,
            s: self.mat.as_slice().iter().map(|z| [z.re, z.im]).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    /// Inverse of `to_json`. The exterior wavenumber is not stored and comes back as `|eps|`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SMatrixJson = serde_json::from_str(text)?;
        let n = 2 * doc.order + 1;
        let data = doc.s.into_iter().map(|[re, im]| Complex64::new(re, im)).collect();
        let mat = ComplexMatrix::from_row_major(n, n, data)?;
        Ok(Self { eps: doc.eps, spin: doc.spin, order: doc.order, k: doc.eps.abs(), mat })
    }

    /// Little-endian `i64` M followed by row-major interleaved `f64` re/im.
    pub fn write_binary(&self, out: &mut impl Write) -> Result<()> {
        out.write_all(&(self.order as i64).to_le_bytes())?;
        for z in self.mat.as_slice() {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the `write_binary` layout; energy and spin are not part of it.
    pub fn read_binary(input: &mut impl Read, eps: f64, spin: Spin) -> Result<Self> {
        let mut word = [0u8; 8];
        input.read_exact(&mut word)?;
        let order = i64::from_le_bytes(word);
        if !(0..=crate::specfun::MAX_ORDER as i64).contains(&order) {
            return Err(Error::Domain(format!("invalid truncation order {order} in binary S-matrix")));
        }
        let order = order as usize;
        let n = 2 * order + 1;
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            input.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            input.read_exact(&mut word)?;
            data.push(Complex64::new(re, f64::from_le_bytes(word)));
        }
        let mat = ComplexMatrix::from_row_major(n, n, data)?;
        Ok(Self { eps, spin, order, k: eps.abs(), mat })
    }
}
