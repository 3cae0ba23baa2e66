//! Tensor product representation algebra.
//!
//! A sequence of fillers `f_1..f_T` bound to roles `r_1..r_T` is the
//! `d×d` matrix `S = Σ_t f_t r_tᵀ`. With orthonormal roles each role is
//! its own unbinding vector, so `S r_j = f_j`.
//!
//! Exact recovery needs at most `d` distinct orthonormal roles; longer
//! sequences superpose and unbinding degrades gracefully into a
//! least-squares-like blend.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Running or complete sentence representation: a `d×d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TprMatrix {
    s: Tensor,
}

impl TprMatrix {
    pub fn zeros(d: usize) -> Self {
        TprMatrix {
            s: Tensor::zeros(&[d, d]),
        }
    }

    pub fn from_tensor(s: Tensor) -> Result<Self> {
        if !s.is_matrix() || s.rows() != s.cols() {
            return Err(Error::dim("tpr_matrix", &[s.shape()]));
        }
        Ok(TprMatrix { s })
    }

    pub fn dim(&self) -> usize {
        self.s.rows()
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.s
    }

    pub fn into_tensor(self) -> Tensor {
        self.s
    }
}

/// Constant orthonormal role basis: the Sylvester Hadamard matrix scaled by
/// `1/sqrt(d)`. Columns serve both as roles and as unbinding vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleBasis {
    u: Tensor,
}

impl RoleBasis {
    pub fn dim(&self) -> usize {
        self.u.rows()
    }

    pub fn matrix(&self) -> &Tensor {
        &self.u
    }

    pub fn column(&self, j: usize) -> Tensor {
        Tensor::from_vec(self.u.column(j))
    }
}

/// Builds the normalized Sylvester Hadamard basis of size `d = 2^k`.
pub fn hadamard_basis(d: usize) -> Result<RoleBasis> {
    if d == 0 || !d.is_power_of_two() {
        return Err(Error::contract(format!(
            "Hadamard basis needs a power-of-two dimension, got {d}"
        )));
    }
    // H_{2n} = [[H_n, H_n], [H_n, -H_n]]; entry sign is (-1)^popcount(i & j).
    let scale = 1.0 / (d as f64).sqrt();
    let mut u = Tensor::zeros(&[d, d]);
    for i in 0..d {
        for j in 0..d {
            let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            u.set(i, j, sign * scale);
        }
    }
    Ok(RoleBasis { u })
}

fn check_vec(op: &'static str, v: &Tensor, d: usize) -> Result<()> {
    if !v.is_vector() || v.len() != d {
        return Err(Error::dim(op, &[v.shape(), &[d]]));
    }
    Ok(())
}

/// `S = Σ_t f_t r_tᵀ`. An empty sequence yields the `d×d` zero matrix.
pub fn bind_sequence(fillers: &[Tensor], roles: &[Tensor], d: usize) -> Result<TprMatrix> {
    if fillers.len() != roles.len() {
        return Err(Error::contract(format!(
            "bind_sequence: {} fillers but {} roles",
            fillers.len(),
            roles.len()
        )));
    }
    fillers
        .iter()
        .zip(roles)
        .try_fold(TprMatrix::zeros(d), |s, (f, r)| accumulate(&s, f, r))
}

/// Extracts the filler bound to the role dual to `u`: `S·u`.
pub fn unbind(s: &TprMatrix, u: &Tensor) -> Result<Tensor> {
    check_vec("unbind", u, s.dim())?;
    s.s.matvec(u)
}

/// `S̃ + f·rᵀ`
pub fn accumulate(s: &TprMatrix, f: &Tensor, r: &Tensor) -> Result<TprMatrix> {
    let d = s.dim();
    check_vec("accumulate", f, d)?;
    check_vec("accumulate", r, d)?;
    let mut out = s.s.clone();
    for (i, &fi) in f.data().iter().enumerate() {
        if fi != 0.0 {
            crate::tensor::axpy(fi, r.data(), &mut out.data_mut()[i * d..(i + 1) * d]);
        }
    }
    Ok(TprMatrix { s: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hadamard_small_cases() {
        assert_eq!(hadamard_basis(1).unwrap().matrix().data(), &[1.0]);
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(hadamard_basis(2).unwrap().matrix().data(), &[h, h, h, -h]);
    }

    #[test]
    fn hadamard_rejects_non_powers_of_two() {
        for d in [0, 3, 6, 12, 33] {
            assert!(hadamard_basis(d).is_err(), "d={d}");
        }
    }

    #[test]
    fn hadamard_is_orthonormal() {
        for d in [1, 2, 4, 8, 16, 32, 64] {
            let u = hadamard_basis(d).unwrap();
            let gram = u.matrix().transpose().matmul(u.matrix()).unwrap();
            assert!(gram.max_abs_diff(&Tensor::identity(d)) < 1e-10, "d={d}");
            let e = 1.0 / (d as f64).sqrt();
            assert!(u.matrix().data().iter().all(|x| (x.abs() - e).abs() < 1e-15));
        }
    }

    #[test]
    fn single_binding() {
        let s = bind_sequence(&[Tensor::vector(&[1.0, 0.0])], &[Tensor::vector(&[0.0, 1.0])], 2).unwrap();
        assert_eq!(s.as_tensor().data(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_binding_is_zero() {
        let s = bind_sequence(&[], &[], 4).unwrap();
        assert_eq!(s, TprMatrix::zeros(4));
    }

    #[test]
    fn bind_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 5;
        let f: Vec<Tensor> = (0..4).map(|_| Tensor::uniform(&[d], 1.0, &mut rng)).collect();
        let r: Vec<Tensor> = (0..4).map(|_| Tensor::uniform(&[d], 1.0, &mut rng)).collect();
        let s = bind_sequence(&f, &r, d).unwrap();
        let mut naive = vec![0.0; d * d];
        for t in 0..4 {
            for i in 0..d {
                for j in 0..d {
                    naive[i * d + j] += f[t].data()[i] * r[t].data()[j];
                }
            }
        }
        let naive = Tensor::new(vec![d, d], naive).unwrap();
        assert!(s.as_tensor().max_abs_diff(&naive) < 1e-12);
    }

    #[test]
    fn unbind_zero_and_basis_recovery() {
        let u = hadamard_basis(8).unwrap();
        assert_eq!(unbind(&TprMatrix::zeros(8), &u.column(3)).unwrap(), Tensor::zeros(&[8]));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let fillers: Vec<Tensor> = (0..8).map(|_| Tensor::uniform(&[8], 2.0, &mut rng)).collect();
        let roles: Vec<Tensor> = (0..8).map(|j| u.column(j)).collect();
        let s = bind_sequence(&fillers, &roles, 8).unwrap();
        for (j, f) in fillers.iter().enumerate() {
            assert!(unbind(&s, &roles[j]).unwrap().max_abs_diff(f) < 1e-10);
        }
    }

    #[test]
    fn dimension_errors() {
        let s = TprMatrix::zeros(4);
        assert!(unbind(&s, &Tensor::zeros(&[3])).is_err());
        assert!(accumulate(&s, &Tensor::zeros(&[4]), &Tensor::zeros(&[2])).is_err());
        assert!(bind_sequence(&[Tensor::zeros(&[4])], &[], 4).is_err());
    }

    #[test]
    fn accumulate_identities() {
        let f = Tensor::vector(&[1.0, 2.0]);
        let r = Tensor::vector(&[3.0, -1.0]);
        let once = accumulate(&TprMatrix::zeros(2), &f, &r).unwrap();
        assert_eq!(once.as_tensor(), &Tensor::outer(&f, &r).unwrap());
        let same = accumulate(&once, &Tensor::zeros(&[2]), &r).unwrap();
        assert_eq!(same, once);
    }
}
