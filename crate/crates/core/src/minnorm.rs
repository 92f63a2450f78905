//! Wolfe's minimum-norm-point algorithm over a polytope given by a linear
//! minimization oracle.
//!
//! The iterate is kept as a convex combination of oracle vertices, each
//! carrying a caller-supplied payload, so a minimizer in the original
//! variables can be rebuilt from the final weights.

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct MinNormPoint<T, P> {
    /// The point of smallest Euclidean norm found.
    pub point: Vec<T>,
    /// Convex weights and payloads of the vertices that express `point`.
    pub atoms: Vec<(T, P)>,
    pub iterations: usize,
    /// Final Wolfe gap `|x|^2 - min_q <x, q>`.
    pub gap: T,
}

impl<T: Real, P> MinNormPoint<T, P> {
    pub fn norm_sq(&self) -> T {
        dot(&self.point, &self.point)
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn combine<T: Real>(atoms: &[Vec<T>], w: &[T], dim: usize) -> Vec<T> {
    let mut x = vec![T::zero(); dim];
    for (s, &l) in atoms.iter().zip(w) {
        for (xi, &si) in x.iter_mut().zip(s) {
            *xi = *xi + l * si;
        }
    }
    x
}

/// Affine combination (weights sum to one) of `atoms` with least norm.
fn affine_minimizer<T: Real>(atoms: &[Vec<T>]) -> Option<Vec<T>> {
    let m = atoms.len();
    if m == 1 {
        return Some(vec![T::one()]);
    }
    let n = m + 1;
    let mut a = vec![T::zero(); n * n];
    for i in 0..m {
        for j in i..m {
            let g = dot(&atoms[i], &atoms[j]);
            a[i * n + j] = g;
            a[j * n + i] = g;
        }
        a[i * n + m] = T::one();
        a[m * n + i] = T::one();
    }
    let mut b = vec![T::zero(); n];
    b[m] = T::one();
    linalg::solve_in_place(&mut a, &mut b, n, T::lit(1e-15))?;
    b.truncate(m);
    Some(b)
}

/// Runs Wolfe's algorithm. `oracle(d)` must return a vertex minimizing
/// `<d, q>` over the polytope together with its payload.
pub fn min_norm_point<T, P, F>(dim: usize, mut oracle: F, max_iter: usize) -> Result<MinNormPoint<T, P>>
where
    T: Real,
    P: Clone,
    F: FnMut(&[T]) -> Result<(Vec<T>, P)>,
{
    let tol = T::lit(T::MINNORM_TOL);
    let tiny = T::lit(1e-14).max(T::epsilon());
    let (q0, p0) = oracle(&vec![T::zero(); dim])?;
    let mut atoms = vec![q0];
    let mut payloads = vec![p0];
    let mut lambda = vec![T::one()];
    let mut x = atoms[0].clone();
    let mut gap = T::infinity();

    for iter in 0..max_iter {
        let xx = dot(&x, &x);
        if xx <= T::min_positive_value() {
            return Ok(finish(x, lambda, payloads, iter, T::zero()));
        }
        let (q, p) = oracle(&x)?;
        gap = xx - dot(&x, &q);
        let scale = atoms
            .iter()
            .chain(std::iter::once(&q))
            .map(|s| dot(s, s))
            .fold(T::one(), T::max);
        if gap <= tol * scale {
            return Ok(finish(x, lambda, payloads, iter, gap));
        }
        let dup = atoms.iter().any(|s| {
            s.iter()
                .zip(&q)
                .all(|(&a, &b)| (a - b).abs() <= tiny * (T::one() + a.abs()))
        });
        if dup || atoms.len() > dim + 1 {
            return Ok(finish(x, lambda, payloads, iter, gap));
        }
        let snapshot = (payloads.clone(), lambda.clone(), x.clone());
        atoms.push(q);
        payloads.push(p);
        lambda.push(T::zero());

        loop {
            let Some(alpha) = affine_minimizer(&atoms) else {
                // Affinely dependent corral: keep the current iterate.
                let last = atoms.len() - 1;
                atoms.pop();
                payloads.pop();
                lambda.truncate(last);
                return Ok(finish(x, lambda, payloads, iter, gap));
            };
            if alpha.iter().all(|&a| a > tiny) {
                lambda = alpha;
                x = combine(&atoms, &lambda, dim);
                break;
            }
            let mut theta = T::one();
            let mut arg = None;
            for (i, (&l, &a)) in lambda.iter().zip(&alpha).enumerate() {
                if a <= tiny && l - a > T::zero() {
                    let t = l / (l - a);
                    if t < theta || arg.is_none() {
                        theta = t.min(theta);
                        arg = Some(i);
                    }
                }
            }
            let theta = theta.max(T::zero()).min(T::one());
            for (l, &a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (T::one() - theta) * *l;
            }
            if let Some(i) = arg {
                lambda[i] = T::zero();
            }
            let mut k = 0;
            while k < lambda.len() {
                if lambda[k] <= tiny {
                    lambda.remove(k);
                    atoms.remove(k);
                    payloads.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: T = lambda.iter().copied().sum();
            lambda.iter_mut().for_each(|l| *l = *l / total);
            x = combine(&atoms, &lambda, dim);
            if atoms.len() == 1 {
                break;
            }
        }
        // The norm falls strictly in exact arithmetic; if it did not, the
        // iterate is as good as working precision allows.
        if dot(&x, &x) >= xx {
            let (p, l, x0) = snapshot;
            return Ok(finish(x0, l, p, iter, gap));
        }
    }
    Err(Error::NonConvergence(format!(
        "minimum-norm iteration did not close its gap ({:.3e}) in {max_iter} steps",
        gap.to_f64_lossy()
    )))
}

fn finish<T: Real, P>(x: Vec<T>, lambda: Vec<T>, payloads: Vec<P>, iter: usize, gap: T) -> MinNormPoint<T, P> {
    MinNormPoint {
        point: x,
        atoms: lambda.into_iter().zip(payloads).collect(),
        iterations: iter,
        gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn box_oracle(lo: Vec<f64>, hi: Vec<f64>) -> impl FnMut(&[f64]) -> Result<(Vec<f64>, ())> {
        move |d: &[f64]| {
            let q = d
                .iter()
                .enumerate()
                .map(|(i, &di)| if di > 0.0 { lo[i] } else { hi[i] })
                .collect();
            Ok((q, ()))
        }
    }

    #[test]
    fn triangle_projection() {
        let verts = [vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]];
        let v = verts.clone();
        let res = min_norm_point(
            2,
            move |d: &[f64]| {
                let i = (0..3)
                    .min_by(|&a, &b| dot(d, &v[a]).partial_cmp(&dot(d, &v[b])).unwrap())
                    .unwrap();
                Ok((v[i].clone(), i))
            },
            100,
        )
        .unwrap();
        assert!((res.point[0] - 0.5).abs() < 1e-12 && (res.point[1] - 0.5).abs() < 1e-12);
        let w: f64 = res.atoms.iter().map(|a| a.0).sum();
        assert!((w - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn box_projection_is_clamp(
            lo in proptest::collection::vec(-3.0f64..3.0, 1..7),
            width in proptest::collection::vec(0.01f64..2.0, 7),
        ) {
            let hi: Vec<f64> = lo.iter().zip(&width).map(|(l, w)| l + w).collect();
            let expect: Vec<f64> = lo.iter().zip(&hi).map(|(&l, &h)| 0.0f64.clamp(l, h)).collect();
            let res = min_norm_point(lo.len(), box_oracle(lo.clone(), hi), 500).unwrap();
            for (a, b) in res.point.iter().zip(&expect) {
                prop_assert!((a - b).abs() < 1e-6, "{:?} vs {:?}", res.point, expect);
            }
            let nn: f64 = expect.iter().map(|v| v * v).sum();
            prop_assert!((res.norm_sq() - nn).abs() < 1e-10);
        }
    }
}
