//! Exact analysis of the Markov chain induced by a fixed policy.
//!
//! Recurrent classes are the closed strongly connected components of the
//! support digraph (edge `i -> j` iff `P[i][j] > 0`). The limiting matrix is
//! assembled from per-class stationary distributions and transient absorption
//! probabilities, and the deviation matrix comes from the fundamental-matrix
//! identity `H = (I - P + P_inf)^{-1} - P_inf`.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::model::{Mdp, Policy};
use crate::scalar::Real;
use crate::vector::ValueVec;

#[derive(Clone, Debug, Serialize)]
pub struct ChainAnalysis<T: Real> {
    pub p_pi: Matrix<T>,
    pub r_pi: ValueVec<T>,
    pub recurrent_classes: Vec<Vec<usize>>,
    pub transient_states: Vec<usize>,
    pub p_inf: Matrix<T>,
    /// Deviation matrix (Drazin inverse of `I - P_pi`).
    pub deviation: Matrix<T>,
    pub gain: ValueVec<T>,
    pub bias: ValueVec<T>,
    /// Worst-case expected time to reach the recurrent set.
    pub transient_time: T,
}

impl<T: Real> ChainAnalysis<T> {
    pub fn n_states(&self) -> usize {
        self.p_pi.rows()
    }

    pub fn is_transient(&self, s: usize) -> bool {
        self.transient_states.binary_search(&s).is_ok()
    }

    /// Expected number of visits to transient `target` starting from `from`.
    pub fn expected_visits(&self, from: usize, target: usize) -> Result<T> {
        if !self.is_transient(target) {
            return Err(Error::NotTransient(target));
        }
        Ok(self.deviation[(from, target)])
    }
}

/// `P_pi = M^pi P` and `r_pi = M^pi r`.
pub fn policy_matrices<T: Real>(mdp: &Mdp<T>, pi: &Policy<T>) -> Result<(Matrix<T>, ValueVec<T>)> {
    pi.validate(mdp)?;
    let n = mdp.n_states();
    let mut p = Matrix::zeros(n, n);
    let mut r = ValueVec::zeros(n);
    for s in 0..n {
        for (a, w) in pi.weights(s) {
            let act = mdp.action(s, a);
            r[s] = r[s] + w * act.reward;
            for (j, &q) in act.probs.iter().enumerate() {
                if q > T::zero() {
                    p[(s, j)] = p[(s, j)] + w * q;
                }
            }
        }
    }
    Ok((p, r))
}

/// Recurrent classes (each sorted, ordered by smallest member) and the sorted
/// transient states.
pub fn classify<T: Real>(p: &Matrix<T>) -> (Vec<Vec<usize>>, Vec<usize>) {
    let n = p.rows();
    let mut g = DiGraph::<(), ()>::with_capacity(n, n * 2);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if p[(i, j)] > T::zero() {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut comp = vec![0usize; n];
    let sccs = tarjan_scc(&g);
    for (c, members) in sccs.iter().enumerate() {
        for v in members {
            comp[v.index()] = c;
        }
    }
    let mut classes = Vec::new();
    let mut recurrent = vec![false; n];
    for (c, members) in sccs.iter().enumerate() {
        let closed = members
            .iter()
            .all(|v| (0..n).all(|j| p[(v.index(), j)] <= T::zero() || comp[j] == c));
        if closed {
            let mut class: Vec<usize> = members.iter().map(|v| v.index()).collect();
            class.sort_unstable();
            for &s in &class {
                recurrent[s] = true;
            }
            classes.push(class);
        }
    }
    classes.sort_unstable_by_key(|c| c[0]);
    let transient = (0..n).filter(|&s| !recurrent[s]).collect();
    (classes, transient)
}

/// Stationary distribution of an irreducible class.
fn stationary<T: Real>(p: &Matrix<T>, class: &[usize]) -> Result<Vec<T>> {
    let m = class.len();
    if m == 1 {
        return Ok(vec![T::one()]);
    }
    let mut a = p.select(class, class).transpose();
    for i in 0..m {
        a[(i, i)] = a[(i, i)] - T::one();
    }
    for j in 0..m {
        a[(m - 1, j)] = T::one();
    }
    let mut b = vec![T::zero(); m];
    b[m - 1] = T::one();
    Ok(Lu::factor(&a)?.solve(&b))
}

/// `I - Q` on the transient block.
fn transient_system<T: Real>(p: &Matrix<T>, transient: &[usize]) -> Matrix<T> {
    let mut a = p.select(transient, transient).scale(-T::one());
    for i in 0..transient.len() {
        a[(i, i)] = a[(i, i)] + T::one();
    }
    a
}

/// Cesaro limit `P_inf` given the class structure.
pub fn limiting_matrix<T: Real>(p: &Matrix<T>, classes: &[Vec<usize>], transient: &[usize]) -> Result<Matrix<T>> {
    let n = p.rows();
    let mut p_inf = Matrix::zeros(n, n);
    let stationaries = classes.iter().map(|c| stationary(p, c)).collect::<Result<Vec<_>>>()?;
    for (class, mu) in classes.iter().zip(&stationaries) {
        for &i in class {
            for (&j, &w) in class.iter().zip(mu) {
                p_inf[(i, j)] = w;
            }
        }
    }
    if transient.is_empty() {
        return Ok(p_inf);
    }
    let lu = Lu::factor(&transient_system(p, transient))?;
    for (class, mu) in classes.iter().zip(&stationaries) {
        let into: Vec<T> = transient
            .iter()
            .map(|&t| class.iter().fold(T::zero(), |acc, &j| acc + p[(t, j)]))
            .collect();
        let absorb = lu.solve(&into);
        for (&t, &a) in transient.iter().zip(&absorb) {
            for (&j, &w) in class.iter().zip(mu) {
                p_inf[(t, j)] = a * w;
            }
        }
    }
    Ok(p_inf)
}

/// `H = (I - P + P_inf)^{-1} - P_inf`.
pub fn deviation_matrix<T: Real>(p: &Matrix<T>, p_inf: &Matrix<T>) -> Result<Matrix<T>> {
    let fundamental = Matrix::identity(p.rows()).sub(p).add(p_inf);
    Ok(Lu::factor(&fundamental)?.inverse().sub(p_inf))
}

/// Max over start states of the expected time to reach the recurrent set.
fn hitting_time<T: Real>(p: &Matrix<T>, transient: &[usize]) -> Result<T> {
    if transient.is_empty() {
        return Ok(T::zero());
    }
    let x = Lu::factor(&transient_system(p, transient))?.solve(&vec![T::one(); transient.len()]);
    Ok(x.into_iter().fold(T::zero(), T::max))
}

/// Full analysis of a stochastic matrix and reward vector.
pub fn analyze_chain<T: Real>(p: Matrix<T>, r: ValueVec<T>) -> Result<ChainAnalysis<T>> {
    let (classes, transient) = classify(&p);
    let p_inf = limiting_matrix(&p, &classes, &transient)?;
    let deviation = deviation_matrix(&p, &p_inf)?;
    let gain = p_inf.mul_vec(&r).into();
    let bias = deviation.mul_vec(&r).into();
    let transient_time = hitting_time(&p, &transient)?;
    Ok(ChainAnalysis {
        p_pi: p,
        r_pi: r,
        recurrent_classes: classes,
        transient_states: transient,
        p_inf,
        deviation,
        gain,
        bias,
        transient_time,
    })
}

pub fn analyze<T: Real>(mdp: &Mdp<T>, pi: &Policy<T>) -> Result<ChainAnalysis<T>> {
    let (p, r) = policy_matrices(mdp, pi)?;
    analyze_chain(p, r)
}

/// `rho^pi` alone; skips the deviation matrix.
pub fn gain<T: Real>(mdp: &Mdp<T>, pi: &Policy<T>) -> Result<ValueVec<T>> {
    let (p, r) = policy_matrices(mdp, pi)?;
    let (classes, transient) = classify(&p);
    Ok(limiting_matrix(&p, &classes, &transient)?.mul_vec(&r).into())
}

/// `B^pi`.
pub fn transient_time<T: Real>(mdp: &Mdp<T>, pi: &Policy<T>) -> Result<T> {
    let (p, _) = policy_matrices(mdp, pi)?;
    let (_, transient) = classify(&p);
    hitting_time(&p, &transient)
}

pub fn expected_visits<T: Real>(analysis: &ChainAnalysis<T>, from: usize, target: usize) -> Result<T> {
    analysis.expected_visits(from, target)
}
