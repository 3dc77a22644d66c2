//! Structural certificates for optimal barycenter transports: every atom of
//! the barycenter ships its whole mass to a single atom of each measure, and
//! the transports are gradients of convex potentials built from the dual.

use serde::Serialize;

use crate::barycenter::{row_minimum, BarycenterResult, CostTensor, DualSolution, SchemePricer};
use crate::error::Result;
use crate::lp::{maximize_dual_slack, SolveOptions};
use crate::measure::{squared_distance, squared_norm, MeasureSet};
use crate::scalar::{rel_close, Scalar};

/// Tolerance of the structural checks.
pub const CERT_TOL: f64 = 1e-7;

/// Outcome of the no-mass-splitting check.
#[derive(Clone, Debug, Serialize)]
pub struct SplittingReport {
    pub pass: bool,
    /// `(i, j, k_j)` for every measure i and barycenter atom j with a unique target.
    pub targets: Vec<(usize, usize, usize)>,
    pub violations: Vec<String>,
}

/// Checks that each barycenter atom sends all its mass to exactly one atom of
/// each measure and sits at the average of those targets.
pub fn check_no_mass_splitting<T: Scalar>(result: &BarycenterResult<T>, ms: &MeasureSet<T>) -> SplittingReport {
    let tol = T::tolerances().support;
    let n = ms.len();
    let mut targets = Vec::new();
    let mut violations = Vec::new();
    let mut chosen: Vec<Vec<Option<usize>>> = vec![vec![None; n]; result.centroids.len()];
    for i in 0..n {
        let plan = result.transport.plan(i);
        for &j in &result.support {
            let ks: Vec<usize> = plan
                .iter()
                .filter(|e| e.1 == j && e.3 > tol)
                .map(|e| e.2)
                .collect();
            if ks.len() == 1 {
                targets.push((i, j, ks[0]));
                chosen[j][i] = Some(ks[0]);
            } else {
                violations.push(format!("measure {i}, centroid {j}: {} targets {:?}", ks.len(), ks));
            }
        }
    }
    let nn = n as f64;
    for &j in &result.support {
        let Some(ks) = chosen[j].iter().copied().collect::<Option<Vec<usize>>>() else { continue };
        let x = result.centroids.point(j);
        for s in 0..ms.dim() {
            let avg = ks
                .iter()
                .enumerate()
                .map(|(i, &k)| ms.measures()[i].points()[k][s].to_f64())
                .sum::<f64>()
                / nn;
            if (avg - x[s].to_f64()).abs() > CERT_TOL {
                violations.push(format!("centroid {j} is not the average of its targets {:?}", ks));
                break;
            }
        }
    }
    SplittingReport { pass: violations.is_empty(), targets, violations }
}

/// psi_i(x) = max_k <x, x_ik> - |x_ik|^2 / 2 + tau_ik / 2 for each measure.
#[derive(Clone, Debug)]
pub struct PotentialSet<T> {
    /// Per measure, `(slope x_ik, half tau_ik)` for each affine piece.
    pieces: Vec<Vec<(Vec<T>, T)>>,
}

/// Maximizing pieces of a potential at a point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Gradient {
    Unique(usize),
    /// Several pieces attain the maximum; listed in ascending order.
    Tie(Vec<usize>),
}

impl Gradient {
    /// The lowest maximizing piece.
    pub fn index(&self) -> usize {
        match self {
            Gradient::Unique(k) => *k,
            Gradient::Tie(ks) => ks[0],
        }
    }
}

pub fn build_potentials<T: Scalar>(dual: &DualSolution<T>, ms: &MeasureSet<T>) -> PotentialSet<T> {
    let half = T::from_ratio(1, 2);
    let pieces = ms
        .measures()
        .iter()
        .zip(&dual.tau)
        .map(|(m, tau)| {
            m.points()
                .iter()
                .zip(tau)
                .map(|(p, t)| (p.clone(), half.clone() * t.clone()))
                .collect()
        })
        .collect();
    PotentialSet { pieces }
}

impl<T: Scalar> PotentialSet<T> {
    pub fn num_measures(&self) -> usize {
        self.pieces.len()
    }

    /// Values |x - x_ik|^2 - tau_ik, whose minimizers are the maximizers of psi_i.
    fn gaps(&self, i: usize, x: &[T]) -> Vec<T> {
        let two = T::from_usize(2);
        self.pieces[i]
            .iter()
            .map(|(p, h)| squared_distance(x, p) - two.clone() * h.clone())
            .collect()
    }

    /// psi_i(x), evaluated as (|x|^2 - min_k (|x - x_ik|^2 - tau_ik)) / 2.
    pub fn value(&self, i: usize, x: &[T]) -> T {
        let gaps = self.gaps(i, x);
        let min = gaps.iter().skip(1).fold(gaps[0].clone(), |a, b| if *b < a { b.clone() } else { a });
        (squared_norm(x) - min) / T::from_usize(2)
    }

    /// psi_i(x) evaluated directly as a maximum of affine pieces.
    pub fn value_direct(&self, i: usize, x: &[T]) -> T {
        let half = T::from_ratio(1, 2);
        let vals: Vec<T> = self.pieces[i]
            .iter()
            .map(|(p, h)| {
                let dot = p.iter().zip(x).fold(T::zero(), |a, (u, v)| a + u.clone() * v.clone());
                dot - half.clone() * squared_norm(p) + h.clone()
            })
            .collect();
        vals.iter().skip(1).fold(vals[0].clone(), |a, b| if *b > a { b.clone() } else { a })
    }

    /// Maximizing pieces at `x`; pieces within `tie_tol` of the best count as ties.
    pub fn gradient(&self, i: usize, x: &[T], tie_tol: &T) -> Gradient {
        let gaps = self.gaps(i, x);
        let (best, min) = {
            let zero: Vec<T> = vec![T::zero(); gaps.len()];
            row_minimum(&gaps, &zero)
        };
        let ties: Vec<usize> = (0..gaps.len())
            .filter(|&k| k == best || gaps[k].clone() - min.clone() <= *tie_tol)
            .collect();
        if ties.len() == 1 {
            Gradient::Unique(best)
        } else {
            Gradient::Tie(ties)
        }
    }

    /// The gradient point x_ik of the maximizing piece.
    pub fn gradient_point(&self, i: usize, g: &Gradient) -> &[T] {
        &self.pieces[i][g.index()].0
    }
}

/// Outcome of the potential certificate.
#[derive(Clone, Debug, Serialize)]
pub struct PotentialReport {
    /// Pushforward of the barycenter under each gradient reproduces the measure.
    pub i: bool,
    /// Transport cost through each gradient equals the per-measure cost.
    pub ii: bool,
    /// The gradients average to the identity on the barycenter support.
    pub iii: bool,
    /// The potentials average to |x|^2 / 2 on the barycenter support.
    pub iv: bool,
    /// Every gradient at a barycenter atom is unique.
    pub unique_argmax: bool,
    /// Each gradient agrees with the unique transport target.
    pub matches_transport: bool,
    pub violations: Vec<String>,
}

impl PotentialReport {
    pub fn pass(&self) -> bool {
        self.i && self.ii && self.iii && self.iv
    }

    pub fn certified(&self) -> bool {
        self.pass() && self.unique_argmax
    }
}

pub fn certify_potentials<T: Scalar>(
    ps: &PotentialSet<T>,
    result: &BarycenterResult<T>,
    ms: &MeasureSet<T>,
) -> PotentialReport {
    let tie_tol = T::tolerances().strict;
    let n = ms.len();
    let mut violations = Vec::new();
    let mut unique_argmax = true;
    let mut grads = vec![Vec::with_capacity(result.support.len()); n];
    for i in 0..n {
        for &j in &result.support {
            let g = ps.gradient(i, result.centroids.point(j), &tie_tol);
            if let Gradient::Tie(ks) = &g {
                unique_argmax = false;
                violations.push(format!("measure {i}, centroid {j}: tied gradient pieces {ks:?}"));
            }
            grads[i].push(g.index());
        }
    }
    let z: Vec<f64> = result.support.iter().map(|&j| result.transport.z()[j].to_f64()).collect();

    let mut ok_i = true;
    let mut ok_ii = true;
    for i in 0..n {
        let m = &ms.measures()[i];
        let mut pushed = vec![0.0; m.len()];
        let mut cost = 0.0;
        for (pos, &j) in result.support.iter().enumerate() {
            let k = grads[i][pos];
            pushed[k] += z[pos];
            cost += z[pos] * squared_distance(result.centroids.point(j), &m.points()[k]).to_f64();
        }
        for (k, d) in m.masses().iter().enumerate() {
            if (pushed[k] - d.to_f64()).abs() > CERT_TOL {
                ok_i = false;
                violations.push(format!("measure {i}, atom {k}: pushforward mass {} vs {}", pushed[k], d.to_f64()));
            }
        }
        let expected = result.per_measure_cost[i].to_f64();
        if !rel_close(cost, expected, CERT_TOL) {
            ok_ii = false;
            violations.push(format!("measure {i}: gradient transport cost {cost} vs {expected}"));
        }
    }

    let mut ok_iii = true;
    let mut ok_iv = true;
    let nn = T::from_usize(n);
    for (pos, &j) in result.support.iter().enumerate() {
        let x = result.centroids.point(j);
        for s in 0..ms.dim() {
            let avg = (0..n).map(|i| ms.measures()[i].points()[grads[i][pos]][s].to_f64()).sum::<f64>() / n as f64;
            if (avg - x[s].to_f64()).abs() > CERT_TOL {
                ok_iii = false;
                violations.push(format!("centroid {j}: average gradient differs in coordinate {s}"));
                break;
            }
        }
        let mean = (0..n).fold(T::zero(), |a, i| a + ps.value(i, x)) / nn.clone();
        let half_norm = squared_norm(x) / T::from_usize(2);
        if !rel_close(mean.to_f64(), half_norm.to_f64(), CERT_TOL) {
            ok_iv = false;
            violations.push(format!("centroid {j}: mean potential {} vs {}", mean.to_f64(), half_norm.to_f64()));
        }
    }

    let splitting = check_no_mass_splitting(result, ms);
    let mut matches_transport = splitting.pass;
    if splitting.pass {
        for (i, j, k) in splitting.targets {
            let pos = result.support.iter().position(|&s| s == j).unwrap();
            if grads[i][pos] != k {
                matches_transport = false;
                violations.push(format!("measure {i}, centroid {j}: gradient piece {} but transport target {k}", grads[i][pos]));
            }
        }
    }

    PotentialReport { i: ok_i, ii: ok_ii, iii: ok_iii, iv: ok_iv, unique_argmax, matches_transport, violations }
}

/// A dual in the relative interior of the optimal dual face with respect to
/// the slacks c_ijk - tau_ik - theta_ij at barycenter atoms: every slack that is
/// zero for the given dual but positive for some optimal dual becomes positive.
///
/// Each such slack is maximized by an auxiliary LP over optimal duals (solved
/// by column generation over tuple columns); the found duals are averaged.
pub fn refine_dual<T: Scalar>(
    result: &BarycenterResult<T>,
    ms: &MeasureSet<T>,
    opts: &SolveOptions,
) -> Result<DualSolution<T>> {
    let splitting = check_no_mass_splitting(result, ms);
    let n = ms.len();
    let s = &result.centroids;
    let ct = CostTensor::new(ms, s);
    let strict = T::tolerances().strict;

    let mut tuples: Vec<(usize, Vec<u32>)> = result.support.iter().map(|&j| (j, vec![0u32; n])).collect();
    for (i, j, k) in &splitting.targets {
        let pos = result.support.iter().position(|s| s == j).unwrap();
        tuples[pos].1[*i] = *k as u32;
    }

    let slack = |tau: &[Vec<T>], i: usize, j: usize, k: usize| -> T {
        let theta = row_minimum(ct.row(i, j), &tau[i]).1;
        ct.get(i, j, k).clone() - tau[i][k].clone() - theta
    };
    let mut found: Vec<Vec<Vec<T>>> = vec![result.dual.tau.clone()];
    let optimum = if T::EXACT {
        result.total_cost.clone()
    } else {
        let z = result.total_cost.to_f64();
        T::from_f64(z - 1e-9 * z.abs().max(1.0))
    };
    let cap = T::one();
    for (j, tuple) in &tuples {
        for i in 0..n {
            for k in 0..ms.measures()[i].len() {
                if k == tuple[i] as usize || found.iter().any(|tau| slack(tau, i, *j, k) > strict) {
                    continue;
                }
                let mut pricer = SchemePricer::new(ms, s, &ct);
                let master = pricer.master(tuples.clone())?;
                let mut target = tuple.clone();
                target[i] = k as u32;
                let col = pricer.column(*j, &target);
                let y = maximize_dual_slack(&master, Some(&mut pricer), &optimum, &col.cost, &col.entries, &cap, opts)?;
                let moff = ms.offsets();
                let tau: Vec<Vec<T>> = (0..n).map(|i| y[moff[i]..moff[i + 1]].to_vec()).collect();
                if slack(&tau, i, *j, k) > strict {
                    found.push(tau);
                }
            }
        }
    }
    if found.len() == 1 {
        return Ok(result.dual.clone());
    }
    let count = T::from_usize(found.len());
    let tau = (0..n)
        .map(|i| {
            (0..ms.measures()[i].len())
                .map(|k| found.iter().fold(T::zero(), |a, t| a + t[i][k].clone()) / count.clone())
                .collect()
        })
        .collect();
    Ok(DualSolution::from_tau(tau, &ct))
}

/// Certificate outcome including whether the dual had to be refined.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub no_mass_splitting: SplittingReport,
    pub potentials: PotentialReport,
    pub refined: bool,
}

/// Runs both certificates, refining the dual when the plain one leaves ties
/// or fails a potential check.
pub fn certify<T: Scalar>(result: &BarycenterResult<T>, ms: &MeasureSet<T>, opts: &SolveOptions) -> Result<Certificate> {
    let no_mass_splitting = check_no_mass_splitting(result, ms);
    let report = certify_potentials(&build_potentials(&result.dual, ms), result, ms);
    if report.certified() || !no_mass_splitting.pass {
        return Ok(Certificate { no_mass_splitting, potentials: report, refined: false });
    }
    let dual = refine_dual(result, ms, opts)?;
    let report = certify_potentials(&build_potentials(&dual, ms), result, ms);
    Ok(Certificate { no_mass_splitting, potentials: report, refined: true })
}

/// Machine-readable report of the `verify` command.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub no_mass_splitting: bool,
    pub theorem2: Theorem2Flags,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem2Flags {
    pub i: bool,
    pub ii: bool,
    pub iii: bool,
    pub iv: bool,
}

impl VerifyReport {
    pub fn from_certificate(c: &Certificate) -> Self {
        let mut violations = c.no_mass_splitting.violations.clone();
        violations.extend(c.potentials.violations.iter().cloned());
        Self {
            no_mass_splitting: c.no_mass_splitting.pass,
            theorem2: Theorem2Flags { i: c.potentials.i, ii: c.potentials.ii, iii: c.potentials.iii, iv: c.potentials.iv },
            violations,
        }
    }

    pub fn pass(&self) -> bool {
        self.no_mass_splitting && self.theorem2.i && self.theorem2.ii && self.theorem2.iii && self.theorem2.iv
    }
}

#[cfg(test)]
mod tests;
