//! Acceptance suite: one line per criterion, nonzero exit if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use discrete_barycenter::barycenter::{
    build_primal, primal_dimensions, solve_barycenter, BarycenterOptions, BarycenterResult, CostTensor,
};
use discrete_barycenter::centroid::{build_centroids, grid_density_bound, refined_grid, DEFAULT_TUPLE_CAP};
use discrete_barycenter::demo::{generate_demo, DemoSpec};
use discrete_barycenter::lp::SolveOptions;
use discrete_barycenter::measure::{squared_distance, DiscreteMeasure, MeasureSet};
use discrete_barycenter::oracle::{run_oracle, RandomSpec, DEFAULT_NODE_BUDGET};
use discrete_barycenter::scalar::{rel_close, Rational, Scalar};
use discrete_barycenter::sparsity::sparsify;
use discrete_barycenter::transport::{certify, check_no_mass_splitting};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Solved instances collected for the duality check.
#[derive(Default)]
struct Solved {
    runs: Vec<(MeasureSet<f64>, BarycenterResult<f64>)>,
}

impl Solved {
    fn solve(&mut self, ms: &MeasureSet<f64>) -> Result<BarycenterResult<f64>, String> {
        let r = solve_barycenter(ms, &BarycenterOptions::default()).map_err(|e| e.to_string())?;
        self.runs.push((ms.clone(), r.clone()));
        Ok(r)
    }
}

fn demo_dimensions() -> Outcome {
    let t = Instant::now();
    let ms = generate_demo::<f64>(&DemoSpec::california()).map_err(|e| e.to_string())?;
    let s = build_centroids(&ms, DEFAULT_TUPLE_CAP).map_err(|e| e.to_string())?;
    let ct = CostTensor::new(&ms, &s);
    let p = build_primal(&ms, &s, &ct, 5_000_000).map_err(|e| e.to_string())?;
    let dims = (s.len(), p.num_cols(), p.num_rows());
    ensure(dims == (12870, 939510, 103032), || format!("got |S|, variables, constraints = {dims:?}"))?;
    ensure(primal_dimensions(&ms.support_sizes(), s.len()) == (939510, 103032), || "count formula disagrees".into())?;
    Ok(format!("|S| = 12870, 939510 variables, 103032 constraints ({:.1?})", t.elapsed()))
}

fn demo_solve(solved: &mut Solved) -> Outcome {
    let t = Instant::now();
    let ms = generate_demo::<f64>(&DemoSpec::california()).map_err(|e| e.to_string())?;
    let r = solved.solve(&ms)?;
    let sp = sparsify(&r, &ms, &r.centroids, &SolveOptions::default()).map_err(|e| e.to_string())?;
    let bound = ms.sparsity_bound();
    ensure(bound == 65, || format!("bound {bound}"))?;
    ensure(sp.support_size() <= bound, || format!("support {} exceeds {bound}", sp.support_size()))?;
    ensure(rel_close(sp.total_cost, r.total_cost, 1e-9), || "sparse cost differs".into())?;
    Ok(format!(
        "optimal, cost {:.9}, sparse support {} <= 65 ({:.1?})",
        sp.total_cost,
        sp.support_size(),
        t.elapsed()
    ))
}

fn random_instances() -> Vec<MeasureSet<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..200).map(|_| common::random_instance(&mut rng, 5, 6, 3)).collect()
}

fn sparsity_bound(instances: &[MeasureSet<f64>], solved: &mut Solved, sparse: &mut Vec<BarycenterResult<f64>>) -> Outcome {
    let mut worst = 0.0f64;
    for (idx, ms) in instances.iter().enumerate() {
        let r = solved.solve(ms)?;
        let sp = sparsify(&r, ms, &r.centroids, &SolveOptions::default()).map_err(|e| e.to_string())?;
        ensure(sp.support_size() <= ms.sparsity_bound(), || {
            format!("instance {idx}: support {} > {}", sp.support_size(), ms.sparsity_bound())
        })?;
        let increase = (sp.total_cost - r.total_cost) / r.total_cost.abs().max(1.0);
        worst = worst.max(increase);
        ensure(increase <= 1e-9, || format!("instance {idx}: cost increase {increase:e}"))?;
        sparse.push(sp);
    }
    for w in 2..=6i64 {
        let q = |a: i64, b: i64| Rational::from_ratio(a, b);
        let p1 = DiscreteMeasure::new(1, (0..w).map(|k| vec![q(3 * k, 1)]).collect(), vec![q(1, w); w as usize])
            .map_err(|e| e.to_string())?;
        let ms = MeasureSet::new(vec![p1, DiscreteMeasure::dirac(vec![q(0, 1)])]).map_err(|e| e.to_string())?;
        let r = solve_barycenter(&ms, &BarycenterOptions::default()).map_err(|e| e.to_string())?;
        let sp = sparsify(&r, &ms, &r.centroids, &SolveOptions::default()).map_err(|e| e.to_string())?;
        ensure(sp.support_size() == ms.sparsity_bound() && sp.support_size() == w as usize, || {
            format!("W = {w}: support {}", sp.support_size())
        })?;
        ensure(sp.barycenter.masses().iter().all(|m| *m == q(1, w)), || format!("W = {w}: masses not 1/W"))?;
    }
    Ok(format!("200 instances within bound (worst cost increase {worst:.1e}); W = 2..6 tight with masses 1/W"))
}

fn no_mass_splitting(instances: &[MeasureSet<f64>], sparse: &[BarycenterResult<f64>], solved: &Solved) -> Outcome {
    let mut checked = 0;
    for (idx, (ms, r)) in instances.iter().zip(sparse).enumerate() {
        let rep = check_no_mass_splitting(r, ms);
        ensure(rep.pass, || format!("instance {idx}: {:?}", rep.violations))?;
        checked += 1;
    }
    for (ms, r) in &solved.runs {
        let rep = check_no_mass_splitting(r, ms);
        ensure(rep.pass, || format!("solved instance: {:?}", rep.violations))?;
        checked += 1;
    }
    Ok(format!("{checked} results (200 sparse, 200 plain, demo) send each atom to one target"))
}

fn theorem2(solved: &mut Solved) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut refined = 0;
    for idx in 0..100 {
        let ms = common::random_instance(&mut rng, 4, 5, 3);
        let r = solved.solve(&ms)?;
        let c = certify(&r, &ms, &SolveOptions::default()).map_err(|e| format!("instance {idx}: {e}"))?;
        ensure(c.potentials.pass() && c.potentials.unique_argmax, || {
            format!("instance {idx}: {:?}", c.potentials.violations)
        })?;
        refined += c.refined as usize;
    }
    Ok(format!("100 instances certified, {refined} needed a refined dual"))
}

fn oracle() -> Outcome {
    let t = Instant::now();
    let s = run_oracle(17, 100, &RandomSpec::default(), DEFAULT_NODE_BUDGET).map_err(|e| e.to_string())?;
    ensure(s.failed == 0, || {
        let bad: Vec<_> = s.instances.iter().filter(|c| !c.pass).take(3).collect();
        format!("{} of 100 disagree, e.g. {bad:?}", s.failed)
    })?;
    Ok(format!("100 rational instances agree exactly ({:.1?})", t.elapsed()))
}

fn duality(solved: &Solved) -> Outcome {
    let (mut gap, mut viol) = (0.0f64, 0.0f64);
    for (idx, (ms, r)) in solved.runs.iter().enumerate() {
        let ct = CostTensor::new(ms, &r.centroids);
        let dual = r.dual.objective(ms);
        let g = (dual - r.total_cost).abs() / r.total_cost.abs().max(dual.abs()).max(1.0);
        let v = r.dual.max_violation(&ct);
        gap = gap.max(g);
        viol = viol.max(v);
        ensure(g <= 1e-8, || format!("run {idx}: relative gap {g:e}"))?;
        ensure(v <= 1e-9, || format!("run {idx}: dual violation {v:e}"))?;
    }
    Ok(format!("{} solves, max relative gap {gap:.1e}, max dual violation {viol:.1e}", solved.runs.len()))
}

fn grid(solved: &mut Solved) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for idx in 0..50 {
        let (ms, g) = common::grid_instance(&mut rng, 4, 4);
        let n = ms.len();
        let r = solved.solve(&ms)?;
        let fine = refined_grid(&g, n);
        for p in r.barycenter.points() {
            ensure(fine.locate(p).is_some(), || format!("instance {idx}: {p:?} off the refined grid"))?;
        }
        let (density, support) = grid_density_bound(&g, n);
        ensure(r.support_size() <= support, || format!("instance {idx}: support {} > {support}", r.support_size()))?;
        let observed = r.support_size() as f64 / fine.node_count() as f64;
        ensure(observed < density, || format!("instance {idx}: density {observed} >= {density}"))?;
    }
    Ok("50 grid instances on the refined grid within both bounds".into())
}

fn sorted_atoms(m: &DiscreteMeasure<f64>) -> Vec<(Vec<f64>, f64)> {
    let mut v: Vec<(Vec<f64>, f64)> = m.points().iter().cloned().zip(m.masses().iter().copied()).collect();
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    v
}

fn same_atoms(a: &[(Vec<f64>, f64)], b: &[(Vec<f64>, f64)], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|((p, x), (q, y))| {
            (x - y).abs() <= tol && p.iter().zip(q).all(|(u, v)| (u - v).abs() <= tol * u.abs().max(1.0))
        })
}

fn trivial(solved: &mut Solved) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for idx in 0..20 {
        let base = common::random_instance(&mut rng, 2, 5, 3).measures()[0].clone();
        let n = rng.gen_range(1..=4);
        let ms = MeasureSet::new(vec![base.clone(); n]).unwrap();
        let r = solved.solve(&ms)?;
        ensure(r.total_cost.abs() <= 1e-12, || format!("identical {idx}: cost {}", r.total_cost))?;
        ensure(same_atoms(&sorted_atoms(&r.barycenter), &sorted_atoms(&base), 1e-9), || {
            format!("identical {idx}: barycenter differs from the input")
        })?;

        let d = base.dim();
        let points: Vec<Vec<f64>> = (0..rng.gen_range(1..=5))
            .map(|_| (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect())
            .collect();
        let ms = MeasureSet::new(points.iter().map(|p| DiscreteMeasure::dirac(p.clone())).collect()).unwrap();
        let r = solved.solve(&ms)?;
        let mean: Vec<f64> = (0..d).map(|s| points.iter().map(|p| p[s]).sum::<f64>() / points.len() as f64).collect();
        let cost: f64 = points.iter().map(|p| squared_distance(&mean, p)).sum();
        ensure(r.support_size() == 1 && same_atoms(&sorted_atoms(&r.barycenter), &[(mean.clone(), 1.0)], 1e-9), || {
            format!("diracs {idx}: barycenter is not the mean")
        })?;
        ensure(rel_close(r.total_cost, cost, 1e-9), || format!("diracs {idx}: cost {} vs {cost}", r.total_cost))?;

        let ms = common::random_instance(&mut rng, 4, 4, 3);
        let v: Vec<f64> = (0..ms.dim()).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let r = solved.solve(&ms)?;
        let moved = ms.translated(&v);
        let rt = solved.solve(&moved)?;
        ensure(rel_close(r.total_cost, rt.total_cost, 1e-7), || {
            format!("translation {idx}: cost {} vs {}", r.total_cost, rt.total_cost)
        })?;
        let shifted = r.barycenter.translated(&v);
        ensure(same_atoms(&sorted_atoms(&shifted), &sorted_atoms(&rt.barycenter), 1e-7), || {
            format!("translation {idx}: support not translated, {:?} vs {:?}", sorted_atoms(&shifted), sorted_atoms(&rt.barycenter))
        })?;
    }
    Ok("identical measures, Diracs and translations behave on 20 draws each".into())
}

fn main() {
    let t = Instant::now();
    let mut solved = Solved::default();
    let instances = random_instances();
    let mut sparse = Vec::new();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let line = match &out {
            Ok(msg) => format!("criterion {id} [PASS] {name}: {msg}"),
            Err(msg) => format!("criterion {id} [FAIL] {name}: {msg}"),
        };
        println!("{line}");
        results.push((id, name, out));
    };
    record(1, "demo LP dimensions", &mut demo_dimensions);
    record(2, "demo solve and sparse support", &mut || demo_solve(&mut solved));
    record(3, "sparsity bound and tightness", &mut || sparsity_bound(&instances, &mut solved, &mut sparse));
    record(4, "no mass splitting", &mut || no_mass_splitting(&instances, &sparse, &solved));
    record(5, "potential certificate", &mut || theorem2(&mut solved));
    record(6, "oracle equivalence", &mut oracle);
    record(8, "grid refinement", &mut || grid(&mut solved));
    record(9, "trivial cases", &mut || trivial(&mut solved));
    record(7, "strong duality", &mut || duality(&solved));
    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!("acceptance: {} passed, {failed} failed ({:.1?})", results.len() - failed, t.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
