mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{centroid, inside, level, scan};
use ellpart::dataset::{gen_circles, gen_gaussians, gen_moons, gen_xor, jitter_constant_features, ovr_report, split};
use ellpart::{
    classify, locate, mve_fit, partition, solve_rch_qp, store, trust_score, Classifier, Config, Counts, Label,
    LabeledDataset, RegionKind, Rule,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal_points(r: &mut ChaCha8Rng, m: usize, n: usize) -> Vec<DVector<f64>> {
    (0..m).map(|_| DVector::from_fn(n, |_, _| r.sample(StandardNormal))).collect()
}

fn held_out_accuracy(data: &LabeledDataset, cfg: &Config, seed: u64) -> Result<(f64, Classifier), String> {
    let s = split(data, 0.2, seed).map_err(|e| e.to_string())?;
    let c = Classifier::train(&data.subset(&s.train), cfg).map_err(|e| e.to_string())?;
    let mut correct = 0;
    for &i in &s.test {
        correct += usize::from(c.predict(&data.points[i], cfg).map_err(|e| e.to_string())?.class == data.labels[i]);
    }
    Ok((correct as f64 / s.test.len() as f64, c))
}

fn xor_reproduction() -> Outcome {
    let start = Instant::now();
    let data = jitter_constant_features(&gen_xor(), 0.01, 0);
    let cfg = Config::default();
    let c = Classifier::train(&data, &cfg).map_err(|e| e.to_string())?;
    let m = &c.models[0];
    let elapsed = start.elapsed();
    ensure!(m.positive.len() == 1 && m.negative.len() == 1 && m.leftovers.is_empty(), "{} ellipsoids", m.len());
    let tol = cfg.tol_membership;
    for (p, &class) in data.points.iter().zip(&data.labels) {
        let own = if class == 1 { &m.positive[0] } else { &m.negative[0] };
        let other = if class == 1 { &m.negative[0] } else { &m.positive[0] };
        ensure!(inside(&own.ellipsoid, p, tol), "corner {p:?} outside its ellipsoid");
        ensure!(!inside(&other.ellipsoid, p, tol), "corner {p:?} inside the other ellipsoid");
        let pred = c.predict(p, &cfg).map_err(|e| e.to_string())?;
        ensure!(pred.class == class, "corner {p:?} predicted {}", pred.class);
        ensure!(pred.report.posterior >= 0.99, "corner {p:?} posterior {}", pred.report.posterior);
    }
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("2 ellipsoids, corners at posterior >= 0.99, {elapsed:.2?}"))
}

fn trust_region_number() -> Outcome {
    let p = trust_score(Counts::new(1, 5), Counts::new(547, 256), Label::Negative).map_err(|e| e.to_string())?;
    ensure!((p - 0.738).abs() <= 0.005, "posterior {p}");
    Ok(format!("posterior {p:.4}"))
}

fn budget_approximation() -> Outcome {
    let (n, n_imp) = (9usize, 2usize);
    let approx = 1.0 / (1.0 + n_imp as f64 / (n + 1) as f64);
    let mut worst: f64 = 0.0;
    for total in [100, 500, 1000, 5000] {
        let p = trust_score(Counts::new(n, n_imp), Counts::new(total, total), Label::Positive).map_err(|e| e.to_string())?;
        ensure!((p - 0.8333).abs() <= 0.01, "totals {total}: posterior {p}");
        worst = worst.max((p - approx).abs());
    }
    Ok(format!("approximation {approx:.4}, largest deviation {worst:.4}"))
}

fn separable_fast_path() -> Outcome {
    let data = gen_gaussians(100, 14.0, 7).map_err(|e| e.to_string())?;
    let cfg = Config::default();
    let (x, y) = data.one_vs_rest(1);
    let m = partition(&x, &y, &cfg).map_err(|e| e.to_string())?;
    ensure!(m.positive.len() == 1 && m.negative.len() == 1 && m.leftovers.is_empty(), "{} ellipsoids", m.len());
    ensure!(m.iterations == 1, "{} iterations", m.iterations);
    let (acc, _) = held_out_accuracy(&data, &cfg, 7)?;
    ensure!(acc == 1.0, "held-out accuracy {acc}");
    Ok("1 ellipsoid per class, 1 iteration, held-out accuracy 1.0".into())
}

fn two_dimensional_benchmark(name: &str, generate: fn(u64) -> LabeledDataset, n_imp: usize) -> Outcome {
    let start = Instant::now();
    let mut report = Vec::new();
    let mut failures = Vec::new();
    for seed in 0..5 {
        let data = generate(seed);
        let cfg = Config::default().with_n_imp(n_imp).with_seed(seed);
        let (x, y) = data.one_vs_rest(1);
        let full = partition(&x, &y, &cfg).map_err(|e| e.to_string())?;
        let (acc, c) = held_out_accuracy(&data, &cfg, seed)?;
        for m in std::iter::once(&full).chain(&c.models) {
            if m.iterations > 8 {
                failures.push(format!("seed {seed}: {} iterations", m.iterations));
            }
            for (id, recorded, recount) in common::replay_impurities(m) {
                if recount > n_imp || recount != recorded {
                    failures.push(format!("seed {seed}: partition {id} holds {recount} (recorded {recorded})"));
                }
            }
        }
        if acc < 0.95 {
            failures.push(format!("seed {seed}: held-out accuracy {acc:.3}"));
        }
        report.push(format!("{acc:.3}/{}it", full.iterations));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30) {
        failures.push(format!("took {elapsed:?}"));
    }
    let summary = format!("{name} accuracy/iterations per seed [{}], {elapsed:.2?}", report.join(" "));
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", failures.join("; ")))
    }
}

fn circles_and_moons() -> Outcome {
    let circles = two_dimensional_benchmark("circles", |s| gen_circles(200, 0.05, s).unwrap(), 5);
    let moons = two_dimensional_benchmark("moons", |s| gen_moons(200, 0.05, s).unwrap(), 2);
    match (circles, moons) {
        (Ok(a), Ok(b)) => Ok(format!("{a}; {b}")),
        (a, b) => Err(format!("{}; {}", a.unwrap_or_else(|e| e), b.unwrap_or_else(|e| e))),
    }
}

fn mve_suite() -> Outcome {
    let tol = Config::default().tol_fit;
    let circle: Vec<DVector<f64>> = (0..12)
        .map(|k| {
            let t = k as f64 * std::f64::consts::TAU / 12.0;
            DVector::from_vec(vec![t.cos(), t.sin()])
        })
        .collect();
    let e = mve_fit(&circle, tol).map_err(|e| e.to_string())?.ellipsoid;
    let shape_err = (e.shape() - nalgebra::DMatrix::identity(2, 2)).amax();
    ensure!(shape_err <= 1e-6 && e.offset().amax() <= 1e-6, "unit circle off by {shape_err:e}");

    let mut r = rng(6);
    let mut worst_gap: f64 = 0.0;
    let mut worst_perm: f64 = 0.0;
    for &n in &[2usize, 3, 5, 10] {
        for _ in 0..25 {
            let m = r.random_range(n + 2..4 * n + 20);
            let pts = normal_points(&mut r, m, n);
            let fit = mve_fit(&pts, tol).map_err(|e| e.to_string())?;
            ensure!(fit.duality_gap <= n as f64 * tol, "n = {n}: gap {:e}", fit.duality_gap);
            ensure!(pts.iter().all(|p| level(&fit.ellipsoid, p) <= 1.0 + tol), "n = {n}: point outside");
            worst_gap = worst_gap.max(fit.duality_gap / (n as f64 * tol));
            let mut shuffled = pts.clone();
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, r.random_range(0..=i));
            }
            let g = mve_fit(&shuffled, tol).map_err(|e| e.to_string())?.ellipsoid;
            let d = (g.shape() - fit.ellipsoid.shape()).amax().max((g.offset() - fit.ellipsoid.offset()).amax());
            ensure!(d <= 1e-6, "n = {n}: permutation moved the fit by {d:e}");
            worst_perm = worst_perm.max(d);
        }
    }
    Ok(format!("unit circle {shape_err:.1e}, gap <= {worst_gap:.2} n.tol, permutation {worst_perm:.1e}"))
}

fn rch_centroids() -> Outcome {
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = r.random_range(2..6);
        let size = r.random_range(2..25);
        let x = normal_points(&mut r, size, n);
        let y: Vec<DVector<f64>> = normal_points(&mut r, size, n).into_iter().map(|p| p.add_scalar(0.5)).collect();
        let s = solve_rch_qp(&x, &y, 1.0 / size as f64, Config::default().tol_qp).map_err(|e| e.to_string())?;
        let err = (&s.c - centroid(&x)).norm().max((&s.d - centroid(&y)).norm());
        ensure!(err <= 1e-6, "centroid error {err:e}");
        worst = worst.max(err);
    }
    Ok(format!("largest centroid error {worst:.1e}"))
}

fn small_dataset(k: u64) -> LabeledDataset {
    let size = 40 + 8 * k as usize;
    match k % 3 {
        0 => gen_gaussians(size / 2, 1.0 + 0.2 * k as f64, k),
        1 => gen_moons(size, 0.1, k),
        _ => gen_circles(size, 0.05, k),
    }
    .unwrap()
}

fn oracle_equivalence() -> Outcome {
    let (mut regions, mut budgets) = (0, 0);
    for k in 0..20 {
        let data = small_dataset(k);
        ensure!(data.len() <= 200, "dataset {k} has {} points", data.len());
        let cfg = Config::default().with_n_imp((k % 4) as usize).with_seed(k);
        let (x, y) = data.one_vs_rest(1);
        let model = partition(&x, &y, &cfg).map_err(|e| e.to_string())?;

        let mut r = rng(100 + k);
        for _ in 0..200 {
            let z = DVector::from_fn(2, |_, _| r.random_range(-2.5..2.5));
            let ids = common::hits(&model, &z);
            if ids.is_empty() {
                continue;
            }
            let region = locate(&model, &z).map_err(|e| e.to_string())?;
            let es: Vec<_> = ids.iter().map(|&i| &model.partition(i).unwrap().ellipsoid).collect();
            let all = scan(&model, &es, true);
            let expected = if ids.len() == 1 || all.total() > 0 { all } else { scan(&model, &es, false) };
            ensure!(region.counts == expected, "dataset {k}: region {ids:?} counts {:?} vs {expected:?}", region.counts);
            regions += 1;
        }
        for part in model.partitions() {
            ensure!(part.counts == scan(&model, &[&part.ellipsoid], true), "dataset {k}: stored counts differ");
        }
        for (id, recorded, recount) in common::replay_impurities(&model) {
            ensure!(recorded == recount && recount <= cfg.n_imp, "dataset {k}: partition {id} {recorded} vs {recount}");
            budgets += 1;
        }

        let rep = ovr_report(&data, 0, 1, &cfg).map_err(|e| e.to_string())?;
        for (slot, class) in [0usize, 1].into_iter().enumerate() {
            let members: Vec<_> = data.points.iter().zip(&data.labels).filter(|(_, &l)| l == class).map(|(p, _)| p).collect();
            let both = members.iter().filter(|p| rep.class_ellipsoids.iter().all(|e| inside(e, p, cfg.tol_membership))).count();
            ensure!(rep.inside[slot] == both && rep.outside[slot] == members.len() - both, "dataset {k}: ovr counts differ");
        }
    }
    Ok(format!("{regions} regions and {budgets} budgets recounted over 20 datasets"))
}

fn rule_exclusivity() -> Outcome {
    let mut fired = [0usize; 4];
    let mut worst: f64 = 0.0;
    for k in 0..10u64 {
        let data = small_dataset(k);
        let cfg = Config::default().with_n_imp((k % 3) as usize).with_seed(k);
        let (x, y) = data.one_vs_rest(1);
        let model = partition(&x, &y, &cfg).map_err(|e| e.to_string())?;
        let mut r = rng(200 + k);
        for _ in 0..1000 {
            let z = DVector::from_fn(2, |_, _| r.random_range(-3.0..3.0));
            let rep = classify(&model, &z, &cfg).map_err(|e| e.to_string())?;
            let hits = common::hits(&model, &z).len();
            let rules = [
                hits == 1,
                hits > 1 && rep.region.scope == ellpart::CountScope::Intersection,
                hits > 1 && rep.region.scope == ellpart::CountScope::Union,
                hits == 0,
            ];
            ensure!(rules.iter().filter(|&&b| b).count() == 1, "query {z:?}: {rules:?}");
            let slot = rules.iter().position(|&b| b).unwrap();
            let expected = [Rule::R1, Rule::R2a, Rule::R2b, Rule::Case3][slot];
            ensure!(rep.rule_fired == expected, "query {z:?}: fired {:?}, expected {expected:?}", rep.rule_fired);
            ensure!((slot == 3) == (rep.region.kind == RegionKind::Expanded), "query {z:?}: kind {:?}", rep.region.kind);
            fired[slot] += 1;
            let p = trust_score(rep.region.counts, model.totals, Label::Positive).map_err(|e| e.to_string())?;
            let q = trust_score(rep.region.counts, model.totals, Label::Negative).map_err(|e| e.to_string())?;
            ensure!((p + q - 1.0).abs() <= 1e-12, "query {z:?}: {p} + {q}");
            worst = worst.max((p + q - 1.0).abs());
        }
    }
    Ok(format!("R1 {} / R2a {} / R2b {} / Case3 {}, complement error {worst:.1e}", fired[0], fired[1], fired[2], fired[3]))
}

fn full_overlap_abstains() -> Outcome {
    let data = gen_gaussians(150, 0.0, 10).map_err(|e| e.to_string())?;
    let cfg = Config::default();
    let s = split(&data, 0.2, 10).map_err(|e| e.to_string())?;
    let c = Classifier::train(&data.subset(&s.train), &cfg).map_err(|e| e.to_string())?;
    let mut abstained = 0;
    for &i in &s.test {
        abstained += usize::from(c.predict(&data.points[i], &cfg).map_err(|e| e.to_string())?.report.abstain);
    }
    let share = abstained as f64 / s.test.len() as f64;
    ensure!(share >= 0.9, "{abstained} of {} test predictions abstained ({share:.3})", s.test.len());
    Ok(format!("{abstained} of {} abstained", s.test.len()))
}

fn model_round_trip() -> Outcome {
    let data = gen_moons(200, 0.1, 3).map_err(|e| e.to_string())?;
    let cfg = Config::default().with_n_imp(2);
    let c = Classifier::train(&data, &cfg).map_err(|e| e.to_string())?;
    let file = tempfile::NamedTempFile::new().map_err(|e| e.to_string())?;
    store::save_classifier(&c, file.path()).map_err(|e| e.to_string())?;
    let back = store::load_classifier(file.path()).map_err(|e| e.to_string())?;
    let mut r = rng(11);
    for _ in 0..1000 {
        let z = DVector::from_fn(2, |_, _| r.random_range(-2.0..3.0));
        let a = c.predict(&z, &cfg).map_err(|e| e.to_string())?;
        let b = back.predict(&z, &cfg).map_err(|e| e.to_string())?;
        ensure!(a.report.posterior.to_bits() == b.report.posterior.to_bits(), "probe {z:?} differs");
        ensure!(a == b, "probe {z:?}: reports differ");
    }
    Ok("1000 probes bit-identical".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("xor reproduction", xor_reproduction),
        ("trust region number", trust_region_number),
        ("impurity budget approximation", budget_approximation),
        ("separable fast path", separable_fast_path),
        ("circles and moons", circles_and_moons),
        ("mve solver suite", mve_suite),
        ("rch centroid property", rch_centroids),
        ("oracle equivalence", oracle_equivalence),
        ("rule exclusivity and complement", rule_exclusivity),
        ("full overlap abstention", full_overlap_abstains),
        ("model round trip", model_round_trip),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
