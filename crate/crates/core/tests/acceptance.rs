//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::Instant;

use mlrank_geom::curvature::{fd_first, fd_second, Backend, Chart, FdStep, LocalGeometry};
use mlrank_geom::segre::{
    extremum_witness, extremum_witness_at, level_of, sff_degeneracy_check, slice_curvature_field, slice_reduce,
    write_field_csv, LinearFunctional, NormalFrame, ProbeCurve, SegrePoint, DEFAULT_EPSILON,
};
use mlrank_geom::tensor::{group_action, random_gaussian_tensor, random_rank_r_tensor};
use mlrank_geom::tucker::{
    canonicalize, gram_block_report, sample_rng, verify_minimality, Param, TuckerChart, DEFAULT_MINIMALITY_TOL,
};
use mlrank_geom::{DenseTensor, MultilinearRank, Shape};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 17;
const SAMPLES: usize = 20;

const CONFIGS: [(&[usize], &[usize]); 7] = [
    (&[3, 3], &[2, 2]),
    (&[2, 2], &[1, 1]),
    (&[2, 2, 2], &[1, 1, 1]),
    (&[3, 3, 3], &[2, 2, 2]),
    (&[3, 3, 3], &[2, 1, 2]),
    (&[3, 2, 4], &[2, 2, 2]),
    (&[2, 2, 2, 2], &[1, 2, 2, 1]),
];

type Outcome = Result<String, String>;

fn shape(d: &[usize]) -> Shape {
    Shape::new(d.to_vec()).unwrap()
}

fn sample_point(dims: &[usize], ranks: &[usize], k: usize) -> mlrank_geom::tucker::CanonicalPoint {
    let mut rng = sample_rng(SEED, k);
    let t = random_rank_r_tensor(&shape(dims), &MultilinearRank::new(ranks.to_vec()), &mut rng).unwrap();
    canonicalize(&t, None).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn minimality() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (dims, ranks) in CONFIGS {
        let report = verify_minimality(
            &shape(dims),
            &MultilinearRank::new(ranks.to_vec()),
            SAMPLES,
            SEED,
            DEFAULT_MINIMALITY_TOL,
        )
        .map_err(|e| e.to_string())?;
        worst = worst.max(report.max_ratio);
        if !report.pass || report.rank_failures > 0 {
            failures.push(format!("{dims:?}/{ranks:?} max ratio {:.3e}", report.max_ratio));
        }
    }
    check(
        failures.is_empty(),
        format!(
            "7 configs x {SAMPLES} samples, max |H|/max|d2r| = {worst:.3e} <= 1e-8, {:.2}s {failures:?}",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn gram_structure() -> Outcome {
    let (mut off, mut flat, mut s_dev, mut eig) = (0.0_f64, 0.0_f64, 0.0_f64, f64::INFINITY);
    let mut bad = Vec::new();
    for (dims, ranks) in CONFIGS {
        for k in 0..SAMPLES {
            let point = sample_point(dims, ranks, k);
            let r = gram_block_report(&point).map_err(|e| e.to_string())?;
            let off_rel = r.off_structure_max / r.gram_max;
            let mut flat_dev: f64 = r.copy_deviation_max;
            for (j, a) in r.a_blocks.iter().enumerate() {
                let direct = common::flat_row_gram_loop(&point.embedded(), j);
                for lam in 0..a.nrows() {
                    for lam_p in 0..a.ncols() {
                        flat_dev = flat_dev.max((a[(lam, lam_p)] - direct[lam][lam_p]).abs());
                    }
                }
            }
            let eig_rel = r.min_eigenvalue / (r.trace / r.dim as f64);
            off = off.max(off_rel);
            flat = flat.max(flat_dev);
            s_dev = s_dev.max(r.s_block_deviation);
            eig = eig.min(eig_rel);
            if off_rel > 1e-12 || flat_dev > 1e-12 || r.s_block_deviation > 1e-13 || eig_rel <= 1e-10 {
                bad.push(format!("{dims:?}/{ranks:?}#{k}"));
            }
        }
    }
    check(
        bad.is_empty(),
        format!(
            "off-structure {off:.2e}*|G|max, |A_j - flat Gram| {flat:.2e}, |G_ss - I| {s_dev:.2e}, \
             min eig {eig:.2e}*tr/m {bad:?}"
        ),
    )
}

fn derivative_oracles() -> Outcome {
    let (mut first, mut second, mut tnt, mut tnt_fd) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for (dims, ranks) in CONFIGS {
        for k in 0..SAMPLES {
            let chart = TuckerChart::new(sample_point(dims, ranks, k)).map_err(|e| e.to_string())?;
            let m = chart.param_dim();
            let zero = vec![0.0; m];
            let exact = chart.analytic_first(&zero).unwrap();
            let fd = fd_first(&chart, &zero, FdStep::Auto).map_err(|e| e.to_string())?;
            for (e, f) in exact.iter().zip(&fd) {
                first = first.max((e - f).norm() / e.norm());
            }
            let exact2 = chart.analytic_second(&zero).unwrap();
            let fd2 = fd_second(&chart, &zero, FdStep::Auto).map_err(|e| e.to_string())?;
            let scale = exact2.max_norm();
            for i in 0..m {
                for j in i..m {
                    second = second.max((exact2.get(i, j) - fd2.get(i, j)).norm() / scale);
                }
            }
            let geo = LocalGeometry::at(&chart, &zero, Backend::Auto).map_err(|e| e.to_string())?;
            let layout = chart.layout();
            for a in 0..m {
                for b in a..m {
                    let (Param::Rotation { mode: j, lambda: l1, mu: m1 }, Param::Rotation { mode: j2, lambda: l2, mu: m2 }) =
                        (layout.param(a), layout.param(b))
                    else {
                        continue;
                    };
                    if j != j2 || m1 != m2 {
                        continue;
                    }
                    let v = DVector::from_vec(chart.d2_same_slice(j, l1, l2).into_data());
                    if v.norm() > 0.0 {
                        tnt = tnt.max(geo.frame.normal_project(&v).norm() / v.norm());
                    }
                    tnt_fd = tnt_fd.max((&v - fd2.get(a, b)).norm() / scale);
                }
            }
        }
    }
    check(
        first <= 1e-6 && second <= 1e-4 && tnt_fd <= 1e-4 && tnt <= 1e-10,
        format!(
            "first-order rel err {first:.2e}, second-order {second:.2e}, same-slice vs FD {tnt_fd:.2e}, \
             same-slice normal part {tnt:.2e}"
        ),
    )
}

fn dimension_formula() -> Outcome {
    let mut bad = Vec::new();
    for (dims, ranks) in CONFIGS {
        let chart = TuckerChart::new(sample_point(dims, ranks, 0)).map_err(|e| e.to_string())?;
        let expected: usize = dims.iter().zip(ranks).map(|(n, r)| r * (n - r)).sum::<usize>()
            + ranks.iter().product::<usize>();
        if chart.param_dim() != expected
            || MultilinearRank::new(ranks.to_vec()).manifold_dim(&shape(dims)) != expected
        {
            bad.push(format!("{dims:?}/{ranks:?}: {} vs {expected}", chart.param_dim()));
        }
    }
    let cube = TuckerChart::new(sample_point(&[3, 3, 3], &[2, 2, 2], 1)).map_err(|e| e.to_string())?;
    check(
        bad.is_empty() && cube.param_dim() == 14,
        format!("all 7 configs match, (3,3,3)/(2,2,2) -> {} {bad:?}", cube.param_dim()),
    )
}

fn pairings() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut low, mut lead, mut cases) = (0.0_f64, 0.0_f64, 0);
    let mut flips = true;
    for d in 2..=4 {
        for k in 2..=d {
            for _ in 0..10 {
                let s = common::random_shape(&mut rng, d, if d == 4 { 3 } else { 4 });
                let mut modes: Vec<usize> = (0..d).collect();
                while modes.len() > k {
                    modes.remove(rng.random_range(0..modes.len()));
                }
                let mut index = vec![0; d];
                for &j in &modes {
                    index[j] = rng.random_range(1..s.dims()[j]);
                }
                let c = common::random_coefficient(&mut rng);
                let ell = LinearFunctional::new(DenseTensor::basis(s.clone(), &index).unwrap().scaled(c));
                let norm = ell.ell.norm();
                let gamma = ProbeCurve::through(&s, &index, false).map_err(|e| e.to_string())?;
                let twin = ProbeCurve::through(&s, &index, true).map_err(|e| e.to_string())?;
                let p = gamma.pairings(&ell, k).map_err(|e| e.to_string())?;
                let q = twin.pairings(&ell, k).map_err(|e| e.to_string())?;
                for i in 0..k {
                    low = low.max(p[i].abs() / norm).max(q[i].abs() / norm);
                }
                let target = common::factorial(k) * c;
                lead = lead.max((p[k] - target).abs() / target.abs());
                flips &= q[k] == -p[k];
                cases += 1;
            }
        }
    }
    check(
        low <= 1e-10 && lead <= 1e-9 && flips,
        format!("{cases} cases, lower orders {low:.2e}*|l|, order k vs k!c rel {lead:.2e}, twin flips exactly: {flips}"),
    )
}

fn witness_ok(w: &mlrank_geom::segre::ExtremumWitness, base: &DenseTensor, ell: &DenseTensor) -> bool {
    let plus = w.point_plus.sub(base).unwrap().inner(ell).unwrap();
    let minus = w.point_minus.sub(base).unwrap().inner(ell).unwrap();
    let in_range = |u: f64| u > 0.0 && u <= DEFAULT_EPSILON;
    in_range(w.u_plus) && in_range(w.u_minus) && w.value_plus > 0.0 && w.value_minus < 0.0 && plus > 0.0 && minus < 0.0
}

fn witnesses() -> Outcome {
    let mut failures = 0;
    let mut levels_seen = [0usize; 4];
    for i in 0..100 {
        let mut rng = sample_rng(SEED, i);
        let d = rng.random_range(2..=3);
        let s = common::random_shape(&mut rng, d, 4);
        let levels: Vec<usize> = if d == 3 && rng.random_bool(0.3) { vec![3] } else { (2..=d).collect() };
        let ell = common::random_level_functional(&mut rng, &s, &levels);
        let frame = NormalFrame::new(&s);
        match extremum_witness(&ell, &frame, DEFAULT_EPSILON) {
            Ok(w) if witness_ok(&w, &frame.base(), &ell.ell) => levels_seen[w.level] += 1,
            _ => failures += 1,
        }
    }
    check(
        failures == 0,
        format!("100 functionals, {failures} failures, witness levels k=2: {}, k=3: {}", levels_seen[2], levels_seen[3]),
    )
}

fn random_segre_point<R: Rng>(rng: &mut R, s: &Shape) -> SegrePoint {
    let factors = s
        .dims()
        .iter()
        .map(|&n| DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))))
        .collect();
    SegrePoint::new(factors, rng.random_range(0.5..2.0)).unwrap()
}

fn slice_reduction() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut witness_failures = 0;
    for i in 0..100 {
        let mut rng = sample_rng(SEED + 1, i);
        let d = rng.random_range(2..=3);
        let s = common::random_shape(&mut rng, d, 4);
        let point = random_segre_point(&mut rng, &s);
        let t = point.tensor();
        let a = random_gaussian_tensor(s.clone(), &mut rng);
        let offset = a.inner(&t).unwrap();

        let ell = LinearFunctional::new(random_gaussian_tensor(s.clone(), &mut rng));
        let r = slice_reduce(&ell, &a, offset, &t).map_err(|e| e.to_string())?;
        worst = worst.max(r.v.eval(&t).unwrap().abs() / (r.v.ell.norm() * t.norm()));

        // ℓ = n + βa with n normal at T: T is a critical point of ℓ on the slice
        let levels: Vec<usize> = (2..=s.order()).collect();
        let local = common::random_level_functional(&mut rng, &s, &levels);
        let n = group_action(&point.aligning().transpose(), &local.ell).unwrap();
        let beta = rng.random_range(-2.0..2.0);
        let lagrange = LinearFunctional::new(n.axpy(beta, &a).unwrap());
        let r = slice_reduce(&lagrange, &a, offset, &t).map_err(|e| e.to_string())?;
        worst = worst.max(r.v.eval(&t).unwrap().abs() / (r.v.ell.norm() * t.norm()));
        match extremum_witness_at(&point, &r.v, DEFAULT_EPSILON) {
            Ok(w) if witness_ok(&w, &t, &r.v.ell) => {}
            _ => witness_failures += 1,
        }
    }
    check(
        worst <= 1e-13 && witness_failures == 0,
        format!("200 reductions, max |<v,T>|/(|v||T|) = {worst:.2e}, {witness_failures} witness failures on 100 critical instances"),
    )
}

fn degeneracy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut high, mut n2_min) = (0.0_f64, f64::INFINITY);
    for dims in [&[2usize, 2, 2][..], &[3, 3, 3], &[3, 2, 4], &[2, 2, 2, 2], &[3, 2, 2, 3]] {
        let s = shape(dims);
        for k in 2..=s.order() {
            for _ in 0..5 {
                let ell = common::random_level_functional(&mut rng, &s, &[k]);
                let r = sff_degeneracy_check(&s, &ell).map_err(|e| e.to_string())?;
                let rel = r.max_abs / r.ell_norm;
                if k == 2 {
                    n2_min = n2_min.min(rel);
                } else {
                    high = high.max(rel);
                }
            }
        }
    }
    let corner = LinearFunctional::new(DenseTensor::basis(shape(&[2, 2, 2]), &[1, 1, 0]).unwrap());
    debug_assert_eq!(level_of(&[1, 1, 0]), 2);
    let r = sff_degeneracy_check(&shape(&[2, 2, 2]), &corner).map_err(|e| e.to_string())?;
    check(
        high <= 1e-10 && n2_min > 1e-3 && r.max_abs > 1e-3,
        format!("levels k>2: max pairing {high:.2e}*|l|, level 2: min over draws of max pairing {n2_min:.2e}*|l|"),
    )
}

fn field() -> Outcome {
    let start = Instant::now();
    let rows = slice_curvature_field(&[2, 2], 9).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let min_h = rows.iter().map(|r| r.h_norm).fold(f64::INFINITY, f64::min);
    let normality = rows.iter().map(|r| r.normality).fold(0.0, f64::max);
    let mut swap: f64 = 0.0;
    for i in 0..9 {
        for j in 0..9 {
            let (p, q) = (&rows[i * 9 + j], &rows[j * 9 + i]);
            for a in 0..2 {
                for b in 0..2 {
                    swap = swap.max((p.h[a * 2 + b] - q.h[b * 2 + a]).abs());
                }
            }
        }
    }
    // H is proportional to (2p - 1)(2q - 1), so it vanishes where either
    // variable is uniform; report that set separately.
    let on_cross = |r: &&mlrank_geom::segre::FieldRow| r.params.iter().any(|&x| (x - 0.5).abs() < 1e-12);
    let cross_max = rows.iter().filter(on_cross).map(|r| r.h_norm).fold(0.0, f64::max);
    let cross_count = rows.iter().filter(on_cross).count();
    let off_min = rows.iter().filter(|r| !on_cross(r)).map(|r| r.h_norm).fold(f64::INFINITY, f64::min);
    check(
        rows.len() == 81 && min_h > 1e-6 && normality <= 1e-6 && swap <= 1e-8 && elapsed < 5.0,
        format!(
            "{} points, min |H| {min_h:.3e} (off p=1/2, q=1/2: {off_min:.3e}; on those lines: {cross_count} \
             points with max |H| {cross_max:.1e}), normality {normality:.2e}, swap asymmetry {swap:.2e}, {elapsed:.3}s",
            rows.len()
        ),
    )
}

fn determinism() -> Outcome {
    let campaign = || -> Vec<u8> {
        let mut out = Vec::new();
        for (dims, ranks) in CONFIGS {
            let report =
                verify_minimality(&shape(dims), &MultilinearRank::new(ranks.to_vec()), 3, SEED, DEFAULT_MINIMALITY_TOL)
                    .unwrap();
            out.extend(serde_json::to_vec_pretty(&report).unwrap());
        }
        let rows = slice_curvature_field(&[2, 3], 4).unwrap();
        write_field_csv(&rows, &mut out).unwrap();
        out
    };
    let first = campaign();
    let second = campaign();
    check(
        !first.is_empty() && first == second,
        format!("two runs produced {} and {} bytes, identical: {}", first.len(), second.len(), first == second),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("minimality", minimality),
        ("gram structure", gram_structure),
        ("derivative oracles", derivative_oracles),
        ("dimension formula", dimension_formula),
        ("probe pairings", pairings),
        ("extremum witnesses", witnesses),
        ("slice reduction", slice_reduction),
        ("degeneracy", degeneracy),
        ("independence field", field),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
