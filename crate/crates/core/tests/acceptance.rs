//! Acceptance suite: one PASS/FAIL line per criterion with its runtime.

use std::time::Instant;

use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use h2n::bilinear::{is_in_so0, q_eval, q_orth_residual, Membership};
use h2n::group::{conjugacy_reps, Presentation, Word};
use h2n::reps::{bend_fuchsian, fuchsian_locus, fuchsian_octagon, irr_so23, qn_matrix, trivial_alpha, veronese, Representation};
use h2n::spaces::{chord_classify, fibers_disjoint, spacelike_triple, warped_chart, warped_chart_inv, warped_metric, warped_pullback_fd, ChordClass, PointH};
use h2n::spectrum::{collar_check, domination_report, entropy_estimate, fuchsian_axis_point, length_via_distance, limit_curve_samples, loxodromic_length};
use h2n::structures::{
    dev_einstein_samples, gw2_membership, min_separation, omega1_membership_fuchsian, photon_fiber, planted_photon, Quartic, Status,
};
use h2n::surface::{
    chord_and_graph, eps_mesh, gauss_curvature, induced_length, init_bent, init_fuchsian_locus, init_irreducible, random_vertex_pairs, relax_logged,
    surface_validation, tension_residual, FundamentalMesh,
};
use h2n::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn bent() -> Representation {
    let fl = fuchsian_locus(&fuchsian_octagon().unwrap(), &trivial_alpha(2)).unwrap();
    bend_fuchsian(&fl, 0.3).unwrap()
}

fn c1() -> Result<Outcome> {
    let m = qn_matrix(4)?;
    let anti = [1.0, -0.25, 1.0 / 6.0, -0.25, 1.0];
    let entries = (0..5).all(|k| m[(k, 4 - k)] == anti[k]) && (0..5).all(|i| (0..5).all(|j| i + j == 4 || m[(i, j)] == 0.0));
    let p = |c: [f64; 5]| Quartic::new(c);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut err: f64 = 0.0;
    for _ in 0..1000 {
        let [a, b, c, d]: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let s = p([a, 0.0, a + b, 0.0, b]);
        err = err.max((h2n::structures::q4_pair(&s, &s) - ((a + b).powi(2) / 6.0 + 2.0 * a * b)).abs());
        let t = p([0.0, a * c, a * d + b * c, b * d, 0.0]);
        err = err.max((h2n::structures::q4_pair(&t, &t) - ((a * d).powi(2) + (b * c).powi(2) - a * d * b * c) / 6.0).abs());
    }
    let eig = SymmetricEigen::new(-m);
    let pos = eig.eigenvalues.iter().filter(|&&l| l > 1e-12).count();
    let neg = eig.eigenvalues.iter().filter(|&&l| l < -1e-12).count();
    Ok(outcome(entries && err < 1e-12 && (pos, neg) == (2, 3), format!("antidiagonal {entries}, max error {err:.2e}, signature ({pos},{neg})")))
}

fn c2() -> Result<Outcome> {
    let j = fuchsian_octagon()?;
    let rj = j.relator_residual();
    let irr = irr_so23(&j)?;
    let fl = fuchsian_locus(&j, &trivial_alpha(2))?;
    let mut worst: f64 = 0.0;
    let mut all_yes = true;
    for r in [&irr, &fl] {
        for g in &r.gen_images {
            all_yes &= is_in_so0(g, 1e-9) == Membership::Yes;
            worst = worst.max(q_orth_residual(g));
        }
    }
    let b = bend_fuchsian(&fl, 0.3)?;
    let pass = rj < 1e-8 && all_yes && worst < 1e-9 && b.relator_residual < 1e-8;
    Ok(outcome(pass, format!("octagon relator {rj:.1e}, SO0 {all_yes} (residual {worst:.1e}), bent relator {:.1e}", b.relator_residual)))
}

fn c3() -> Result<Outcome> {
    let j = fuchsian_octagon()?;
    let irr = irr_so23(&j)?;
    let reps = conjugacy_reps(&Presentation::new(2)?, 6, false, 1_000_000)?;
    let mut rel: f64 = 0.0;
    let mut compared = 0;
    for w in &reps {
        let ls = j.length(w);
        let Ok(li) = loxodromic_length(&irr, w) else { continue };
        if ls > 0.0 {
            rel = rel.max((li - 2.0 * ls).abs() / (2.0 * ls));
            compared += 1;
        }
    }
    let b = bent();
    let mut inv: f64 = 0.0;
    for w in reps.iter().step_by(7).take(500) {
        let Ok(l) = loxodromic_length(&b, w) else { continue };
        for v in [w.inverse(), w.rotate(1), w.rotate(w.len() / 2)] {
            inv = inv.max((loxodromic_length(&b, &v)? - l).abs() / l);
        }
    }
    let mut dist: f64 = 0.0;
    for g in ["a1", "b1", "a2", "b2"] {
        let g = Word::parse(g)?;
        let l = loxodromic_length(&irr, &g)?;
        let y = PointH { rep: veronese(&fuchsian_axis_point(&j, &g)?)? };
        dist = dist.max((length_via_distance(&irr, &g, &y, 30)? - l).abs() / l);
    }
    let pass = rel < 1e-9 && inv < 1e-9 && dist < 0.01;
    Ok(outcome(pass, format!("{compared} classes: L_irr/2L_sym2 rel {rel:.1e}; inversion/rotation {inv:.1e}; distance at N=30 {:.3}%", 100.0 * dist)))
}

fn c4() -> Result<Outcome> {
    let all = limit_curve_samples(&bent(), 6)?;
    let step = all.len() / 200;
    let xs: Vec<_> = all.iter().step_by(step.max(1)).take(200).collect();
    let iso = xs.iter().map(|x| q_eval(&x.rep).abs()).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ok = 0;
    for _ in 0..1000 {
        let (i, j, k) = loop {
            let t: [usize; 3] = std::array::from_fn(|_| rng.random_range(0..xs.len()));
            if t[0] != t[1] && t[1] != t[2] && t[0] != t[2] {
                break (t[0], t[1], t[2]);
            }
        };
        ok += spacelike_triple(xs[i], xs[j], xs[k], 1e-9)? as usize;
    }
    Ok(outcome(xs.len() == 200 && ok == 1000 && iso < 1e-9, format!("{} samples, {ok}/1000 space-like triples, isotropy {iso:.1e}", xs.len())))
}

fn c5() -> Result<(Outcome, String)> {
    let j = fuchsian_octagon()?;
    let b = bent();
    let dom = domination_report(&b, &j, 8)?;
    let (collar, _) = collar_check(&b, &Word::parse("a1")?, &Word::parse("b1")?)?;
    let hb = entropy_estimate(&b, 8)?.h_hat;
    let hf = entropy_estimate(&fuchsian_locus(&j, &trivial_alpha(2))?, 8)?.h_hat;
    let note = if dom.min_ratio >= 1.0 - 1e-6 { String::new() } else { format!(" (domination below 1 at {}: logged, not fatal)", dom.argmin) };
    let pass = collar > 1.0 && hb <= 1.2 && (0.7..=1.3).contains(&hf);
    let detail = format!("domination min ratio {:.12} over {} classes, collar {collar:.3}, entropy bent {hb:.3} / Fuchsian {hf:.3}", dom.min_ratio, dom.compared);
    Ok((outcome(pass, detail), note))
}

fn c6(meshes: &mut Option<(FundamentalMesh, Representation)>) -> Result<Outcome> {
    let j = fuchsian_octagon()?;
    let fl = fuchsian_locus(&j, &trivial_alpha(2))?;
    let m0 = init_fuchsian_locus(&fl, 4)?;
    let (m1, log) = relax_logged(&m0, &fl, 20, 1.0)?;
    let t_f = tension_residual(&m1, &fl)?;
    let eps = eps_mesh(&m1);
    let kdev = gauss_curvature(&m1)?.iter().map(|k| (k + 1.0).abs()).fold(0.0, f64::max);
    let fixed = log.max_motion < 1e-9 && t_f < 1e-10 && kdev <= eps && eps < 0.05;

    let b = bent();
    let start = init_bent(&b, 4)?;
    let t0 = tension_residual(&start, &b)?;
    let (mb, blog) = relax_logged(&start, &b, 3000, 1.0)?;
    let t1 = tension_residual(&mb, &b)?;
    let samples = limit_curve_samples(&b, 6)?;
    let v = surface_validation(&mb, &b, &samples)?;

    let classes = conjugacy_reps(&Presentation::new(2)?, 4, true, 1_000_000)?;
    let mut sandwich: f64 = f64::NEG_INFINITY;
    let mut checked = 0;
    for w in &classes {
        let Ok(l) = loxodromic_length(&b, w) else { continue };
        let li = induced_length(&mb, &b, w)?;
        sandwich = sandwich.max(li / l - 1.0);
        checked += 1;
    }
    let eb = eps_mesh(&mb);
    let cg = chord_and_graph(&mb, &random_vertex_pairs(&mb, 100, 0xc40d), 2.5)?;
    let excess = cg.iter().map(|(c, g)| c - g).fold(f64::NEG_INFINITY, f64::max);
    let slack = cg.iter().map(|(c, g)| g - c).fold(f64::NEG_INFINITY, f64::max);

    let pass = fixed && t0 / t1 >= 10.0 && v.all_pass() && sandwich <= eb && excess <= eb && slack <= eb;
    let detail = format!(
        "Fuchsian: motion {:.1e}, tension {t_f:.1e}, |kappa+1| {kdev:.4} <= eps_mesh {eps:.4}; bent: tension {t0:.2e} -> {t1:.2e} in {} steps, \
         validation {} (slope ratio {:.3}); induced/L - 1 <= {sandwich:.4} over {checked} classes; chord - graph <= {excess:.4}, graph - chord <= {slack:.4}",
        log.max_motion,
        blog.iterations,
        if v.all_pass() { "pass" } else { "FAIL" },
        v.lipschitz_ratio,
    );
    *meshes = Some((mb, b));
    Ok(outcome(pass, detail))
}

fn c7(meshes: &Option<(FundamentalMesh, Representation)>) -> Result<Outcome> {
    let (mesh, b) = match meshes {
        Some(m) => (m.0.clone(), m.1.clone()),
        None => {
            let b = bent();
            let m = relax_logged(&init_bent(&b, 3)?, &b, 1500, 1.0)?.0;
            (m, b)
        }
    };
    let xs = limit_curve_samples(&b, 6)?;
    let tol = 1e-6;
    let pos = mesh.class_positions();
    let (mut inside, mut total, mut floor) = (0, 0, f64::INFINITY);
    for k in 0..50 {
        let x = PointH { rep: pos[k * pos.len() / 50].clone() };
        for v in photon_fiber(&x, 8)? {
            let r = gw2_membership(&v, &xs, tol)?;
            inside += (r.status == Status::Inside) as usize;
            floor = floor.min(r.residual);
            total += 1;
        }
    }
    let mut planted = 0;
    let step = xs.len() / 50;
    for xi in xs.iter().step_by(step.max(1)).take(50) {
        planted += (gw2_membership(&planted_photon(xi)?, &xs, tol)?.status == Status::OnExcludedSet) as usize;
    }

    let j = fuchsian_octagon()?;
    let irr = irr_so23(&j)?;
    let qt = 1e-12;
    let x4 = omega1_membership_fuchsian(&Quartic::new([1.0, 0.0, 0.0, 0.0, 0.0]), qt)?.status == Status::OnExcludedSet;
    let a = -7.0 + 4.0 * 3f64.sqrt();
    let wit = omega1_membership_fuchsian(&Quartic::new([a, 0.0, a + 1.0, 0.0, 1.0]), qt)?.status == Status::Inside;
    let vmesh = init_irreducible(&irr)?;
    let dev = dev_einstein_samples(&vmesh, &irr, 500, 7)?;
    let mut dev_in = 0;
    for (_, p) in &dev {
        dev_in += (omega1_membership_fuchsian(&Quartic::from_vector(&p.rep)?, qt)?.status == Status::Inside) as usize;
    }
    let pts: Vec<_> = dev.into_iter().map(|d| d.1).collect();
    let sep = min_separation(&pts);
    let pass = inside == total && planted == 50 && x4 && wit && dev_in == 500 && sep > 0.0;
    Ok(outcome(
        pass,
        format!(
            "fiber photons inside {inside}/{total} (residual floor {floor:.2e}), planted excluded {planted}/50, X^4 excluded {x4}, witness inside {wit}, \
             dev inside {dev_in}/500 with min separation {sep:.2e}"
        ),
    ))
}

fn random_chart_point(rng: &mut ChaCha8Rng) -> ([f64; 2], DVector<f64>) {
    let r: f64 = rng.random_range(0.0..0.9);
    let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let v = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0f64)).normalize();
    ([r * a.cos(), r * a.sin()], v)
}

fn c8() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut metric: f64 = 0.0;
    for _ in 0..200 {
        let (u, v) = random_chart_point(&mut rng);
        let want = warped_metric(u, 2);
        metric = metric.max((warped_pullback_fd(u, &v, 1e-5)? - &want).amax() / want.amax());
    }
    let mut trip: f64 = 0.0;
    for _ in 0..1000 {
        let (u, v) = random_chart_point(&mut rng);
        let (u2, v2) = warped_chart_inv(&warped_chart(u, &v)?);
        trip = trip.max((u2[0] - u[0]).abs().max((u2[1] - u[1]).abs()).max((v2 - &v).amax()));
    }
    let (mut agree, mut decided) = (0, 0);
    for _ in 0..1000 {
        let (u, v) = random_chart_point(&mut rng);
        let (s, t) = random_chart_point(&mut rng);
        let x = PointH::new(warped_chart(u, &v)?, 1e-9)?;
        let y = PointH::new(warped_chart(s, &t)?, 1e-9)?;
        let c = chord_classify(&x, &y, 1e-6);
        if matches!(c, ChordClass::Lightlike | ChordClass::Equal) {
            continue;
        }
        decided += 1;
        agree += (matches!(c, ChordClass::Spacelike(_)) == fibers_disjoint(&x, &y, 1e-9)?) as usize;
    }
    let pass = metric < 1e-6 && trip < 1e-10 && agree == decided && decided >= 990;
    Ok(outcome(pass, format!("pullback vs metric {metric:.1e}, round trip {trip:.1e}, chord/fiber agreement {agree}/{decided}")))
}

fn main() {
    let mut failed = 0;
    let mut meshes = None;
    let mut report = |k: usize, limit: f64, f: &mut dyn FnMut() -> Result<(Outcome, String)>| {
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        let (pass, detail) = match r {
            Ok((o, note)) => (o.pass, o.detail + &note),
            Err(e) => (false, format!("error: {e}")),
        };
        let pass_time = secs <= limit;
        let ok = pass && pass_time;
        if !ok {
            failed += 1;
        }
        let time_note = if pass_time { String::new() } else { format!(" over the {limit} s budget") };
        println!("criterion {k}: {} [{secs:.1} s{time_note}] {detail}", if ok { "PASS" } else { "FAIL" });
    };
    let plain = |o: Result<Outcome>| o.map(|o| (o, String::new()));
    report(1, 1.0, &mut || plain(c1()));
    report(2, 1.0, &mut || plain(c2()));
    report(3, 30.0, &mut || plain(c3()));
    report(4, 60.0, &mut || plain(c4()));
    report(5, 300.0, &mut c5);
    report(6, 300.0, &mut || plain(c6(&mut meshes)));
    report(7, 120.0, &mut || plain(c7(&meshes)));
    report(8, 10.0, &mut || plain(c8()));
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
