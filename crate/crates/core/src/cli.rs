//! Command-line driver. Every command writes its outputs and a
//! `manifest.json` with the config hash, the library version, residuals and
//! the SHA-256 of each output file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{sha256_hex, ExperimentConfig};
use crate::error::{invalid, Error, Result};
use crate::group::Word;
use crate::reps::{bend_fuchsian, bend_with_theta, fuchsian_locus, fuchsian_octagon, irr_so23, trivial_alpha, Provenance, Representation};
use crate::spaces::PointH;
use crate::spectrum::{collar_check, domination_report, entropy_estimate, limit_curve_samples, spectrum};
use crate::structures::{
    dev_einstein_samples, gw2_membership, min_separation, omega1_membership_fuchsian, photon_fiber_seeded, planted_photon, verdicts_csv, DomainVerdict,
    Quartic, Status,
};
use crate::surface::{curvature_csv, gauss_curvature, gauss_maps, init_mesh, relax_logged, surface_residuals, surface_validation, FundamentalMesh};

#[derive(Debug, Parser)]
#[command(name = "h2n", version, about = "Maximal representations into SO0(2, n+1): spectra, maximal surfaces, domains")]
pub struct Cli {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub maxlen: Option<usize>,
    #[arg(long, global = true)]
    pub subdivision: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RepKind {
    FuchsianLocus,
    IrrSo23,
    Bend,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a representation and write rep.json.
    RepBuild {
        #[arg(long, value_enum)]
        kind: RepKind,
        /// n of SO0(2, n+1) for the Fuchsian locus (trivial alpha).
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Representation to bend; defaults to the Fuchsian locus with the given n.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Bending element as a JSON array of rows; defaults to the boost by --theta.
        #[arg(long)]
        element: Option<PathBuf>,
    },
    /// Length spectrum CSV and summary JSON.
    Spectrum {
        #[arg(long)]
        rep: PathBuf,
    },
    /// Relax the equivariant mesh and write mesh, curvature, history and validation.
    Surface {
        #[arg(long)]
        rep: PathBuf,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Domain membership sweeps over fiber photons and planted photons.
    Domains {
        #[arg(long)]
        rep: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        /// Photons per vertex.
        #[arg(long)]
        samples: Option<usize>,
    },
}

impl Cli {
    /// Config file (or defaults) with the global flags applied.
    pub fn resolve_config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.maxlen {
            c.maxlen = v;
        }
        if let Some(v) = self.subdivision {
            c.subdivision = v;
        }
        if let Some(v) = self.theta {
            c.bend_theta = v;
        }
        if let Some(v) = &self.out {
            c.output_dir = v.clone();
        }
        match &self.command {
            Command::Surface { iters, step, .. } => {
                if let Some(v) = iters {
                    c.iters = *v;
                }
                if let Some(v) = step {
                    c.step = *v;
                }
            }
            Command::Domains { samples: Some(v), .. } => c.samples = *v,
            _ => {}
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a ExperimentConfig,
    config_sha256: String,
    residuals: Value,
    outputs: BTreeMap<String, String>,
}

/// Ordered writer for the files of one command.
struct Outputs {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), files: BTreeMap::new() })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), body)?;
        self.files.insert(name.to_string(), sha256_hex(body.as_bytes()));
        Ok(())
    }

    fn finish(self, command: &str, config: &ExperimentConfig, residuals: Value) -> Result<()> {
        let m = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            config_sha256: config.hash(),
            residuals,
            outputs: self.files,
        };
        std::fs::write(self.dir.join("manifest.json"), serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(())
    }
}

fn read_rep(p: &Path) -> Result<Representation> {
    Representation::from_json(&std::fs::read_to_string(p)?)
}

fn read_matrix(p: &Path) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(&std::fs::read_to_string(p)?)?;
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return invalid("bending element must be a square array of rows");
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.resolve_config()?;
    match &cli.command {
        Command::RepBuild { kind, n, input, element } => cmd_rep_build(&cfg, *kind, *n, input.as_deref(), element.as_deref()),
        Command::Spectrum { rep } => cmd_spectrum(&cfg, rep),
        Command::Surface { rep, .. } => cmd_surface(&cfg, rep),
        Command::Domains { rep, mesh, .. } => cmd_domains(&cfg, rep, mesh),
    }
}

pub fn cmd_rep_build(cfg: &ExperimentConfig, kind: RepKind, n: usize, input: Option<&Path>, element: Option<&Path>) -> Result<()> {
    let j = fuchsian_octagon()?;
    let rep = match kind {
        RepKind::FuchsianLocus => fuchsian_locus(&j, &trivial_alpha(n))?,
        RepKind::IrrSo23 => irr_so23(&j)?,
        RepKind::Bend => {
            let base = match input {
                Some(p) => read_rep(p)?,
                None => fuchsian_locus(&j, &trivial_alpha(n))?,
            };
            match element {
                Some(p) => bend_with_theta(&base, &read_matrix(p)?, None, 1e-9)?,
                None => bend_fuchsian(&base, cfg.bend_theta)?,
            }
        }
    };
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.write("rep.json", &(rep.to_json()? + "\n"))?;
    let res = json!({ "relator": rep.relator_residual, "membership": rep.membership_residual() });
    out.finish("rep-build", cfg, res)
}

pub fn cmd_spectrum(cfg: &ExperimentConfig, rep: &Path) -> Result<()> {
    let rep = read_rep(rep)?;
    let s = spectrum(&rep, cfg.maxlen, false)?;
    let dom = domination_report(&rep, &fuchsian_octagon()?, cfg.maxlen)?;
    let entropy = entropy_estimate(&rep, cfg.maxlen).ok();
    let (collar, collar_ok) = collar_check(&rep, &Word::parse("a1")?, &Word::parse("b1")?)?;
    let summary = json!({
        "maxlen": cfg.maxlen,
        "classes": s.entries.len(),
        "excluded": s.excluded.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
        "min_ratio": dom.min_ratio,
        "argmin": dom.argmin.to_string(),
        "entropy": entropy.as_ref().map(|e| e.h_hat),
        "entropy_r_max": entropy.as_ref().map(|e| e.r_max),
        "collar_a1_b1": collar,
        "collar_gt_1": collar_ok,
    });
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.write("spectrum.csv", &s.to_csv())?;
    out.write("summary.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    out.finish("spectrum", cfg, summary)
}

pub fn cmd_surface(cfg: &ExperimentConfig, rep: &Path) -> Result<()> {
    let rep = read_rep(rep)?;
    let mesh = init_mesh(&rep, cfg.subdivision)?;
    let (mesh, log) = relax_logged(&mesh, &rep, cfg.iters, cfg.step)?;
    let res = surface_residuals(&mesh, &rep)?;
    let kappa = gauss_curvature(&mesh)?;
    let samples = limit_curve_samples(&rep, cfg.maxlen)?;
    let validation = surface_validation(&mesh, &rep, &samples)?;
    let (_, grass) = gauss_maps(&mesh, &rep)?;
    let mut hist = String::from("iteration,energy,merit,tension,step\n");
    for i in 0..log.energy.len() {
        let step = if i == 0 { String::new() } else { log.steps[i - 1].to_string() };
        hist.push_str(&format!("{i},{},{},{},{step}\n", log.energy[i], log.merit[i], log.tension[i]));
    }
    let report = json!({
        "validation": validation,
        "all_pass": validation.all_pass(),
        "grassmann": grass,
        "iterations": log.iterations,
        "max_motion": log.max_motion,
    });
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.write("mesh.json", &(mesh.to_json(&res)? + "\n"))?;
    out.write("curvature.csv", &curvature_csv(&mesh, &kappa))?;
    out.write("history.csv", &hist)?;
    out.write("validation.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    out.finish("surface", cfg, json!({ "surface": res, "all_pass": validation.all_pass() }))
}

fn is_irreducible(p: &Provenance) -> bool {
    matches!(p, Provenance::Irreducible)
}

pub fn cmd_domains(cfg: &ExperimentConfig, rep: &Path, mesh: &Path) -> Result<()> {
    let rep = read_rep(rep)?;
    let (mesh, _) = FundamentalMesh::from_json(&std::fs::read_to_string(mesh)?)?;
    if mesh.dim() != rep.dim() {
        return Err(Error::DimensionMismatch(rep.dim(), mesh.dim()));
    }
    let tol = cfg.tol("domain");
    let xs = limit_curve_samples(&rep, cfg.maxlen)?;
    let pos = mesh.class_positions();
    let nv = cfg.vertices.min(pos.len()).max(1);
    let mut rows: Vec<(String, DomainVerdict)> = Vec::new();
    for k in 0..nv {
        let c = k * pos.len() / nv;
        let x = PointH { rep: pos[c].clone() };
        for (i, v) in photon_fiber_seeded(&x, cfg.samples, cfg.seed.wrapping_add(c as u64))?.iter().enumerate() {
            rows.push((format!("fiber:{c}:{i}"), gw2_membership(v, &xs, tol)?));
        }
    }
    let fibers = rows.len();
    for (i, xi) in xs.iter().enumerate().step_by((xs.len() / 20).max(1)) {
        rows.push((format!("planted:{i}"), gw2_membership(&planted_photon(xi)?, &xs, tol)?));
    }
    let count = |rs: &[(String, DomainVerdict)], s: Status| rs.iter().filter(|r| r.1.status == s).count();
    let mut residuals = json!({
        "boundary_samples": xs.len(),
        "fiber_photons": fibers,
        "fiber_inside": count(&rows[..fibers], Status::Inside),
        "fiber_min_residual": rows[..fibers].iter().map(|r| r.1.residual).fold(f64::INFINITY, f64::min),
        "planted": rows.len() - fibers,
        "planted_excluded": count(&rows[fibers..], Status::OnExcludedSet),
    });
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.write("verdicts.csv", &verdicts_csv(&rows))?;
    if is_irreducible(&rep.provenance) {
        let qt = cfg.tol("quartic");
        let a = -7.0 + 4.0 * 3f64.sqrt();
        let wit = crate::reps::poly_mul(&[1.0, 0.0, 1.0], &[a, 0.0, 1.0]);
        let mut q: Vec<(String, DomainVerdict)> = vec![
            ("X^4".into(), omega1_membership_fuchsian(&Quartic::new([1.0, 0.0, 0.0, 0.0, 0.0]), qt)?),
            ("witness".into(), omega1_membership_fuchsian(&Quartic::new([wit[0], wit[1], wit[2], wit[3], wit[4]]), qt)?),
        ];
        let dev = dev_einstein_samples(&mesh, &rep, 500, cfg.seed)?;
        for (i, (c, p)) in dev.iter().enumerate() {
            q.push((format!("dev:{c}:{i}"), omega1_membership_fuchsian(&Quartic::from_vector(&p.rep)?, qt)?));
        }
        let pts: Vec<_> = dev.into_iter().map(|d| d.1).collect();
        residuals["omega1_dev_inside"] = json!(count(&q[2..], Status::Inside));
        residuals["omega1_dev_min_separation"] = json!(min_separation(&pts));
        residuals["omega1_x4"] = json!(q[0].1.status.to_string());
        residuals["omega1_witness"] = json!(q[1].1.status.to_string());
        out.write("omega1.csv", &verdicts_csv(&q))?;
    }
    out.finish("domains", cfg, residuals)
}

/// Exit code of an error: 2 for invariant violations, 3 for numerical aborts.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invariant(_) => 2,
        Error::Numerical(_) | Error::NonLoxodromic(_) => 3,
        _ => 1,
    }
}
