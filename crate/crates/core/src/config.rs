//! Experiment configuration: a flat `key = value` file overridden by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};

/// Everything a command needs to be reproducible.
///
/// Tolerances are keyed `tol.<name>` in the file; known names are
/// `domain` (photon incidence), `quartic` (invariant band) and `tangent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub maxlen: usize,
    pub subdivision: usize,
    pub bend_theta: f64,
    pub output_dir: PathBuf,
    pub iters: usize,
    pub step: f64,
    pub samples: usize,
    pub vertices: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let tolerances = [("domain", 1e-6), ("quartic", 1e-12), ("tangent", 1e-8)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        ExperimentConfig {
            seed: 0,
            tolerances,
            maxlen: 6,
            subdivision: 4,
            bend_theta: 0.3,
            output_dir: PathBuf::from("out"),
            iters: 3000,
            step: 1.0,
            samples: 8,
            vertices: 50,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<T> {
    v.parse().or_else(|_| invalid(format!("line {line}: cannot parse value {v:?} for {key}")))
}

impl ExperimentConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return invalid(format!("line {}: expected key = value", i + 1));
            };
            let (k, v) = (k.trim(), v.trim());
            let n = i + 1;
            match k {
                "seed" => c.seed = parse_value(k, v, n)?,
                "maxlen" => c.maxlen = parse_value(k, v, n)?,
                "subdivision" => c.subdivision = parse_value(k, v, n)?,
                "bend_theta" | "theta" => c.bend_theta = parse_value(k, v, n)?,
                "output_dir" | "out" => c.output_dir = PathBuf::from(v),
                "iters" => c.iters = parse_value(k, v, n)?,
                "step" => c.step = parse_value(k, v, n)?,
                "samples" => c.samples = parse_value(k, v, n)?,
                "vertices" => c.vertices = parse_value(k, v, n)?,
                _ => match k.strip_prefix("tol.") {
                    Some(name) if !name.is_empty() => {
                        c.tolerances.insert(name.to_string(), parse_value(k, v, n)?);
                    }
                    _ => return invalid(format!("line {n}: unknown key {k:?}")),
                },
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((k, v)) = self.tolerances.iter().find(|(_, v)| !(**v > 0.0)) {
            return invalid(format!("tolerance {k} = {v} must be positive"));
        }
        if !self.bend_theta.is_finite() {
            return invalid("bend_theta must be finite");
        }
        Ok(())
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| ExperimentConfig::default().tolerances[name])
    }

    /// Canonical text form, one key per line in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "seed = {}\nmaxlen = {}\nsubdivision = {}\nbend_theta = {}\noutput_dir = {}\niters = {}\nstep = {}\nsamples = {}\nvertices = {}\n",
            self.seed,
            self.maxlen,
            self.subdivision,
            self.bend_theta,
            self.output_dir.display(),
            self.iters,
            self.step,
            self.samples,
            self.vertices
        );
        for (k, v) in &self.tolerances {
            s.push_str(&format!("tol.{k} = {v}\n"));
        }
        s
    }

    /// SHA-256 of [`Self::to_text`], hex encoded.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_roundtrip() {
        let c = ExperimentConfig::parse("# run\nseed = 7\nmaxlen=5\ntheta = 0.25\ntol.domain = 1e-7\nout = /tmp/x\n").unwrap();
        assert_eq!((c.seed, c.maxlen, c.bend_theta), (7, 5, 0.25));
        assert_eq!(c.tol("domain"), 1e-7);
        assert_eq!(c.tol("quartic"), 1e-12);
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(c.hash(), ExperimentConfig::parse(&c.to_text()).unwrap().hash());
        assert_ne!(c.hash(), ExperimentConfig::default().hash());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("tol.domain = -1").is_err());
        assert!(ExperimentConfig::parse("tol.domain = 0").is_err());
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("seed").is_err());
        assert!(ExperimentConfig::parse("seed = x").is_err());
    }
}
