//! JSON-facing configuration types and their resolution into runnable
//! experiments: ensemble sources (inline atoms, generator blocks, or files on
//! disk), grid descriptions, seed precedence, and the content digest that
//! ties output files back to the exact configuration that produced them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::Experiment;
use crate::families;
use crate::operator::{Op, SchattenExponent};
use crate::prob::Ensemble;
use crate::semigroup::TimeGrid;
use crate::superop::PreChannel;

/// Reads and deserializes a JSON file, wrapping both I/O and parse failures
/// with the offending path.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidData(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidData(format!("parsing {}: {e}", path.display())))
}

/// Seed precedence: explicit flag, then the config file, then the
/// environment, then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>, env: Option<u64>) -> u64 {
    flag.or(config).or(env).unwrap_or(0)
}

/// A generator block: family name, family-specific parameters, and an
/// optional private seed (falling back to the run seed).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub family: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GeneratorSpec {
    pub fn resolve(&self, fallback_seed: u64) -> Result<Ensemble> {
        families::generate(&self.family, &self.params, self.seed.unwrap_or(fallback_seed))
    }
}

/// One stored atom: weight, representation, and an optional recorded (2,2)
/// norm that is checked against the representation when present.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub prob: f64,
    pub rep: PreChannel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_2_2: Option<f64>,
}

/// On-disk ensemble format: dimension, atoms, and the generator block that
/// produced them (when one did), kept so a stored file documents its origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleFile {
    pub dim: usize,
    pub atoms: Vec<AtomSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
}

impl EnsembleFile {
    pub fn to_ensemble(&self) -> Result<Ensemble> {
        for (k, atom) in self.atoms.iter().enumerate() {
            if atom.rep.dim() != self.dim {
                return Err(Error::InvalidData(format!(
                    "atom {k} has dimension {} but the file declares {}",
                    atom.rep.dim(),
                    self.dim
                )));
            }
            if let Some(recorded) = atom.norm_2_2 {
                let actual = atom.rep.norm_2_2()?;
                if (recorded - actual).abs() > 1e-9 * actual.max(1.0) {
                    return Err(Error::InvalidData(format!(
                        "atom {k} records norm {recorded} but its representation has norm {actual}"
                    )));
                }
            }
        }
        Ensemble::new(self.atoms.iter().map(|a| (a.rep.clone(), a.prob)).collect())
    }

    /// Snapshot of an ensemble with per-atom norms filled in.
    pub fn from_ensemble(e: &Ensemble, generator: Option<GeneratorSpec>) -> Result<EnsembleFile> {
        let atoms = e
            .atoms()
            .iter()
            .map(|a| {
                Ok(AtomSpec {
                    prob: a.prob,
                    rep: a.channel.clone(),
                    norm_2_2: Some(a.channel.norm_2_2()?),
                })
            })
            .collect::<Result<_>>()?;
        Ok(EnsembleFile { dim: e.dim(), atoms, generator })
    }
}

/// Where an experiment's ensemble comes from: a separate file, a generator
/// block, or atoms written inline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnsembleSpec {
    File { file: PathBuf },
    Generator(GeneratorSpec),
    Inline(EnsembleFile),
}

impl EnsembleSpec {
    /// `base` anchors relative file paths (usually the config file's
    /// directory); `fallback_seed` feeds generators without a private seed.
    pub fn resolve(&self, base: &Path, fallback_seed: u64) -> Result<Ensemble> {
        match self {
            EnsembleSpec::File { file } => {
                read_json::<EnsembleFile>(&anchor(base, file))?.to_ensemble()
            }
            EnsembleSpec::Generator(g) => g.resolve(fallback_seed),
            EnsembleSpec::Inline(f) => f.to_ensemble(),
        }
    }
}

fn anchor(base: &Path, file: &Path) -> PathBuf {
    if file.is_absolute() {
        file.to_path_buf()
    } else {
        base.join(file)
    }
}

pub const DEFAULT_GRID_COUNT: usize = 65;

/// Grid description: horizon `T` plus either a point count (default 65) or
/// explicit points that must run from 0 to `T`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
}

impl GridSpec {
    /// A count override (from the command line) always wins and produces a
    /// uniform grid on `[0, T]`.
    pub fn resolve(&self, count_override: Option<usize>) -> Result<TimeGrid> {
        if let Some(count) = count_override {
            return TimeGrid::uniform(self.horizon, count);
        }
        match (&self.points, self.count) {
            (Some(_), Some(_)) => Err(Error::InvalidData(
                "a grid takes either explicit points or a count, not both".into(),
            )),
            (Some(points), None) => {
                let grid = TimeGrid::from_points(points.clone())?;
                if grid.horizon() != self.horizon {
                    return Err(Error::InvalidData(format!(
                        "grid points end at {} but the horizon is {}",
                        grid.horizon(),
                        self.horizon
                    )));
                }
                Ok(grid)
            }
            (None, count) => TimeGrid::uniform(self.horizon, count.unwrap_or(DEFAULT_GRID_COUNT)),
        }
    }
}

fn default_exponent() -> SchattenExponent {
    SchattenExponent::TWO
}

/// The sweep/probe/product-error configuration as written in JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub ensemble: EnsembleSpec,
    pub x: Op,
    #[serde(default = "default_exponent")]
    pub p: SchattenExponent,
    pub grid: GridSpec,
    pub n_schedule: Vec<usize>,
    pub trials: usize,
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    /// Resolves into a runnable experiment. `base` anchors relative ensemble
    /// paths; the seed chain is flag > config > environment > 0; a grid
    /// override replaces the configured grid with that many uniform points.
    pub fn resolve(
        &self,
        base: &Path,
        seed_flag: Option<u64>,
        env_seed: Option<u64>,
        grid_override: Option<usize>,
    ) -> Result<Experiment> {
        let seed = resolve_seed(seed_flag, self.seed, env_seed);
        let ensemble = self.ensemble.resolve(base, seed)?;
        if ensemble.dim() != self.dim {
            return Err(Error::InvalidData(format!(
                "config declares dimension {} but the ensemble has dimension {}",
                self.dim,
                ensemble.dim()
            )));
        }
        let grid = self.grid.resolve(grid_override)?;
        let config_hash = self.content_digest(base, seed, grid_override)?;
        let experiment = Experiment {
            ensemble,
            x: self.x.clone(),
            p: self.p,
            grid,
            n_schedule: self.n_schedule.clone(),
            trials: self.trials,
            eps: self.eps,
            seed,
            config_hash,
        };
        experiment.validate()?;
        Ok(experiment)
    }

    /// SHA-256 over the canonical config serialization, the resolved seed and
    /// grid override, and the bytes of a referenced ensemble file, so equal
    /// digests mean equal resolved inputs.
    pub fn content_digest(
        &self,
        base: &Path,
        resolved_seed: u64,
        grid_override: Option<usize>,
    ) -> Result<String> {
        let mut hasher = Sha256::new();
        let canonical = serde_json::to_string(self)
            .map_err(|e| Error::InvalidData(format!("serializing config: {e}")))?;
        hasher.update(canonical.as_bytes());
        hasher.update(resolved_seed.to_le_bytes());
        if let Some(count) = grid_override {
            hasher.update((count as u64).to_le_bytes());
        }
        if let EnsembleSpec::File { file } = &self.ensemble {
            let path = anchor(base, file);
            let bytes = std::fs::read(&path)
                .map_err(|e| Error::InvalidData(format!("reading {}: {e}", path.display())))?;
            hasher.update(&bytes);
        }
        let digest = hasher.finalize();
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

fn default_verify_n() -> Vec<usize> {
    vec![2, 3]
}

fn default_verify_t() -> Vec<f64> {
    vec![0.25, 1.0]
}

/// Configuration for the identity verifier: the main ensemble, an optional
/// independent companion (one is generated when absent), and the factor
/// counts and times for the second-moment check.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub ensemble: EnsembleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_b: Option<EnsembleSpec>,
    #[serde(default = "default_verify_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_verify_t")]
    pub t: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A resolved verification plan.
#[derive(Debug, Clone)]
pub struct VerifyPlan {
    pub ensemble: Ensemble,
    pub companion: Ensemble,
    pub n: Vec<usize>,
    pub t: Vec<f64>,
    pub seed: u64,
}

impl VerifyConfig {
    pub fn resolve(
        &self,
        base: &Path,
        seed_flag: Option<u64>,
        env_seed: Option<u64>,
    ) -> Result<VerifyPlan> {
        let seed = resolve_seed(seed_flag, self.seed, env_seed);
        let ensemble = self.ensemble.resolve(base, seed)?;
        let companion = match &self.ensemble_b {
            Some(spec) => spec.resolve(base, seed.wrapping_add(1))?,
            None => families::ginibre(ensemble.dim(), 2, 1.0, seed.wrapping_add(1))?,
        };
        if companion.dim() != ensemble.dim() {
            return Err(Error::InvalidData(format!(
                "companion ensemble has dimension {} but the main ensemble has {}",
                companion.dim(),
                ensemble.dim()
            )));
        }
        if self.n.is_empty() || self.t.is_empty() {
            return Err(Error::InvalidData(
                "the verification plan needs at least one factor count and one time".into(),
            ));
        }
        Ok(VerifyPlan { ensemble, companion, n: self.n.clone(), t: self.t.clone(), seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use num_complex::Complex64;

    fn experiment_json() -> String {
        r#"{
            "dim": 2,
            "ensemble": { "family": "two-point", "params": { "dim": 2, "scale": 0.5 } },
            "x": { "dim": 2, "entries": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]] },
            "grid": { "T": 1.0 },
            "n_schedule": [8, 32],
            "trials": 10,
            "eps": 0.1
        }"#
        .to_string()
    }

    #[test]
    fn grid_resolution_defaults_and_overrides() {
        let spec = GridSpec { horizon: 1.0, count: None, points: None };
        assert_eq!(spec.resolve(None).unwrap().len(), DEFAULT_GRID_COUNT);
        assert_eq!(spec.resolve(Some(9)).unwrap().len(), 9);

        let spec = GridSpec { horizon: 2.0, count: Some(5), points: None };
        let grid = spec.resolve(None).unwrap();
        assert_eq!(grid.len(), 5);
        assert_eq!(grid.horizon(), 2.0);

        let spec = GridSpec { horizon: 1.0, count: None, points: Some(vec![0.0, 0.5, 1.0]) };
        assert_eq!(spec.resolve(None).unwrap().points(), &[0.0, 0.5, 1.0]);
        // An override flattens explicit points into a uniform grid.
        assert_eq!(spec.resolve(Some(3)).unwrap().points(), &[0.0, 0.5, 1.0]);

        let bad = GridSpec { horizon: 1.0, count: Some(3), points: Some(vec![0.0, 1.0]) };
        assert!(bad.resolve(None).is_err());
        let bad = GridSpec { horizon: 2.0, count: None, points: Some(vec![0.0, 1.0]) };
        assert!(bad.resolve(None).is_err());
    }

    #[test]
    fn seed_precedence_chain() {
        assert_eq!(resolve_seed(Some(1), Some(2), Some(3)), 1);
        assert_eq!(resolve_seed(None, Some(2), Some(3)), 2);
        assert_eq!(resolve_seed(None, None, Some(3)), 3);
        assert_eq!(resolve_seed(None, None, None), 0);
    }

    #[test]
    fn generator_spec_matches_direct_generation() {
        let spec: GeneratorSpec =
            serde_json::from_str(r#"{ "family": "ginibre", "params": { "dim": 2, "atoms": 2 } }"#)
                .unwrap();
        let from_spec = spec.resolve(9).unwrap();
        let direct =
            families::generate("ginibre", &serde_json::json!({"dim": 2, "atoms": 2}), 9).unwrap();
        for (a, b) in from_spec.atoms().iter().zip(direct.atoms().iter()) {
            assert_eq!(a.channel.max_entry_distance(&b.channel).unwrap(), 0.0);
        }
        // A private generator seed beats the fallback.
        let spec: GeneratorSpec =
            serde_json::from_str(r#"{ "family": "ginibre", "seed": 4 }"#).unwrap();
        let pinned = spec.resolve(9).unwrap();
        let expected = families::generate("ginibre", &serde_json::Value::Null, 4).unwrap();
        assert_eq!(
            pinned.atoms()[0]
                .channel
                .max_entry_distance(&expected.atoms()[0].channel)
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn ensemble_file_round_trip_checks_norms() {
        let e = families::two_point(2, 0.5).unwrap();
        let file = EnsembleFile::from_ensemble(&e, None).unwrap();
        let back = file.to_ensemble().unwrap();
        for (a, b) in e.atoms().iter().zip(back.atoms().iter()) {
            assert_eq!(a.channel.max_entry_distance(&b.channel).unwrap(), 0.0);
            assert_eq!(a.prob, b.prob);
        }

        let mut stale = file.clone();
        stale.atoms[0].norm_2_2 = Some(3.0);
        assert!(stale.to_ensemble().is_err());

        let mut mismatched = file.clone();
        mismatched.dim = 3;
        assert!(mismatched.to_ensemble().is_err());
    }

    #[test]
    fn ensemble_spec_resolves_files_generators_and_inline() {
        let dir = tempfile::tempdir().unwrap();
        let e = families::two_point(2, 0.5).unwrap();
        let file = EnsembleFile::from_ensemble(&e, None).unwrap();
        let path = dir.path().join("ensemble.json");
        std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();

        let spec: EnsembleSpec =
            serde_json::from_str(r#"{ "file": "ensemble.json" }"#).unwrap();
        let resolved = spec.resolve(dir.path(), 0).unwrap();
        assert_eq!(resolved.support(), 2);

        let spec: EnsembleSpec = serde_json::from_str(r#"{ "family": "two-point" }"#).unwrap();
        assert!(matches!(spec, EnsembleSpec::Generator(_)));
        assert_eq!(spec.resolve(dir.path(), 0).unwrap().dim(), 2);

        let inline_json = serde_json::to_string(&file).unwrap();
        let spec: EnsembleSpec = serde_json::from_str(&inline_json).unwrap();
        assert!(matches!(spec, EnsembleSpec::Inline(_)));
        assert_eq!(spec.resolve(dir.path(), 0).unwrap().dim(), 2);

        let spec: EnsembleSpec = serde_json::from_str(r#"{ "file": "missing.json" }"#).unwrap();
        assert!(spec.resolve(dir.path(), 0).is_err());
    }

    #[test]
    fn experiment_config_resolves_and_validates() {
        let cfg: ExperimentConfig = serde_json::from_str(&experiment_json()).unwrap();
        let exp = cfg.resolve(Path::new("."), None, None, None).unwrap();
        assert_eq!(exp.seed, 0);
        assert_eq!(exp.grid.len(), DEFAULT_GRID_COUNT);
        assert_eq!(exp.n_schedule, vec![8, 32]);
        assert_eq!(exp.p, SchattenExponent::TWO);
        assert_eq!(exp.config_hash.len(), 64);

        // Seed chain: flag > config > env.
        let exp = cfg.resolve(Path::new("."), Some(5), Some(9), None).unwrap();
        assert_eq!(exp.seed, 5);
        let exp = cfg.resolve(Path::new("."), None, Some(9), None).unwrap();
        assert_eq!(exp.seed, 9);

        let exp = cfg.resolve(Path::new("."), None, None, Some(7)).unwrap();
        assert_eq!(exp.grid.len(), 7);

        let mut wrong_dim = cfg.clone();
        wrong_dim.dim = 3;
        assert!(wrong_dim.resolve(Path::new("."), None, None, None).is_err());

        let mut bad_trials = cfg.clone();
        bad_trials.trials = 0;
        assert!(bad_trials.resolve(Path::new("."), None, None, None).is_err());
    }

    #[test]
    fn config_digest_tracks_content_and_seed() {
        let cfg: ExperimentConfig = serde_json::from_str(&experiment_json()).unwrap();
        let a = cfg.content_digest(Path::new("."), 0, None).unwrap();
        let b = cfg.content_digest(Path::new("."), 0, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);

        let c = cfg.content_digest(Path::new("."), 1, None).unwrap();
        assert_ne!(a, c);
        let d = cfg.content_digest(Path::new("."), 0, Some(33)).unwrap();
        assert_ne!(a, d);

        let mut other = cfg.clone();
        other.eps = 0.2;
        assert_ne!(other.content_digest(Path::new("."), 0, None).unwrap(), a);
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        let mut value: serde_json::Value = serde_json::from_str(&experiment_json()).unwrap();
        value["surprise"] = serde_json::json!(1);
        let text = serde_json::to_string(&value).unwrap();
        assert!(serde_json::from_str::<ExperimentConfig>(&text).is_err());
    }

    #[test]
    fn verify_config_defaults_and_companion() {
        let cfg: VerifyConfig =
            serde_json::from_str(r#"{ "ensemble": { "family": "two-point" } }"#).unwrap();
        let plan = cfg.resolve(Path::new("."), None, None).unwrap();
        assert_eq!(plan.n, vec![2, 3]);
        assert_eq!(plan.t, vec![0.25, 1.0]);
        assert_eq!(plan.companion.dim(), plan.ensemble.dim());
        assert_eq!(plan.seed, 0);

        // The generated companion is deterministic in the seed.
        let again = cfg.resolve(Path::new("."), None, None).unwrap();
        assert_eq!(
            plan.companion.atoms()[0]
                .channel
                .max_entry_distance(&again.companion.atoms()[0].channel)
                .unwrap(),
            0.0
        );

        let cfg: VerifyConfig = serde_json::from_str(
            r#"{ "ensemble": { "family": "two-point" }, "n": [], "t": [0.5] }"#,
        )
        .unwrap();
        assert!(cfg.resolve(Path::new("."), None, None).is_err());
    }

    #[test]
    fn direction_ops_parse_from_wire_form() {
        let x: Op = serde_json::from_str(
            r#"{ "dim": 2, "entries": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]] }"#,
        )
        .unwrap();
        let mut want = Array2::<Complex64>::zeros((2, 2));
        want[(0, 0)] = Complex64::new(1.0, 0.0);
        assert_eq!(x.entries(), &want);
    }
}
