//! Run configuration for the CLI, loaded from a TOML file.
//!
//! Every tunable defaults to the reference pipeline's value, so a minimal
//! config only needs the region, the airport list, and an output directory.
//! Sub-seeds are not set here: commands derive per-airport seeds from
//! `master_seed`, which keeps a run reproducible from a single number.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::discriminator::DiscriminatorConfig;
use crate::error::{Error, Result};
use crate::matrix::{Region, RegionName};
use crate::refinery::RefineryConfig;
use crate::sampler::SamplerConfig;

/// Settings for a full generation/evaluation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Data region; fixes the delay unit and expected coverage.
    #[serde(serialize_with = "region_name", deserialize_with = "region_from_name")]
    pub region: Region,
    /// Airport codes to process, in tensor axis order.
    pub airports: Vec<String>,
    /// Independent synthetic datasets generated per airport and kind.
    #[serde(default = "default_n_realisations")]
    pub n_realisations: usize,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub refinery: RefineryConfig,
    /// Classifier settings used by `evaluate` (50 training epochs).
    #[serde(default)]
    pub discriminator_eval: DiscriminatorConfig,
    /// Realisations scored per airport by `evaluate`; clamped to
    /// `n_realisations` at run time.
    #[serde(default = "default_eval_repeats")]
    pub eval_repeats: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_n_realisations() -> usize {
    100
}

fn default_eval_repeats() -> usize {
    100
}

fn region_name<S: Serializer>(region: &Region, ser: S) -> std::result::Result<S::Ok, S::Error> {
    region.name.serialize(ser)
}

fn region_from_name<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Region, D::Error> {
    // The unit and day count are fixed per region, so the file only names it.
    Ok(match RegionName::deserialize(de)? {
        RegionName::EU => Region::eu(),
        RegionName::US => Region::us(),
    })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        // An unreadable config file is a usage problem (exit code 1), unlike
        // unreadable data files.
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Shrink the run so it finishes in minutes instead of hours: 50
    /// refinement rounds, 5 realisations, 10 scored datasets.
    pub fn apply_desk_profile(&mut self) {
        self.refinery.iterations = 50;
        self.n_realisations = 5;
        self.eval_repeats = 10;
    }

    pub fn validate(&self) -> Result<()> {
        if self.airports.is_empty() {
            return Err(Error::Config("airports list is empty".into()));
        }
        for code in &self.airports {
            if code.is_empty() || !code.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit()) {
                return Err(Error::Config(format!(
                    "airport code {code:?} is not uppercase alphanumeric"
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for code in &self.airports {
            if !seen.insert(code) {
                return Err(Error::Config(format!("duplicate airport code {code}")));
            }
        }
        if self.n_realisations == 0 {
            return Err(Error::Config("n_realisations must be at least 1".into()));
        }
        if self.eval_repeats == 0 {
            return Err(Error::Config("eval_repeats must be at least 1".into()));
        }
        self.sampler.validate()?;
        self.refinery.validate()?;
        self.discriminator_eval.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Unit;
    use crate::sampler::Variant;

    fn minimal_toml() -> &'static str {
        "region = \"EU\"\nairports = [\"EGLL\", \"LFPG\"]\noutput_dir = \"out\"\n"
    }

    #[test]
    fn minimal_config_gets_reference_defaults() {
        let cfg: RunConfig = toml::from_str(minimal_toml()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.region.name, RegionName::EU);
        assert_eq!(cfg.region.unit, Unit::Seconds);
        assert_eq!(cfg.n_realisations, 100);
        assert_eq!(cfg.eval_repeats, 100);
        assert_eq!(cfg.sampler.night_hours, 4);
        assert_eq!(cfg.sampler.n_quantiles, 10);
        assert_eq!(cfg.sampler.variant, Variant::Full);
        assert_eq!(cfg.refinery.iterations, 1000);
        assert_eq!(cfg.refinery.disc_cfg.epochs, 20);
        assert_eq!(cfg.discriminator_eval.epochs, 50);
        assert_eq!(cfg.master_seed, 0);
    }

    #[test]
    fn nested_sections_override_defaults() {
        let text = format!(
            "{}master_seed = 42\n\n[sampler]\nvariant = \"random_draw\"\n\n\
             [refinery]\niterations = 7\n\n[refinery.disc_cfg]\nfilters = 8\n\n\
             [discriminator_eval]\nepochs = 3\n",
            minimal_toml()
        );
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.master_seed, 42);
        assert_eq!(cfg.sampler.variant, Variant::RandomDraw);
        assert_eq!(cfg.refinery.iterations, 7);
        assert_eq!(cfg.refinery.disc_cfg.filters, 8);
        // An explicit [refinery.disc_cfg] section re-specifies the critic from
        // the plain classifier defaults, so epochs falls back to 50 unless the
        // section sets it. Omitting the section keeps the 20-epoch critic.
        assert_eq!(cfg.refinery.disc_cfg.epochs, 50);
        let bare: RunConfig = toml::from_str(minimal_toml()).unwrap();
        assert_eq!(bare.refinery.disc_cfg.epochs, 20);
        assert_eq!(cfg.discriminator_eval.epochs, 3);
    }

    #[test]
    fn region_string_fixes_unit_and_days() {
        let us: RunConfig =
            toml::from_str(&minimal_toml().replace("\"EU\"", "\"US\"")).unwrap();
        assert_eq!(us.region.unit, Unit::Minutes);
        assert_eq!(us.region.expected_days, 1825);
        let round = toml::to_string(&us).unwrap();
        assert!(round.contains("region = \"US\""));
        let back: RunConfig = toml::from_str(&round).unwrap();
        assert_eq!(back.region, us.region);
    }

    #[test]
    fn desk_profile_shrinks_the_run() {
        let mut cfg: RunConfig = toml::from_str(minimal_toml()).unwrap();
        cfg.apply_desk_profile();
        assert_eq!(cfg.refinery.iterations, 50);
        assert_eq!(cfg.n_realisations, 5);
        assert_eq!(cfg.eval_repeats, 10);
        cfg.validate().unwrap();
    }

    #[test]
    fn bad_configs_are_rejected() {
        let dup = minimal_toml().replace("\"LFPG\"", "\"EGLL\"");
        let cfg: RunConfig = toml::from_str(&dup).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        let lower = minimal_toml().replace("\"LFPG\"", "\"lfpg\"");
        let cfg: RunConfig = toml::from_str(&lower).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        let empty = "region = \"EU\"\nairports = []\noutput_dir = \"out\"\n";
        let cfg: RunConfig = toml::from_str(empty).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        assert!(toml::from_str::<RunConfig>("region = \"ASIA\"\nairports = [\"A\"]\noutput_dir = \"o\"").is_err());
        assert!(toml::from_str::<RunConfig>(&format!("{}unknown_key = 1\n", minimal_toml())).is_err());
    }

    #[test]
    fn load_reports_missing_file_and_bad_toml() {
        let err = RunConfig::load(Path::new("/nonexistent/run.toml")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(err.exit_code(), 1);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "region = ").unwrap();
        let err = RunConfig::load(&path).unwrap_err();
        assert!(matches!(err, Error::Config(_)));

        std::fs::write(&path, minimal_toml()).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.airports, vec!["EGLL".to_string(), "LFPG".to_string()]);
    }
}
