//! TOML run configuration. Every table is optional; omitted keys take the
//! defaults below.
//!
//! ```toml
//! [pipeline]
//! schedule = [45.0, -45.0, 90.0, -90.0, 135.0, -135.0, 180.0]
//! image_size = 512
//! base_seed = 0
//! guidance = "both"            # none | normal | silhouette | both
//! guidance_scale = 15.0
//! steps = 25
//! negative_prompt = ""
//! known_region_policy = "strict"  # strict | lenient
//! back_view = { kind = "backend" } # or { kind = "file", path = "back.png" }, { kind = "none" }
//!
//! [pipeline.blend]
//! alpha = 3.0
//! beta = 3.0
//! boundary_radius = 2.0
//!
//! [fuse]
//! iterations = 400
//! lambda = 10.0
//! resolution = 1024
//! proxy_levels = 4
//! init = "baked"               # baked | gray
//! checkpoint_every = 0
//!
//! [fuse.adam]
//! lr = 0.1
//! beta1 = 0.9
//! beta2 = 0.999
//! eps = 1e-8
//!
//! [remote]
//! timeout_ms = 300000
//! retries = 2
//!
//! [eval]
//! n_views = 90
//! spacing = 4.0
//! image_size = 512
//! masked = false
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuse::FuseConfig;
use crate::metrics::EvalSettings;
use crate::pipeline::PipelineConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteSettings {
    pub timeout_ms: u64,
    pub retries: u32,
}

impl Default for RemoteSettings {
    fn default() -> Self {
        Self {
            timeout_ms: 300_000,
            retries: 2,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub fuse: FuseConfig,
    pub remote: RemoteSettings,
    pub eval: EvalSettings,
}

impl RunConfig {
    /// Parses and validates; errors carry the TOML line, column and field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.fuse.validate()?;
        if self.eval.n_views == 0 || self.eval.image_size == 0 {
            return Err(Error::Config(
                "eval.n_views and eval.image_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inpaint::Guidance;
    use crate::pipeline::BackViewSource;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.pipeline.guidance_scale, 15.0);
        assert_eq!(c.pipeline.steps, 25);
        assert_eq!(c.pipeline.blend.alpha, 3.0);
        assert_eq!(c.pipeline.blend.beta, 3.0);
        assert_eq!(c.fuse.lambda, 10.0);
        assert_eq!(c.fuse.adam.lr, 0.1);
        assert_eq!(
            c.pipeline.schedule,
            vec![45.0, -45.0, 90.0, -90.0, 135.0, -135.0, 180.0]
        );
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn overrides_apply() {
        let c = RunConfig::from_toml(
            r#"
            [pipeline]
            guidance = "normal"
            back_view = { kind = "file", path = "back.png" }
            [pipeline.blend]
            alpha = 1.5
            [fuse]
            iterations = 10
            [fuse.adam]
            lr = 0.05
            "#,
        )
        .unwrap();
        assert_eq!(c.pipeline.guidance, Guidance::Normal);
        assert_eq!(c.pipeline.back_view, BackViewSource::File("back.png".into()));
        assert_eq!(c.pipeline.blend.alpha, 1.5);
        assert_eq!(c.pipeline.blend.beta, 3.0);
        assert_eq!(c.fuse.iterations, 10);
        assert_eq!(c.fuse.adam.lr, 0.05);
    }

    #[test]
    fn unknown_field_names_field_and_line() {
        let err = RunConfig::from_toml("[fuse]\niterations = 5\nlamda = 3.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("lamda"), "{err}");
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn type_errors_and_invalid_values_are_rejected() {
        assert!(RunConfig::from_toml("[pipeline]\nsteps = \"many\"\n").is_err());
        assert!(RunConfig::from_toml("[pipeline]\nschedule = [45.0, 45.0]\n").is_err());
        assert!(RunConfig::from_toml("[fuse]\nresolution = 0\n").is_err());
    }
}
