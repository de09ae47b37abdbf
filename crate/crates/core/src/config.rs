//! Experiment configuration: a flat TOML document with `[system]`,
//! `[grid]`, `[norms]`, `[experiment]` and optional `[perturbation]`
//! tables. Parsing is strict (unknown keys are rejected) and every run is
//! reproducible from the file alone: the `rng_seed` fixes all randomized
//! seeds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibered::FiberSystem;
use crate::poly::Poly;
use crate::stability::PerturbationFamily;
use crate::systems::{self, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemFamily {
    DoublingAffine,
    TrivialProduct,
    LorenzCusp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub family: SystemFamily,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Fiber drive profile `q(x)` (coefficients, ascending degree); the
    /// fiber map is `G(x, y) = alpha y + (1 - alpha) q(x)`.
    #[serde(default = "default_q_coeffs")]
    pub q_coeffs: Vec<f64>,
}

fn default_kappa() -> f64 {
    systems::DEFAULT_KAPPA
}

fn default_alpha() -> f64 {
    systems::DEFAULT_ALPHA_AFFINE
}

fn default_q_coeffs() -> Vec<f64> {
    vec![0.0, 1.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub base_cells: usize,
    #[serde(default = "default_fiber_atoms")]
    pub fiber_atoms: usize,
    #[serde(default = "default_atom_budget")]
    pub atom_budget: usize,
    #[serde(default = "default_merge_radius")]
    pub merge_radius: f64,
}

fn default_fiber_atoms() -> usize {
    32
}

fn default_atom_budget() -> usize {
    16384
}

fn default_merge_radius() -> f64 {
    1e-5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_a1")]
    pub a1: f64,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            p: default_p(),
            a1: default_a1(),
        }
    }
}

fn default_p() -> f64 {
    1.0
}

fn default_a1() -> f64 {
    0.25
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    Invariant,
    Rates,
    Gap,
    LyCheck,
    Stability,
    NormsSelftest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    /// Perturbation sizes for the stability experiment, descending.
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_seed_count")]
    pub seed_count: usize,
    #[serde(default = "default_rng_seed")]
    pub rng_seed: u64,
    /// Iteration count for the rate and gap experiments.
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Lasota-Yorke iterate.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
}

fn default_n_max() -> usize {
    200
}

fn default_tol() -> f64 {
    1e-4
}

fn default_seed_count() -> usize {
    5
}

fn default_rng_seed() -> u64 {
    7
}

fn default_steps() -> usize {
    12
}

fn default_k() -> usize {
    2
}

fn default_out_dir() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    /// Base conjugator drift `s(x)`; must vanish at 0 and 1.
    #[serde(default = "default_s_coeffs")]
    pub s_coeffs: Vec<f64>,
    /// Fiber shift `delta * w(x) * v(y)`.
    #[serde(default = "default_w_coeffs")]
    pub w_coeffs: Vec<f64>,
    #[serde(default = "default_v_coeffs")]
    pub v_coeffs: Vec<f64>,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            s_coeffs: default_s_coeffs(),
            w_coeffs: default_w_coeffs(),
            v_coeffs: default_v_coeffs(),
        }
    }
}

fn default_s_coeffs() -> Vec<f64> {
    vec![0.0, 1.0, -1.0]
}

fn default_w_coeffs() -> Vec<f64> {
    vec![1.0]
}

fn default_v_coeffs() -> Vec<f64> {
    vec![0.0, 1.0, -1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub grid: GridConfig,
    #[serde(default)]
    pub norms: NormConfig,
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0.0..1.0).contains(&self.system.alpha) {
            return fail(format!("alpha {} outside (0,1)", self.system.alpha));
        }
        if self.system.family == SystemFamily::LorenzCusp
            && !(self.system.kappa > 0.5 && self.system.kappa < 1.0)
        {
            return fail(format!("kappa {} outside (1/2,1)", self.system.kappa));
        }
        if self.grid.base_cells < 2 {
            return fail("base_cells must be at least 2".into());
        }
        if self.grid.fiber_atoms == 0 || self.grid.atom_budget < self.grid.fiber_atoms {
            return fail("atom budget must cover the initial fiber atoms".into());
        }
        if self.grid.merge_radius < 0.0 {
            return fail("merge radius must be nonnegative".into());
        }
        if self.norms.p < 1.0 {
            return fail(format!("p {} must be >= 1", self.norms.p));
        }
        if !(self.norms.a1 > 0.0 && self.norms.a1 <= 1.0) {
            return fail(format!("a1 {} outside (0,1]", self.norms.a1));
        }
        if self.experiment.tol <= 0.0 {
            return fail("tol must be positive".into());
        }
        if self.experiment.seed_count == 0 {
            return fail("seed_count must be positive".into());
        }
        if self.experiment.k == 0 {
            return fail("k must be positive".into());
        }
        if self.experiment.deltas.iter().any(|&d| d <= 0.0) {
            return fail("deltas must be positive".into());
        }
        if self.experiment.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return fail("deltas must be strictly descending".into());
        }
        if self.experiment.name == ExperimentName::Stability && self.experiment.deltas.len() < 3 {
            return fail("stability needs at least 3 deltas".into());
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            n: self.grid.base_cells,
            fiber_atoms: self.grid.fiber_atoms,
            atom_budget: self.grid.atom_budget,
            merge_radius: self.grid.merge_radius,
        }
    }

    pub fn build_system(&self) -> Result<FiberSystem> {
        let grid = self.grid_spec();
        let alpha = self.system.alpha;
        let drive = Poly(
            self.system
                .q_coeffs
                .iter()
                .map(|c| c * (1.0 - alpha))
                .collect(),
        );
        match self.system.family {
            SystemFamily::DoublingAffine => systems::affine_fiber_system(
                "doubling_affine",
                crate::interval_map::doubling(),
                alpha,
                drive,
                grid,
            ),
            SystemFamily::TrivialProduct => systems::trivial_product(alpha, grid),
            SystemFamily::LorenzCusp => systems::affine_fiber_system(
                format!("lorenz_cusp(kappa={})", self.system.kappa),
                crate::interval_map::lorenz_cusp(self.system.kappa),
                alpha,
                drive,
                grid,
            ),
        }
    }

    pub fn build_family(&self) -> Result<PerturbationFamily> {
        let delta_max = self
            .experiment
            .deltas
            .first()
            .copied()
            .unwrap_or(0.05)
            .min(0.99);
        PerturbationFamily::new(
            self.build_system()?,
            Poly(self.perturbation.s_coeffs.clone()),
            Poly(self.perturbation.w_coeffs.clone()),
            Poly(self.perturbation.v_coeffs.clone()),
            delta_max,
        )
    }
}

pub const EXAMPLE_CONFIG: &str = r#"[system]
family = "lorenz_cusp"
kappa = 0.75
alpha = 0.3333333333333333

[grid]
base_cells = 128
fiber_atoms = 32
atom_budget = 16384
merge_radius = 1e-5

[norms]
p = 1.0
a1 = 0.25

[experiment]
name = "stability"
deltas = [0.04, 0.02, 0.01, 0.005, 0.0025]
n_max = 200
tol = 2.5e-4
seed_count = 5
rng_seed = 7
steps = 12
k = 4
out_dir = "out"

[perturbation]
s_coeffs = [0.0, 1.0, -1.0]
w_coeffs = [1.0]
v_coeffs = [0.0, 1.0, -1.0]
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_config_parses_and_round_trips() {
        let config = ExperimentConfig::parse(EXAMPLE_CONFIG).unwrap();
        assert_eq!(config.experiment.name, ExperimentName::Stability);
        assert_eq!(config.experiment.deltas.len(), 5);
        let text = config.to_toml();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn unsorted_deltas_are_rejected() {
        let text = EXAMPLE_CONFIG.replace(
            "deltas = [0.04, 0.02, 0.01, 0.005, 0.0025]",
            "deltas = [0.01, 0.02, 0.04]",
        );
        assert!(matches!(
            ExperimentConfig::parse(&text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{EXAMPLE_CONFIG}\n[bogus]\nx = 1\n");
        assert!(matches!(
            ExperimentConfig::parse(&text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn systems_build_from_config() {
        for family in ["doubling_affine", "trivial_product", "lorenz_cusp"] {
            let text = EXAMPLE_CONFIG.replace("family = \"lorenz_cusp\"", &format!("family = \"{family}\""));
            let config = ExperimentConfig::parse(&text).unwrap();
            let system = config.build_system().unwrap();
            assert_eq!(system.n, 128);
            system.validate(32).unwrap();
        }
    }

    #[test]
    fn family_builds_from_config() {
        let config = ExperimentConfig::parse(EXAMPLE_CONFIG).unwrap();
        let family = config.build_family().unwrap();
        let member = family.member(0.01).unwrap();
        assert_eq!(member.n, 128);
    }

    #[test]
    fn bad_alpha_is_rejected() {
        let text = EXAMPLE_CONFIG.replace("alpha = 0.3333333333333333", "alpha = 1.5");
        assert!(ExperimentConfig::parse(&text).is_err());
    }
}
