//! The experiment runner: dispatches a parsed configuration to the named
//! experiment, writes CSV tables, key-value ledgers and SVG plots into the
//! output directory, and returns a manifest of file names with SHA-256
//! content hashes. Identical configurations produce identical bytes
//! regardless of the worker-thread cap.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::atoms::{bl_distance_equal_mass, bl_norm_oracle};
use crate::base_constants::{base_convergence_rate, ly_base_constants};
use crate::config::{ExperimentConfig, ExperimentName};
use crate::density::GridDensity;
use crate::error::{Error, Result};
use crate::plot::{render_curve, Axes};
use crate::sampling;
use crate::spectral::{
    equilibrium_rate, invariant_measure, measured_gap_ledger, with_invariant_norm,
    verify_gap_decay, zero_mass_seeds, Provenance,
};
use crate::stability::{fit_modulus, stability_curve, uf_checklist};
use crate::transfer::{transfer_n, StepDiagnostics};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for a in &self.artifacts {
            out.push_str(&format!("{}  {}\n", a.sha256, a.name));
        }
        out
    }
}

struct Writer {
    dir: PathBuf,
    manifest: Manifest,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            manifest: Manifest::default(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        let digest = Sha256::digest(contents.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.manifest.artifacts.push(Artifact {
            name: name.to_string(),
            sha256: hex,
        });
        Ok(())
    }

    fn finish(mut self) -> Result<Manifest> {
        self.manifest.artifacts.sort_by(|a, b| a.name.cmp(&b.name));
        let text = self.manifest.to_text();
        fs::write(self.dir.join("manifest.txt"), &text)?;
        Ok(self.manifest)
    }
}

/// Runs the configured experiment. `out_dir` overrides the config's
/// output directory; `threads` caps the worker pool (the output bytes do
/// not depend on it).
pub fn run(
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
    threads: Option<usize>,
) -> Result<Manifest> {
    config.validate()?;
    let dir: PathBuf = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&config.experiment.out_dir));
    match threads {
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
                .map_err(|e| Error::Experiment(e.to_string()))?;
            pool.install(|| run_inner(config, &dir))
        }
        None => run_inner(config, &dir),
    }
}

fn run_inner(config: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    let mut writer = Writer::new(dir)?;
    match config.experiment.name {
        ExperimentName::Invariant => run_invariant(config, &mut writer)?,
        ExperimentName::Rates => run_rates(config, &mut writer)?,
        ExperimentName::Gap => run_gap(config, &mut writer)?,
        ExperimentName::LyCheck => run_ly_check(config, &mut writer)?,
        ExperimentName::Stability => run_stability(config, &mut writer)?,
        ExperimentName::NormsSelftest => run_selftest_experiment(config, &mut writer)?,
    }
    writer.finish()
}

fn diagnostics_csv(diagnostics: &[StepDiagnostics]) -> String {
    let mut out = String::from(StepDiagnostics::csv_header());
    out.push('\n');
    for d in diagnostics {
        out.push_str(&d.csv_row());
        out.push('\n');
    }
    out
}

fn run_invariant(config: &ExperimentConfig, writer: &mut Writer) -> Result<()> {
    let system = config.build_system()?;
    let exp = &config.experiment;
    let result = invariant_measure(&system, exp.tol, exp.n_max)?;
    let (_, diagnostics) = transfer_n(&system, &result.measure, 4.min(exp.steps))?;
    let mut ledger = measured_gap_ledger(&system, exp.k, config.norms.p, config.norms.a1)?;
    with_invariant_norm(
        &mut ledger,
        result.measure.norm_s1(config.norms.p, config.norms.a1)?,
    );
    ledger.set("residual", result.residual, Provenance::Measured);
    ledger.set(
        "var_mu0",
        result.measure.path_variation(),
        Provenance::Measured,
    );
    let mut increments = String::from("step,increment\n");
    for (i, inc) in result.increments.iter().enumerate() {
        increments.push_str(&format!("{},{inc}\n", i + 1));
    }
    writer.write("invariant.csv", &increments)?;
    writer.write("invariant_diagnostics.csv", &diagnostics_csv(&diagnostics))?;
    writer.write("measure.csv", &result.measure.to_csv())?;
    writer.write("ledger.txt", &ledger.to_text())?;
    if !result.converged {
        return Err(Error::NotConverged {
            residual: result.residual,
            steps: result.steps,
        });
    }
    Ok(())
}

fn run_rates(config: &ExperimentConfig, writer: &mut Writer) -> Result<()> {
    let system = config.build_system()?;
    let exp = &config.experiment;
    let rate_grid = system.n.max(1024);
    let mut rng = sampling::rng(exp.rng_seed);
    let mut seeds = vec![GridDensity::from_fn(rate_grid, |x| x - 0.5)];
    for _ in 1..exp.seed_count {
        seeds.push(sampling::random_zero_mean_density(&mut rng, rate_grid, 10));
    }
    let base_fit = base_convergence_rate(&system.map, &seeds, exp.steps.max(4))?;
    let fiber_seeds = zero_mass_seeds(&system, exp.seed_count, exp.rng_seed);
    let fiber_fit = equilibrium_rate(&system, &fiber_seeds, exp.steps)?;

    let mut csv = String::from("kind,seed,step,norm\n");
    for (i, w) in base_fit.weak_norms.iter().enumerate() {
        for (step, v) in w.iter().enumerate() {
            csv.push_str(&format!("base_weak,{i},{step},{v}\n"));
        }
    }
    for (i, w) in fiber_fit.norms.iter().enumerate() {
        for (step, v) in w.iter().enumerate() {
            csv.push_str(&format!("fiber_weak,{i},{step},{v}\n"));
        }
    }
    writer.write("rates.csv", &csv)?;

    let mut ledger = crate::spectral::ConstantLedger::default();
    ledger.set("r", base_fit.rate, Provenance::Measured);
    ledger.set("d_base", base_fit.prefactor, Provenance::Measured);
    ledger.set("base_fit_residual", base_fit.residual, Provenance::Measured);
    ledger.set("beta1_hat", fiber_fit.beta1_hat, Provenance::Measured);
    ledger.set("d2_hat", fiber_fit.d2_hat, Provenance::Measured);
    ledger.set(
        "beta1_formula",
        system.alpha.sqrt().max(base_fit.rate.sqrt()),
        Provenance::Formula,
    );
    writer.write("ledger.txt", &ledger.to_text())?;

    let pooled: Vec<(f64, f64)> = (0..fiber_fit.norms[0].len())
        .map(|step| {
            (
                step as f64,
                fiber_fit.norms.iter().map(|w| w[step]).sum::<f64>(),
            )
        })
        .collect();
    let svg = render_curve(
        &pooled,
        None,
        "fiber weak-norm decay (pooled seeds)",
        Axes {
            log_x: false,
            log_y: true,
        },
    )?;
    writer.write("rates.svg", &svg)?;
    Ok(())
}

fn run_gap(config: &ExperimentConfig, writer: &mut Writer) -> Result<()> {
    let system = config.build_system()?;
    let exp = &config.experiment;
    let mut ledger = measured_gap_ledger(&system, exp.k, config.norms.p, config.norms.a1)?;
    let inv = invariant_measure(&system, exp.tol, exp.n_max)?;
    inv.ensure_converged()?;
    with_invariant_norm(
        &mut ledger,
        inv.measure.norm_s1(config.norms.p, config.norms.a1)?,
    );
    let seeds = zero_mass_seeds(&system, exp.seed_count, exp.rng_seed);
    let report = verify_gap_decay(
        &system,
        ledger.require("xi")?,
        ledger.require("k_gap")?,
        &seeds,
        exp.steps,
    )?;
    ledger.set("max_ratio", report.max_ratio, Provenance::Measured);
    writer.write("gap.csv", &report.to_csv())?;
    writer.write("ledger.txt", &ledger.to_text())?;
    Ok(())
}

fn run_ly_check(config: &ExperimentConfig, writer: &mut Writer) -> Result<()> {
    let system = config.build_system()?;
    let exp = &config.experiment;
    let report = ly_base_constants(
        &system.map,
        exp.k,
        config.norms.p,
        config.norms.a1,
        system.n.max(256),
    )?;
    let mut csv = String::from("cylinder,lo,hi,sup_g,var_g,est1_term\n");
    for (i, c) in report.per_cylinder.iter().enumerate() {
        csv.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            c.lo,
            c.hi,
            c.sup_g,
            c.var_g,
            c.est1_term()
        ));
    }
    writer.write("ly_cylinders.csv", &csv)?;
    let mut branches = String::from("branch,sup_g,var_g,length\n");
    for (i, b) in report.per_branch.iter().enumerate() {
        branches.push_str(&format!("{i},{},{},{}\n", b.sup_g, b.var_g, b.length));
    }
    writer.write("ly_branches.csv", &branches)?;
    let mut ledger = crate::spectral::ConstantLedger::default();
    ledger.set("beta0", report.beta0, Provenance::Measured);
    ledger.set("c_weak", report.c_estimate, Provenance::Measured);
    ledger.set("m1", report.m1, Provenance::Measured);
    ledger.set("k_iterate", report.k as f64, Provenance::Configured);
    writer.write("ledger.txt", &ledger.to_text())?;
    Ok(())
}

fn run_stability(config: &ExperimentConfig, writer: &mut Writer) -> Result<()> {
    let family = config.build_family()?;
    let exp = &config.experiment;
    let table = stability_curve(&family, &exp.deltas, exp.tol, exp.n_max)?;
    writer.write("stability.csv", &table.to_csv())?;

    let points: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.delta, r.l1_diff)).collect();
    let fit = fit_modulus(&points)?;
    let mut fit_ledger = crate::spectral::ConstantLedger::default();
    fit_ledger.set("c1", fit.c1, Provenance::Measured);
    fit_ledger.set("c2", fit.c2, Provenance::Measured);
    fit_ledger.set("quality", fit.quality, Provenance::Measured);
    writer.write("fit.txt", &fit_ledger.to_text())?;

    let overlay: Vec<(f64, f64)> = points.iter().map(|&(d, _)| (d, fit.eval(d))).collect();
    let svg = render_curve(
        &points,
        Some(&overlay),
        "invariant-measure stability vs perturbation size",
        Axes {
            log_x: true,
            log_y: true,
        },
    )?;
    writer.write("stability.svg", &svg)?;

    let checklist = uf_checklist(&family, &exp.deltas, exp.tol, exp.n_max)?;
    writer.write("checklist.csv", &checklist.to_csv())?;
    if table.rows.iter().any(|r| !r.converged) {
        return Err(Error::Experiment(
            "one or more stability points did not converge".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SelftestRow {
    pub check: &'static str,
    pub cases: usize,
    pub max_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub rows: Vec<SelftestRow>,
}

impl SelftestReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,cases,max_gap,tolerance,pass\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.check, r.cases, r.max_gap, r.tolerance, r.pass
            ));
        }
        out
    }
}

/// The norm-oracle property suite: LP vs value-grid DP, the equal-mass
/// CDF fast path, fiber contraction and the compaction drift bound.
pub fn norm_selftest(cases: usize, grid_n: usize, seed: u64) -> SelftestReport {
    let mut rng = sampling::rng(seed);
    let mut rows = Vec::new();

    let mut max_gap: f64 = 0.0;
    for _ in 0..cases {
        let mu = sampling::random_signed_atoms(&mut rng, 10);
        let lp = mu.bl_norm();
        let dp = bl_norm_oracle(&mu, grid_n);
        let bound = 2.0 / grid_n as f64 * mu.tv_mass();
        let gap = (lp - dp) / bound.max(1e-300);
        max_gap = max_gap.max(gap).max(if dp > lp + 1e-10 { 2.0 } else { 0.0 });
    }
    rows.push(SelftestRow {
        check: "lp_vs_dp_oracle",
        cases,
        max_gap,
        tolerance: 1.0,
        pass: max_gap <= 1.0,
    });

    let mut max_cdf: f64 = 0.0;
    for _ in 0..cases {
        let a = sampling::random_probability_atoms(&mut rng, 8).scaled(1.7);
        let b = sampling::random_probability_atoms(&mut rng, 6).scaled(1.7);
        let cdf = bl_distance_equal_mass(&a, &b).expect("equal masses");
        let lp = crate::atoms::bl_diff(&a, &b);
        max_cdf = max_cdf.max((cdf - lp).abs());
    }
    rows.push(SelftestRow {
        check: "cdf_vs_lp",
        cases,
        max_gap: max_cdf,
        tolerance: 1e-9,
        pass: max_cdf <= 1e-9,
    });

    let mut max_contraction: f64 = 0.0;
    for _ in 0..cases {
        use rand::Rng;
        let alpha = 0.1 + 0.8 * rng.random::<f64>();
        let shift = (1.0 - alpha) * rng.random::<f64>();
        let mut mu = sampling::random_signed_atoms(&mut rng, 8);
        // Balance to zero mass.
        let mass = mu.mass();
        mu = mu.add(&crate::atoms::SignedAtoms::new([(
            0.5,
            -mass,
            crate::atoms::Sign::Plus,
        )])
        .expect("balanced atom"));
        let pushed = mu.push_forward(|y| alpha * y + shift).expect("affine map stays inside");
        let excess = pushed.bl_norm() - alpha * mu.bl_norm();
        max_contraction = max_contraction.max(excess);
    }
    rows.push(SelftestRow {
        check: "zero_mass_fiber_contraction",
        cases,
        max_gap: max_contraction,
        tolerance: 1e-12,
        pass: max_contraction <= 1e-12,
    });

    let mut max_compact: f64 = 0.0;
    for _ in 0..cases.min(200) {
        let mu = sampling::random_signed_atoms(&mut rng, 64);
        let eta = 1e-4;
        let merged = mu.compact(eta);
        let drift = crate::atoms::bl_diff(&merged, &mu) - eta * mu.tv_mass();
        max_compact = max_compact.max(drift);
    }
    rows.push(SelftestRow {
        check: "compaction_drift",
        cases: cases.min(200),
        max_gap: max_compact,
        tolerance: 1e-12,
        pass: max_compact <= 1e-12,
    });

    SelftestReport { rows }
}

fn run_selftest_experiment(config: &ExperimentConfig, writer: &mut Writer) -> Result<()> {
    let report = norm_selftest(
        config.experiment.seed_count.max(1) * 200,
        1024,
        config.experiment.rng_seed,
    );
    writer.write("selftest.csv", &report.to_csv())?;
    if !report.all_pass() {
        return Err(Error::Experiment("norm selftest failed".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EXAMPLE_CONFIG;

    #[test]
    fn selftest_passes() {
        let report = norm_selftest(100, 512, 3);
        assert!(report.all_pass(), "{}", report.to_csv());
    }

    #[test]
    fn invariant_run_is_deterministic() {
        let text = EXAMPLE_CONFIG
            .replace("family = \"lorenz_cusp\"", "family = \"trivial_product\"")
            .replace("name = \"stability\"", "name = \"invariant\"")
            .replace("base_cells = 128", "base_cells = 32");
        let config = ExperimentConfig::parse(&text).unwrap();
        let dir_a = std::env::temp_dir().join("fibergap_test_inv_a");
        let dir_b = std::env::temp_dir().join("fibergap_test_inv_b");
        let a = run(&config, Some(&dir_a), Some(1)).unwrap();
        let b = run(&config, Some(&dir_b), Some(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.artifacts.iter().any(|x| x.name == "ledger.txt"));
        std::fs::remove_dir_all(dir_a).ok();
        std::fs::remove_dir_all(dir_b).ok();
    }

    #[test]
    fn selftest_experiment_writes_artifacts() {
        let text = EXAMPLE_CONFIG.replace("name = \"stability\"", "name = \"norms_selftest\"");
        let config = ExperimentConfig::parse(&text).unwrap();
        let dir = std::env::temp_dir().join("fibergap_test_selftest");
        let manifest = run(&config, Some(&dir), None).unwrap();
        assert!(manifest.artifacts.iter().any(|a| a.name == "selftest.csv"));
        std::fs::remove_dir_all(dir).ok();
    }
}
