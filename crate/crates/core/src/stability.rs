//! Parametric perturbation families of skew products and the
//! quantitative statistical-stability experiment.
//!
//! A family perturbs a base system two ways: the base map is conjugated,
//! `T_delta = T0 (sigma_delta(x))` with `sigma_delta(x) = x + delta s(x)`,
//! which gives a closed-form Skorokhod bound, and the fiber map is
//! shifted, `G_delta = G0 + delta w(x) v(y)`. Invariant measures along a
//! delta grid produce the stability curve, fitted against the modulus
//! `c1 delta |log delta| + c2 delta` by nonnegative least squares.

use std::sync::Arc;

use rayon::prelude::*;

use crate::base_constants::ly_base_constants;
use crate::error::{Error, Result};
use crate::fibered::{DisintegratedMeasure, FiberSystem};
use crate::interval_map::{conjugated, Conjugator};
use crate::poly::Poly;
use crate::sampling;
use crate::spectral::{invariant_measure, InvariantResult};
use crate::transfer::{transfer_once, transfer_step_slack};

#[derive(Debug, Clone)]
pub struct PerturbationFamily {
    base: FiberSystem,
    /// Base conjugator drift `s`; `sigma_delta(x) = x + delta s(x)`.
    pub s: Poly,
    /// Fiber shift profiles: `G_delta = G0 + delta w(x) v(y)`.
    pub w: Poly,
    pub v: Poly,
    pub delta_max: f64,
}

impl PerturbationFamily {
    pub fn new(base: FiberSystem, s: Poly, w: Poly, v: Poly, delta_max: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta_max) {
            return Err(Error::BadInput {
                name: "delta_max",
                value: delta_max,
            });
        }
        // The largest member must still be a diffeomorphic conjugation.
        if delta_max > 0.0 {
            Conjugator::new(delta_max, s.clone())?;
        }
        Ok(PerturbationFamily {
            base,
            s,
            w,
            v,
            delta_max,
        })
    }

    pub fn base(&self) -> &FiberSystem {
        &self.base
    }

    fn drift_is_zero(&self) -> bool {
        self.s.0.iter().all(|&c| c == 0.0)
    }

    pub fn conjugator(&self, delta: f64) -> Result<Conjugator> {
        Conjugator::new(delta, self.s.clone())
    }

    /// The member system at parameter `delta`. `delta = 0` returns the
    /// base unchanged, so baseline comparisons are bit-exact.
    pub fn member(&self, delta: f64) -> Result<FiberSystem> {
        if delta < 0.0 || delta > self.delta_max {
            return Err(Error::BadInput {
                name: "delta",
                value: delta,
            });
        }
        if delta == 0.0 {
            return Ok(self.base.clone());
        }
        let map = if self.drift_is_zero() {
            self.base.map.clone()
        } else {
            conjugated(&self.base.map, &self.conjugator(delta)?)
        };
        let base_fiber = self.base.fiber_map();
        let (w, v) = (self.w.clone(), self.v.clone());
        let fiber =
            Arc::new(move |x: f64, y: f64| base_fiber(x, y) + delta * w.eval(x) * v.eval(y));
        let alpha = self.base.alpha + delta * self.w.sup_abs_on_unit(256) * self.v.derivative().sup_abs_on_unit(256);
        let h_lip = self.base.h_lip + delta * self.w.derivative().sup_abs_on_unit(256) * self.v.sup_abs_on_unit(256);
        if alpha >= 1.0 {
            return Err(Error::BadInput {
                name: "alpha",
                value: alpha,
            });
        }
        let system = FiberSystem::new(
            format!("{}@delta={delta}", self.base.name),
            map,
            fiber,
            alpha,
            h_lip,
            self.base.n,
            self.base.fiber_atoms,
            self.base.atom_budget,
            self.base.merge_radius,
        );
        system.validate(32)?;
        Ok(system)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SkorokhodBound {
    pub eps: f64,
    /// `eps / delta`, the reported linear slope.
    pub slope: f64,
}

/// Closed-form Skorokhod bound for the conjugated pair `(T0, T_delta)`:
/// the reparametrization is `sigma_delta` itself on the full interval, so
/// `d_S <= max(sup |sigma - id|, sup |1/sigma' - 1|)`.
pub fn skorokhod_bound(family: &PerturbationFamily, delta: f64) -> Result<SkorokhodBound> {
    if delta == 0.0 {
        return Ok(SkorokhodBound { eps: 0.0, slope: 0.0 });
    }
    if delta < 0.0 || delta > family.delta_max {
        return Err(Error::BadInput {
            name: "delta",
            value: delta,
        });
    }
    let sigma = family.conjugator(delta)?;
    let eps = sigma.sup_drift(1024).max(sigma.sup_inverse_slope_defect(1024));
    Ok(SkorokhodBound {
        eps,
        slope: eps / delta,
    })
}

#[derive(Debug, Clone)]
pub struct ChecklistRow {
    pub delta: f64,
    /// UF1 witness: strong norm of the member's invariant measure.
    pub strong_norm: f64,
    pub skorokhod_eps: f64,
    pub fiber_shift_sup: f64,
    /// UBV4 witnesses.
    pub lambda1: f64,
    pub max_var_g: f64,
    pub max_sup_g: f64,
    pub h_lip: f64,
    /// UF4 witness: measured weak-operator bound on test measures.
    pub m2_witness: f64,
}

#[derive(Debug, Clone)]
pub struct ChecklistReport {
    pub rows: Vec<ChecklistRow>,
    /// UF1 constant: max strong norm over the grid.
    pub m_uniform: f64,
    /// UF4 constant: max weak-operator witness over the grid.
    pub m2_uniform: f64,
}

impl ChecklistReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "delta,strong_norm,skorokhod_eps,fiber_shift_sup,lambda1,max_var_g,max_sup_g,h_lip,m2_witness\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.delta,
                r.strong_norm,
                r.skorokhod_eps,
                r.fiber_shift_sup,
                r.lambda1,
                r.max_var_g,
                r.max_sup_g,
                r.h_lip,
                r.m2_witness
            ));
        }
        out
    }
}

/// Slack factor allowed on the UBV2 linear bound `d_S <= c delta`.
pub const UBV2_SLOPE_CAP: f64 = 1.1;

/// Verifies the uniform-family requirements over a delta grid, returning
/// the per-delta witnesses. A violated item aborts with
/// `ChecklistFailure` naming it.
pub fn uf_checklist(
    family: &PerturbationFamily,
    deltas: &[f64],
    tol: f64,
    n_max: usize,
) -> Result<ChecklistReport> {
    assert!(!deltas.is_empty());
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        // UBV3: the fiber maps stay delta-close (sampled sup).
        let member = family.member(delta)?;
        let mut shift_sup: f64 = 0.0;
        for t in 0..=64 {
            let x = t as f64 / 64.0;
            for u in 0..=16 {
                let y = u as f64 / 16.0;
                shift_sup = shift_sup.max((family.base.g(x, y) - member.g(x, y)).abs());
            }
        }
        if shift_sup > delta * (1.0 + 1e-9) {
            return Err(Error::ChecklistFailure {
                item: "UBV3",
                delta,
                detail: format!("sup |G0 - G_delta| = {shift_sup} > delta"),
            });
        }
        // UBV2: Skorokhod distance linear in delta.
        let sk = skorokhod_bound(family, delta)?;
        if sk.eps > delta * UBV2_SLOPE_CAP {
            return Err(Error::ChecklistFailure {
                item: "UBV2",
                delta,
                detail: format!("d_S bound {} > {UBV2_SLOPE_CAP} delta", sk.eps),
            });
        }
        // UBV4: uniform expansion and branch regularity witnesses.
        let Some((_, lambda1)) = member.map.check_expansion(3, 512) else {
            return Err(Error::ChecklistFailure {
                item: "UBV4",
                delta,
                detail: "no expanding iterate found".into(),
            });
        };
        let stats = member.map.branch_g_stats(512);
        let max_var_g = stats.iter().map(|s| s.var_g).fold(0.0f64, f64::max);
        let max_sup_g = stats.iter().map(|s| s.sup_g).fold(0.0f64, f64::max);
        // UF1: strong norm of the member's invariant measure.
        let inv = invariant_measure(&member, tol, n_max)?;
        inv.ensure_converged()?;
        let strong_norm = inv.measure.norm_s1(inv.measure.p, inv.measure.a1)?;
        // UF4: weak-operator bound on random signed measures.
        let mut rng = sampling::rng(0xf00d + (delta * 1e6) as u64);
        let mut m2_witness: f64 = 0.0;
        for _ in 0..5 {
            let mu = sampling::random_signed_measure(&mut rng, member.n, 4);
            let image = transfer_once(&member, &mu)?;
            let denom = mu.norm_weak_l1();
            if denom > 1e-12 {
                m2_witness = m2_witness.max(image.norm_weak_l1() / denom);
            }
        }
        let slack = 1.0 + 2.0 * member.merge_radius + 1e-6;
        if m2_witness > slack {
            return Err(Error::ChecklistFailure {
                item: "UF4",
                delta,
                detail: format!("weak operator bound {m2_witness} > {slack}"),
            });
        }
        rows.push(ChecklistRow {
            delta,
            strong_norm,
            skorokhod_eps: sk.eps,
            fiber_shift_sup: shift_sup,
            lambda1,
            max_var_g,
            max_sup_g,
            h_lip: member.h_lip,
            m2_witness,
        });
    }
    let m_uniform = rows.iter().map(|r| r.strong_norm).fold(0.0f64, f64::max);
    let m2_uniform = rows.iter().map(|r| r.m2_witness).fold(0.0f64, f64::max);
    Ok(ChecklistReport {
        rows,
        m_uniform,
        m2_uniform,
    })
}

/// `||(F0* - Fdelta*) f||_1` for a fixed measure on the shared grid.
pub fn discrepancy(
    f0_system: &FiberSystem,
    fdelta_system: &FiberSystem,
    f: &DisintegratedMeasure,
) -> Result<f64> {
    if f0_system.n != fdelta_system.n {
        return Err(Error::GridMismatch(f0_system.n, fdelta_system.n));
    }
    let a = transfer_once(f0_system, f)?;
    let b = transfer_once(fdelta_system, f)?;
    Ok(a.sub(&b)?.norm_weak_l1())
}

#[derive(Debug, Clone)]
pub struct StabilityRow {
    pub delta: f64,
    pub l1_diff: f64,
    pub var_fdelta: f64,
    pub discrepancy: f64,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct StabilityTable {
    pub rows: Vec<StabilityRow>,
    pub tol: f64,
}

impl StabilityTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,l1_diff,var_fdelta,discrepancy,residual\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.delta, r.l1_diff, r.var_fdelta, r.discrepancy, r.residual
            ));
        }
        out
    }
}

/// Computes the invariant measure of every member over the delta list
/// (descending), comparing each to the unperturbed one in the weak norm.
/// All members iterate from the same Lebesgue^2 seed with the shared
/// tolerance, so curve noise stays within `2 tol`.
pub fn stability_curve(
    family: &PerturbationFamily,
    deltas: &[f64],
    tol: f64,
    n_max: usize,
) -> Result<StabilityTable> {
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("delta list must be strictly descending".into()));
    }
    if deltas.iter().any(|&d| d < 0.0) {
        return Err(Error::Config("delta list must be nonnegative".into()));
    }
    let base = family.member(0.0)?;
    let f0 = invariant_measure(&base, tol, n_max)?;
    let f0 = f0.ensure_converged()?;
    let results: Vec<Result<StabilityRow>> = deltas
        .par_iter()
        .map(|&delta| {
            let member = family.member(delta)?;
            let inv: InvariantResult = invariant_measure(&member, tol, n_max)?;
            let l1_diff = inv.measure.sub(&f0.measure)?.norm_weak_l1();
            let var_fdelta = inv.measure.path_variation();
            let disc = discrepancy(&base, &member, &inv.measure)?;
            Ok(StabilityRow {
                delta,
                l1_diff,
                var_fdelta,
                discrepancy: disc,
                residual: inv.residual,
                converged: inv.converged,
            })
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(StabilityTable { rows, tol })
}

#[derive(Debug, Clone, Copy)]
pub struct ModulusFit {
    pub c1: f64,
    pub c2: f64,
    /// Relative l2 residual of the fit.
    pub quality: f64,
}

impl ModulusFit {
    pub fn eval(&self, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 0.0;
        }
        self.c1 * delta * delta.ln().abs() + self.c2 * delta
    }
}

/// Nonnegative least squares for `y ~ c1 delta |log delta| + c2 delta`
/// over `(delta, y)` pairs; rows with `delta <= 0` are ignored.
pub fn fit_modulus(points: &[(f64, f64)]) -> Result<ModulusFit> {
    let data: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|(d, _)| *d > 0.0)
        .map(|&(d, y)| (d * d.ln().abs(), d, y))
        .collect();
    let distinct = {
        let mut ds: Vec<f64> = points.iter().map(|p| p.0).filter(|&d| d > 0.0).collect();
        ds.sort_by(f64::total_cmp);
        ds.dedup();
        ds.len()
    };
    if distinct < 3 {
        return Err(Error::InsufficientData {
            need: 3,
            got: distinct,
        });
    }
    let a: f64 = data.iter().map(|(f1, _, _)| f1 * f1).sum();
    let b: f64 = data.iter().map(|(f1, f2, _)| f1 * f2).sum();
    let c: f64 = data.iter().map(|(_, f2, _)| f2 * f2).sum();
    let d: f64 = data.iter().map(|(f1, _, y)| f1 * y).sum();
    let e: f64 = data.iter().map(|(_, f2, y)| f2 * y).sum();
    let det = a * c - b * b;
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    if det.abs() > 1e-300 {
        candidates.push(((c * d - b * e) / det, (a * e - b * d) / det));
    }
    candidates.push((if a > 0.0 { (d / a).max(0.0) } else { 0.0 }, 0.0));
    candidates.push((0.0, if c > 0.0 { (e / c).max(0.0) } else { 0.0 }));
    let residual = |c1: f64, c2: f64| -> f64 {
        data.iter()
            .map(|(f1, f2, y)| (y - c1 * f1 - c2 * f2).powi(2))
            .sum::<f64>()
    };
    let best = candidates
        .into_iter()
        .filter(|&(c1, c2)| c1 >= 0.0 && c2 >= 0.0)
        .map(|(c1, c2)| (c1, c2, residual(c1, c2)))
        .min_by(|x, y| x.2.total_cmp(&y.2))
        .expect("at least one nonnegative candidate");
    let y_norm: f64 = data.iter().map(|(_, _, y)| y * y).sum();
    let quality = if y_norm > 0.0 {
        (best.2 / y_norm).sqrt()
    } else {
        0.0
    };
    Ok(ModulusFit {
        c1: best.0,
        c2: best.1,
        quality,
    })
}

/// The variation Lasota-Yorke constants for one system:
/// `K3 = max_i sup(g_i) var_diamond(G) + max_i (var g_i + 2 sup g_i)/m(P_i)`,
/// `K2 = B3 + C2` from the base ledger, `beta` the est1 quantity at `k`,
/// and `C0 = max(1, K3 max(K2, 1)/(1 - beta))`.
#[derive(Debug, Clone, Copy)]
pub struct VarChain {
    pub k: usize,
    pub beta: f64,
    pub k2: f64,
    pub k3: f64,
    pub c0: f64,
    pub var_diamond: f64,
}

pub fn var_chain_constants(system: &FiberSystem, k: usize, p: f64, a1: f64) -> Result<VarChain> {
    let ly = ly_base_constants(&system.map, k, p, a1, system.n.max(256))?;
    let b3 = ly.m1 / ly.beta0;
    let c2 = ly.c_estimate / (1.0 - ly.beta0);
    let k2 = b3 + c2;
    let vd = system.var_diamond_default();
    let stats = system.map.branch_g_stats(512);
    let first = stats.iter().map(|s| s.sup_g).fold(0.0f64, f64::max) * vd.surrogate;
    let second = stats
        .iter()
        .map(|s| (s.var_g + 2.0 * s.sup_g) / s.length)
        .fold(0.0f64, f64::max);
    let k3 = first + second;
    let beta = ly.beta0;
    let c0 = 1.0f64.max(k3 * k2.max(1.0) / (1.0 - beta));
    Ok(VarChain {
        k,
        beta,
        k2,
        k3,
        c0,
        var_diamond: vd.surrogate,
    })
}

#[derive(Debug, Clone)]
pub struct UniformVarRow {
    pub delta: f64,
    pub var_fdelta: f64,
    pub c0_delta: f64,
}

#[derive(Debug, Clone)]
pub struct UniformVarReport {
    pub rows: Vec<UniformVarRow>,
    pub max_var: f64,
    /// `2 sup_delta C_0,delta`.
    pub c0_bar: f64,
    pub bound_holds: bool,
}

/// Measures `Var(f_delta)` along the family against the uniform bound
/// `C0_bar = 2 sup_delta C_0,delta` from the variation chain at iterate
/// `k`; violations are reported data.
pub fn uniform_var_bound(
    family: &PerturbationFamily,
    deltas: &[f64],
    k: usize,
    tol: f64,
    n_max: usize,
    p: f64,
    a1: f64,
) -> Result<UniformVarReport> {
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let member = family.member(delta)?;
        let inv = invariant_measure(&member, tol, n_max)?;
        inv.ensure_converged()?;
        let chain = var_chain_constants(&member, k, p, a1)?;
        rows.push(UniformVarRow {
            delta,
            var_fdelta: inv.measure.path_variation(),
            c0_delta: chain.c0,
        });
    }
    let max_var = rows.iter().map(|r| r.var_fdelta).fold(0.0f64, f64::max);
    let c0_bar = 2.0 * rows.iter().map(|r| r.c0_delta).fold(0.0f64, f64::max);
    Ok(UniformVarReport {
        rows,
        max_var,
        c0_bar,
        bound_holds: max_var <= c0_bar,
    })
}

/// The fixed-point decomposition of Lemma `gen`:
/// `||f_delta - f0||_1 <= ||F0*^N (f_delta - f0)||_1 + N (1 + slack) disc`,
/// checked directly by iteration for `N <= n_cap`.
pub fn check_fixed_point_decomposition(
    family: &PerturbationFamily,
    delta: f64,
    tol: f64,
    n_max: usize,
    n_cap: usize,
) -> Result<bool> {
    let base = family.member(0.0)?;
    let member = family.member(delta)?;
    let f0 = invariant_measure(&base, tol, n_max)?;
    let fd = invariant_measure(&member, tol, n_max)?;
    let disc = discrepancy(&base, &member, &fd.measure)?;
    let target = fd.measure.sub(&f0.measure)?;
    let l1_diff = target.norm_weak_l1();
    let slack = transfer_step_slack(&base, &target) + 2.0 * tol;
    let mut iter = target.clone();
    for n in 1..=n_cap {
        iter = transfer_once(&base, &iter)?;
        let bound = iter.norm_weak_l1() + n as f64 * (disc + slack);
        if l1_diff > bound + 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{doubling_affine, trivial_product, GridSpec};

    fn grid(n: usize) -> GridSpec {
        GridSpec {
            n,
            fiber_atoms: 16,
            atom_budget: 16384,
            merge_radius: 1e-5,
        }
    }

    fn affine_family(delta_max: f64) -> PerturbationFamily {
        let base = doubling_affine(1.0 / 3.0, grid(64)).unwrap();
        PerturbationFamily::new(
            base,
            Poly(vec![0.0, 1.0, -1.0]),
            Poly::constant(1.0),
            Poly(vec![0.0, 1.0, -1.0]),
            delta_max,
        )
        .unwrap()
    }

    fn shift_family(delta_max: f64) -> PerturbationFamily {
        // Pure fiber shift on system B: G_delta = y/2 + delta.
        let base = trivial_product(0.5, grid(64)).unwrap();
        PerturbationFamily::new(
            base,
            Poly::constant(0.0),
            Poly::constant(1.0),
            Poly::constant(1.0),
            delta_max,
        )
        .unwrap()
    }

    #[test]
    fn skorokhod_bound_matches_hand_maximization() {
        let family = affine_family(0.05);
        let delta = 0.01;
        let bound = skorokhod_bound(&family, delta).unwrap();
        let expected = delta / (1.0 - delta);
        assert!((bound.eps - expected).abs() < 1e-9, "{}", bound.eps);
        assert_eq!(skorokhod_bound(&family, 0.0).unwrap().eps, 0.0);
    }

    #[test]
    fn folding_conjugator_is_rejected() {
        let base = doubling_affine(1.0 / 3.0, grid(32)).unwrap();
        let err = PerturbationFamily::new(
            base,
            Poly(vec![0.0, -30.0, 30.0]),
            Poly::constant(0.0),
            Poly::constant(0.0),
            0.1,
        );
        assert!(matches!(err, Err(Error::NotDiffeomorphism { .. })));
    }

    #[test]
    fn checklist_passes_on_the_affine_family() {
        let family = affine_family(0.05);
        let report = uf_checklist(&family, &[0.04, 0.02, 0.01], 1e-3, 64).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.m2_uniform <= 1.0 + 1e-4);
        assert!(report.rows.iter().all(|r| r.lambda1 > 1.0));
        assert!(report.m_uniform.is_finite());
    }

    #[test]
    fn checklist_catches_oversized_fiber_shift() {
        let base = trivial_product(0.5, grid(32)).unwrap();
        let family = PerturbationFamily::new(
            base,
            Poly::constant(0.0),
            Poly::constant(2.0),
            Poly::constant(1.0),
            0.05,
        )
        .unwrap();
        let err = uf_checklist(&family, &[0.02], 1e-3, 32);
        assert!(matches!(
            err,
            Err(Error::ChecklistFailure { item: "UBV3", .. })
        ));
    }

    #[test]
    fn checklist_zero_delta_has_zero_discrepancies() {
        let family = affine_family(0.05);
        let report = uf_checklist(&family, &[0.0], 1e-3, 64).unwrap();
        assert_eq!(report.rows[0].skorokhod_eps, 0.0);
        assert_eq!(report.rows[0].fiber_shift_sup, 0.0);
    }

    #[test]
    fn discrepancy_vanishes_at_zero_delta() {
        let family = affine_family(0.05);
        let base = family.member(0.0).unwrap();
        let mu = base.lebesgue2();
        let d = discrepancy(&base, &base, &mu).unwrap();
        assert!(d <= 1e-12);
    }

    #[test]
    fn pure_fiber_shift_discrepancy_is_linear() {
        let family = shift_family(0.1);
        let base = family.member(0.0).unwrap();
        let mu = base.lebesgue2();
        for delta in [0.04, 0.02] {
            let member = family.member(delta).unwrap();
            let d = discrepancy(&base, &member, &mu).unwrap();
            let slack = transfer_step_slack(&base, &mu);
            assert!(d <= delta + slack, "delta {delta}: discrepancy {d}");
            assert!(d >= delta * 0.5, "shift should move mass: {d}");
        }
    }

    #[test]
    fn shift_family_curve_matches_hand_fixed_points() {
        // Invariant measure of G = y/2 + delta is Lebesgue x delta_{2 delta}.
        let family = shift_family(0.1);
        let tol = 1e-4;
        let table = stability_curve(&family, &[0.04, 0.02, 0.01], tol, 128).unwrap();
        for row in &table.rows {
            let expected = 2.0 * row.delta;
            assert!(row.converged);
            assert!(
                (row.l1_diff - expected).abs() <= 2.0 * tol,
                "delta {}: diff {} vs {expected}",
                row.delta,
                row.l1_diff
            );
            assert!(row.var_fdelta <= 2.0 * tol + 1e-6);
        }
    }

    #[test]
    fn curve_rejects_unsorted_deltas() {
        let family = shift_family(0.1);
        let err = stability_curve(&family, &[0.01, 0.02], 1e-3, 64);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn modulus_fit_round_trips() {
        let deltas: [f64; 5] = [0.04, 0.02, 0.01, 0.005, 0.0025];
        let synth: Vec<(f64, f64)> = deltas
            .iter()
            .map(|&d| (d, 2.0 * d * d.ln().abs() + 1.0 * d))
            .collect();
        let fit = fit_modulus(&synth).unwrap();
        assert!((fit.c1 - 2.0).abs() < 1e-6, "c1 {}", fit.c1);
        assert!((fit.c2 - 1.0).abs() < 1e-6, "c2 {}", fit.c2);
        assert!(fit.quality < 1e-9);

        let linear: Vec<(f64, f64)> = deltas.iter().map(|&d| (d, 3.0 * d)).collect();
        let fit = fit_modulus(&linear).unwrap();
        assert!(fit.c1 <= 1e-6, "c1 {}", fit.c1);
        assert!((fit.c2 - 3.0).abs() < 1e-6, "c2 {}", fit.c2);
    }

    #[test]
    fn modulus_fit_needs_three_points() {
        let err = fit_modulus(&[(0.02, 0.1), (0.01, 0.05)]);
        assert!(matches!(err, Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn var_chain_matches_hand_instantiation_for_system_a() {
        // Doubling branches: sup g = 1/2, var g = 0, length 1/2, so
        // K3 = (1/2) var_diamond(G) + 2 with var_diamond = 1 - alpha.
        let system = doubling_affine(1.0 / 3.0, grid(64)).unwrap();
        let chain = var_chain_constants(&system, 2, 1.0, 0.25).unwrap();
        let expected_k3 = 0.5 * (1.0 - 1.0 / 3.0) + 2.0;
        assert!((chain.k3 - expected_k3).abs() < 1e-6, "k3 {}", chain.k3);
        assert!((chain.beta - 0.75).abs() < 1e-12);
        assert!(chain.c0 >= 1.0);
    }

    #[test]
    fn uniform_var_bound_holds_on_shift_family() {
        let family = shift_family(0.1);
        let report = uniform_var_bound(&family, &[0.04, 0.02], 2, 1e-3, 64, 1.0, 0.25).unwrap();
        assert!(report.bound_holds);
        assert!(report.max_var <= 1e-2);
        assert!(report.c0_bar >= 2.0);
    }

    #[test]
    fn fixed_point_decomposition_bound() {
        let family = shift_family(0.1);
        assert!(check_fixed_point_decomposition(&family, 0.02, 1e-4, 128, 8).unwrap());
    }
}
