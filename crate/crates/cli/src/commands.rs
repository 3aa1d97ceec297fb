//! Command implementations. Each command computes everything first and
//! returns its files as an [`Outcome`]; the caller writes them, so a failed
//! command leaves no partial output.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crone_core::experiments::{
    design_identity_sweep, gain_advantage_table, noise_table, tracking_table, DesignIdentityRow,
    GainAdvantageRow, NoiseRow, TimeDomainSetup, TrackingRow,
};
use crone_core::lti::{logspace, ss_to_tf, FrequencyResponse};
use crone_core::reset::{make_clegg, make_fore};
use crone_core::sim::{
    csv_num, fourth_order_trajectory, nominal_feedforward, rms_error, simulate_controller,
};
use crone_core::stability::{check_quadratic_stability, closed_loop_for, StabilityOutcome};
use crone_core::synthesis::synthesize;
use crone_core::sysid::{compare_with_open_loop, identify_s_t, SimulatedLoop};
use crone_core::{CroneController, RationalTf, ResetStateSpace, ResetTuning, Strategy};
use serde::Serialize;
use serde_json::json;

use crate::config::ProjectConfig;
use crate::error::{CliError, CliResult};

/// Files produced by a command and whether its embedded checks passed.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub passed: bool,
    pub summary: String,
}

impl Outcome {
    fn new(passed: bool, summary: impl Into<String>) -> Self {
        Self {
            files: Vec::new(),
            passed,
            summary: summary.into(),
        }
    }

    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn add_json(&mut self, name: &str, value: &impl Serialize) {
        let mut s = serde_json::to_string_pretty(value).expect("report serializes");
        s.push('\n');
        self.add(name, s);
    }

    /// Writes every file under `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            std::fs::write(&path, contents).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Frequency grid in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub fmin: f64,
    pub fmax: f64,
    pub points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            fmin: 1.0,
            fmax: 1e4,
            points: 400,
        }
    }
}

impl Grid {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.fmin > 0.0 && self.fmin < self.fmax && self.fmax.is_finite()) {
            return Err(CliError::Invalid(format!(
                "grid: need 0 < fmin < fmax, got {} .. {}",
                self.fmin, self.fmax
            )));
        }
        if self.points < 2 {
            return Err(CliError::Invalid("grid: points must be at least 2".into()));
        }
        Ok(())
    }

    pub fn hz(&self) -> Vec<f64> {
        logspace(self.fmin, self.fmax, self.points)
    }
}

/// Which transfer a `bode` / `df` command reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Element {
    /// `Σ_nr · Σ*_r` of the configured design.
    #[default]
    Controller,
    /// `Σ*_r` alone.
    Reset,
    /// Clegg integrator, full reset.
    Clegg,
    /// First-order reset element with corner at the crossover frequency.
    Fore,
}

fn design(cfg: &ProjectConfig, tuning: ResetTuning) -> CliResult<CroneController> {
    let plant = cfg.plant.rational()?.without_delay();
    Ok(synthesize(
        &cfg.crone.spec()?,
        &plant,
        cfg.strategy,
        tuning,
        cfg.crone.cells,
    )?)
}

fn fr_csv(fr: &FrequencyResponse) -> String {
    let mut s = String::from("freq_hz,mag_db,phase_deg\n");
    let mag = fr.magnitude_db();
    let phase = fr.phase_deg();
    for (i, w) in fr.freqs().iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{}",
            csv_num(w / (2.0 * PI)),
            csv_num(mag[i]),
            csv_num(phase[i])
        );
    }
    s
}

fn matrix_rows(m: &crone_core::nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn reset_json(r: &ResetStateSpace) -> serde_json::Value {
    json!({
        "a": matrix_rows(&r.a),
        "b": r.b.iter().collect::<Vec<_>>(),
        "c": r.c.iter().collect::<Vec<_>>(),
        "d": r.d,
        "a_rho": matrix_rows(&r.a_rho),
    })
}

/// Coefficients scaled so the denominator is monic.
fn monic(tf: &RationalTf) -> serde_json::Value {
    let lead = tf.den()[0];
    json!({
        "num": tf.num().iter().map(|c| c / lead).collect::<Vec<_>>(),
        "den": tf.den().iter().map(|c| c / lead).collect::<Vec<_>>(),
    })
}

pub fn synthesis_report(cfg: &ProjectConfig, c: &CroneController) -> serde_json::Value {
    json!({
        "strategy": c.strategy,
        "tuning": c.tuning,
        "crone_hz": cfg.crone,
        "nu": c.nu,
        "nu_star": c.nu_star,
        "phi_r_deg": c.phi_r_deg,
        "c0": c.c0,
        "sigma_nr": {
            "order": c.sigma_nr.order(),
            "sections": c.sigma_nr.sections,
            "tf": monic(&c.sigma_nr.to_tf()),
        },
        "sigma_r": c.sigma_r.as_ref().map(|r| monic(&ss_to_tf(&r.base()))),
        "sigma_r_star": c.sigma_r_star.as_ref().map(reset_json),
    })
}

pub fn cmd_synthesize(cfg: &ProjectConfig) -> CliResult<Outcome> {
    let c = design(cfg, cfg.tuning)?;
    let mut out = Outcome::new(
        true,
        format!(
            "{}: nu = {:.6}, nu* = {:.6}, phi_r = {:.4} deg, C0 = {:.6e}",
            c.strategy, c.nu, c.nu_star, c.phi_r_deg, c.c0
        ),
    );
    out.add_json("synthesis.json", &synthesis_report(cfg, &c));
    Ok(out)
}

fn element_response(
    cfg: &ProjectConfig,
    element: Element,
    grid: &[f64],
    df: bool,
) -> CliResult<FrequencyResponse> {
    let reset_fr = |r: &ResetStateSpace| -> CliResult<FrequencyResponse> {
        Ok(if df {
            r.df_response(grid)?
        } else {
            r.base_response(grid)?
        })
    };
    Ok(match element {
        Element::Controller => {
            let c = design(cfg, cfg.tuning)?;
            let values = grid
                .iter()
                .map(|&w| {
                    Ok(if df {
                        c.controller_df(w)?
                    } else {
                        c.controller_base(w)
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            FrequencyResponse::new(grid.to_vec(), values)?
        }
        Element::Reset => {
            let c = design(cfg, cfg.tuning)?;
            match &c.sigma_r_star {
                Some(r) => reset_fr(r)?,
                None => reset_fr(&ResetStateSpace::gain(1.0))?,
            }
        }
        Element::Clegg => reset_fr(&make_clegg())?,
        Element::Fore => reset_fr(&make_fore(2.0 * PI * cfg.crone.f_cg)?)?,
    })
}

fn rad(grid: &Grid) -> Vec<f64> {
    grid.hz().iter().map(|f| 2.0 * PI * f).collect()
}

/// Base linear response (reset law ignored).
pub fn cmd_bode(cfg: &ProjectConfig, grid: &Grid, element: Element) -> CliResult<Outcome> {
    grid.validate()?;
    let fr = element_response(cfg, element, &rad(grid), false)?;
    let mut out = Outcome::new(true, format!("bode of {element:?}, {} points", fr.len()));
    out.add("bode.csv", fr_csv(&fr));
    Ok(out)
}

/// Describing function.
pub fn cmd_df(cfg: &ProjectConfig, grid: &Grid, element: Element) -> CliResult<Outcome> {
    grid.validate()?;
    let fr = element_response(cfg, element, &rad(grid), true)?;
    let mut out = Outcome::new(
        true,
        format!("describing function of {element:?}, {} points", fr.len()),
    );
    out.add("df.csv", fr_csv(&fr));
    Ok(out)
}

/// `P · Σ_nr · DF(Σ*_r)` on the grid, with the crossover frequency added as
/// an extra row when it lies inside the grid.
pub fn cmd_openloop(cfg: &ProjectConfig, grid: &Grid) -> CliResult<Outcome> {
    grid.validate()?;
    let c = design(cfg, cfg.tuning)?;
    let plant = cfg.plant.rational()?.without_delay();
    let mut hz = grid.hz();
    if cfg.crone.f_cg > grid.fmin && cfg.crone.f_cg < grid.fmax && !hz.contains(&cfg.crone.f_cg) {
        hz.push(cfg.crone.f_cg);
        hz.sort_by(f64::total_cmp);
    }
    let w: Vec<f64> = hz.iter().map(|f| 2.0 * PI * f).collect();
    let fr = c.open_loop_df(&plant, &w)?;
    let at = plant.eval(c.spec.w_cg) * c.controller_df(c.spec.w_cg)?;
    let mut out = Outcome::new(
        true,
        format!(
            "open loop at crossover: {:.6} dB, {:.4} deg",
            20.0 * at.norm().log10(),
            at.arg().to_degrees()
        ),
    );
    out.add("openloop.csv", fr_csv(&fr));
    Ok(out)
}

pub fn stability_report(
    cfg: &ProjectConfig,
    c: &CroneController,
) -> CliResult<(bool, serde_json::Value, String)> {
    let plant = cfg.plant.rational()?.scaled(cfg.stability.loop_gain);
    let clm = closed_loop_for(c, &plant, cfg.stability.delay_model)?;
    let outcome = check_quadratic_stability(&clm, cfg.stability.options())?;
    Ok(match &outcome {
        StabilityOutcome::Certified {
            certificate,
            verification,
            iterations,
        } => (
            true,
            json!({
                "certified": true,
                "closed_loop_order": clm.order(),
                "max_real_eig": clm.max_real_eig(),
                "iterations": iterations,
                "certificate": certificate.report(verification),
            }),
            format!(
                "certified ({:?}), margin {:.3e}, {} iterations",
                certificate.method, verification.lyapunov_margin, iterations
            ),
        ),
        StabilityOutcome::Infeasible(r) => (
            false,
            json!({
                "certified": false,
                "closed_loop_order": clm.order(),
                "max_real_eig": clm.max_real_eig(),
                "diagnosis": r,
            }),
            format!(
                "no certificate: {:?} (max Re eig {:.4e})",
                r.reason, r.max_real_eig
            ),
        ),
    })
}

pub fn cmd_stability(cfg: &ProjectConfig) -> CliResult<Outcome> {
    let c = design(cfg, cfg.tuning)?;
    let (ok, report, summary) = stability_report(cfg, &c)?;
    let mut out = Outcome::new(ok, summary);
    out.add_json("stability.json", &report);
    Ok(out)
}

fn setup(cfg: &ProjectConfig) -> CliResult<TimeDomainSetup> {
    Ok(TimeDomainSetup {
        spec: cfg.crone.spec()?,
        plant: cfg.plant.rational()?,
        strategy: cfg.strategy,
        gamma: cfg.tuning.gamma,
        cells: cfg.crone.cells,
        sim: cfg.sim.clone(),
        limits: cfg.trajectory.limits,
        period: cfg.trajectory.period,
        settle: cfg.trajectory.settle,
        noise_amplitude: cfg.noise.amplitude,
        noise_duration: cfg.noise.duration,
    })
}

fn tracking_rows(cfg: &ProjectConfig) -> CliResult<Vec<TrackingRow>> {
    Ok(tracking_table(&setup(cfg)?, &cfg.trajectory.p_values)?)
}

fn strictly_decreasing(rows: &[TrackingRow]) -> bool {
    rows.windows(2).all(|w| w[1].rms_nm < w[0].rms_nm)
}

fn tracking_csv(rows: &[TrackingRow]) -> String {
    let mut s = String::from("p,nu_star,rms_nm,resets\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            csv_num(r.p),
            csv_num(r.nu_star),
            csv_num(r.rms_nm),
            r.resets
        );
    }
    s
}

/// Tracking run of the configured design plus the `p` sweep table.
pub fn cmd_simulate(cfg: &ProjectConfig) -> CliResult<Outcome> {
    let plant = cfg.plant.rational()?;
    let c = design(cfg, cfg.tuning)?;
    let (r, acc) = fourth_order_trajectory(
        cfg.trajectory.limits,
        cfg.trajectory.period,
        cfg.sim.dt,
        cfg.sim.samples(),
    )?;
    let tr = simulate_controller(&plant, &c, &r, Some(&nominal_feedforward(&acc)), &cfg.sim)?;
    let rms = rms_error(&tr, cfg.trajectory.settle);
    let rows = tracking_rows(cfg)?;
    let monotone = strictly_decreasing(&rows);
    let mut out = Outcome::new(
        true,
        format!("rms {:.3} nm, p sweep monotone: {monotone}", rms * 1e9),
    );
    out.add("trace.csv", tr.to_csv());
    out.add("resets.csv", tr.resets_csv());
    out.add("tracking.csv", tracking_csv(&rows));
    out.add_json(
        "simulate.json",
        &json!({"rms_nm": rms * 1e9, "resets": tr.reset_times.len(), "p_sweep": rows, "p_sweep_monotone": monotone}),
    );
    Ok(out)
}

/// Swept-sine identification. For a linear configuration the result is
/// checked against the sampled open loop.
pub fn cmd_sweep(cfg: &ProjectConfig) -> CliResult<Outcome> {
    let plant = cfg.plant.rational()?;
    let c = design(cfg, cfg.tuning)?;
    let sim = crone_core::SimConfig {
        duration: cfg.sweep.duration,
        ..cfg.sim.clone()
    };
    let lp = SimulatedLoop::new(&plant, &c, sim);
    let idr = identify_s_t(&lp, &cfg.sweep)?;
    let linear = c.strategy == Strategy::Linear || c.tuning.is_linear();
    let mut out = Outcome::new(true, String::new());
    if linear {
        let f_hi = 1000f64.min(cfg.sweep.f_end);
        let f_lo = 10f64.max(cfg.sweep.f_start);
        let rep = compare_with_open_loop(&idr, |w| lp.discrete_open_loop(w), f_lo, f_hi, 0.95)?;
        let pass = rep.passed(1.0, 5.0, 0.05);
        out.passed = pass;
        out.summary = format!(
            "round trip {}: {} bins, L error {:.3} dB / {:.3} deg",
            if pass { "PASS" } else { "FAIL" },
            rep.bins,
            rep.l_mag_db,
            rep.l_phase_deg
        );
        out.add_json(
            "sweep.json",
            &json!({"linear": true, "round_trip": rep, "status": if pass { "PASS" } else { "FAIL" }}),
        );
    } else {
        out.summary = format!("{} bins identified (best linear approximation)", idr.len());
        out.add_json("sweep.json", &json!({"linear": false, "bins": idr.len()}));
    }
    out.add("sysid.csv", idr.to_csv());
    Ok(out)
}

fn noise_csv(rows: &[NoiseRow]) -> String {
    let mut s = String::from("freq_hz,linear_db,reset_db,reduction_db\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            csv_num(r.freq_hz),
            csv_num(r.linear_db),
            csv_num(r.reset_db),
            csv_num(r.reduction_db)
        );
    }
    s
}

fn noise_rows(cfg: &ProjectConfig) -> CliResult<Vec<NoiseRow>> {
    Ok(noise_table(
        &setup(cfg)?,
        &cfg.noise.freqs_hz,
        cfg.noise.p_reset,
    )?)
}

/// Sine-noise output power, `p = 1` against `noise.p_reset`.
pub fn cmd_noise(cfg: &ProjectConfig) -> CliResult<Outcome> {
    let rows = noise_rows(cfg)?;
    let all_positive = rows.iter().all(|r| r.reduction_db > 0.0);
    let mut out = Outcome::new(
        true,
        format!("reduction positive at all frequencies: {all_positive}"),
    );
    out.add("noise.csv", noise_csv(&rows));
    out.add_json(
        "noise.json",
        &json!({"rows": rows, "all_positive": all_positive}),
    );
    Ok(out)
}

fn gain_csv(rows: &[GainAdvantageRow]) -> String {
    let mut s = String::from("strategy,linear_db,reset_db,advantage_db,reference_db\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.strategy,
            csv_num(r.linear_db),
            csv_num(r.reset_db),
            csv_num(r.advantage_db),
            csv_num(r.reference_db)
        );
    }
    s
}

fn identity_csv(rows: &[DesignIdentityRow]) -> String {
    let mut s = String::from("strategy,gamma,p,nu_star,magnitude,phase_deg\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.strategy,
            csv_num(r.gamma),
            csv_num(r.p),
            csv_num(r.nu_star),
            csv_num(r.magnitude),
            csv_num(r.phase_deg)
        );
    }
    s
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    /// Failing a non-gating check is reported but does not fail the run.
    gating: bool,
    detail: String,
}

/// Full pipeline: synthesis, stability, gain-advantage table, design
/// identities, tracking and noise tables.
pub fn cmd_reproduce(cfg: &ProjectConfig) -> CliResult<Outcome> {
    let spec = cfg.crone.spec()?;
    let plant = cfg.plant.rational()?.without_delay();
    let c = design(cfg, cfg.tuning)?;
    let (certified, stab, stab_summary) = stability_report(cfg, &c)?;
    let gains = gain_advantage_table(&spec, &plant, 1000.0, cfg.crone.cells)?;
    let identity = design_identity_sweep(
        &spec,
        &plant,
        &Strategy::RESET,
        &[0.0, 0.5, 1.0],
        &[0.0, 0.5],
        cfg.crone.cells,
    )?;
    let tracking = tracking_rows(cfg)?;
    let noise = noise_rows(cfg)?;

    let gain_ok = gains
        .iter()
        .all(|r| (r.advantage_db - r.reference_db).abs() <= 1.0);
    let identity_ok = identity
        .iter()
        .all(|r| r.holds(spec.phase_margin_deg, 1e-6, 0.5));
    let checks = vec![
        Check {
            name: "stability_certificate",
            passed: certified,
            gating: true,
            detail: stab_summary,
        },
        Check {
            name: "design_identities",
            passed: identity_ok,
            gating: true,
            detail: format!(
                "{} designs, |L| = 1 and phase = -180 + margin at crossover",
                identity.len()
            ),
        },
        Check {
            name: "gain_advantage_1khz",
            passed: gain_ok,
            gating: false,
            detail: format!(
                "{}; assumes the configured corners and margin for the gain-advantage designs",
                gains
                    .iter()
                    .map(|r| format!(
                        "{} {:.2} dB (ref {:.1})",
                        r.strategy, r.advantage_db, r.reference_db
                    ))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        },
        Check {
            name: "tracking_rms_monotone",
            passed: strictly_decreasing(&tracking),
            gating: true,
            detail: tracking
                .iter()
                .map(|r| format!("p={} {:.1} nm", r.p, r.rms_nm))
                .collect::<Vec<_>>()
                .join(", "),
        },
        Check {
            name: "noise_reduction_positive",
            passed: noise.iter().all(|r| r.reduction_db > 0.0),
            gating: true,
            detail: noise
                .iter()
                .map(|r| format!("{} Hz {:.2} dB", r.freq_hz, r.reduction_db))
                .collect::<Vec<_>>()
                .join(", "),
        },
    ];
    let passed = checks.iter().all(|c| c.passed || !c.gating);
    let mut out = Outcome::new(
        passed,
        checks
            .iter()
            .map(|c| format!("{}: {}", c.name, if c.passed { "PASS" } else { "FAIL" }))
            .collect::<Vec<_>>()
            .join("\n"),
    );
    out.add_json("synthesis.json", &synthesis_report(cfg, &c));
    out.add_json("stability.json", &stab);
    out.add("gain_advantage.csv", gain_csv(&gains));
    out.add("design_identity.csv", identity_csv(&identity));
    out.add("tracking.csv", tracking_csv(&tracking));
    out.add("noise.csv", noise_csv(&noise));
    out.add_json(
        "reproduce.json",
        &json!({"passed": passed, "checks": checks}),
    );
    Ok(out)
}
