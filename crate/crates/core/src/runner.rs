//! Experiment orchestration behind the `degenwave` binary.
//!
//! Every run writes `manifest.json`, `traces/*.csv`, `plots/*.svg` (with
//! gnuplot scripts) and `report.txt` under the output directory. A failed
//! numerical stage leaves whatever was written plus a `FAILED` marker.

use nalgebra::DVector;
use serde::Serialize;
use std::fs;
use std::path::PathBuf;

use crate::config::{Preset, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    conservative_comparison, decay_rate_fit, frequency_sweep, linear_damped_reference, lower_order_decay, point_trace,
    primitive_closed_form, primitive_setup, primitive_solve, EnergyTrace, FrequencyFamily, SweepParams, SweepRun,
    TraceMeta,
};
use crate::linwave::{DuhamelSolver, Trajectory};
use crate::mesh::{Mesh, SpatialOperators};
use crate::oracle::{
    compare_energy_norm, oracle_field, rk4_ansatz, simulate_oscillator, uniform_stability_sweep, AnsatzProblem,
    OracleDiscrepancy, OscillatorProblem, SweepSettings,
};
use crate::output::{gnuplot_script, write_csv, write_svg, write_trace, PlotStyle, Report, Series};

/// Relative per-step energy increase tolerated by the monotonicity check.
pub const MONOTONE_TOL: f64 = 1e-6;
/// Energy level below which strict decrease over unit windows is not checked.
pub const STRICT_FLOOR: f64 = 1e-4;
/// Constant in the `C h` bound of the linear reference check.
pub const LINEAR_REFERENCE_CONSTANT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    ConfigError = 1,
    NumericalFailure = 2,
    InvariantFailure = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn of_error(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter(_) | Error::Io(_) => ExitStatus::ConfigError,
            _ => ExitStatus::NumericalFailure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Run,
    Oracle,
    Oscillator,
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'static str,
    version: &'static str,
    command: Command,
    config: &'a RunConfig,
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub report: Report,
    pub out: PathBuf,
}

/// Execute `cfg`, writing all artifacts; errors become exit statuses.
pub fn execute(command: Command, cfg: &RunConfig) -> RunOutcome {
    let mut report = Report::new(format!("degenwave {} ({})", cfg.experiment, env!("CARGO_PKG_VERSION")));
    let out = cfg.out.clone();
    if let Err(e) = cfg.validate() {
        report.note(format!("error: {e}"));
        return RunOutcome {
            status: ExitStatus::of_error(&e),
            report,
            out,
        };
    }
    let result = prepare(command, cfg).and_then(|()| match command {
        Command::Run => match cfg.experiment {
            Preset::Fig1 => run_fig1(cfg, &mut report),
            Preset::Fig2 | Preset::Fig3 | Preset::Sweep | Preset::Custom => run_sweep(cfg, &mut report),
            Preset::Primitive => run_primitive(cfg, &mut report),
            Preset::Oscillator => run_oscillator(cfg, &mut report),
        },
        Command::Oracle => run_oracle(cfg, &mut report),
        Command::Oscillator => run_oscillator(cfg, &mut report),
    });
    let status = match result {
        Ok(()) if report.all_passed() => ExitStatus::Success,
        Ok(()) => ExitStatus::InvariantFailure,
        Err(e) => {
            report.note(format!("error: {e}"));
            let _ = fs::create_dir_all(&out).and_then(|()| fs::write(out.join("FAILED"), format!("{e}\n")));
            ExitStatus::of_error(&e)
        }
    };
    if out.is_dir() {
        let _ = fs::write(out.join("report.txt"), report.render());
    }
    RunOutcome { status, report, out }
}

fn prepare(command: Command, cfg: &RunConfig) -> Result<()> {
    let out = &cfg.out;
    fs::create_dir_all(out.join("traces"))?;
    fs::create_dir_all(out.join("plots"))?;
    let _ = fs::remove_file(out.join("FAILED"));
    let manifest = Manifest {
        name: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: cfg,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(out.join("manifest.json"), json + "\n")?;
    Ok(())
}

fn sweep_params(cfg: &RunConfig, ks: Vec<usize>, normalize: bool) -> Result<SweepParams> {
    let mut family = FrequencyFamily::new(ks)?;
    family.normalize = normalize;
    let mut p = SweepParams::new(
        family,
        cfg.alpha,
        cfg.m,
        cfg.interior_nodes()?,
        cfg.delta,
        cfg.picard_end(),
    );
    p.extension = (cfg.t_end > cfg.picard_end()).then_some(cfg.t_end);
    p.rule = cfg.rule;
    p.scheme = cfg.multistep;
    p.window = cfg.window;
    p.tolerance = cfg.tolerance;
    p.max_iterations = cfg.max_iterations;
    Ok(p)
}

/// Discrepancy between a sweep member and its ansatz oracle.
pub fn oracle_discrepancy(cfg: &RunConfig, ops: &SpatialOperators, run: &SweepRun) -> Result<OracleDiscrepancy> {
    let c0 = run.amplitude / 2f64.sqrt();
    let problem = AnsatzProblem::on_mesh(&ops.mesh, run.k, c0, 0.0, cfg.alpha, cfg.m)?;
    let traj = &run.result.trajectory;
    let oracle = rk4_ansatz(&problem, traj.end_time(), traj.dt, cfg.oracle_substeps)?;
    compare_energy_norm(traj, &oracle, ops)
}

fn energy_checks(report: &mut Report, name: &str, trace: &EnergyTrace, strict: bool) {
    let inc = trace.max_relative_increase();
    report.check(
        format!("{name}: energy nonincreasing"),
        trace.all_finite() && trace.is_nonincreasing(MONOTONE_TOL),
        format!("max relative step increase {inc:.3e} (tolerance {MONOTONE_TOL:e})"),
    );
    if strict {
        let stalled = trace.stalled_windows(1.0, STRICT_FLOOR);
        report.check(
            format!("{name}: strict decrease over unit windows"),
            stalled.is_empty(),
            if stalled.is_empty() {
                "every unit window with E > 1e-4 loses energy".to_string()
            } else {
                format!("no decrease on windows starting at {stalled:?}")
            },
        );
    }
}

fn plot_traces(
    cfg: &RunConfig,
    file: &str,
    traces: &[(&str, &EnergyTrace)],
    column: usize,
    style: PlotStyle,
) -> Result<()> {
    let series: Vec<Series> = traces
        .iter()
        .map(|(label, t)| {
            let ys = match column {
                2 => t.energy.clone(),
                3 => t.l2.clone(),
                _ => t.h1.clone(),
            };
            Series::new(t.meta.label.clone(), t.times.clone(), ys).with_label_if_empty(label)
        })
        .collect();
    write_svg(&cfg.out.join("plots").join(format!("{file}.svg")), &series, &style)?;
    let csvs: Vec<(String, String)> = traces
        .iter()
        .map(|(name, t)| (format!("../traces/{name}.csv"), t.meta.label.clone()))
        .collect();
    let refs: Vec<(&str, &str)> = csvs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    fs::write(
        cfg.out.join("plots").join(format!("{file}.gp")),
        gnuplot_script(&refs, column, &style),
    )?;
    Ok(())
}

impl Series {
    fn with_label_if_empty(mut self, label: &str) -> Self {
        if self.label.is_empty() {
            self.label = label.to_string();
        }
        self
    }
}

fn run_sweep(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let params = sweep_params(cfg, cfg.k.clone(), cfg.normalize)?;
    let mesh = Mesh::new(params.n)?;
    let ops = SpatialOperators::assemble(&mesh);
    let runs = frequency_sweep(&params)?;
    let traces_dir = cfg.out.join("traces");

    let names: Vec<String> = runs.iter().map(|r| format!("k{}", r.k)).collect();
    for (r, name) in runs.iter().zip(&names) {
        write_trace(&traces_dir.join(format!("{name}.csv")), &r.result.trace)?;
    }

    for (r, name) in runs.iter().zip(&names) {
        let trace = &r.result.trace;
        report.value(format!("E_{}(0)", r.k), trace.energy[0]);
        report.value(format!("E_{}(T)", r.k), trace.final_energy());
        energy_checks(report, name, trace, cfg.alpha > 0.0);
        if cfg.alpha == 0.0 {
            let drift = trace
                .energy
                .iter()
                .map(|e| (e - trace.energy[0]).abs())
                .fold(0.0, f64::max);
            report.check(
                format!("{name}: energy conserved"),
                drift <= 1e-9,
                format!("max drift {drift:.3e}"),
            );
        }
        if cfg.normalize {
            let e0 = trace.energy[0];
            report.check(
                format!("{name}: unit initial energy"),
                (e0 - 1.0).abs() <= 1e-3,
                format!("E(0) = {e0:.6}"),
            );
        }
        if !r.result.converged() {
            report.note(format!("{name}: some Picard windows hit the iteration cap"));
        }

        let d = oracle_discrepancy(cfg, &ops, r)?;
        report.value(format!("e_{} (max energy of difference)", r.k), d.max_energy);
        report.value(format!("e_{} (max energy norm of difference)", r.k), d.max_norm);

        let ez = conservative_comparison(&ops, r);
        report.value(format!("E_z k={} at T", r.k), *ez.last().expect("nonempty"));
        write_csv(
            &traces_dir.join(format!("{name}_ez.csv")),
            &["t", "Ez"],
            &[&trace.times, &ez],
        )?;
    }

    if runs.len() > 1 {
        let mut by_k: Vec<(usize, f64, f64)> = runs
            .iter()
            .zip(conservative_final(&ops, &runs))
            .map(|(r, ez)| (r.k, r.result.trace.final_energy(), ez))
            .collect();
        by_k.sort_by_key(|x| x.0);
        if cfg.alpha > 0.0 {
            let ordered = by_k.windows(2).all(|w| w[1].1 > w[0].1);
            report.check(
                "E(T) increases with k",
                ordered,
                by_k.iter()
                    .map(|(k, e, _)| format!("k={k}: {e:.6}"))
                    .collect::<Vec<_>>()
                    .join(", "),
            );
            let first = by_k.first().expect("nonempty");
            let last = by_k.last().expect("nonempty");
            report.check(
                "E_z(T) smaller at the largest k",
                last.2 < first.2,
                format!("k={}: {:.3e}, k={}: {:.3e}", first.0, first.2, last.0, last.2),
            );
        }
    }

    let pairs: Vec<(&str, &EnergyTrace)> = names
        .iter()
        .map(|n| n.as_str())
        .zip(runs.iter().map(|r| &r.result.trace))
        .collect();
    plot_traces(
        cfg,
        "energy",
        &pairs,
        2,
        PlotStyle {
            title: format!("energy, alpha={}, m={}", cfg.alpha, cfg.m),
            x_label: "t".into(),
            y_label: "E(t)".into(),
            ..Default::default()
        },
    )?;

    if cfg.t_end > cfg.picard_end() || cfg.experiment == Preset::Fig3 {
        plot_traces(
            cfg,
            "l2",
            &pairs,
            3,
            PlotStyle {
                title: "displacement L2 norm".into(),
                x_label: "t".into(),
                y_label: "|u(t)|_0".into(),
                ..Default::default()
            },
        )?;
        for r in &runs {
            let setup = primitive_setup(&ops, r.k, cfg.alpha, cfg.m, r.amplitude)?;
            let rep = lower_order_decay(&ops, &r.result.trace, &setup);
            report.check(
                format!("k{}: |u(t)|_0^2 <= |Phi|_1^2 + |u0|_0^2", r.k),
                rep.all_hold(),
                format!("bound {:.6e}, min slack {:.3e}", rep.bound, rep.min_slack()),
            );
        }
    }
    Ok(())
}

fn conservative_final(ops: &SpatialOperators, runs: &[SweepRun]) -> Vec<f64> {
    runs.iter()
        .map(|r| *conservative_comparison(ops, r).last().expect("nonempty"))
        .collect()
}

fn run_fig1(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let k = cfg.k[0];
    let params = sweep_params(cfg, vec![k], cfg.normalize)?;
    let n = params.n;
    let mesh = Mesh::new(n)?;
    let h = mesh.element_size();
    let traces_dir = cfg.out.join("traces");
    let nonlinear = frequency_sweep(&params)?.remove(0);
    let amplitude = nonlinear.amplitude;
    let mut linear_params = params.clone();
    linear_params.extension = None;
    linear_params.horizon = cfg.t_end;
    let linear = linear_damped_reference(n, cfg.beta, k, amplitude, &linear_params)?;

    let times = nonlinear.result.trace.times.clone();
    let exact = crate::linwave::LinearDampedMode::new(cfg.beta, k, amplitude)?;
    let u_nl = point_trace(&mesh, &nonlinear.result.trajectory, cfg.probe);
    let u_lin = point_trace(&mesh, &linear.result.trajectory, cfg.probe);
    let lin_times = linear.result.trace.times.clone();
    let u_exact: Vec<f64> = lin_times.iter().map(|&t| exact.displacement(t, cfg.probe)).collect();

    write_trace(&traces_dir.join("nonlinear.csv"), &nonlinear.result.trace)?;
    write_trace(&traces_dir.join("linear.csv"), &linear.result.trace)?;
    write_csv(&traces_dir.join("probe_nonlinear.csv"), &["t", "u"], &[&times, &u_nl])?;
    write_csv(
        &traces_dir.join("probe_linear.csv"),
        &["t", "u_fem", "u_exact"],
        &[&lin_times, &u_lin, &u_exact],
    )?;
    write_csv(
        &traces_dir.join("linear_error.csv"),
        &["t", "error", "E_exact"],
        &[&lin_times, &linear.errors, &linear.analytic_energy],
    )?;

    energy_checks(report, "nonlinear", &nonlinear.result.trace, cfg.alpha > 0.0);
    energy_checks(report, "linear", &linear.result.trace, cfg.beta > 0.0);
    let err = linear.max_error();
    report.value("linear reference max energy-norm error", err);
    report.value("linear reference error / h", err / h);
    report.check(
        "linear reference within C h",
        err <= LINEAR_REFERENCE_CONSTANT * h,
        format!(
            "max error {err:.4e} vs {LINEAR_REFERENCE_CONSTANT} h = {:.4e}",
            LINEAR_REFERENCE_CONSTANT * h
        ),
    );

    write_svg(
        &cfg.out.join("plots/probe.svg"),
        &[
            Series::new(format!("alpha u^{} u_t", 2 * cfg.m), times.clone(), u_nl),
            Series::new(format!("beta u_t, beta={:.4}", cfg.beta), lin_times.clone(), u_exact),
        ],
        &PlotStyle {
            title: format!("u(t, x={})", cfg.probe),
            x_label: "t".into(),
            y_label: "u".into(),
            ..Default::default()
        },
    )?;
    fs::write(
        cfg.out.join("plots/probe.gp"),
        gnuplot_script(
            &[
                ("../traces/probe_nonlinear.csv", "degenerate"),
                ("../traces/probe_linear.csv", "linear"),
            ],
            2,
            &PlotStyle {
                title: format!("u(t, x={})", cfg.probe),
                x_label: "t".into(),
                y_label: "u".into(),
                ..Default::default()
            },
        ),
    )?;
    plot_traces(
        cfg,
        "energy",
        &[("nonlinear", &nonlinear.result.trace), ("linear", &linear.result.trace)],
        2,
        PlotStyle {
            title: "energy".into(),
            x_label: "t".into(),
            y_label: "E(t)".into(),
            ..Default::default()
        },
    )?;
    Ok(())
}

fn run_primitive(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let params = sweep_params(cfg, cfg.k.clone(), cfg.normalize)?;
    let mesh = Mesh::new(params.n)?;
    let ops = SpatialOperators::assemble(&mesh);
    let solver = DuhamelSolver::new(&ops, cfg.delta, cfg.rule)?;
    let traces_dir = cfg.out.join("traces");

    // the damped solution u over the Picard horizon only
    let mut u_params = params.clone();
    u_params.extension = None;
    let damped = frequency_sweep(&u_params)?;

    for run in &damped {
        let k = run.k;
        let setup = primitive_setup(&ops, k, cfg.alpha, cfg.m, run.amplitude)?;
        report.value(format!("k{k}: elliptic residual"), setup.residual);
        report.check(
            format!("k{k}: elliptic residual"),
            setup.residual < 1e-9,
            format!("{:.3e}", setup.residual),
        );
        let phi1 = ops.h1_seminorm(setup.phi.as_slice());
        let u0 = ops.l2_norm(setup.u0.as_slice());
        report.value(format!("k{k}: |Phi|_1 / |u0|_0"), phi1 / u0);
        if cfg.m == 1 {
            let (closed, _) = primitive_closed_form(k, cfg.alpha, run.amplitude);
            report.value(
                format!("k{k}: |Phi_h - Phi|_0"),
                ops.l2_error(setup.phi.as_slice(), &closed),
            );
        }

        let prim = primitive_solve(&ops, &solver, &setup, &params, Some(&run.result.trajectory))?;
        write_trace(&traces_dir.join(format!("primitive_k{k}.csv")), &prim.trace)?;
        write_trace(&traces_dir.join(format!("k{k}.csv")), &run.result.trace)?;
        energy_checks(report, &format!("primitive k{k}"), &prim.trace, cfg.alpha > 0.0);

        let e0 = prim.trace.energy[0];
        let expected = 0.5 * phi1 * phi1 + 0.5 * u0 * u0;
        report.check(
            format!("k{k}: E_phi(0) = (|Phi|_1^2 + |u0|_0^2) / 2"),
            (e0 - expected).abs() <= 1e-12 * expected.max(1.0),
            format!("{e0:.12e} vs {expected:.12e}"),
        );

        let d = oracle_discrepancy(cfg, &ops, run)?;
        let mismatch = prim.velocity_mismatch.expect("damped trajectory given");
        report.value(format!("k{k}: sup |phi_t - u|_0"), mismatch);
        report.value(format!("k{k}: e_k"), d.max_energy);
        report.check(
            format!("k{k}: primitive velocity reproduces u"),
            mismatch <= 5.0 * d.max_energy.max(f64::MIN_POSITIVE),
            format!(
                "sup |phi_t - u|_0 = {mismatch:.3e}, budget 5 e_k = {:.3e}",
                5.0 * d.max_energy
            ),
        );

        let mut annotation = None;
        if cfg.t_end > cfg.fit_start && cfg.alpha > 0.0 {
            let p = decay_rate_fit(&prim.trace, cfg.fit_start, cfg.t_end)?;
            report.value(
                format!("k{k}: fitted decay exponent on [{}, {}]", cfg.fit_start, cfg.t_end),
                p,
            );
            report.note(format!(
                "k{k}: E_phi ~ t^(-p) with p = {p:.4}; the asymptotic rate is 1/m = {:.4}",
                1.0 / cfg.m as f64
            ));
            annotation = Some(format!("fitted slope -{p:.3} on [{}, {}]", cfg.fit_start, cfg.t_end));
        }
        let from = prim
            .trace
            .times
            .iter()
            .position(|&t| t >= cfg.fit_start.min(cfg.t_end))
            .unwrap_or(0)
            .max(1);
        write_svg(
            &cfg.out.join(format!("plots/primitive_k{k}_loglog.svg")),
            &[Series::new(
                "E_phi",
                prim.trace.times[from..].to_vec(),
                prim.trace.energy[from..].to_vec(),
            )],
            &PlotStyle {
                title: format!("primitive energy, k={k}"),
                x_label: "t".into(),
                y_label: "E_phi".into(),
                log_x: true,
                log_y: true,
                annotation,
            },
        )?;
    }
    Ok(())
}

fn run_oscillator(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let settings = SweepSettings {
        stiffness: cfg.stiffness,
        alpha: cfg.alpha,
        m: cfg.m,
        radius: cfg.radius,
        samples: cfg.samples,
        target: cfg.target,
        horizon: cfg.osc_horizon,
        step: cfg.osc_step,
        seed: cfg.seed,
    };
    let sweep = uniform_stability_sweep(settings)?;
    let x0: Vec<f64> = sweep.initial.iter().map(|y| y[0]).collect();
    let x1: Vec<f64> = sweep.initial.iter().map(|y| y[1]).collect();
    let tt: Vec<f64> = sweep.times_to_target.iter().map(|t| t.unwrap_or(f64::NAN)).collect();
    write_csv(
        &cfg.out.join("traces/oscillator_sweep.csv"),
        &["x0", "x1", "t_target"],
        &[&x0, &x1, &tt],
    )?;
    report.check(
        "equivalent norm nonincreasing on every sample",
        sweep.max_relative_increase <= 1e-9,
        format!("max relative step increase {:.3e}", sweep.max_relative_increase),
    );
    match sweep.max_time() {
        Some(t) => {
            report.value("max time to target", t);
            report.check("every sample reaches the target", true, format!("all within t = {t}"));
        }
        None => report.check(
            "every sample reaches the target",
            cfg.alpha == 0.0,
            format!("{} of {} samples never do", sweep.non_decaying(), cfg.samples),
        ),
    }

    let single = OscillatorProblem::new(cfg.stiffness, cfg.alpha, cfg.m, 1.0, 0.0)?;
    let horizon = 100.0f64.min(cfg.osc_horizon);
    let tr = simulate_oscillator(&single, horizon, cfg.osc_step)?;
    let t: Vec<f64> = (0..tr.norms.len()).map(|i| i as f64 * tr.dt).collect();
    let x: Vec<f64> = tr.states.iter().map(|y| y[0]).collect();
    let v: Vec<f64> = tr.states.iter().map(|y| y[1]).collect();
    write_csv(
        &cfg.out.join("traces/oscillator.csv"),
        &["t", "x", "v", "norm"],
        &[&t, &x, &v, &tr.norms],
    )?;
    report.value(
        format!("|y({horizon})| / |y(0)| from (1, 0)"),
        tr.norms.last().expect("nonempty") / tr.norms[0],
    );
    write_svg(
        &cfg.out.join("plots/oscillator.svg"),
        &[Series::new("|y(t)|", t, tr.norms)],
        &PlotStyle {
            title: "oscillator equivalent norm".into(),
            x_label: "t".into(),
            y_label: "|y|".into(),
            ..Default::default()
        },
    )?;
    Ok(())
}

fn run_oracle(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let n = cfg.interior_nodes()?;
    let mesh = Mesh::new(n)?;
    let ops = SpatialOperators::assemble(&mesh);
    let family = FrequencyFamily {
        ks: cfg.k.clone(),
        normalize: cfg.normalize,
    };
    for &k in &cfg.k {
        let amplitude = family.amplitude(&ops, k);
        let problem = AnsatzProblem::on_mesh(&mesh, k, amplitude / 2f64.sqrt(), 0.0, cfg.alpha, cfg.m)?;
        let sol = rk4_ansatz(&problem, cfg.t_end, cfg.delta, cfg.oracle_substeps)?;
        let first = oracle_field(&sol, 0.0, &mesh)?;
        let mut traj = Trajectory::new(0.0, cfg.delta, first);
        for i in 1..sol.len() {
            traj.states.push(oracle_field(&sol, sol.time(i), &mesh)?);
        }
        let meta = TraceMeta {
            label: format!("oracle k={k}"),
            k,
            alpha: cfg.alpha,
            m: cfg.m,
            h: mesh.element_size(),
            delta: cfg.delta,
            scheme: format!("rk4 x{}", cfg.oracle_substeps),
        };
        let trace = EnergyTrace::from_trajectory(&ops, &traj, meta);
        write_trace(&cfg.out.join(format!("traces/oracle_k{k}.csv")), &trace)?;
        report.value(format!("oracle k{k}: E(T)"), trace.final_energy());
        // the ansatz is not an exact solution, so only the per-point
        // oscillator energies are monotone
        let worst = (1..sol.len())
            .flat_map(|i| {
                let (a, b) = (sol.modal_energy(i - 1), sol.modal_energy(i));
                a.into_iter()
                    .zip(b)
                    .map(|(x, y)| (y - x) / x.max(f64::MIN_POSITIVE))
                    .collect::<Vec<_>>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        report.check(
            format!("oracle k{k}: per-point energy nonincreasing"),
            worst <= MONOTONE_TOL,
            format!("max relative step increase {worst:.3e}"),
        );
        let peak = sol
            .phi
            .last()
            .map(|p| DVector::from_column_slice(p).amax())
            .unwrap_or(0.0);
        report.value(format!("oracle k{k}: max |phi(T)|"), peak);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn small(preset: Preset, dir: &Path) -> RunConfig {
        RunConfig {
            h: 1.0 / 32.0,
            delta: 0.01,
            t_end: 2.0,
            handoff: 2.0,
            k: vec![1, 2],
            osc_horizon: 50.0,
            samples: 8,
            out: dir.to_path_buf(),
            ..RunConfig::preset(preset)
        }
    }

    #[test]
    fn sweep_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(Preset::Fig2, dir.path());
        let o = execute(Command::Run, &cfg);
        assert_eq!(o.status, ExitStatus::Success, "{}", o.report.render());
        for f in [
            "manifest.json",
            "report.txt",
            "traces/k1.csv",
            "traces/k2_ez.csv",
            "plots/energy.svg",
            "plots/energy.gp",
        ] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let head = fs::read_to_string(dir.path().join("traces/k1.csv")).unwrap();
        assert!(head.starts_with("t,E,L2,H1\n"));
    }

    #[test]
    fn config_error_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            delta: 0.03,
            ..small(Preset::Fig2, dir.path())
        };
        assert_eq!(execute(Command::Run, &cfg).status, ExitStatus::ConfigError);
        let cfg = RunConfig {
            k: vec![8],
            ..small(Preset::Fig2, dir.path())
        };
        assert_eq!(execute(Command::Run, &cfg).status, ExitStatus::ConfigError);
    }

    #[test]
    fn numerical_failure_leaves_marker() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            alpha: 1e6,
            max_iterations: 50,
            ..small(Preset::Fig2, dir.path())
        };
        let o = execute(Command::Run, &cfg);
        assert_eq!(o.status, ExitStatus::NumericalFailure, "{}", o.report.render());
        assert!(dir.path().join("FAILED").is_file());
        assert!(dir.path().join("manifest.json").is_file());
    }

    #[test]
    fn oscillator_and_oracle_commands() {
        let dir = tempfile::tempdir().unwrap();
        let o = execute(Command::Oscillator, &small(Preset::Oscillator, dir.path()));
        assert_eq!(
            o.status,
            ExitStatus::InvariantFailure,
            "horizon 50 is too short: {}",
            o.report.render()
        );
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            osc_horizon: 400.0,
            ..small(Preset::Oscillator, dir.path())
        };
        assert_eq!(execute(Command::Oscillator, &cfg).status, ExitStatus::Success);
        let dir = tempfile::tempdir().unwrap();
        let o = execute(Command::Oracle, &small(Preset::Fig2, dir.path()));
        assert_eq!(o.status, ExitStatus::Success, "{}", o.report.render());
        assert!(dir.path().join("traces/oracle_k2.csv").is_file());
    }
}
