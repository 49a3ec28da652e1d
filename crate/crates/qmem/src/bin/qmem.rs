//! Command-line front end: protocol dispatch, design calculators, and
//! stand-alone fitting of external CSV data.
//!
//! Exit codes: 0 on success, 2 on configuration/input errors (the message
//! names the offending key or file), 3 on fit non-convergence (the message
//! names the protocol and its headline parameter).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use qmem::cavity_design::{self, DesignError};
use qmem::control_pulses;
use qmem::experiments::{
    self, ExperimentConfig, ExperimentError, GammaVsTemperature, Kappa0VsTemperature,
    ProtocolRun,
};
use qmem::fit::{self, FitError, FitResult};
use qmem::lindblad_engine::Simulator;
use qmem::operator_core::{DensityMatrix, SpaceSignature};
use qmem::system_model::{self, SystemConfig, SystemParams};

#[derive(Parser)]
#[command(name = "qmem", version, about = "Cavity quantum memory simulator and design toolkit")]
struct Cli {
    /// Worker threads for sweep points (default: available parallelism;
    /// QMEM_JOBS overrides; --jobs 1 forces serial)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulated measurement protocol and write CSV + fit JSON
    Sim(SimArgs),
    /// Evanescent-waveguide and loss-budget calculators (JSON to stdout)
    Design {
        #[command(subcommand)]
        calc: DesignCalc,
    },
    /// Fit external CSV data (JSON report to stdout)
    Fit(FitArgs),
}

#[derive(Args)]
struct SimArgs {
    /// One of: coherent-decay, fock-t1, ramsey, spectroscopy, temp-sweep,
    /// pe-sweep
    protocol: String,
    /// JSON system-parameter file (omitted: built-in defaults)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master RNG seed (all randomness flows from it)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for CSV/JSON/SVG artifacts
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Sample IQ readout with this many shots per point instead of exact
    /// probabilities
    #[arg(long)]
    shots: Option<u64>,
    /// Also render an SVG plot of the written CSV
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum DesignCalc {
    /// TM01 cutoff frequency of a circular waveguide
    Cutoff {
        #[arg(long)]
        a_mm: f64,
    },
    /// Evanescent energy suppression at the seal plane
    Suppression {
        #[arg(long)]
        a_mm: f64,
        #[arg(long)]
        f_ghz: f64,
        #[arg(long)]
        l_mm: f64,
    },
    /// Quarter-wave resonance frequency of a coaxial stub
    Quarterwave {
        #[arg(long)]
        l_mm: f64,
    },
    /// Lower bound on a material quality factor from Q_int and participation
    Participation {
        #[arg(long)]
        qint: f64,
        #[arg(long)]
        p: f64,
    },
    /// Josephson energy from junction inductance
    Josephson {
        #[arg(long)]
        lj_nh: f64,
    },
}

#[derive(Args)]
struct FitArgs {
    /// One of: s21, exp, exp-of-exp, ramsey
    kind: String,
    /// Input CSV path
    #[arg(long = "in")]
    input: PathBuf,
    /// Bootstrap seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bootstrap resamples
    #[arg(long, default_value_t = 300)]
    resamples: usize,
}

/// Error carrying its process exit code.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn fit(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

/// Protocol errors: fit non-convergence is exit 3, everything else is a
/// configuration problem.
fn from_experiment(protocol: &str, parameter: &str, e: ExperimentError) -> CliError {
    match e {
        ExperimentError::Fit { protocol, source } => CliError::fit(format!(
            "fit failure in {protocol} (parameter {parameter}): {source}"
        )),
        other => CliError::config(format!("{protocol}: {other}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs.or_else(|| {
        std::env::var("QMEM_JOBS").ok().and_then(|v| v.parse().ok())
    }) {
        // ignore failure: the global pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    let result = match cli.command {
        Command::Sim(args) => cmd_sim(args),
        Command::Design { calc } => cmd_design(calc),
        Command::Fit(args) => cmd_fit(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

// ---------------------------------------------------------------------------
// sim
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RunManifest<'a> {
    config_path: Option<String>,
    params: &'a SystemParams,
    protocol: &'a str,
    seed: u64,
    shots: Option<u64>,
    output_dir: String,
    version: &'static str,
    wall_clock_unix_s: u64,
    elapsed_s: f64,
}

fn load_params(config: &Option<PathBuf>) -> Result<SystemParams, CliError> {
    let cfg = match config {
        None => SystemConfig::paper(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::config(format!("config {}: {e}", path.display()))
            })?
        }
    };
    cfg.into_params().map_err(|e| CliError::config(format!("config invalid: {e}")))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn cmd_sim(args: SimArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let params = load_params(&args.config)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", args.out.display())))?;

    let mut config = match args.shots {
        Some(shots) => ExperimentConfig::sampled(&args.protocol, args.seed, shots),
        None => ExperimentConfig::exact(&args.protocol, args.seed),
    };
    config.protocol = args.protocol.clone();

    // (csv, fit JSON value, optional plot points + fitted curve)
    let (csv, fit_json, plot): (String, serde_json::Value, PlotData) =
        match args.protocol.as_str() {
            "coherent-decay" => {
                let run = experiments::coherent_decay(&config, &params)
                    .map_err(|e| from_experiment("coherent-decay", "kappa", e))?;
                protocol_artifacts(&run, "delay (us)", "P_vac", |t_us| {
                    eval_fit(&run.fit, t_us * 1e-6)
                })
            }
            "fock-t1" => {
                let run = experiments::fock_t1(&config, &params)
                    .map_err(|e| from_experiment("fock-t1", "t1", e))?;
                protocol_artifacts(&run, "delay (us)", "P_1", |t_us| {
                    eval_fit(&run.fit, t_us * 1e-3)
                })
            }
            "ramsey" => {
                let run = experiments::ramsey_t2(&config, &params)
                    .map_err(|e| from_experiment("ramsey", "t2", e))?;
                protocol_artifacts(&run, "delay (us)", "P_vac", |t_us| {
                    eval_fit(&run.fit, t_us * 1e-3)
                })
            }
            "spectroscopy" => spectroscopy_artifacts(&params)?,
            "temp-sweep" => {
                let gamma_model = GammaVsTemperature::paper_default(params.gamma);
                let kappa0 = Kappa0VsTemperature::constant(500.0);
                let res = experiments::temperature_sweep(
                    &config,
                    &params,
                    &gamma_model,
                    &kappa0,
                    1.0 / 650.0,
                    false,
                )
                .map_err(|e| from_experiment("temp-sweep", "ratio", e))?;
                let mut csv = String::from("temperature_k,gamma_per_s,kappa_tot_per_s\n");
                for (t, g, k) in &res.points {
                    csv.push_str(&format!("{t:.12e},{g:.12e},{k:.12e}\n"));
                }
                let pts: Vec<(f64, f64)> =
                    res.points.iter().map(|&(_, g, k)| (g, k)).collect();
                let fit_json = serde_json::to_value(&res.fit).unwrap();
                (csv, fit_json, PlotData { points: pts, curve: vec![], x: "gamma (1/s)".into(), y: "kappa_tot (1/s)".into() })
            }
            "pe-sweep" => {
                let points = experiments::pe_sweep(&config, &params)
                    .map_err(|e| from_experiment("pe-sweep", "t2", e))?;
                let mut csv =
                    String::from("p_e,t2_ms,gamma_phi_per_s,gamma_phi_exact_per_s\n");
                for p in &points {
                    csv.push_str(&format!(
                        "{:.12e},{:.12e},{:.12e},{:.12e}\n",
                        p.p_e, p.t2_ms, p.gamma_phi_per_s, p.gamma_phi_exact_per_s
                    ));
                }
                let pts: Vec<(f64, f64)> =
                    points.iter().map(|p| (p.p_e, p.gamma_phi_per_s)).collect();
                let fit_json = serde_json::to_value(&points).unwrap();
                (csv, fit_json, PlotData { points: pts, curve: vec![], x: "P_e".into(), y: "Gamma_phi (1/s)".into() })
            }
            other => {
                return Err(CliError::config(format!(
                    "unknown protocol `{other}` (expected coherent-decay, fock-t1, ramsey, \
                     spectroscopy, temp-sweep, pe-sweep)"
                )))
            }
        };

    let csv_path = write_file(&args.out, &format!("{}.csv", args.protocol), &csv)?;
    let fit_path = write_file(
        &args.out,
        &format!("{}_fit.json", args.protocol),
        &format!("{}\n", serde_json::to_string_pretty(&fit_json).unwrap()),
    )?;
    if args.plot {
        let svg = render_svg(&plot);
        write_file(&args.out, &format!("{}.svg", args.protocol), &svg)?;
    }

    let manifest = RunManifest {
        config_path: args.config.as_ref().map(|p| p.display().to_string()),
        params: &params,
        protocol: &args.protocol,
        seed: args.seed,
        shots: args.shots,
        output_dir: args.out.display().to_string(),
        version: env!("CARGO_PKG_VERSION"),
        wall_clock_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        elapsed_s: started.elapsed().as_secs_f64(),
    };
    write_file(
        &args.out,
        "manifest.json",
        &format!("{}\n", serde_json::to_string_pretty(&manifest).unwrap()),
    )?;
    println!("wrote {} and {}", csv_path.display(), fit_path.display());
    Ok(())
}

struct PlotData {
    points: Vec<(f64, f64)>,
    curve: Vec<(f64, f64)>,
    x: String,
    y: String,
}

/// Evaluate a named fit model at x (in the fit's own units).
fn eval_fit(fitres: &FitResult, x: f64) -> f64 {
    let p: Vec<f64> = fitres.params.iter().map(|q| q.value).collect();
    match fitres.model.as_str() {
        "exponential" => fit::exponential_model(&p, x),
        "exp_of_exp" => fit::exp_of_exp_model(&p, x),
        "decaying_sinusoid" => fit::decaying_sinusoid_model(&p, x),
        _ => f64::NAN,
    }
}

fn protocol_artifacts(
    run: &ProtocolRun,
    xlabel: &str,
    ylabel: &str,
    model: impl Fn(f64) -> f64,
) -> (String, serde_json::Value, PlotData) {
    let csv = experiments::sweep_csv(&run.points);
    let fit_json = serde_json::to_value(&run.fit).unwrap();
    let points: Vec<(f64, f64)> =
        run.points.iter().map(|p| (p.sweep_value, p.observable)).collect();
    let (lo, hi) = (points.first().unwrap().0, points.last().unwrap().0);
    let curve: Vec<(f64, f64)> = (0..=200)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 200.0;
            (x, model(x))
        })
        .filter(|(_, y)| y.is_finite())
        .collect();
    (csv, fit_json, PlotData { points, curve, x: xlabel.into(), y: ylabel.into() })
}

/// Fock-state preparation followed by number-resolved qubit spectroscopy,
/// with the as-run (uncorrected) pulse sequence.
fn spectroscopy_artifacts(
    params: &SystemParams,
) -> Result<(String, serde_json::Value, PlotData), CliError> {
    let wrap = |e: ExperimentError| from_experiment("spectroscopy", "populations", e);
    let dim = experiments::FOCK_STORAGE_DIM;
    let sig = SpaceSignature::new(&[dim, 2])
        .map_err(|e| CliError::config(format!("spectroscopy: {e}")))?;
    let rho_vac = DensityMatrix::fock(sig.clone(), &[0, 0])
        .map_err(|e| CliError::config(format!("spectroscopy: {e}")))?;
    let sim = Simulator::new(params, sig).map_err(|e| wrap(e.into()))?;
    let prep = control_pulses::fock_one_sequence_uncorrected(params, dim)
        .map_err(|e| wrap(e.into()))?;
    let state = sim.evolve(&rho_vac, &prep).map_err(|e| wrap(e.into()))?.final_state().clone();
    let spec = experiments::qubit_spectroscopy(&state, params, &sim, 4).map_err(wrap)?;

    let mut csv = String::from("detuning_hz,raw_pe,population\n");
    for i in 0..spec.populations.len() {
        csv.push_str(&format!(
            "{:.12e},{:.12e},{:.12e}\n",
            spec.detunings_hz[i], spec.raw[i], spec.populations[i]
        ));
    }
    let points: Vec<(f64, f64)> = spec
        .detunings_hz
        .iter()
        .zip(&spec.populations)
        .map(|(&d, &p)| (d, p))
        .collect();
    let fit_json = serde_json::to_value(&spec).unwrap();
    Ok((csv, fit_json, PlotData {
        points,
        curve: vec![],
        x: "probe detuning (Hz)".into(),
        y: "population".into(),
    }))
}

// ---------------------------------------------------------------------------
// design
// ---------------------------------------------------------------------------

fn cmd_design(calc: DesignCalc) -> Result<(), CliError> {
    let report = match calc {
        DesignCalc::Cutoff { a_mm } => {
            if a_mm <= 0.0 {
                return Err(CliError::config("radius a_mm must be positive"));
            }
            json!({
                "inputs": { "a_mm": a_mm },
                "cutoff_frequency_ghz": cavity_design::cutoff_frequency_hz(a_mm) * 1e-9,
            })
        }
        DesignCalc::Suppression { a_mm, f_ghz, l_mm } => {
            if a_mm <= 0.0 || f_ghz <= 0.0 || l_mm <= 0.0 {
                return Err(CliError::config("a_mm, f_ghz, l_mm must all be positive"));
            }
            let beta = cavity_design::propagation_constant(f_ghz * 1e9, a_mm);
            let s = cavity_design::energy_suppression(l_mm, beta)
                .map_err(|e| CliError::config(e.to_string()))?;
            json!({
                "inputs": { "a_mm": a_mm, "f_ghz": f_ghz, "l_mm": l_mm },
                "cutoff_frequency_ghz": cavity_design::cutoff_frequency_hz(a_mm) * 1e-9,
                "decay_constant_per_mm": beta.im.abs(),
                "energy_suppression": s,
            })
        }
        DesignCalc::Quarterwave { l_mm } => {
            if l_mm <= 0.0 {
                return Err(CliError::config("length l_mm must be positive"));
            }
            json!({
                "inputs": { "l_mm": l_mm },
                "resonance_frequency_ghz":
                    cavity_design::quarter_wave_frequency_hz(l_mm) * 1e-9,
            })
        }
        DesignCalc::Participation { qint, p } => {
            if qint <= 0.0 || p <= 0.0 || p > 1.0 {
                return Err(CliError::config("need qint > 0 and 0 < p <= 1"));
            }
            json!({
                "inputs": { "q_int": qint, "participation": p },
                "material_q_lower_bound": cavity_design::participation_bound(qint, p),
            })
        }
        DesignCalc::Josephson { lj_nh } => {
            let e_j = system_model::josephson_energy_uev(lj_nh * 1e-9)
                .map_err(|e| CliError::config(e.to_string()))?;
            json!({
                "inputs": { "l_j_nh": lj_nh },
                "josephson_energy_uev": e_j,
                "josephson_energy_ghz": e_j * 1e-6 / 4.135667696e-9,
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

fn map_fit_error(kind: &str, parameter: &str, e: FitError) -> CliError {
    match e {
        FitError::NonConvergence { .. } | FitError::RankDeficient(_) => CliError::fit(
            format!("fit `{kind}` failed to converge (parameter {parameter}): {e}"),
        ),
        other => CliError::config(format!("fit `{kind}`: {other}")),
    }
}

/// Parse a numeric CSV with at least two columns; a non-numeric first row is
/// treated as a header.
fn parse_xy_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() < 2 {
            return Err(CliError::config(format!(
                "line {}: expected at least 2 comma-separated columns",
                i + 1
            )));
        }
        match (cols[0].parse::<f64>(), cols[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
            }
            _ if i == 0 => continue, // header
            _ => {
                return Err(CliError::config(format!("line {}: non-numeric data", i + 1)));
            }
        }
    }
    if xs.len() < 3 {
        return Err(CliError::config(format!(
            "need at least 3 data rows, found {}",
            xs.len()
        )));
    }
    Ok((xs, ys))
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.input).map_err(|e| {
        CliError::config(format!("cannot read {}: {e}", args.input.display()))
    })?;
    let report: serde_json::Value = match args.kind.as_str() {
        "s21" => {
            let (freqs, trace) = cavity_design::parse_s21_trace(&text)
                .map_err(|e| CliError::config(format!("s21 input: {e}")))?;
            let fit = cavity_design::s21_circle_fit(&freqs, &trace).map_err(|e| match e {
                DesignError::Fit(inner) => map_fit_error("s21", "q_tot", inner),
                other => CliError::config(format!("s21 fit: {other}")),
            })?;
            serde_json::to_value(&fit).unwrap()
        }
        "exp" => {
            let (xs, ys) = parse_xy_csv(&text)?;
            let fit = experiments::fit_exponential(&xs, &ys, args.resamples, args.seed)
                .map_err(|e| map_fit_error("exp", "tau", e))?;
            serde_json::to_value(&fit).unwrap()
        }
        "exp-of-exp" => {
            let (xs, ys) = parse_xy_csv(&text)?;
            let span = xs.last().unwrap() - xs.first().unwrap();
            let floor = ys.iter().cloned().fold(f64::INFINITY, f64::min).max(1e-12);
            let p0 = [1.0, -floor.ln().max(0.1), 1.0 / span.max(1e-12), 0.0];
            let fit =
                experiments::fit_exp_of_exp(&xs, &ys, &p0, args.resamples, args.seed)
                    .map_err(|e| map_fit_error("exp-of-exp", "kappa", e))?;
            serde_json::to_value(&fit).unwrap()
        }
        "ramsey" => {
            let (xs, ys) = parse_xy_csv(&text)?;
            let fit =
                experiments::fit_decaying_sinusoid(&xs, &ys, args.resamples, args.seed)
                    .map_err(|e| map_fit_error("ramsey", "t2", e))?;
            serde_json::to_value(&fit).unwrap()
        }
        other => {
            return Err(CliError::config(format!(
                "unknown fit kind `{other}` (expected s21, exp, exp-of-exp, ramsey)"
            )))
        }
    };
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}

// ---------------------------------------------------------------------------
// SVG plotting
// ---------------------------------------------------------------------------

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// Minimal deterministic scatter + curve plot; derived only from already
/// written data, so plotting never changes numeric outputs.
fn render_svg(plot: &PlotData) -> String {
    let all: Vec<(f64, f64)> =
        plot.points.iter().chain(&plot.curve).cloned().collect();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (SVG_W - 2.0 * MARGIN);
    let py = |y: f64| SVG_H - MARGIN - (y - y0) / (y1 - y0) * (SVG_H - 2.0 * MARGIN);

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    // axes
    s.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        r = SVG_W - MARGIN,
        t = MARGIN,
        b = SVG_H - MARGIN,
    ));
    // tick labels and axis names
    s.push_str(&format!(
        "<text x=\"{m}\" y=\"{by}\" font-size=\"11\">{x0:.3e}</text>\n\
         <text x=\"{rx}\" y=\"{by}\" font-size=\"11\" text-anchor=\"end\">{x1:.3e}</text>\n\
         <text x=\"4\" y=\"{b}\" font-size=\"11\">{y0:.3e}</text>\n\
         <text x=\"4\" y=\"{ty}\" font-size=\"11\">{y1:.3e}</text>\n\
         <text x=\"{cx}\" y=\"{lly}\" font-size=\"12\" text-anchor=\"middle\">{xl}</text>\n\
         <text x=\"14\" y=\"{cy}\" font-size=\"12\" transform=\"rotate(-90 14 {cy})\" \
         text-anchor=\"middle\">{yl}</text>\n",
        m = MARGIN,
        rx = SVG_W - MARGIN,
        by = SVG_H - MARGIN + 16.0,
        b = SVG_H - MARGIN,
        ty = MARGIN + 4.0,
        cx = SVG_W / 2.0,
        cy = SVG_H / 2.0,
        lly = SVG_H - MARGIN + 34.0,
        xl = plot.x,
        yl = plot.y,
    ));
    if plot.curve.len() > 1 {
        let pts: Vec<String> =
            plot.curve.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
    }
    for &(x, y) in &plot.points {
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#2c3e50\"/>\n",
            px(x),
            py(y)
        ));
    }
    s.push_str("</svg>\n");
    s
}
