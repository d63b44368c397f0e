use std::f64::consts::PI;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use super::config::{require, ExperimentKind, LoadedConfig, PipelineConfig, ScannedPhase};
use crate::analysis::{
    car, car_with, chsh_from_visibility, coincidence_histogram, collection_efficiency, fit_power_quadratic, fit_visibility,
    heralded_g2, monte_carlo_uncertainty, unheralded_g2, CoincidenceHistogram, EfficiencyCounts, EfficiencyInputs, PhasePoint,
};
use crate::error::{with_path, Error, Result};
use crate::resonator::{q_to_physical, transmission_extremum, QualityFactors};
use crate::sfwm::{emitted_pair_rate, log_space, optimizer_summary, sweep_q_grid, write_sweep_csv, CouplingObjective, PumpConfig, SweepPoint};
use crate::tag_sim::{
    simulate_franson_with, simulate_hbt_with, simulate_pair_source_with, SimOutput, TimeTagStream, TruthCounts,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

pub struct Context {
    pub config: LoadedConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub format: OutputFormat,
}

impl Context {
    fn cfg(&self) -> &PipelineConfig {
        &self.config.config
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn envelope(&self, command: &str, result: Value) -> Value {
        json!({
            "command": command,
            "toolkit_version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.config.hash,
            "seed": self.seed,
            "result": result,
        })
    }

    fn write_json(&self, name: &str, value: &Value) -> Result<PathBuf> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    fn write_rows<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut wtr = csv::Writer::from_path(&path)?;
        for r in rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(path)
    }
}

fn pump_config(cfg: &PipelineConfig, mode_wavelength: f64) -> Result<Option<PumpConfig>> {
    cfg.pump
        .map(|p| {
            let wl = p.wavelength_nm.map_or(mode_wavelength, |nm| nm * 1e-9);
            PumpConfig::on_resonance(p.power_mw * 1e-3, wl)
        })
        .transpose()
}

#[derive(Debug, Serialize)]
struct DesignRow {
    name: String,
    q_intrinsic: f64,
    q_external: f64,
    q_loaded: f64,
    regime: String,
    t_min: f64,
    extinction_ratio_db: f64,
    alpha_per_m: f64,
    kappa_sq: f64,
    n_c: Option<f64>,
    emission_probability: f64,
    n_cc: Option<f64>,
}

pub fn design(ctx: &Context) -> Result<Value> {
    let cfg = ctx.cfg();
    let mode = cfg.mode_properties()?;
    let geometry = cfg.ring_geometry(&mode)?;
    let mut devices: Vec<(String, f64, f64)> = Vec::new();
    if let Some(q) = cfg.q {
        devices.push(("device".into(), q.intrinsic, q.external));
    }
    for d in cfg.devices.iter().flatten() {
        devices.push((d.name.clone(), d.q_intrinsic, d.q_external));
    }
    if devices.is_empty() {
        return Err(Error::Config("missing required section `q` (or `devices`)".into()));
    }
    let pump = pump_config(cfg, mode.ref_wavelength)?;
    let omega0 = mode.omega0();
    let mut rows = Vec::new();
    for (name, qi, qe) in devices {
        let q = QualityFactors::new(qi, qe).map_err(|e| Error::Config(format!("{name}: {e}")))?;
        let (t_min, er) = transmission_extremum(&q);
        let (alpha, kappa_sq) = q_to_physical(&q, &geometry, &mode, omega0);
        let rate = pump.as_ref().map(|p| emitted_pair_rate(&mode, &geometry, &q, p, 0.0)).transpose()?;
        rows.push(DesignRow {
            name,
            q_intrinsic: qi,
            q_external: qe,
            q_loaded: q.q_loaded(),
            regime: format!("{:?}", q.regime()).to_lowercase(),
            t_min,
            extinction_ratio_db: er,
            alpha_per_m: alpha,
            kappa_sq,
            n_c: rate.map(|r| r.generation_rate),
            emission_probability: q.q_loaded() / q.q_external(),
            n_cc: rate.map(|r| r.emitted_rate),
        });
    }
    let csv_path = ctx.write_rows("design.csv", &rows)?;
    let report = ctx.envelope(
        "design",
        json!({
            "fsr_hz": geometry.fsr(mode.n_g)?,
            "radius_m": geometry.radius(),
            "roundtrip_length_m": geometry.roundtrip_length(),
            "group_index": mode.n_g,
            "omega0": omega0,
            "pump_power_w": pump.map(|p| p.power),
            "rows": rows,
            "files": [csv_path],
        }),
    );
    ctx.write_json("design.json", &report)?;
    Ok(report)
}

/// Per-row shape checks on a sweep grid: along Qe at fixed Qi the emitted
/// rate rises to a single maximum and falls again.
fn grid_checks(points: &[SweepPoint], n_qe: usize) -> Value {
    let mut unimodal = true;
    let mut ratios = Vec::new();
    for row in points.chunks(n_qe) {
        let peak = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.n_cc.total_cmp(&b.1.n_cc))
            .map(|(i, _)| i)
            .unwrap_or(0);
        unimodal &= row[..=peak].windows(2).all(|w| w[0].n_cc <= w[1].n_cc);
        unimodal &= row[peak..].windows(2).all(|w| w[0].n_cc >= w[1].n_cc);
        ratios.push(row[peak].q_e / row[peak].q_i);
    }
    json!({ "unimodal_in_qe": unimodal, "grid_argmax_ratio": ratios })
}

fn run_sweep(ctx: &Context, q_i: Vec<f64>, q_e: Vec<f64>) -> Result<Option<(PathBuf, Value)>> {
    let cfg = ctx.cfg();
    if cfg.mode.is_none() || cfg.geometry.is_none() || cfg.pump.is_none() {
        return Ok(None);
    }
    let mode = cfg.mode_properties()?;
    let geometry = cfg.ring_geometry(&mode)?;
    let pump = pump_config(cfg, mode.ref_wavelength)?.expect("pump checked above");
    let n_qe = q_e.len();
    let grid = sweep_q_grid(&mode, &geometry, &pump, &q_i, &q_e)?;
    let path = ctx.path("sweep.csv");
    write_sweep_csv(&grid, File::create(&path)?)?;
    Ok(Some((path, grid_checks(&grid, n_qe))))
}

pub fn optimize(ctx: &Context, objective: Option<CouplingObjective>) -> Result<Value> {
    let cfg = ctx.cfg();
    let section = require(&cfg.optimize, "optimize")?;
    let objective = objective.unwrap_or(section.objective);
    let summary = optimizer_summary(section.q_intrinsic, objective)?;
    let (q_i, q_e) = match cfg.sweep {
        Some(s) => (log_space(s.q_i_min, s.q_i_max, s.points), log_space(s.q_e_min, s.q_e_max, s.points)),
        None => {
            let qi = section.q_intrinsic;
            (log_space(qi / 10.0, qi * 10.0, 41), log_space(qi / 100.0, qi * 100.0, 81))
        }
    };
    let sweep = run_sweep(ctx, q_i, q_e)?;
    let report = ctx.envelope(
        "optimize",
        json!({
            "optimum": summary,
            "sweep_file": sweep.as_ref().map(|s| s.0.clone()),
            "grid_checks": sweep.map(|s| s.1),
        }),
    );
    ctx.write_json("optimize.json", &report)?;
    Ok(report)
}

pub fn sweep(ctx: &Context) -> Result<Value> {
    let cfg = ctx.cfg();
    let s = require(&cfg.sweep, "sweep")?;
    require(&cfg.mode, "mode")?;
    require(&cfg.geometry, "geometry")?;
    require(&cfg.pump, "pump")?;
    let (path, checks) = run_sweep(
        ctx,
        log_space(s.q_i_min, s.q_i_max, s.points),
        log_space(s.q_e_min, s.q_e_max, s.points),
    )?
    .expect("sections checked above");
    let report = ctx.envelope("sweep", json!({ "file": path, "points": s.points * s.points, "grid_checks": checks }));
    ctx.write_json("sweep.json", &report)?;
    Ok(report)
}

/// Seed for phase step `k` of a scan: the run seed advanced by `k` golden-ratio
/// increments.
pub fn scan_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn write_stream(ctx: &Context, stem: &str, stream: &TimeTagStream) -> Result<PathBuf> {
    let path = match ctx.format {
        OutputFormat::Json => ctx.path(&format!("{stem}.qtag")),
        OutputFormat::Csv => ctx.path(&format!("{stem}.csv")),
    };
    let file = File::create(&path)?;
    match ctx.format {
        OutputFormat::Json => stream.write_binary(file)?,
        OutputFormat::Csv => stream.write_csv(file)?,
    }
    Ok(path)
}

pub fn simulate(ctx: &Context) -> Result<Value> {
    let cfg = ctx.cfg();
    let source = require(&cfg.source, "source")?;
    let det = require(&cfg.detectors, "detectors")?;
    let exp = require(&cfg.experiment, "experiment")?;
    let controls = cfg.run_section().controls();
    let mut runs = Vec::new();
    match exp.kind {
        ExperimentKind::PairSource => {
            let out = simulate_pair_source_with(source, &det.signal, &det.idler, exp.pump_mw, exp.duration, ctx.seed, controls)?;
            runs.push(("tags".to_string(), None, ctx.seed, out));
        }
        ExperimentKind::Hbt => {
            let s1 = det.s1.unwrap_or(det.signal);
            let s2 = det.s2.unwrap_or(det.signal);
            let out = simulate_hbt_with(source, &det.idler, &s1, &s2, exp.splitter_ratio, exp.pump_mw, exp.duration, ctx.seed, controls)?;
            runs.push(("tags".to_string(), None, ctx.seed, out));
        }
        ExperimentKind::Franson => {
            let base = *require(&exp.franson, "experiment.franson")?;
            match exp.phase_scan {
                None => {
                    let out = simulate_franson_with(source, &base, &det.signal, &det.idler, exp.pump_mw, exp.duration, ctx.seed, controls)?;
                    runs.push(("tags".to_string(), Some(base.total_phase()), ctx.seed, out));
                }
                Some(scan) => {
                    if scan.points < 1 {
                        return Err(Error::Config("experiment.phase_scan.points must be >= 1".into()));
                    }
                    for k in 0..scan.points {
                        let phase = 2.0 * PI * k as f64 / scan.points as f64;
                        let mut f = base;
                        match scan.scanned {
                            ScannedPhase::Alpha => f.phase_alpha = phase,
                            ScannedPhase::Beta => f.phase_beta = phase,
                        }
                        let seed = scan_seed(ctx.seed, k);
                        let out = simulate_franson_with(source, &f, &det.signal, &det.idler, exp.pump_mw, exp.duration, seed, controls)?;
                        runs.push((format!("tags_phase{k:02}"), Some(f.total_phase()), seed, out));
                    }
                }
            }
        }
    }
    let mut files = Vec::new();
    for (stem, phase, seed, SimOutput { stream, truth }) in &runs {
        let path = write_stream(ctx, stem, stream)?;
        files.push(json!({
            "file": path,
            "seed": seed,
            "total_phase": phase,
            "records": stream.len(),
            "channels": channel_summary(stream),
            "truth": truth,
        }));
    }
    let total: TruthCounts = runs.iter().fold(TruthCounts::default(), |mut acc, r| {
        acc.slots += r.3.truth.slots;
        acc.pairs += r.3.truth.pairs;
        acc.detected_pairs += r.3.truth.detected_pairs;
        acc
    });
    let report = ctx.envelope(
        "simulate",
        json!({
            "experiment": exp,
            "source": source,
            "mean_pairs_per_slot": source.mean_pairs_per_slot(exp.pump_mw),
            "outputs": files,
            "total_pairs": total.pairs,
        }),
    );
    ctx.write_json("simulate.json", &report)?;
    Ok(report)
}

fn channel_summary(stream: &TimeTagStream) -> Value {
    let mut m = Map::new();
    for ch in stream.channel_ids() {
        m.insert(ch.to_string(), json!({ "counts": stream.count(ch), "rate": stream.rate(ch) }));
    }
    Value::Object(m)
}

pub fn read_stream(path: &Path) -> Result<TimeTagStream> {
    let file = File::open(path).map_err(with_path(path))?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let stream = if is_csv {
        TimeTagStream::read_csv(file, None, 0)
    } else {
        TimeTagStream::read_binary(file)
    };
    stream.map_err(|e| match e {
        Error::Format { offset, reason } => Error::Format {
            offset,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    })
}

fn with_context<T>(what: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Domain(m) => Error::Domain(format!("{what}: {m}")),
        Error::FitDiverged(m) => Error::FitDiverged(format!("{what}: {m}")),
        Error::FitDegenerate(m) => Error::FitDegenerate(format!("{what}: {m}")),
        other => other,
    })
}

#[derive(Serialize)]
struct HeraldedRow {
    tau_s: f64,
    g2: Option<f64>,
    sigma: Option<f64>,
    n13: u64,
    n123: u64,
}

#[derive(Serialize)]
struct G2Row {
    tau_s: f64,
    g2: f64,
    sigma: f64,
    pairs: u64,
}

pub fn analyze(ctx: &Context, files: &[PathBuf]) -> Result<Value> {
    let opts = ctx.cfg().analysis.clone().unwrap_or_default();
    let inputs: Vec<PathBuf> = if files.is_empty() {
        opts.inputs.iter().map(PathBuf::from).collect()
    } else {
        files.to_vec()
    };
    if inputs.is_empty() {
        return Err(Error::Config("no input tag files (pass paths or set `analysis.inputs`)".into()));
    }
    let streams: Vec<TimeTagStream> = inputs.iter().map(|p| read_stream(p)).collect::<Result<_>>()?;
    let h = opts.histogram;

    let mut per_input = Vec::new();
    let mut histograms: Vec<Option<CoincidenceHistogram>> = Vec::new();
    for (path, stream) in inputs.iter().zip(&streams) {
        let stem = path.file_stem().map_or("input".into(), |s| s.to_string_lossy().into_owned());
        let mut entry = Map::new();
        entry.insert("file".into(), json!(path));
        entry.insert("records".into(), json!(stream.len()));
        entry.insert("duration_s".into(), json!(stream.duration()));
        entry.insert("channels".into(), channel_summary(stream));
        if stream.is_empty() {
            entry.insert("diagnostics".into(), json!("zero counts: estimators skipped"));
            histograms.push(None);
            per_input.push(Value::Object(entry));
            continue;
        }
        let hist = with_context("histogram", coincidence_histogram(stream, h.ch_a, h.ch_b, h.bin_width, h.span))?;
        let hist_path = ctx.path(&format!("histogram_{stem}.csv"));
        hist.write_csv(File::create(&hist_path)?)?;
        entry.insert("histogram".into(), json!({ "file": hist_path, "total": hist.total(), "bins": hist.len() }));
        if let Some(c) = &opts.car {
            let r = match c.centre {
                Some(centre) => car_with(&hist, c.window, centre, &c.exclude),
                None if c.exclude.is_empty() => car(&hist, c.window),
                None => car_with(&hist, c.window, hist.delay_ps(hist.peak_index()) as f64 * 1e-12, &c.exclude),
            };
            let r = with_context("car", r)?;
            entry.insert("car".into(), json!(r));
            let off = r.accidentals / (c.window / hist.bin_width()).round().max(1.0);
            entry.insert("peak_fwhm_s".into(), json!(hist.peak_fwhm(off)));
        }
        if let Some(g) = &opts.g2h {
            let res = with_context("g2h", heralded_g2(stream, g.herald, g.s1, g.s2, g.window, &g.taus))?;
            let rows: Vec<HeraldedRow> = res
                .points
                .iter()
                .map(|p| HeraldedRow {
                    tau_s: p.tau,
                    g2: p.g2,
                    sigma: p.sigma,
                    n13: p.n13,
                    n123: p.n123,
                })
                .collect();
            let path = ctx.write_rows(&format!("g2h_{stem}.csv"), &rows)?;
            entry.insert("g2h".into(), json!({ "file": path, "n1": res.n1, "n12": res.n12, "at_zero": res.at_zero() }));
        }
        if let Some(g) = &opts.g2uh {
            let res = with_context("g2uh", unheralded_g2(stream, g.ch_a, g.ch_b, g.window, &g.taus))?;
            let rows: Vec<G2Row> = res
                .iter()
                .map(|p| G2Row {
                    tau_s: p.tau,
                    g2: p.g2,
                    sigma: p.sigma,
                    pairs: p.pairs,
                })
                .collect();
            let path = ctx.write_rows(&format!("g2uh_{stem}.csv"), &rows)?;
            let zero = res.iter().min_by(|a, b| a.tau.abs().total_cmp(&b.tau.abs()));
            let k = zero.and_then(|z| crate::analysis::effective_mode_number(z.g2).ok());
            entry.insert("g2uh".into(), json!({ "file": path, "at_zero": zero, "effective_mode_number": k }));
        }
        histograms.push(Some(hist));
        per_input.push(Value::Object(entry));
    }

    let mut result = Map::new();
    result.insert("inputs".into(), Value::Array(per_input));

    if let Some(pf) = &opts.power_fit {
        if pf.pump_mw.len() != streams.len() {
            return Err(Error::Config("analysis.power_fit.pump_mw needs one power per input".into()));
        }
        let pts: Vec<(f64, f64)> = pf.pump_mw.iter().zip(&streams).map(|(&p, s)| (p, s.rate(pf.channel))).collect();
        let fit = with_context("power_fit", fit_power_quadratic(&pts))?;
        result.insert("power_fit".into(), json!({ "points": pts, "fit": fit }));
    }

    if let Some(e) = &opts.efficiency {
        if let (Some(stream), Some(hist)) = (streams.first(), histograms.first().and_then(|h| h.as_ref())) {
            let r = with_context("efficiency", car(hist, e.window))?;
            let t = stream.duration();
            let inputs = EfficiencyInputs {
                singles_s: stream.rate(h.ch_a),
                singles_i: stream.rate(h.ch_b),
                coincidences: r.coincidences / t,
                accidentals: r.accidentals / t,
                noise_fraction_s: e.noise_fraction_s,
                noise_fraction_i: e.noise_fraction_i,
                dark_s: e.dark_s,
                dark_i: e.dark_i,
            };
            let est = with_context("efficiency", collection_efficiency(&inputs))?;
            let mc = monte_carlo_uncertainty(
                &EfficiencyCounts {
                    integration_time: t,
                    rates: inputs,
                },
                |d| {
                    let x = collection_efficiency(&d.rates)?;
                    Ok(vec![x.eta_s, x.eta_i, x.n_c])
                },
                opts.monte_carlo_trials,
                ctx.seed,
            )?;
            result.insert("efficiency".into(), json!({ "inputs": inputs, "estimate": est, "sigma": mc.sigmas }));
        } else {
            result.insert("efficiency".into(), json!("skipped: first input is empty"));
        }
    }

    if let Some(v) = &opts.visibility {
        if v.phases.len() != streams.len() {
            return Err(Error::Config("analysis.visibility.phases needs one phase per input".into()));
        }
        let mut scan = Vec::new();
        let mut singles = Vec::new();
        for ((phase, stream), hist) in v.phases.iter().zip(&streams).zip(&histograms) {
            let Some(hist) = hist else { continue };
            let r = with_context("visibility", car_with(hist, v.window, 0.0, &v.exclude))?;
            scan.push(PhasePoint {
                phase: *phase,
                coincidences: r.coincidences,
                accidentals: r.accidentals,
            });
            singles.push(json!({ "phase": phase, "signal": stream.count(h.ch_a), "idler": stream.count(h.ch_b) }));
        }
        let fit = with_context("visibility", fit_visibility(&scan))?;
        let mc = monte_carlo_uncertainty(
            &scan,
            |d| {
                let f = fit_visibility(d)?;
                Ok(vec![f.raw.visibility, f.subtracted.visibility])
            },
            opts.monte_carlo_trials,
            ctx.seed,
        )?;
        let path = ctx.write_rows("visibility.csv", &scan)?;
        let mut entry = json!({
            "file": path,
            "background_subtraction": "accidental floor from off-peak bins",
            "fit": fit,
            "monte_carlo_sigma": { "raw": mc.sigmas[0], "subtracted": mc.sigmas[1] },
            "singles": singles,
        });
        if opts.chsh {
            let vis = fit.subtracted.visibility.min(1.0);
            entry["chsh"] = json!(chsh_from_visibility(vis, mc.sigmas[1])?);
        }
        result.insert("visibility".into(), entry);
    }

    let report = ctx.envelope("analyze", Value::Object(result));
    ctx.write_json("analyze.json", &report)?;
    Ok(report)
}

const REPORT_SOURCES: [&str; 5] = ["design", "optimize", "sweep", "simulate", "analyze"];

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten(&join(prefix, k), x, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| flatten(&join(prefix, &i.to_string()), x, out)),
        Value::Number(n) => out.push((prefix.to_string(), n.to_string())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        _ => {}
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Merges the per-command reports found in the output directory.
pub fn report(ctx: &Context) -> Result<Value> {
    let mut reports = Map::new();
    for name in REPORT_SOURCES {
        let path = ctx.path(&format!("{name}.json"));
        if path.exists() {
            let text = fs::read_to_string(&path)?;
            let v: Value = serde_json::from_str(&text).map_err(|e| Error::Format {
                offset: e.column() as u64,
                reason: format!("{}: {e}", path.display()),
            })?;
            reports.insert(name.into(), v);
        }
    }
    let merged = ctx.envelope("report", json!({ "reports": reports }));
    ctx.write_json("report.json", &merged)?;
    if ctx.format == OutputFormat::Csv {
        let mut rows = Vec::new();
        flatten("", &merged["result"]["reports"], &mut rows);
        let mut wtr = csv::Writer::from_path(ctx.path("report.csv"))?;
        wtr.write_record(["key", "value"])?;
        for (k, v) in rows {
            wtr.write_record([k, v])?;
        }
        wtr.flush()?;
    }
    Ok(merged)
}
