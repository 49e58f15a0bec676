use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use qubit_decoherence::coherence::{analytic_series, coherence, monte_carlo_decay, synthetic_series, t2_from_params};
use qubit_decoherence::fit::{self, read_xy_csv};
use qubit_decoherence::noise::{estimate_psd, integrated_power, relative_variance, TimeSeries};
use qubit_decoherence::phonon::{thermal_average_pjr, thermal_rate, total_rate_from_n};
use qubit_decoherence::presets::{self, Presets};
use qubit_decoherence::pulse::{filter_curve, filter_zeros, filtered_sigma, make_cpmg, simulate_fringe, Band};
use qubit_decoherence::reproduction;
use qubit_decoherence::trap::{dls_sigma, mean_phonon_from_temperature, thermal_average_dls_sigma};
use qubit_decoherence::{CoherenceSeries, DecayParams, Error, NoiseSpectrum, PulseSequence, TrapConfig, TrapNoise};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::output::{pretty, CliError, CliResult, Ctx};
use crate::{Common, FilterArgs, FitArgs, Model, PsdArgs, RatesArgs, ReportArgs, SimulateArgs};

const DEFAULT_TRAP: &str = "preset:cs133";

/// Stated once in every rate output.
const CONVENTION: &str = "S(omega) = S(f)/(2 pi): spectra are one-sided per Hz, rates use them per rad/s";

pub struct Outcome {
    pub document: Value,
    /// Set when the document was produced but the command still fails.
    pub failure: Option<CliError>,
}

impl From<Value> for Outcome {
    fn from(document: Value) -> Self {
        Outcome {
            document,
            failure: None,
        }
    }
}

/// JSON run configuration. Relative paths resolve against the file's
/// directory; any flag given on the command line wins.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    trap: Option<PathBuf>,
    spectra: Option<PathBuf>,
    sequence: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    phonons: Option<[u32; 3]>,
    temperature: Option<f64>,
    sigma_dls: Option<f64>,
    rate: Option<f64>,
    t_max: Option<f64>,
    points: Option<usize>,
    trajectories: Option<usize>,
    noise_sd: Option<f64>,
    shots: Option<u64>,
}

impl RunConfig {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.trap,
            &mut self.spectra,
            &mut self.sequence,
            &mut self.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() && !p.to_string_lossy().starts_with("preset:") {
                *p = base.join(&*p);
            }
        }
    }
}

/// Loads the run configuration (if any) and sets up the context.
fn setup(common: &Common) -> CliResult<(RunConfig, Ctx)> {
    let Some(path) = &common.config else {
        return Ok((RunConfig::default(), common.ctx(None, None)));
    };
    let mut probe = Ctx::new(0, PathBuf::new());
    let text = probe.read(path)?;
    let mut rc: RunConfig =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("run config {}: {e}", path.display())))?;
    rc.resolve(path.parent().unwrap_or(Path::new(".")));
    let mut ctx = common.ctx(rc.output_dir.clone(), rc.seed);
    ctx.record(&path.to_string_lossy(), text.as_bytes());
    Ok((rc, ctx))
}

fn load_trap(ctx: &mut Ctx, path: Option<PathBuf>) -> CliResult<TrapConfig> {
    let path = path.unwrap_or_else(|| PathBuf::from(DEFAULT_TRAP));
    Ok(TrapConfig::from_json(&ctx.read(&path)?)?)
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> qubit_decoherence::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

#[derive(Clone, Copy)]
enum Occupation {
    Fixed([u32; 3]),
    Temperature(f64),
}

impl Occupation {
    fn to_json(self) -> Value {
        match self {
            Occupation::Fixed(n) => json!({ "fixed": n }),
            Occupation::Temperature(t) => json!({ "temperature_k": t }),
        }
    }
}

fn phonon_triple(v: Vec<u32>) -> CliResult<[u32; 3]> {
    <[u32; 3]>::try_from(v).map_err(|_| CliError::Usage("--phonons takes three values nx,ny,nz".into()))
}

pub fn simulate(a: SimulateArgs) -> CliResult<Outcome> {
    let (rc, mut ctx) = setup(&a.common)?;
    let cfg = load_trap(&mut ctx, a.trap.or(rc.trap))?;

    let occ = match (a.phonons, a.temperature) {
        (Some(n), _) => Occupation::Fixed(phonon_triple(n)?),
        (None, Some(t)) => Occupation::Temperature(t),
        _ => match (rc.phonons, rc.temperature) {
            (Some(n), _) => Occupation::Fixed(n),
            (None, Some(t)) => Occupation::Temperature(t),
            _ => Occupation::Fixed([0, 0, 0]),
        },
    };
    if let Occupation::Temperature(t) = occ {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain("temperature must be positive".into()).into());
        }
    }

    let sigma = match a.sigma_dls.or(rc.sigma_dls) {
        Some(s) => s,
        None => match occ {
            Occupation::Fixed(n) => dls_sigma(&cfg, n).abs(),
            Occupation::Temperature(t) => {
                thermal_average_dls_sigma(&cfg, cfg.omega.map(|w| mean_phonon_from_temperature(t, w)))?.abs()
            }
        },
    };
    let spectra = a.spectra.or(rc.spectra);
    let (rate, rate_source) = match (a.rate.or(rc.rate), spectra) {
        (Some(r), _) => (r, "override"),
        (None, Some(path)) => {
            let noise = TrapNoise::from_json(&ctx.read(&path)?)?;
            let r = match occ {
                Occupation::Fixed(n) => total_rate_from_n(&cfg, &noise, n).total,
                Occupation::Temperature(t) => thermal_rate(&cfg, &noise, t)?.total,
            };
            (r, "spectra")
        }
        (None, None) => (0.0, "none"),
    };
    let params = DecayParams::new(sigma, rate)?;

    let t_max = a.t_max.or(rc.t_max).unwrap_or(0.4);
    let points = a.points.or(rc.points).unwrap_or(81);
    if !(t_max > 0.0 && t_max.is_finite() && points >= 2) {
        return Err(Error::Domain("need t_max > 0 and at least 2 points".into()).into());
    }
    let grid: Vec<f64> = (0..points).map(|i| t_max * i as f64 / (points - 1) as f64).collect();

    ctx.write(
        "analytic.csv",
        &csv_bytes(|b| analytic_series(&params, &grid)?.write_csv(b))?,
    )?;
    let trajectories = a.trajectories.or(rc.trajectories).unwrap_or(10_000);
    if trajectories > 0 {
        let mc = monte_carlo_decay(&params, trajectories, ctx.seed, &grid)?;
        ctx.write("montecarlo.csv", &csv_bytes(|b| mc.write_csv(b))?)?;
    }
    let noise_sd = a.noise_sd.or(rc.noise_sd);
    if let Some(sd) = noise_sd {
        let s = synthetic_series(&params, &grid, sd, ctx.seed)?;
        ctx.write("synthetic.csv", &csv_bytes(|b| s.write_csv(b))?)?;
    }

    let mut sequence_result = Value::Null;
    if let Some(path) = a.sequence.or(rc.sequence) {
        let seq = PulseSequence::from_json(&ctx.read(&path)?)?;
        let shots = a.shots.or(rc.shots).unwrap_or(200);
        let phases: Vec<f64> = (0..16).map(|i| 2.0 * PI * i as f64 / 16.0).collect();
        let fringe = simulate_fringe(&params, &seq, &phases, shots, ctx.seed)?;
        let mut csv = String::from("phase_rad,population,sigma\n");
        for p in &fringe {
            let pop = p.population();
            csv.push_str(&format!(
                "{},{},{}\n",
                p.phase,
                pop,
                (pop * (1.0 - pop) / shots as f64).sqrt()
            ));
        }
        ctx.write("fringe.csv", csv.as_bytes())?;
        sequence_result = json!({
            "t_total_s": seq.t_total(),
            "coherence": coherence(&params, seq.t_total()),
            "shots_per_phase": shots,
        });
    }

    let t2 = t2_from_params(&params).ok();
    let result = json!({
        "params": params,
        "t2_s": t2,
        "occupation": occ.to_json(),
        "rate_source": rate_source,
        "grid": { "t_max_s": t_max, "points": points },
        "trajectories": trajectories,
        "noise_sd": noise_sd,
        "sequence": sequence_result,
    });
    // The file copy lists the outputs written before it.
    let params_doc = ctx.envelope("simulate", result.clone());
    ctx.write("params.json", pretty(&params_doc).as_bytes())?;
    Ok(ctx.envelope("simulate", result).into())
}

fn model_name(m: Model) -> &'static str {
    match m {
        Model::CoherenceDecay => "coherence_decay",
        Model::Ramsey => "ramsey",
        Model::Exponential => "exponential",
        Model::Fringe => "fringe",
    }
}

pub fn fit(a: FitArgs) -> CliResult<Outcome> {
    let (_, mut ctx) = setup(&a.common)?;
    let text = ctx.read(&a.data)?;
    let result = match a.model {
        Model::CoherenceDecay => fit::fit_coherence_decay(&CoherenceSeries::read_csv(text.as_bytes())?)?,
        Model::Ramsey => {
            let eta = match a.eta {
                Some(e) => e,
                None => load_trap(&mut ctx, a.trap)?.eta,
            };
            fit::fit_ramsey_decay(&CoherenceSeries::read_csv(text.as_bytes())?, eta)?
        }
        Model::Exponential => {
            let (t, y, s) = read_xy_csv(text.as_bytes(), "t_s", "survival")?;
            fit::fit_exponential(&t, &y, s.as_deref())?
        }
        Model::Fringe => {
            let (x, y, s) = read_xy_csv(text.as_bytes(), "phase_rad", "population")?;
            fit::fit_fringe(&x, &y, s.as_deref())?
        }
    };
    let name = format!("residuals_{}.csv", model_name(a.model));
    ctx.write(&name, &csv_bytes(|b| result.write_residuals_csv(b))?)?;
    let value = serde_json::to_value(&result).expect("fit result serializes");
    Ok(ctx.envelope("fit", value).into())
}

pub fn psd(a: PsdArgs) -> CliResult<Outcome> {
    let (_, mut ctx) = setup(&a.common)?;
    let ts = TimeSeries::from_csv(ctx.read(&a.input)?.as_bytes())?;
    let overlap = a.overlap.unwrap_or(a.segment / 2);
    let spec = estimate_psd(&ts, a.segment, overlap)?;
    ctx.write("psd.csv", &csv_bytes(|b| spec.write_csv(b))?)?;
    ctx.write("psd.json", format!("{}\n", spec.to_json()).as_bytes())?;
    let (f_lo, f_hi) = (spec.samples().next().map(|s| s.0), spec.samples().last().map(|s| s.0));
    let result = json!({
        "sample_rate_hz": ts.sample_rate(),
        "samples": ts.samples().len(),
        "segment": a.segment,
        "overlap": overlap,
        "bins": spec.len(),
        "f_min_hz": f_lo,
        "f_max_hz": f_hi,
        "relative_rms": relative_variance(&ts)?,
        "integrated_power": integrated_power(&spec),
    });
    Ok(ctx.envelope("psd", result).into())
}

pub fn filter(a: FilterArgs) -> CliResult<Outcome> {
    let (rc, mut ctx) = setup(&a.common)?;
    let seq = match (a.sequence.or(rc.sequence), a.cpmg, a.ramsey, a.duration) {
        (Some(path), ..) => PulseSequence::from_json(&ctx.read(&path)?)?,
        (None, Some(n), _, Some(t)) => make_cpmg(n, t / n.max(1) as f64)?,
        (None, None, true, Some(t)) => PulseSequence::ramsey(t)?,
        _ => {
            return Err(CliError::Usage(
                "give --sequence, --cpmg N --duration T or --ramsey --duration T".into(),
            ))
        }
    };
    if !(a.f_min > 0.0 && a.f_max > a.f_min && a.f_max.is_finite() && a.points >= 2) {
        return Err(Error::Domain("need 0 < f_min < f_max and at least 2 points".into()).into());
    }
    let (l0, l1) = (a.f_min.ln(), a.f_max.ln());
    let freqs: Vec<f64> = (0..a.points)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (a.points - 1) as f64).exp())
        .collect();
    let curve = filter_curve(&seq, &freqs);
    ctx.write("filter.csv", &csv_bytes(|b| curve.write_csv(b))?)?;
    let step = a.zero_step.unwrap_or(1.0 / (50.0 * seq.t_total()));
    let zeros = filter_zeros(&seq, a.f_min, a.f_max, step)?;

    let sigma_eff = match a.dls_psd {
        Some(path) => {
            let s = NoiseSpectrum::from_json(&ctx.read(&path)?)?;
            let band = Band {
                f_min: a.f_min,
                f_max: a.f_max,
                points: 20_000,
            };
            Some(filtered_sigma(&seq, |f| s.density(f), band)?)
        }
        None => None,
    };
    let result = json!({
        "sequence": { "t_total_s": seq.t_total(), "pi_pulses_s": seq.pi_pulses() },
        "band_hz": [a.f_min, a.f_max],
        "points": a.points,
        "zero_step_hz": step,
        "zeros_hz": zeros,
        "sigma_eff": sigma_eff,
    });
    Ok(ctx.envelope("filter", result).into())
}

pub fn estimate_rates(a: RatesArgs) -> CliResult<Outcome> {
    let (rc, mut ctx) = setup(&a.common)?;
    let cfg = load_trap(&mut ctx, a.trap.or(rc.trap))?;
    let Some(path) = a.spectra.or(rc.spectra) else {
        return Err(Error::Config("no noise spectra given (--spectra)".into()).into());
    };
    let noise = TrapNoise::from_json(&ctx.read(&path)?)?;
    let n = a
        .phonons
        .map(phonon_triple)
        .transpose()?
        .or(rc.phonons)
        .unwrap_or([0, 0, 0]);
    let t = a.temperature.or(rc.temperature).unwrap_or(presets::ODT_TEMPERATURE);
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain("temperature must be positive".into()).into());
    }
    let nbar = cfg.omega.map(|w| mean_phonon_from_temperature(t, w));
    let exact = match thermal_average_pjr(&cfg, &noise, nbar) {
        Ok(r) => json!(r),
        Err(e) if e.is_numerical() => json!({ "unavailable": e.to_string() }),
        Err(e) => return Err(e.into()),
    };
    let result = json!({
        "convention": CONVENTION,
        "fixed": { "phonons": n, "rates": total_rate_from_n(&cfg, &noise, n) },
        "thermal": {
            "temperature_k": t,
            "mean_phonons": nbar,
            "classical": thermal_rate(&cfg, &noise, t)?,
            "exact_average": exact,
        },
    });
    Ok(ctx.envelope("estimate-rates", result).into())
}

pub fn report(a: ReportArgs) -> CliResult<Outcome> {
    let (_, mut ctx) = setup(&a.common)?;
    let presets = match &a.preset_dir {
        Some(dir) if !dir.is_dir() => return Err(CliError::NotFound(dir.clone())),
        Some(dir) => Presets::with_overrides(dir)?,
        None => Presets::bundled(),
    };
    for name in [
        presets::CS133_ODT,
        presets::BBT780,
        presets::RIN_FREE_RUNNING,
        presets::RIN_40DB,
    ] {
        ctx.record(&format!("preset:{name}"), presets.text(name)?.as_bytes());
    }
    let report = reproduction::run(&presets, ctx.seed);
    let value = serde_json::to_value(&report).expect("report serializes");
    ctx.write("report.json", pretty(&ctx.envelope("report", value.clone())).as_bytes())?;
    ctx.write("report.md", report.markdown().as_bytes())?;
    let failed: Vec<String> = report.rows.iter().filter(|r| !r.pass).map(|r| r.id.clone()).collect();
    for r in &report.rows {
        eprintln!("{}", r.line());
    }
    Ok(Outcome {
        document: ctx.envelope("report", value),
        failure: (!failed.is_empty()).then_some(CliError::ReportFailed(failed)),
    })
}
