use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use wavessm::carleman::{chebyshev_fit_gelu, gelu, max_grid_error, FitDomain, SamplingSpec, Weighting};
use wavessm::circulant::{circulant_residual, coupling_fields, distance_profile, reconstruct_coupling, DftBasis};
use wavessm::data::{generate_synthetic, read_split, write_split, CsvSchema, Dataset, SyntheticSpec};
use wavessm::margin::{margin_explained, DomainChoice, FitWeighting, MarginSettings};
use wavessm::modal::{class_separation_ranking, modal_energy, render_field, wave_interaction, ModalEnergy};
use wavessm::model::ModelConfig;
use wavessm::oscillator::{coupling_matrix, homogeneous_lags, phase_raster, ring_adjacency, wave_summary, DynamicsOperator, OscillatorParams, PhaseState};
use wavessm::report::{self, TrialRow};
use wavessm::ssm::{s4d_spectrum_with_origin, IndexOrigin, Variant};
use wavessm::train::{correct_subset, evaluate, train, TrainConfig};
use wavessm::{Error as CoreError, Model64};

use crate::{AnalyzeArgs, CarlemanArgs, Cli, Command, DataSelection, EvalArgs, GenDataArgs, RunConfig, SimulateArgs, TopologyArgs, TrainArgs};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => gen_data(cli, a),
        Command::Train(a) => train_cmd(cli, a),
        Command::Eval(a) => eval_cmd(cli, a),
        Command::AnalyzeModes(a) => analyze_modes(cli, a),
        Command::CarlemanReport(a) => carleman_report(cli, a),
        Command::Simulate(a) => simulate(cli, a),
        Command::Topology(a) => topology(cli, a),
    }
}

fn manifest(cli: &Cli, resolved: serde_json::Value) -> RunConfig {
    let mut m = RunConfig::new(cli.command.clone(), cli.seed, cli.threads, cli.out.clone());
    m.resolved = resolved;
    m
}

fn out_dir(cli: &Cli) -> Result<PathBuf> {
    let dir = cli.out.clone().ok_or_else(|| anyhow!("--out is required for this command"))?;
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn emit(cli: &Cli, summary: &serde_json::Value) -> Result<()> {
    if cli.json {
        println!("{}", serde_json::to_string(summary)?);
    }
    Ok(())
}

fn gnuplot(cli: &Cli, dir: &Path, name: &str, script: String) -> Result<()> {
    if cli.gnuplot {
        std::fs::write(dir.join(name), script)?;
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn gen_data(cli: &Cli, a: &GenDataArgs) -> Result<()> {
    let dir = out_dir(cli)?;
    let mut spec: SyntheticSpec = match &a.spec {
        Some(p) => read_json(p)?,
        None => SyntheticSpec::default(),
    };
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    let data = generate_synthetic(&spec)?;
    write_split(&dir, &data)?;
    report::write_json(&dir.join("spec.json"), &spec)?;
    manifest(cli, serde_json::to_value(&spec)?).write(&dir)?;
    log::info!("wrote {} train and {} test samples to {}", data.train.len(), data.test.len(), dir.display());
    emit(cli, &json!({"train": data.train.len(), "test": data.test.len()}))
}

/// Contents of `train --config`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct TrainFile {
    model: ModelConfig,
    training: TrainConfig,
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let ckpt = cli.out.clone().ok_or_else(|| anyhow!("--out <checkpoint.json> is required"))?;
    let dir = match ckpt.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut cfg: TrainFile = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainFile::default(),
    };
    if let Some(s) = cli.seed {
        cfg.model.init_seed = s;
        cfg.training.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.training.epochs = e;
    }
    if let Some(c) = &a.classes {
        cfg.model.classes = Some(c.clone());
    }
    let split = read_split(&a.data, &CsvSchema::default())?;
    let (train_set, test_set) = match &cfg.model.classes {
        Some(c) => (split.train.select_classes(c), split.test.select_classes(c)),
        None => (split.train, split.test),
    };
    if train_set.is_empty() {
        bail!(CoreError::Empty(format!("no training samples in {}", a.data.display())));
    }
    cfg.model.channels = train_set.channels().unwrap_or(1);
    cfg.model.n_classes = cfg.model.classes.as_ref().map_or(train_set.n_classes(), Vec::len);
    let mut model = Model64::new(cfg.model.clone())?;
    let monitor = (!test_set.is_empty()).then_some(&test_set);
    let history = train(&mut model, &train_set, monitor, &cfg.training)?;
    report::write_json(&dir.join("history.json"), &history)?;
    manifest(cli, serde_json::to_value(&cfg)?).write(&dir)?;
    if let Some(msg) = &history.aborted {
        bail!(CoreError::Divergence(msg.clone()));
    }
    model.save(&ckpt)?;
    let last = history.epochs.last();
    emit(
        cli,
        &json!({
            "epochs": history.epochs.len(),
            "loss": last.map(|e| e.loss),
            "train_accuracy": last.map(|e| e.train_accuracy),
            "test_accuracy": last.and_then(|e| e.monitor_accuracy),
        }),
    )
}

fn load_selection(sel: &DataSelection) -> Result<(Model64, Dataset)> {
    let model = Model64::load(&sel.ckpt).with_context(|| format!("loading {}", sel.ckpt.display()))?;
    let split = read_split(&sel.data, &CsvSchema::default())?;
    let data = if sel.split == "train" { split.train } else { split.test };
    let data = match &model.config().classes {
        Some(c) => data.select_classes(c),
        None => data,
    };
    if data.is_empty() {
        bail!(CoreError::Empty(format!("{} split of {} is empty", sel.split, sel.data.display())));
    }
    Ok((model, data))
}

fn eval_cmd(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let (model, data) = load_selection(&a.input)?;
    let data = if a.correct_only { correct_subset(&model, &data)? } else { data };
    let metrics = evaluate(&model, &data)?;
    log::info!("accuracy {:.4} on {} samples", metrics.accuracy, metrics.n);
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        report::write_json(&dir.join("metrics.json"), &metrics)?;
        manifest(cli, json!({"n_samples": data.len()})).write(dir)?;
    }
    emit(cli, &serde_json::to_value(&metrics)?)
}

fn analyze_modes(cli: &Cli, a: &AnalyzeArgs) -> Result<()> {
    let dir = out_dir(cli)?;
    let (model, data) = load_selection(&a.input)?;
    let data = if a.all_samples { data } else { correct_subset(&model, &data)? };
    if data.is_empty() {
        bail!(CoreError::Empty("no correctly classified samples to analyse".into()));
    }
    let n = model.config().n;
    for &(i, j) in a.pairs.iter().chain(a.field_pair.iter()) {
        if i > n || j > n || i == j {
            bail!(CoreError::InvalidParameter(format!("pair ({i},{j}) needs distinct modes in 1..={n}")));
        }
    }
    let energies: Vec<ModalEnergy<f64>> = data
        .samples
        .par_iter()
        .map(|s| Ok(modal_energy(&model.modal_series(s.series.view())?)))
        .collect::<Result<_, CoreError>>()?;
    let mut per_class: BTreeMap<usize, Vec<ModalEnergy<f64>>> = BTreeMap::new();
    for (s, e) in data.samples.iter().zip(&energies) {
        per_class.entry(s.label).or_default().push(e.clone());
    }
    let ranking = class_separation_ranking(&per_class)?;
    let freqs = model.spectrum().mode_frequencies().to_vec();

    // 0-based from here on
    let pairs: Vec<(usize, usize)> = if a.pairs.is_empty() {
        vec![(ranking[0].mode, ranking[1].mode)]
    } else {
        a.pairs.iter().map(|&(i, j)| (i - 1, j - 1)).collect()
    };
    let interactions = data
        .samples
        .par_iter()
        .map(|s| {
            let series = model.modal_series(s.series.view())?;
            pairs.iter().map(|&(i, j)| wave_interaction(&series, i, j)).collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, CoreError>>()?;

    let sample = data
        .samples
        .get(a.field_sample)
        .ok_or_else(|| CoreError::IndexOutOfRange(format!("field sample {} of {}", a.field_sample, data.len())))?;
    let series = model.modal_series(sample.series.view())?;
    let field = render_field(&series, model.basis(), a.field_pair.map(|(i, j)| (i - 1, j - 1)))?;

    let rows = |i: usize| (data.samples[i].id, data.samples[i].label);
    let energy_rows: Vec<_> = energies
        .iter()
        .enumerate()
        .map(|(i, e)| TrialRow { sample_id: rows(i).0, label: rows(i).1, values: e })
        .collect();
    report::write_energies(&dir.join(report::ENERGIES_CSV), &energy_rows)?;
    report::write_ranking(&dir.join(report::RANKING_CSV), &ranking, &freqs)?;
    let z_rows: Vec<_> = interactions
        .iter()
        .enumerate()
        .map(|(i, z)| TrialRow { sample_id: rows(i).0, label: rows(i).1, values: z })
        .collect();
    report::write_interactions(&dir.join(report::INTERACTIONS_CSV), &pairs, &z_rows)?;
    report::write_field(&dir.join(report::FIELD_CSV), &field)?;
    gnuplot(cli, &dir, "field.gp", report::gnuplot_heatmap(report::FIELD_CSV, "field", true))?;
    gnuplot(cli, &dir, "ranking.gp", report::gnuplot_lines(report::RANKING_CSV, "class separation", &[4]))?;

    let top: Vec<_> = ranking
        .iter()
        .take(5)
        .map(|r| json!({"mode": r.mode + 1, "frequency": freqs[r.mode], "score": r.score}))
        .collect();
    manifest(
        cli,
        json!({"n_samples": data.len(), "pairs": pairs.iter().map(|(i, j)| [i + 1, j + 1]).collect::<Vec<_>>()}),
    )
    .write(&dir)?;
    emit(cli, &json!({"n_samples": data.len(), "top_modes": top}))
}

fn carleman_report(cli: &Cli, a: &CarlemanArgs) -> Result<()> {
    let dir = out_dir(cli)?;
    let (model, data) = load_selection(&a.input)?;
    let domain: DomainChoice = a.domain.parse()?;
    let weighting: FitWeighting = a.weighting.parse()?;
    let sampling = SamplingSpec { nodes: a.nodes, weighting: Weighting::Uniform };
    let settings = MarginSettings {
        orders: a.orders.clone(),
        domain,
        sampling: sampling.clone(),
        weighting,
        correct_only: !a.all_samples,
    };
    // the margin analysis runs first so an auto domain is resolved for fit.json
    let margins = if model.config().n_classes == 2 { Some(margin_explained(&model, &data, &settings)?) } else { None };
    let fit_domain = match (&margins, domain) {
        (Some(m), _) => m.domain,
        (None, DomainChoice::Fixed { lo, hi }) => FitDomain::new(lo, hi)?,
        (None, DomainChoice::Auto) => FitDomain::DEFAULT,
    };
    let fit = chebyshev_fit_gelu::<f64>(a.degree, fit_domain, &sampling)?;
    let fit_json = json!({
        "domain": fit_domain,
        "degree": fit.degree,
        "nodes": a.nodes,
        "weighting": "uniform",
        "clip": fit.clip,
        "coefficients": fit.monomial,
        "chebyshev": fit.chebyshev,
        "max_error": max_grid_error(&fit, gelu, 10_000),
        "orders": margins.as_ref().map(|m| &m.fits),
    });
    report::write_json(&dir.join(report::FIT_JSON), &fit_json)?;
    let Some(margins) = margins else {
        manifest(cli, serde_json::to_value(&settings)?).write(&dir)?;
        bail!(CoreError::UnsupportedTask(format!(
            "margin analysis needs a binary model; fit.json was written but this model has {} classes",
            model.config().n_classes
        )));
    };
    report::write_margins(&dir.join(report::MARGINS_CSV), &margins)?;
    let fractions: Vec<_> = margins
        .summaries
        .iter()
        .map(|s| {
            json!({
                "order": s.order.map_or("exact".to_string(), |r| r.to_string()),
                "fraction_of_means": s.fraction_of_means,
                "mean_of_ratios": s.mean_of_ratios,
            })
        })
        .collect();
    let summary = json!({
        "n_samples": margins.n_samples,
        "domain": margins.domain,
        "weighting": weighting,
        "fractions": fractions,
    });
    report::write_json(&dir.join(report::SUMMARY_JSON), &summary)?;
    gnuplot(cli, &dir, "margins.gp", report::gnuplot_lines(report::MARGINS_CSV, "margins", &[3, 4]))?;
    manifest(cli, serde_json::to_value(&settings)?).write(&dir)?;
    emit(cli, &summary)
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let dir = out_dir(cli)?;
    let adjacency = ring_adjacency::<f64>(a.n, a.neighborhood)?;
    let params = OscillatorParams::new(a.omega, a.kappa, adjacency, homogeneous_lags(a.n, a.lag))?;
    let k = coupling_matrix(&params);
    let op = DynamicsOperator::new(&k, a.tau)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0));
    let tau = std::f64::consts::TAU;
    let phases: Array1<f64> = match a.wave {
        Some(m) => (0..a.n).map(|j| tau * (m * j) as f64 / a.n as f64 + 0.1 * rng.random_range(-1.0..1.0)).collect(),
        None => (0..a.n).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect(),
    };
    let x0 = PhaseState::from_real(&phases).to_state();
    let raster = phase_raster(&x0, &op, a.steps, a.omega)?;
    report::write_raster(&dir.join(report::RASTER_CSV), &raster)?;
    gnuplot(cli, &dir, "raster.gp", report::gnuplot_heatmap(report::RASTER_CSV, "phase raster", true))?;
    let tail = raster.slice(ndarray::s![raster.nrows() / 2.., ..]).to_owned();
    let w = wave_summary(&tail);
    let summary = json!({
        "dominant_mode": w.dominant_mode,
        "dominant_fraction": w.dominant_fraction,
        "sync_fraction": w.sync_fraction,
    });
    report::write_json(&dir.join(report::SUMMARY_JSON), &summary)?;
    manifest(cli, json!({"initial_phases": phases.to_vec()})).write(&dir)?;
    emit(cli, &summary)
}

fn topology(cli: &Cli, a: &TopologyArgs) -> Result<()> {
    let dir = out_dir(cli)?;
    let variant: Variant = a.variant.parse()?;
    let origin: IndexOrigin = a.origin.parse()?;
    let spectrum = s4d_spectrum_with_origin::<f64>(variant, a.n, origin)?;
    let basis = DftBasis::new(a.n)?;
    let k = reconstruct_coupling(&spectrum.eigenvalues, &basis)?;
    let fields = coupling_fields(&k);
    report::write_topology(&dir, &fields)?;
    let freqs = spectrum.mode_frequencies();
    report::write_table(
        &dir.join("eigenvalues.csv"),
        &["mode", "re", "im", "frequency"].map(String::from),
        spectrum.eigenvalues.iter().zip(freqs.iter()).enumerate().map(|(j, (z, f))| {
            vec![(j + 1).to_string(), report::fmt_real(z.re), report::fmt_real(z.im), report::fmt_real(*f)]
        }),
    )?;
    gnuplot(cli, &dir, "magnitude.gp", report::gnuplot_heatmap(report::MAGNITUDE_CSV, "|k_ij|", false))?;
    gnuplot(cli, &dir, "phase.gp", report::gnuplot_heatmap(report::PHASE_CSV, "arg k_ij", false))?;
    let (profile, deviation) = distance_profile(&fields.magnitude);
    let summary = json!({
        "variant": variant,
        "N": a.n,
        "index_origin": origin,
        "circulant_residual": circulant_residual(&k),
        "distance_deviation": deviation,
        "magnitude_by_distance": profile,
    });
    report::write_json(&dir.join(report::SUMMARY_JSON), &summary)?;
    manifest(cli, json!({"variant": variant, "N": a.n, "index_origin": origin})).write(&dir)?;
    emit(cli, &summary)
}
