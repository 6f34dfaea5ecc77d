use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use weakcal::characterize::{
    bin_fit, ce_metric, coarse_study, me_baseline_probabilities, mse_vs_truth, self_consistency,
};
use weakcal::dataio::{load_dataset, report_to_csv, save_dataset, write_file, RunConfig};
use weakcal::qcore::BlochVector;
use weakcal::rnn::{rnn_probabilities, rnn_states, train_rnn, GruModel};
use weakcal::sdelearn::{distill, fit_spam, infer_trajectory, predict_probabilities, train_sde, TrainReport};
use weakcal::sme::{generate_dataset, Split};
use weakcal::{Dataset, TrajectoryRecord};

#[derive(Parser)]
#[command(name = "weakcal", version, about = "Weak-measurement qubit simulation and calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (or file for `report`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the data seed for `generate` and the training seed otherwise.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic dataset.
    Generate(Common),
    /// Learn SDE parameters from a dataset.
    TrainSde(Common),
    /// Train the recurrent network.
    TrainRnn(Common),
    /// Fit SDE parameters to trajectories of a trained network.
    Distill(Common),
    /// Binning fit of the constrained model.
    BinFit(Common),
    /// Preparation and readout tomography.
    SpamTomo(Common),
    /// Cross entropy and trajectory metrics on test shots.
    Evaluate(Common),
    /// Parameter learning across coarse-graining factors.
    CoarseStudy(Common),
    /// Convert a JSON report to CSV.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::TrainSde(_) => "train-sde",
            Command::TrainRnn(_) => "train-rnn",
            Command::Distill(_) => "distill",
            Command::BinFit(_) => "bin-fit",
            Command::SpamTomo(_) => "spam-tomo",
            Command::Evaluate(_) => "evaluate",
            Command::CoarseStudy(_) => "coarse-study",
            Command::Report { .. } => "report",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Generate(c)
            | Command::TrainSde(c)
            | Command::TrainRnn(c)
            | Command::Distill(c)
            | Command::BinFit(c)
            | Command::SpamTomo(c)
            | Command::Evaluate(c)
            | Command::CoarseStudy(c) => c,
            Command::Report { common, .. } => common,
        }
    }
}

fn load_config(c: &Common, data_seed: bool) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        if data_seed {
            cfg.data.seed = s;
        } else {
            cfg.train.seed = s;
        }
    }
    Ok(cfg)
}

fn out_dir(c: &Common) -> Result<&Path> {
    match &c.out {
        Some(p) => {
            fs::create_dir_all(p)?;
            Ok(p)
        }
        None => bail!("--out is required"),
    }
}

fn input_data(cfg: &RunConfig) -> Result<Dataset> {
    let Some(p) = &cfg.data.input else { bail!("data.input is not set in the config") };
    load_dataset(p).with_context(|| format!("loading dataset {}", p.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    write_file(path, s.as_bytes())?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn load_rnn(cfg: &RunConfig) -> Result<Option<GruModel>> {
    match &cfg.data.rnn_model {
        Some(p) => {
            let m: GruModel = read_json(p)?;
            m.validate()?;
            Ok(Some(m))
        }
        None => Ok(None),
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn generate(c: &Common) -> Result<Value> {
    let cfg = load_config(c, true)?;
    let out = out_dir(c)?;
    let meta = cfg.dataset_meta()?;
    let data = generate_dataset(&meta)?;
    save_dataset(out, &data)?;
    Ok(json!({
        "out": path_str(out),
        "n_shots": data.len(),
        "dt": meta.dt,
        "format_version": meta.format_version,
    }))
}

fn train_sde_cmd(c: &Common) -> Result<Value> {
    let cfg = load_config(c, false)?;
    let out = out_dir(c)?;
    let data = input_data(&cfg)?;
    let rep = train_sde(&data, cfg.pack(), &cfg.train_config())?;
    write_json(&out.join("report.json"), &rep)?;
    Ok(json!({
        "report": path_str(&out.join("report.json")),
        "best_val_loss": rep.best_val_loss,
        "best_params": rep.best_params,
        "constrained_view": rep.constrained_view,
    }))
}

fn train_rnn_cmd(c: &Common) -> Result<Value> {
    let cfg = load_config(c, false)?;
    let out = out_dir(c)?;
    let data = input_data(&cfg)?;
    let (model, rep) = train_rnn(&data, cfg.loss, &cfg.rnn_config())?;
    write_json(&out.join("model.json"), &model)?;
    write_json(&out.join("report.json"), &rep)?;
    Ok(json!({
        "model": path_str(&out.join("model.json")),
        "report": path_str(&out.join("report.json")),
        "best_val_ce": rep.best_val_ce,
        "best_epoch": rep.best_epoch,
    }))
}

fn distill_cmd(c: &Common) -> Result<Value> {
    let cfg = load_config(c, false)?;
    let out = out_dir(c)?;
    let data = input_data(&cfg)?;
    let Some(model) = load_rnn(&cfg)? else { bail!("data.rnn_model is not set in the config") };
    let all: Vec<&TrajectoryRecord> = data.shots.iter().collect();
    let targets = rnn_states(&model, &all);
    let rep = distill(&data, &targets, cfg.pack(), &cfg.train_config())?;
    write_json(&out.join("report.json"), &rep)?;
    Ok(json!({
        "report": path_str(&out.join("report.json")),
        "final_mse": rep.final_mse,
        "best_params": rep.best_params,
        "constrained_view": rep.constrained_view,
    }))
}

fn bin_fit_cmd(c: &Common) -> Result<Value> {
    let cfg = load_config(c, false)?;
    let out = out_dir(c)?;
    let data = input_data(&cfg)?;
    let shots: Vec<&TrajectoryRecord> = data.shots.iter().filter(|s| !s.record.is_empty()).collect();
    let (series, source): (Vec<Vec<BlochVector>>, &str) = match load_rnn(&cfg)? {
        Some(m) => (
            rnn_states(&m, &shots)
                .into_iter()
                .map(|v| v.into_iter().map(|r| BlochVector::clipped(r.x, r.y, r.z)).collect())
                .collect(),
            "rnn",
        ),
        None => {
            let t = shots
                .iter()
                .map(|s| s.truth.clone())
                .collect::<Option<Vec<_>>>()
                .context("dataset has no truth series and data.rnn_model is not set")?;
            (t, "truth")
        }
    };
    let trajs: Vec<(usize, &[BlochVector])> =
        shots.iter().zip(&series).map(|(s, v)| (s.prep.index(), v.as_slice())).collect();
    let res = bin_fit(&trajs, data.meta.dt, cfg.study.delta)?;
    write_json(&out.join("bin_fit.json"), &res)?;
    Ok(json!({
        "result": path_str(&out.join("bin_fit.json")),
        "trajectories": source,
        "omega_r": res.omega_r,
        "gamma_d": res.gamma_d,
        "eta": res.eta,
    }))
}

fn spam_cmd(c: &Common) -> Result<Value> {
    let cfg = load_config(c, false)?;
    let out = out_dir(c)?;
    let data = input_data(&cfg)?;
    let spam = fit_spam(data.split(Split::Train), cfg.train.fit_readout)?;
    write_json(&out.join("spam.json"), &spam)?;
    Ok(json!({ "spam": path_str(&out.join("spam.json")), "visibility": spam.visibility }))
}

fn evaluate_cmd(c: &Common) -> Result<Value> {
    let cfg = load_config(c, false)?;
    let out = out_dir(c)?;
    let held;
    let data;
    let test: Vec<&TrajectoryRecord> = match &cfg.data.test_input {
        Some(p) => {
            held = load_dataset(p)?;
            held.shots.iter().collect()
        }
        None => {
            data = input_data(&cfg)?;
            data.split(Split::Test)
        }
    };
    if test.is_empty() {
        bail!("no test shots to evaluate");
    }
    let y: Vec<i8> = test.iter().map(|s| s.outcome).collect();
    let mut res = serde_json::Map::new();
    res.insert("n_test".into(), json!(test.len()));

    let sde: Option<TrainReport> = cfg.data.sde_report.as_deref().map(read_json).transpose()?;
    if let Some(rep) = &sde {
        let spam = rep.spam.clone().unwrap_or_default();
        let model = rep.best_pack().context("report has no SDE parameters")?.to_model();
        let pi = predict_probabilities(&model, &spam, &test);
        res.insert("sde_ce".into(), json!(ce_metric(&pi, &y)));
        let me = me_baseline_probabilities(&model, &spam, &test);
        res.insert("me_baseline_ce".into(), json!(ce_metric(&me, &y)));
        let sc = self_consistency(&pi, &y, cfg.study.delta)?;
        res.insert("sde_self_consistency".into(), json!({ "epsilon": sc.epsilon, "slope": sc.slope }));
        write_json(&out.join("self_consistency.json"), &sc)?;
        if test.iter().all(|s| s.truth.is_some()) {
            let pred: Vec<Vec<[f64; 3]>> = test
                .iter()
                .map(|s| infer_trajectory(&model, &spam, s).map(|v| v.iter().map(|b| b.as_array()).collect()))
                .collect::<Result<_, _>>()?;
            let truth: Vec<&[BlochVector]> = test.iter().map(|s| s.truth.as_deref().unwrap()).collect();
            res.insert("sde_trajectory_mse".into(), json!(mse_vs_truth(&pred, &truth, None)?.total));
        }
    }
    if let Some(m) = load_rnn(&cfg)? {
        let spam = sde.as_ref().and_then(|r| r.spam.clone()).unwrap_or_default();
        let pi = rnn_probabilities(&m, &spam, &test);
        res.insert("rnn_ce".into(), json!(ce_metric(&pi, &y)));
        if test.iter().all(|s| s.truth.is_some()) {
            let pred: Vec<Vec<[f64; 3]>> =
                rnn_states(&m, &test).into_iter().map(|v| v.iter().map(|r| r.as_array()).collect()).collect();
            let truth: Vec<&[BlochVector]> = test.iter().map(|s| s.truth.as_deref().unwrap()).collect();
            res.insert("rnn_trajectory_mse".into(), json!(mse_vs_truth(&pred, &truth, None)?.total));
        }
    }
    let gen = test_generator(&cfg)?;
    if let Some(g) = gen {
        let spam = sde.as_ref().and_then(|r| r.spam.clone()).unwrap_or_default();
        let pi = predict_probabilities(&g, &spam, &test);
        res.insert("true_model_ce".into(), json!(ce_metric(&pi, &y)));
        if sde.is_none() {
            let me = me_baseline_probabilities(&g, &spam, &test);
            res.insert("me_baseline_ce".into(), json!(ce_metric(&me, &y)));
        }
    }
    let v = Value::Object(res);
    write_json(&out.join("evaluation.json"), &v)?;
    Ok(v)
}

fn test_generator(cfg: &RunConfig) -> Result<Option<weakcal::PhysicalModel>> {
    let dir = cfg.data.test_input.as_ref().or(cfg.data.input.as_ref());
    match dir {
        Some(d) => Ok(weakcal::dataio::load_meta(d)?.generator),
        None => Ok(None),
    }
}

fn coarse_cmd(c: &Common) -> Result<Value> {
    let cfg = load_config(c, false)?;
    let out = out_dir(c)?;
    let data = input_data(&cfg)?;
    let truth = data
        .meta
        .generator
        .map(|g| g.constrained_view())
        .unwrap_or_else(|| cfg.model.generator.constrained());
    let rep = coarse_study(&data, &cfg.study.k_list, cfg.pack(), &cfg.train_config(), truth)?;
    write_json(&out.join("coarse_study.json"), &rep)?;
    write_file(&out.join("coarse_study.csv"), rep.to_csv().as_bytes())?;
    Ok(json!({
        "report": path_str(&out.join("coarse_study.json")),
        "rows": rep.rows,
    }))
}

fn report_cmd(c: &Common, input: &Path) -> Result<Value> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let csv = report_to_csv(&text)?;
    let rows = csv.lines().count().saturating_sub(1);
    match &c.out {
        Some(p) => {
            write_file(p, csv.as_bytes())?;
            Ok(json!({ "csv": path_str(p), "rows": rows }))
        }
        None => Ok(json!({ "csv_text": csv, "rows": rows })),
    }
}

fn run(cmd: &Command) -> Result<Value> {
    match cmd {
        Command::Generate(c) => generate(c),
        Command::TrainSde(c) => train_sde_cmd(c),
        Command::TrainRnn(c) => train_rnn_cmd(c),
        Command::Distill(c) => distill_cmd(c),
        Command::BinFit(c) => bin_fit_cmd(c),
        Command::SpamTomo(c) => spam_cmd(c),
        Command::Evaluate(c) => evaluate_cmd(c),
        Command::CoarseStudy(c) => coarse_cmd(c),
        Command::Report { common, input } => report_cmd(common, input),
    }
}

fn dispatch(cmd: &Command) -> Result<Value> {
    match cmd.common().threads {
        Some(0) => bail!("--threads must be positive"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            pool.install(|| run(cmd))
        }
        None => run(cmd),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            println!("{}", json!({ "status": "error", "command": null, "error": e.to_string().trim() }));
            return ExitCode::from(2);
        }
    };
    let name = cli.command.name();
    match dispatch(&cli.command) {
        Ok(mut v) => {
            if let Value::Object(m) = &mut v {
                m.insert("status".into(), json!("ok"));
                m.insert("command".into(), json!(name));
            }
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!("{}", json!({ "status": "error", "command": name, "error": format!("{e:#}") }));
            ExitCode::FAILURE
        }
    }
}
