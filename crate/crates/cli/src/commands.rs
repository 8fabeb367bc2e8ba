use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use mlgad_core::graph::composite_feature;
use mlgad_core::io::write_atomic;
use mlgad_core::pipeline::{
    evaluate, synth_multi_graph, synth_single_graph, train, transfer, AnomalyMode, Dataset, DatasetKind, History,
    MetricsReport, TrainConfig, TrainedModel,
};
use mlgad_core::sampler::{random_oracle_check, sample_targets, Target};
use mlgad_core::stitch::Level;
use mlgad_core::{Error, Graph};
use serde::Serialize;

use crate::args::{
    Cli, Command, EvalArgs, HyperArgs, OracleArgs, SampleArgs, SynthArgs, SynthKind, SynthMode, TargetKind,
    TrainArgs, TransferArgs,
};
use crate::Failure;

type Outcome = std::result::Result<(), Failure>;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

pub fn run(cli: Cli) -> Outcome {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::Runtime(e.into()))?;
    }
    let ctx = Context {
        seed: cli.seed,
        out: cli.out,
        config: cli.config,
    };
    match cli.command {
        Command::Synth(a) => synth_cmd(&ctx, &a),
        Command::Sample(a) => sample_cmd(&ctx, &a),
        Command::Train(a) => train_cmd(&ctx, &a),
        Command::Eval(a) => eval_cmd(&ctx, &a),
        Command::Transfer(a) => transfer_cmd(&ctx, &a),
        Command::OracleCheck(a) => oracle_cmd(&ctx, &a),
    }
}

struct Context {
    seed: Option<u64>,
    out: Option<PathBuf>,
    config: Option<PathBuf>,
}

impl Context {
    fn required_out(&self) -> std::result::Result<&Path, Failure> {
        self.out.as_deref().ok_or_else(|| usage("--out is required"))
    }

    /// Defaults, then the config file, then flags.
    fn train_config(&self, hyper: &HyperArgs) -> std::result::Result<TrainConfig, Failure> {
        let mut config = match &self.config {
            Some(path) => {
                require_input(path)?;
                TrainConfig::from_file(path).map_err(|e| Failure::Usage(e.into()))?
            }
            None => TrainConfig::default(),
        };
        hyper.apply(&mut config).map_err(|e| Failure::Usage(e.into()))?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate().map_err(|e| Failure::Usage(e.into()))?;
        Ok(config)
    }
}

fn require_input(path: &Path) -> Outcome {
    if path.exists() {
        Ok(())
    } else {
        Err(usage(format!("input path {} does not exist", path.display())))
    }
}

fn load_dataset(path: &Path) -> std::result::Result<Dataset, Failure> {
    require_input(path)?;
    Dataset::load(path).map_err(|e| Failure::Runtime(e.into()))
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Outcome {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::Runtime(e.into()))?;
    bytes.push(b'\n');
    emit(&bytes, out)
}

fn emit(bytes: &[u8], out: Option<&Path>) -> Outcome {
    match out {
        Some(path) => Ok(write_atomic(path, bytes)?),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| Failure::Runtime(e.into()))
        }
    }
}

/// `<stem>.history.json` next to `path`.
fn history_beside(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_string());
    path.with_file_name(format!("{stem}.history.json"))
}

fn check_defined(report: &MetricsReport, allow_degenerate: bool) -> Outcome {
    let undefined = report.undefined_levels();
    if undefined.is_empty() || allow_degenerate {
        return Ok(());
    }
    let names: Vec<&str> = undefined.iter().map(|l| l.name()).collect();
    Err(Failure::Runtime(anyhow!(
        "AUROC/AUPRC undefined (single class) at level(s) {}; pass --allow-degenerate to accept",
        names.join(",")
    )))
}

fn synth_cmd(ctx: &Context, a: &SynthArgs) -> Outcome {
    let out = ctx.required_out()?;
    let seed = ctx.seed.unwrap_or(0);
    let dataset = match a.kind {
        SynthKind::Single => {
            let mode = match a.mode {
                SynthMode::Contextual => AnomalyMode::Contextual,
                SynthMode::Structural => AnomalyMode::Structural,
                SynthMode::Mixed => AnomalyMode::Mixed,
            };
            synth_single_graph(a.nodes, a.anomaly_rate, mode, seed)?
        }
        SynthKind::Multi => synth_multi_graph(a.graphs, (a.min_nodes, a.max_nodes), a.graph_anomaly_rate, seed)?,
    };
    dataset.save(out)?;
    eprintln!(
        "wrote {} graph(s) to {}",
        dataset.graphs.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SampleLine {
    target: Target,
    nodes: Vec<usize>,
    hops: Vec<usize>,
    rq_num: f64,
    rq_den: f64,
    weights: Vec<f64>,
}

fn sample_cmd(ctx: &Context, a: &SampleArgs) -> Outcome {
    let dataset = load_dataset(&a.input)?;
    let graph = match dataset.kind {
        DatasetKind::SingleGraph => dataset.graphs[0].clone(),
        DatasetKind::MultiGraph => Graph::disjoint_union(&dataset.graphs)?.0,
    };
    if !(a.decay > 0.0 && a.decay <= 1.0) {
        return Err(usage("--decay must be in (0, 1]"));
    }
    let signal = composite_feature(graph.features());
    let mut targets = Vec::new();
    if matches!(a.targets, TargetKind::Nodes | TargetKind::All) {
        targets.extend((0..graph.node_count()).map(Target::Node));
    }
    if matches!(a.targets, TargetKind::Edges | TargetKind::All) {
        targets.extend(graph.edges().iter().map(|&(u, v)| Target::Edge(u, v)));
    }
    let samples = sample_targets(&graph, &signal, &targets, a.depth as usize, a.decay)?;
    let mut text = String::new();
    for s in samples {
        let line = SampleLine {
            target: s.target,
            nodes: s.nodes,
            hops: s.hops,
            rq_num: s.rq.num,
            rq_den: s.rq.den,
            weights: s.weights,
        };
        let json = serde_json::to_string(&line).map_err(|e| Failure::Runtime(e.into()))?;
        writeln!(text, "{json}").expect("write to string");
    }
    emit(text.as_bytes(), ctx.out.as_deref())
}

fn save_run(trained: &TrainedModel, history: &History, model_path: &Path, history_path: &Path) -> Outcome {
    trained.save(model_path)?;
    write_json(history, Some(history_path))
}

fn train_cmd(ctx: &Context, a: &TrainArgs) -> Outcome {
    let out = ctx.required_out()?;
    let config = ctx.train_config(&a.hyper)?;
    let dataset = load_dataset(&a.input)?;
    let (trained, history) = train(&dataset, &config)?;
    let history_path = a.history.clone().unwrap_or_else(|| history_beside(out));
    save_run(&trained, &history, out, &history_path)?;
    eprintln!(
        "trained levels {} for {} epochs; best epoch {:?}",
        history.trained_levels,
        history.epochs.len(),
        history.best_epoch
    );
    Ok(())
}

fn eval_cmd(ctx: &Context, a: &EvalArgs) -> Outcome {
    require_input(&a.model)?;
    let dataset = load_dataset(&a.input)?;
    let trained = TrainedModel::load(&a.model).map_err(|e| Failure::Runtime(e.into()))?;
    let partition = a.partition.parse()?;
    let report = evaluate(&trained, &dataset, partition)?;
    write_json(&report, ctx.out.as_deref())?;
    check_defined(&report, a.allow_degenerate)
}

fn transfer_cmd(ctx: &Context, a: &TransferArgs) -> Outcome {
    let source: Level = a.source.parse()?;
    let target: Level = a.mask_level.parse()?;
    let config = ctx.train_config(&a.hyper)?;
    let dataset = load_dataset(&a.input)?;
    let (trained, history) = transfer(&dataset, &config, source, target)?;
    if let Some(model_out) = &a.model_out {
        let history_path = a.history.clone().unwrap_or_else(|| history_beside(model_out));
        save_run(&trained, &history, model_out, &history_path)?;
    } else if let Some(history_path) = &a.history {
        write_json(&history, Some(history_path))?;
    }
    let report = evaluate(&trained, &dataset, a.partition.parse()?)?;
    write_json(&report, ctx.out.as_deref())?;
    match report.levels.get(&target) {
        Some(m) => eprintln!("zero-shot {source}->{target} AUROC {:?}", m.auroc),
        None => return Err(Failure::Runtime(anyhow!("no labeled {target} targets to score"))),
    }
    check_defined(&report, a.allow_degenerate)
}

fn oracle_cmd(ctx: &Context, a: &OracleArgs) -> Outcome {
    let report = random_oracle_check(a.trials, a.max_nodes, a.depth, ctx.seed.unwrap_or(0))?;
    if let Some(out) = ctx.out.as_deref() {
        write_json(&report, Some(out))?;
    }
    println!("oracle-check: {}/{} matches", report.matches, report.trials);
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow!(
            "sampler disagrees with enumeration on trials {:?}",
            report.mismatches
        )))
    }
}
