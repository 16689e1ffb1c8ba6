use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::info;
use serde::Serialize;

use shapecond::bench::{run_bench, BenchResult};
use shapecond::data::{
    load_condensed, load_dataset, oversample_balance, save_condensed, save_dataset, stratified_split, znormalize,
    Dataset,
};
use shapecond::eval::{evaluate_condensed, full_grid, grid_search, shapelet_preservation_probe, small_grid};
use shapecond::nn::Arch;
use shapecond::shapelet::{discover, discover_full_scan, DiscoveryConfig, ShapeletPool};
use shapecond::synthesis::{init_condensed, init_noise, synthesize, Init, SynthConfig};
use shapecond::teacher::{load_teacher, save_teacher, train_teacher};
use shapecond::toy::{gen_toy, ToyConfig};
use shapecond::train::TrainConfig;

use crate::args::{
    BenchArgs, Cli, Command, DiscoverArgs, EvalArgs, GenToyArgs, GridArg, GridArgs, InitArg, SynthesizeArgs,
    TeachArgs, VERSION,
};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Discover(a) => discover_cmd(cli, a),
        Command::Teach(a) => teach_cmd(cli, a),
        Command::Synthesize(a) => synthesize_cmd(cli, a),
        Command::Eval(a) => eval_cmd(cli, a),
        Command::Grid(a) => grid_cmd(cli, a),
        Command::Bench(a) => bench_cmd(cli, a),
        Command::GenToy(a) => gen_toy_cmd(cli, a),
    }
}

/// Effective configuration as sorted `key = value` pairs. The thread count is
/// left out: it does not change any output.
fn effective_config(cli: &Cli, command: &str, args: &impl Serialize) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    map.insert("command".into(), command.into());
    map.insert("seed".into(), cli.seed.to_string());
    map.insert("normalize".into(), (!cli.no_normalize).to_string());
    if let Ok(serde_json::Value::Object(fields)) = serde_json::to_value(args) {
        for (k, v) in fields {
            let v = match v {
                serde_json::Value::Null => "none".into(),
                serde_json::Value::String(s) => s,
                v => v.to_string(),
            };
            map.insert(k, v);
        }
    }
    map
}

fn provenance(cli: &Cli, command: &str, args: &impl Serialize) -> Vec<String> {
    let mut lines = vec![format!("shapecond {VERSION}")];
    lines.extend(
        effective_config(cli, command, args)
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}")),
    );
    lines
}

fn comment_block(lines: &[String]) -> String {
    lines.iter().map(|l| format!("# {l}\n")).collect()
}

fn write_file(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load(cli: &Cli, path: &Path) -> Result<Dataset> {
    let d = load_dataset(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(if cli.no_normalize { d } else { znormalize(&d) })
}

fn load_pool(path: &Path) -> Result<ShapeletPool> {
    ShapeletPool::load(path).with_context(|| format!("loading pool {}", path.display()))
}

fn discovery_config(
    series_len: usize,
    prune: f64,
    window: usize,
    lengths: (Option<usize>, Option<usize>),
    k: usize,
    seed: u64,
) -> DiscoveryConfig {
    let defaults = DiscoveryConfig::for_length(series_len);
    let min = lengths.0.unwrap_or(defaults.min_len);
    let max = lengths.1.unwrap_or(defaults.max_len.max(min));
    DiscoveryConfig {
        prune_ratio: prune,
        window,
        k,
        seed,
        ..defaults.with_lengths(min, max)
    }
}

fn discover_cmd(cli: &Cli, a: &DiscoverArgs) -> Result<()> {
    let d = load(cli, &a.data)?;
    let mut cfg = discovery_config(d.length(), a.prune, a.window, (a.lmin, a.lmax), a.k, cli.seed);
    if let Some(s) = a.lstride {
        cfg.length_stride = s;
    }
    cfg.score_full = a.score_full;
    cfg.validate(d.length())?;
    let (pool, ops) = if a.reference {
        discover_full_scan(&d, &cfg)?
    } else {
        discover(&d, &cfg)?
    };
    info!(
        "{} shapelets from {} distance evaluations, {} alignment ops",
        pool.len(),
        ops.distance_evals,
        ops.alignment_ops
    );
    let mut comments = provenance(cli, "discover", a);
    comments.push(format!("distance_evals = {}", ops.distance_evals));
    comments.push(format!("alignment_ops = {}", ops.alignment_ops));
    pool.save(&a.out, &comments)?;
    Ok(())
}

fn teach_cmd(cli: &Cli, a: &TeachArgs) -> Result<()> {
    let d = load(cli, &a.data)?;
    let pool = load_pool(&a.pool)?;
    let cfg = TrainConfig {
        lr: a.lr,
        weight_decay: a.wd,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: cli.seed,
        patience: a.patience,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    if !(0.0..1.0).contains(&a.val_fraction) {
        return Err(shapecond::Error::Config(format!("validation fraction {} must lie in [0, 1)", a.val_fraction)).into());
    }
    let (train, val) = if a.val_fraction > 0.0 {
        let (t, v) = stratified_split(&d, a.val_fraction, cli.seed)?;
        (t, Some(v))
    } else {
        (d, None)
    };
    let train = if a.no_balance { train } else { oversample_balance(&train, cli.seed) };
    let pool_path = a.pool.to_string_lossy().into_owned();
    let (teacher, log) = train_teacher(&train, &pool, &pool_path, &cfg, val.as_ref())?;
    let mut comments = provenance(cli, "teach", a);
    if let Some(best) = log.best_epoch {
        comments.push(format!("best_epoch = {}", best + 1));
    }
    for (i, loss) in log.losses.iter().enumerate() {
        let mut line = format!("epoch {} loss {loss:e}", i + 1);
        if let Some(acc) = log.val_accuracy.get(i) {
            let _ = write!(line, " val_accuracy {acc}");
        }
        comments.push(line);
    }
    info!("teacher trained for {} epochs", log.losses.len());
    save_teacher(&teacher, &a.out, &comments)?;
    Ok(())
}

fn synthesize_cmd(cli: &Cli, a: &SynthesizeArgs) -> Result<()> {
    let mut teacher = load_teacher(&a.teacher, a.pool.as_deref())
        .with_context(|| format!("loading teacher {}", a.teacher.display()))?;
    let d = load(cli, &a.data)?.align_labels(&teacher.label_names)?;
    if d.length() != teacher.length || d.channels() != teacher.net.in_channels() {
        bail!(
            "data shape {}x{} does not match the teacher's {}x{}",
            d.channels(),
            d.length(),
            teacher.net.in_channels(),
            teacher.length
        );
    }
    if a.ablate_shapelets {
        teacher.net.zero_shapelet_head();
    }
    let init = match a.init {
        InitArg::Real => Init::Real,
        InitArg::Noise => Init::Noise,
    };
    let cfg = SynthConfig {
        spc: a.spc,
        iterations: a.iters,
        lr: a.lr,
        betas: (a.beta1, a.beta2),
        bn_weight: if a.ablate_shapelets { 0.0 } else { a.bn_weight },
        seed: cli.seed,
        init,
        expected_pool_hash: None,
    };
    cfg.validate()?;
    let start = match init {
        Init::Real => init_condensed(&d, a.spc, cli.seed)?,
        Init::Noise => init_noise(&d, a.spc, cli.seed)?,
    };
    let (condensed, log) = synthesize(&teacher, &start, &cfg)?;
    let comments = provenance(cli, "synthesize", a);
    if let Some(path) = &a.loss_csv {
        write_file(path, comment_block(&comments) + &log.to_csv())?;
    }
    if let Some(last) = log.steps.last() {
        info!("final loss {:e} (task {:e}, bn {:e})", last.total, last.task_loss, last.bn_loss);
    }
    save_condensed(&condensed, &a.out, &comments)?;
    Ok(())
}

fn eval_cmd(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let c = load_condensed(&a.condensed).with_context(|| format!("loading {}", a.condensed.display()))?;
    let test = load(cli, &a.test)?.align_labels(&c.label_names)?;
    let train = match &a.train {
        Some(p) => Some(load(cli, p)?.align_labels(&c.label_names)?),
        None => None,
    };
    if a.pool.is_some() && train.is_none() {
        return Err(shapecond::Error::Config("--pool needs --train for the preservation probe".into()).into());
    }
    if a.seeds == 0 {
        return Err(shapecond::Error::Config("--seeds must be at least 1".into()).into());
    }
    let seeds: Vec<u64> = (0..a.seeds).map(|i| cli.seed + i).collect();
    let config = effective_config(cli, "eval", a);
    let mut report = evaluate_condensed(&c, &test, train.as_ref(), Arch::default(), &seeds, config)?;
    if let (Some(pool), Some(train)) = (&a.pool, &train) {
        report.probe_accuracy = Some(shapelet_preservation_probe(train, &c, &load_pool(pool)?)?);
    }
    println!("student_accuracy {:.4}", report.student_accuracy);
    if let Some(r) = report.accuracy_ratio {
        println!("accuracy_ratio {r:.4}");
    }
    write_file(&a.report, report.to_json())
}

fn grid_cmd(cli: &Cli, a: &GridArgs) -> Result<()> {
    let c = load_condensed(&a.condensed).with_context(|| format!("loading {}", a.condensed.display()))?;
    let test = load(cli, &a.test)?.align_labels(&c.label_names)?;
    let grid = match a.grid {
        GridArg::Small => small_grid(),
        GridArg::Full => full_grid(),
    };
    let ranking = grid_search(&c, &test, &grid, cli.seed)?;
    let mut csv = comment_block(&provenance(cli, "grid", a));
    csv.push_str("rank,depth,width,norm,activation,pooling,accuracy\n");
    for (i, e) in ranking.iter().enumerate() {
        let r = &e.arch;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            i + 1,
            r.depth,
            r.width,
            r.norm.name(),
            r.activation.name(),
            r.pooling.name(),
            e.accuracy
        );
    }
    if let Some(best) = ranking.first() {
        println!("best {} accuracy {:.4}", best.arch, best.accuracy);
    }
    match &a.out {
        Some(path) => write_file(path, csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn bench_cmd(cli: &Cli, a: &BenchArgs) -> Result<()> {
    let d = load(cli, &a.data)?;
    let lengths = match a.fixed_len {
        Some(l) => (Some(l), Some(l)),
        None => (a.lmin, a.lmax),
    };
    let cfg = discovery_config(d.length(), a.prune, a.window, lengths, a.k, cli.seed);
    cfg.validate(d.length())?;
    let r = run_bench(&d, &cfg)?;
    println!(
        "measured ratio {:.3}, predicted {:.3}",
        r.measured_ratio, r.predicted_ratio
    );
    let mut csv = comment_block(&provenance(cli, "bench", a));
    csv.push_str(BenchResult::CSV_HEADER);
    csv.push('\n');
    csv.push_str(&r.csv_row());
    csv.push('\n');
    write_file(&a.out, csv)
}

fn gen_toy_cmd(cli: &Cli, a: &GenToyArgs) -> Result<()> {
    let cfg = ToyConfig {
        classes: a.classes,
        n: a.n,
        len: a.len,
        motif_len: a.motif_len,
        jitter: a.jitter,
        noise_sigma: a.noise,
        amplitude: a.amplitude,
        seed: cli.seed,
    };
    let toy = gen_toy(&cfg)?;
    let comments = provenance(cli, "gen-toy", a);
    save_dataset(&toy.dataset, &a.out, &comments)?;
    if let Some(path) = &a.motifs {
        write_file(path, comment_block(&comments) + &toy.motif_sidecar())?;
    }
    Ok(())
}
