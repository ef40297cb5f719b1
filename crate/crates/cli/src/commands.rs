use std::fs::File;
use std::io::Write;
use std::path::Path;

use gamilt::binning::BinMap;
use gamilt::boost::StageConfig;
use gamilt::dataset::{read_feature_csv, CsvOptions, Dataset, SplitTag};
use gamilt::filter::{self, FilterOptions, FilterResult};
use gamilt::gami::{self, GamiConfig, GamiModel};
use gamilt::io as model_io;
use gamilt::loss::{sigmoid, LossKind, LossSpec};
use gamilt::modeltree::{FitContext, TreeParams};
use gamilt::scenario::{self, Scenario};
use gamilt::simgen::{self, SimConfig};
use gamilt::{boost, metrics};

use crate::error::{io_error, CliError, CliResult};
use crate::{
    BenchmarkArgs, Command, DataArgs, FilterArgs, FilterMethod, FitArgs, LossArg, PredictArgs, PurifyArgs, ReportArgs,
    RowArgs, RowsArg, SimulateArgs, SplitArgs, TreeArgs, VerifyArgs,
};

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Fit(a) => fit(&a),
        Command::Predict(a) => predict(&a),
        Command::Filter(a) => filter_pairs(&a),
        Command::Purify(a) => purify(&a),
        Command::Verify(a) => verify(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Report(a) => report(&a),
        Command::Benchmark(a) => benchmark(&a),
    }
}

fn csv_options(d: &DataArgs) -> CliResult<CsvOptions> {
    if !d.delimiter.is_ascii() {
        return Err(CliError::Usage(format!("delimiter {:?} is not a single byte", d.delimiter)));
    }
    Ok(CsvOptions {
        delimiter: d.delimiter as u8,
        has_header: !d.no_header,
    })
}

fn parse_split(s: &SplitArgs) -> CliResult<(f64, f64, f64)> {
    let parts: Vec<f64> = s
        .split
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--split expects three numbers, got {:?}", s.split)))?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(CliError::Usage(format!("--split expects three numbers, got {:?}", s.split))),
    }
}

fn loss_spec(l: LossArg) -> LossSpec {
    match l {
        LossArg::Squared => LossSpec::squared(),
        LossArg::Logloss => LossSpec::logloss(),
    }
}

fn tree_params(t: &TreeArgs) -> TreeParams {
    TreeParams {
        max_depth: t.max_depth,
        min_leaf: t.min_leaf,
        ridge: t.ridge,
    }
}

fn stage_config(t: &TreeArgs) -> StageConfig {
    StageConfig {
        learning_rate: t.learning_rate,
        max_iterations: t.max_iterations,
        patience: t.patience,
    }
}

fn subsample(t: &TreeArgs) -> Option<usize> {
    (t.filter_subsample > 0).then_some(t.filter_subsample)
}

fn load_training(data: &DataArgs, response: &str, split: &SplitArgs) -> CliResult<Dataset> {
    let ds = Dataset::load_csv(&data.data, response, &csv_options(data)?)?;
    Ok(ds.split(parse_split(split)?, split.seed)?)
}

fn fit(a: &FitArgs) -> CliResult<()> {
    let data = load_training(&a.data, &a.response, &a.split)?;
    let bins = BinMap::build(&data, a.tree.max_bins)?;
    let config = GamiConfig {
        rounds: a.rounds,
        main: stage_config(&a.tree),
        interaction: stage_config(&a.tree),
        n_pairs: a.pairs,
        loss: loss_spec(a.tree.loss),
        tree: tree_params(&a.tree),
        n_knots: a.tree.knots,
        filter_subsample: subsample(&a.tree),
        seed: a.split.seed,
    };
    let mut model = gami::fit(&data, &bins, &config)?;
    if !a.no_purify {
        let train = data.rows(SplitTag::Train);
        model.purify(&data, &train)?;
    }
    model_io::save_model(&model, &a.out)?;

    println!("rounds: {}", model.rounds.len());
    for r in &model.rounds {
        println!(
            "  round {}: main {} trees ({} run), interaction {} trees ({} run), {} pairs screened in",
            r.round,
            r.main_stop,
            r.main_iterations,
            r.int_stop,
            r.int_iterations,
            r.selected.len() / 2
        );
    }
    println!("trees: {}", model.trees.len());
    let test = data.rows(SplitTag::Test);
    if !test.is_empty() {
        let cols = subset_columns(data.columns(), &test);
        let y: Vec<f64> = test.iter().map(|&i| data.response()[i]).collect();
        let g = model.predict(&cols)?;
        match model.loss.kind {
            LossKind::Squared => println!("test mse: {:.6}", metrics::mse(&y, &g)?),
            LossKind::Logloss => {
                println!("test logloss: {:.6}", metrics::logloss(&y, &g)?);
                if let Ok(auc) = metrics::auc(&y, &g) {
                    println!("test auc: {auc:.6}");
                }
            }
        }
    }
    println!("saved {}", a.out.display());
    Ok(())
}

fn subset_columns(columns: &[Vec<f64>], rows: &[usize]) -> Vec<Vec<f64>> {
    columns.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect()
}

/// Columns of `path` in the model's feature order, matched by name.
fn model_columns(model: &GamiModel, data: &DataArgs) -> CliResult<Vec<Vec<f64>>> {
    let (names, mut columns) = read_feature_csv(&data.data, &csv_options(data)?)?;
    model
        .feature_names
        .iter()
        .map(|f| {
            let pos = names
                .iter()
                .position(|n| n == f)
                .ok_or_else(|| CliError::Core(gamilt::Error::MissingColumn(f.clone())))?;
            Ok(std::mem::take(&mut columns[pos]))
        })
        .collect()
}

fn predict(a: &PredictArgs) -> CliResult<()> {
    let model = model_io::load_model(&a.model)?;
    let columns = model_columns(&model, &a.data)?;
    let mut pred = model.predict(&columns)?;
    if a.probability && model.loss.kind == LossKind::Logloss {
        pred.iter_mut().for_each(|g| *g = sigmoid(*g));
    }

    let opts = csv_options(&a.data)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(opts.has_header)
        .from_path(&a.data.data)?;
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(File::create(p).map_err(|e| io_error(p, e))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut writer = csv::WriterBuilder::new().delimiter(opts.delimiter).from_writer(sink);
    if opts.has_header {
        let mut header = reader.headers()?.clone();
        header.push_field(&a.column);
        writer.write_record(&header)?;
    }
    for (record, p) in reader.records().zip(&pred) {
        let mut record = record?;
        record.push_field(&p.to_string());
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| io_error(Path::new("<output>"), e))?;
    Ok(())
}

fn filter_pairs(a: &FilterArgs) -> CliResult<()> {
    let data = load_training(&a.data, &a.response, &a.split)?;
    let bins = BinMap::build(&data, a.tree.max_bins)?;
    let ctx = FitContext::new(&data, &bins, a.tree.knots)?;
    let loss = loss_spec(a.tree.loss);
    if loss.kind == LossKind::Logloss {
        data.check_binary()?;
    }
    let features: Vec<usize> = (0..data.n_features()).filter(|&j| bins.is_splittable(j)).collect();
    let y: Vec<f64> = ctx.train_rows().iter().map(|&i| data.response()[i]).collect();
    let mut scores = vec![loss.initial_score(&y)?; data.n_rows()];
    let params = tree_params(&a.tree);
    if !a.raw {
        boost::fit_main(&ctx, &data, &loss, &mut scores, &stage_config(&a.tree), &features, &params)?;
    }
    let result = match a.method {
        FilterMethod::Tree => {
            let options = FilterOptions {
                params,
                subsample_cap: subsample(&a.tree),
                seed: a.split.seed,
            };
            filter::filter_int(&ctx, &data, &loss, &scores, a.pairs, &features, &options)?
        }
        FilterMethod::Fast => filter::fast_filter(&ctx, &data, &loss, &scores, a.pairs, a.grid, &features)?,
    };
    write_ranking(&result, data.feature_names(), a.pairs, a.out.as_deref())
}

fn write_ranking(result: &FilterResult, names: &[String], q: usize, out: Option<&Path>) -> CliResult<()> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(File::create(p).map_err(|e| io_error(p, e))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["rank", "feature_j", "feature_k", "sse_jk", "sse_kj", "score", "selected"])?;
    for (r, p) in result.ranked.iter().enumerate() {
        w.write_record([
            (r + 1).to_string(),
            names[p.pair.0].clone(),
            names[p.pair.1].clone(),
            p.sse_jk.to_string(),
            p.sse_kj.to_string(),
            p.score.to_string(),
            (r < q).to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_error(Path::new("<output>"), e))?;
    Ok(())
}

/// Feature columns of the model plus the row set asked for.
fn columns_and_rows(model: &GamiModel, data: &DataArgs, rows: &RowArgs) -> CliResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let columns = model_columns(model, data)?;
    let n = columns.first().map_or(0, Vec::len);
    let selected = match rows.rows {
        RowsArg::All => (0..n).collect(),
        RowsArg::Train => {
            let tags = gamilt::dataset::split_tags(n, parse_split(&rows.split)?, rows.split.seed)?;
            (0..n).filter(|&i| tags[i] == SplitTag::Train).collect()
        }
    };
    Ok((columns, selected))
}

fn purify(a: &PurifyArgs) -> CliResult<()> {
    let mut model = model_io::load_model(&a.model)?;
    let (columns, rows) = columns_and_rows(&model, &a.data, &a.rows)?;
    let store = gamilt::purify::purify(&model, &columns, &rows)?;
    println!(
        "purified {} main effects and {} interactions on {} rows",
        store.mains.len(),
        store.interactions.len(),
        rows.len()
    );
    model.effects = Some(store);
    model_io::save_model(&model, &a.out)?;
    println!("saved {}", a.out.display());
    Ok(())
}

fn verify(a: &VerifyArgs) -> CliResult<()> {
    let model = model_io::load_model(&a.model)?;
    let store = model
        .effects
        .as_ref()
        .ok_or_else(|| CliError::Usage("model has no purified effects; run `purify` first".into()))?;
    let (columns, rows) = columns_and_rows(&model, &a.data, &a.rows)?;
    let raw = model.predict(&columns)?;
    let effects = store.predict(&model.trees, &columns);
    let scale = raw.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let change = raw.iter().zip(&effects).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
    println!("prediction change (relative): {change:.3e}");

    let report = store.verify_orthogonality(&model.trees, &columns, &rows);
    for p in &report.pairs {
        println!(
            "  {}: max inner product {:.3e} (relative {:.3e})",
            gamilt::Term::Pair(p.pair.0, p.pair.1).label(&model.feature_names),
            p.max_abs_inner,
            p.max_relative
        );
    }
    println!("orthogonality (relative): {:.3e}", report.max_relative);
    if change > 1e-8 || !report.passes(a.tolerance) {
        return Err(CliError::Check("verification failed".into()));
    }
    println!("ok");
    Ok(())
}

fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let config = SimConfig::new(a.model, a.n, a.rho, a.response.into(), a.seed);
    let sim = simgen::generate(&config)?;
    let mut w = csv::Writer::from_path(&a.out)?;
    let mut header: Vec<String> = sim.data.feature_names().to_vec();
    header.push("y".into());
    w.write_record(&header)?;
    let columns = sim.data.columns();
    for i in 0..sim.data.n_rows() {
        let mut rec: Vec<String> = columns.iter().map(|c| c[i].to_string()).collect();
        rec.push(sim.data.response()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| io_error(&a.out, e))?;

    let names = sim.data.feature_names();
    let truth = serde_json::json!({
        "model": a.model,
        "rho": a.rho,
        "seed": a.seed,
        "main_effects": sim.truth.main_features().iter().map(|&j| &names[j]).collect::<Vec<_>>(),
        "pairs": sim.truth.pairs().iter().map(|&(j, k)| [&names[j], &names[k]]).collect::<Vec<_>>(),
        "intercept": sim.intercept,
    });
    let side = truth_path(&a.out);
    std::fs::write(&side, serde_json::to_string_pretty(&truth).expect("json value") + "\n")
        .map_err(|e| io_error(&side, e))?;
    println!("wrote {} rows to {} and true pairs to {}", a.n, a.out.display(), side.display());
    Ok(())
}

pub fn truth_path(out: &Path) -> std::path::PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".truth.json");
    s.into()
}

fn report(a: &ReportArgs) -> CliResult<()> {
    let model = model_io::load_model(&a.model)?;
    if model.effects.is_none() {
        return Err(CliError::Usage("model has no purified effects; run `purify` first".into()));
    }
    let files = model_io::export_effects(&model, &a.out)?;
    for f in &files {
        println!("{}", f.display());
    }
    Ok(())
}

fn benchmark(a: &BenchmarkArgs) -> CliResult<()> {
    if a.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let mut mse = Vec::with_capacity(a.repeats);
    let mut auc = Vec::new();
    let mut logloss = Vec::new();
    for r in 0..a.repeats {
        let seed = a.seed + r as u64;
        let s = Scenario::new(a.model, a.n, a.rho, a.response.into(), seed);
        let run = scenario::run(&s)?;
        let m = run.metrics;
        print!("seed {seed}: test mse {:.6}", m.mse);
        mse.push(m.mse);
        if let (Some(x), Some(l)) = (m.auc, m.logloss) {
            print!(", auc {x:.6}, logloss {l:.6}");
            auc.push(x);
            logloss.push(l);
        }
        println!();
    }
    let summary = |name: &str, v: &[f64]| {
        if !v.is_empty() {
            let (mean, sd) = mean_sd(v);
            println!("{name}: mean {mean:.6} std {sd:.6}");
        }
    };
    summary("test mse", &mse);
    summary("test auc", &auc);
    summary("test logloss", &logloss);
    Ok(())
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
