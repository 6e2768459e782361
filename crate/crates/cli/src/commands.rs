use std::path::Path;

use mts_select::graph::similarity_graph;
use mts_select::pipeline::effective_k;
use mts_select::select::SUPPORT_EPSILON;
use mts_select::{
    accuracy, aggregate, aggregate_graphs, all_distance_matrices, gen_synthetic, load_dataset, nn1_classify,
    pie_rank_with, pie_ss_with, split, write_dataset, Dataset, DistanceCache, DistanceMatrix, DistanceParams,
    Error, LambdaChoice, NystromChoice, RankParams, RedundancyKind, Result, SelectParams, SyntheticSpec,
};
use serde::Serialize;
use serde_json::json;

use crate::output::{create_dir, eval_paths, read_subset, write_csv, write_json, SubsetFile};
use crate::{Aggregation, Cli, Command, Common, EvalArgs, GenArgs, Penalty, RankArgs, SelectArgs};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Rank(args) => rank(cli, args),
        Command::Select(args) => select(cli, args),
        Command::Eval(args) => eval(cli, args),
        Command::GenSynthetic(args) => gen(cli, args),
    }
}

fn write_run_config(cli: &Cli, path: &Path) -> Result<()> {
    let mut config = serde_json::to_value(cli).expect("config serializes");
    config["common"]["threads"] = json!(rayon::current_num_threads());
    write_json(
        path,
        &json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
        }),
    )
}

fn distance_params(common: &Common) -> DistanceParams {
    DistanceParams {
        window: common.dtw_window,
        znorm: common.znorm,
    }
}

fn load(common: &Common, data: &Path) -> Result<Dataset> {
    let ds = load_dataset(data)?;
    match common.train_fraction {
        Some(f) => split(&ds, f, common.seed),
        None => Ok(ds),
    }
}

fn distances(common: &Common, ds: &Dataset) -> Result<Vec<DistanceMatrix>> {
    let params = distance_params(common);
    if common.no_cache {
        return all_distance_matrices(ds, &params, None);
    }
    let cache = DistanceCache::new(&common.cache_dir);
    log::info!("distance cache: {}", cache.dir_for(ds, &params).display());
    all_distance_matrices(ds, &params, Some(&cache))
}

fn rank(cli: &Cli, args: &RankArgs) -> Result<()> {
    let common = &cli.common;
    let ds = load(common, &args.data)?;
    let dist = distances(common, &ds)?;
    let params = RankParams {
        knn_k: common.knn,
        distance: distance_params(common),
        ..RankParams::default()
    };
    let result = pie_rank_with(&ds, &dist, &params, common.seed)?;
    create_dir(&args.out)?;
    let ranks = result.ranks();
    let rows = ds.descriptors().iter().map(|d| {
        vec![
            d.id.to_string(),
            d.name.clone(),
            result.scores[d.id].to_string(),
            ranks[d.id].to_string(),
        ]
    });
    write_csv(&args.out.join("scores.csv"), &["feature_id", "name", "score", "rank"], rows)?;
    write_run_config(cli, &args.out.join("run.json"))
}

#[derive(Serialize)]
struct SelectionMeta<'a> {
    lambda: f64,
    beta: f64,
    gamma: f64,
    penalty_kind: &'static str,
    sweeps_used: usize,
    final_objective: f64,
    converged: bool,
    selected_ids: &'a [usize],
    landmarks: Option<&'a [usize]>,
}

fn select(cli: &Cli, args: &SelectArgs) -> Result<()> {
    let common = &cli.common;
    let ds = load(common, &args.data)?;
    let dist = distances(common, &ds)?;
    let lambda = match (args.lambda, args.target_size) {
        (Some(l), _) => {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Parameter(format!("--lambda must be finite and nonnegative, got {l}")));
            }
            LambdaChoice::Fixed(l)
        }
        (None, Some(k)) => LambdaChoice::TargetSize(k),
        (None, None) => unreachable!("clap requires --lambda or --target-size"),
    };
    let mut params = SelectParams::new(lambda);
    params.knn_k = common.knn;
    params.beta = args.beta;
    params.distance = distance_params(common);
    params.penalty = match args.penalty {
        Penalty::Mi => RedundancyKind::Mi,
        Penalty::Cmi => RedundancyKind::Cmi,
    };
    params.nystrom = match (args.nystrom, args.no_nystrom) {
        (Some(s), _) => NystromChoice::Landmarks(s),
        (None, true) => NystromChoice::Off,
        (None, false) => NystromChoice::Auto,
    };
    let result = pie_ss_with(&ds, &dist, &params, common.seed)?;

    create_dir(&args.out)?;
    let rows = ds
        .descriptors()
        .iter()
        .map(|d| vec![d.id.to_string(), d.name.clone(), result.alpha[d.id].to_string()]);
    write_csv(&args.out.join("alpha.csv"), &["feature_id", "name", "alpha"], rows)?;
    write_json(
        &args.out.join("alpha.json"),
        &SelectionMeta {
            lambda: result.lambda,
            beta: result.beta,
            gamma: result.gamma,
            penalty_kind: result.penalty_kind.as_str(),
            sweeps_used: result.sweeps_used,
            final_objective: result.final_objective,
            converged: result.converged,
            selected_ids: &result.selected,
            landmarks: result.landmarks.as_deref(),
        },
    )?;
    if args.dump_redundancy {
        let values = &result.redundancy.values;
        let header: Vec<String> = ds.descriptors().iter().map(|d| d.name.clone()).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = values.rows().map(|r| r.iter().map(f64::to_string).collect());
        write_csv(&args.out.join("redundancy.csv"), &header, rows)?;
    }
    write_run_config(cli, &args.out.join("run.json"))
}

/// Chosen feature ids (ascending) and their weights when weighted.
fn choose_subset(args: &EvalArgs, ds: &Dataset) -> Result<(Vec<usize>, Option<Vec<f64>>)> {
    let Some(path) = &args.subset else {
        if args.weighted || args.top.is_some() {
            return Err(Error::Parameter("--weighted and --top need a --subset file".into()));
        }
        return Ok(((0..ds.n_features()).collect(), None));
    };
    match read_subset(path, ds)? {
        SubsetFile::Alpha(rows) => {
            let mut positive: Vec<(usize, f64)> = rows.into_iter().filter(|&(_, a)| a > SUPPORT_EPSILON).collect();
            if let Some(k) = args.top {
                positive.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                positive.truncate(k);
            }
            positive.sort_by_key(|&(id, _)| id);
            let ids = positive.iter().map(|&(id, _)| id).collect();
            let weights = args.weighted.then(|| positive.iter().map(|&(_, a)| a).collect());
            Ok((ids, weights))
        }
        SubsetFile::Scores(mut rows) => {
            if args.weighted {
                return Err(Error::Parameter("--weighted needs an alpha.csv subset, not scores".into()));
            }
            let k = args
                .top
                .ok_or_else(|| Error::Parameter("a scores.csv subset needs --top K".into()))?;
            rows.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
            let mut ids: Vec<usize> = rows.into_iter().take(k).map(|(id, _)| id).collect();
            ids.sort_unstable();
            Ok((ids, None))
        }
    }
}

fn eval(cli: &Cli, args: &EvalArgs) -> Result<()> {
    let common = &cli.common;
    let ds = load(common, &args.data)?;
    if ds.test_ids().is_empty() {
        return Err(Error::InvalidInput(
            "dataset has no test segments; add split.csv or pass --train-fraction".into(),
        ));
    }
    let (ids, weights) = choose_subset(args, &ds)?;
    if ids.is_empty() {
        return Err(Error::InvalidInput("empty feature selection".into()));
    }
    let dist = distances(common, &ds)?;
    let picked: Vec<DistanceMatrix> = ids.iter().map(|&i| dist[i].clone()).collect();
    let combined = match args.aggregate {
        Aggregation::Distances => aggregate(&picked, weights.as_deref())?,
        Aggregation::Graphs => {
            let k = effective_k(common.knn, ds.n_segments())?;
            let graphs = picked
                .iter()
                .map(|d| similarity_graph(d, k))
                .collect::<Result<Vec<_>>>()?;
            aggregate_graphs(&graphs, weights.as_deref())?
        }
    };
    // segment labels are read here for the first time, and test labels only
    // enter through the accuracy below
    let labels = ds.labels();
    let mut visible = labels.clone();
    for &t in ds.test_ids() {
        visible[t] = usize::MAX;
    }
    let predicted = nn1_classify(&combined, ds.train_ids(), ds.test_ids(), &visible)?;
    let acc = accuracy(&predicted, &ds.labels_of(ds.test_ids()))?;

    let (results, run_json) = eval_paths(&args.out);
    if let Some(dir) = results.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_json(
        &results,
        &json!({
            "accuracy": acc,
            "n_selected": ids.len(),
            "selected_ids": ids,
            "weighted": args.weighted,
            "aggregate": args.aggregate,
            "n_test": ds.test_ids().len(),
        }),
    )?;
    write_run_config(cli, &run_json)
}

fn gen(cli: &Cli, args: &GenArgs) -> Result<()> {
    let spec = SyntheticSpec {
        duplicates: args.duplicate.clone(),
        min_len: args.min_len,
        max_len: args.max_len,
        train_fraction: cli.common.train_fraction,
        ..SyntheticSpec::new(args.n, args.classes, args.informative, args.noise)
    };
    let ds = gen_synthetic(&spec, cli.common.seed)?;
    write_dataset(&ds, &args.out)?;
    write_run_config(cli, &args.out.join("run.json"))
}
