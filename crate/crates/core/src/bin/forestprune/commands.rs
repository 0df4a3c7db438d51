use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use forestprune::analysis::{classical_mds, correlation_distance, mspe, write_layout_csv, ComparisonReport};
use forestprune::bounds::{
    bsf_bound, finite_class_bound, lasso_generalization_bound, lasso_risk_bound, sfs_bound, simulate_bounds,
    BoundInputs, BoundSimConfig,
};
use forestprune::cart::CartParams;
use forestprune::data::{generate_scenario, load_csv, CsvOptions, Dataset, ScenarioConfig};
use forestprune::experiment::{read_records_csv, run_experiment, summarize, write_outputs, ExperimentConfig, FULL};
use forestprune::forest::{fit_forest_with, prediction_matrix, Forest, ForestConfig};
use forestprune::merge::merge_selection;
use forestprune::nnlasso::CvOptions;
use forestprune::pruning::{prune, MethodSpec, PruneResult};
use forestprune::{Error, Result};

macro_rules! outln {
    ($o:expr, $($arg:tt)*) => {{
        $o.push_str(&format!($($arg)*));
        $o.push('\n');
    }};
}

use crate::{BoundsArgs, Cli, Command, DataArgs, FitArgs, GenerateArgs, MergeArgs, PruneArgs, ReportArgs, VizArgs};

const DEFAULT_SEED: u64 = 123;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundKind {
    All,
    Lasso,
    Bsf,
    Sfs,
    Finite,
    Risk,
}

/// Runs the command and returns what it prints.
pub fn run(cli: &Cli) -> Result<String> {
    let mut o = String::new();
    match &cli.command {
        Command::Simulate { config } => simulate(&mut o, cli, config),
        Command::Generate(a) => generate(&mut o, cli, a),
        Command::Fit(a) => fit(&mut o, cli, a),
        Command::Prune(a) => prune_cmd(&mut o, cli, a),
        Command::Merge(a) => merge(&mut o, cli, a),
        Command::Bounds(a) => bounds(&mut o, cli, a),
        Command::Viz(a) => viz(&mut o, cli, a),
        Command::Report(a) => report(&mut o, cli, a),
    }?;
    Ok(o)
}

/// Configs are user input: an unreadable one is a usage error.
fn read_config(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))
}

fn out_file(cli: &Cli, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cli.out)?;
    Ok(cli.out.join(name))
}

fn load_data(a: &DataArgs) -> Result<Dataset> {
    load_csv(&a.data, &a.response, &CsvOptions::default())
}

fn load_forest(path: &Path) -> Result<Forest> {
    Forest::from_json(&fs::read_to_string(path)?)
}

fn load_prune(path: &Path) -> Result<PruneResult> {
    PruneResult::from_json(&fs::read_to_string(path)?)
}

fn print_comparisons(o: &mut String, reports: &[ComparisonReport]) {
    outln!(
        o,
        "{:<10} {:<10} {:>4} {:>12} {:>12} {:>9} {:>10} {:>7} {:>7} {:>8}",
        "method",
        "baseline",
        "reps",
        "mean_mspe",
        "base_mspe",
        "delta%",
        "p",
        "freq<=0",
        "trees",
        "trees%"
    );
    for r in reports {
        outln!(
            o,
            "{:<10} {:<10} {:>4} {:>12.6} {:>12.6} {:>+9.2} {:>10.3e} {:>6.0}% {:>7.2} {:>+8.2}{}",
            r.method,
            r.baseline,
            r.reps,
            r.mean_mspe,
            r.baseline_mean_mspe,
            r.mspe_delta_pct,
            r.p_value,
            100.0 * r.freq_delta_leq_0,
            r.mean_trees,
            r.trees_delta_pct,
            if r.significant { " *" } else { "" }
        );
    }
}

fn simulate(o: &mut String, cli: &Cli, path: &Path) -> Result<()> {
    let mut config = ExperimentConfig::from_json(&read_config(path)?)?;
    if let Some(s) = cli.seed {
        config.master_seed = s;
    }
    let records = run_experiment(&config)?;
    write_outputs(&cli.out, &config, &records)?;
    let failures: usize = records.iter().flat_map(|r| &r.methods).filter(|m| m.failed).count();
    if failures > 0 {
        log::warn!("{failures} method runs failed; see records.csv");
    }
    print_comparisons(o, &summarize(&records, &[FULL.to_string()])?);
    outln!(o, "wrote {}", cli.out.display());
    Ok(())
}

fn generate(o: &mut String, cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let config = ScenarioConfig {
        total_vars: a.total_vars,
        ..ScenarioConfig::new(a.n, a.relevant_vars, a.noise_variance, cli.seed.unwrap_or(DEFAULT_SEED))
    };
    let ds = generate_scenario(&config)?;
    let path = out_file(cli, "data.csv")?;
    ds.write_csv("y", fs::File::create(&path)?)?;
    outln!(
        o,
        "wrote {} ({} rows, {} predictors)",
        path.display(),
        ds.n_rows(),
        ds.n_cols()
    );
    Ok(())
}

fn fit(o: &mut String, cli: &Cli, a: &FitArgs) -> Result<()> {
    let ds = load_data(&a.data)?;
    let config = ForestConfig {
        n_trees: a.trees,
        params: CartParams {
            min_split: a.min_split,
            min_bucket: a.min_bucket,
            cp: a.cp,
            max_depth: a.max_depth,
        },
        subspace_rate: a.subspace_rate,
        seed: cli.seed.unwrap_or(DEFAULT_SEED),
        bootstrap: !a.no_bootstrap,
    };
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    let forest = fit_forest_with(&ds, &rows, &config)?;
    let path = out_file(cli, "forest.json")?;
    fs::write(&path, forest.to_json()?)?;
    outln!(o, "wrote {} ({} trees)", path.display(), forest.len());
    Ok(())
}

fn prune_cmd(o: &mut String, cli: &Cli, a: &PruneArgs) -> Result<()> {
    let mut spec: MethodSpec = a.method.parse()?;
    match (&mut spec, a.k, a.max_trees) {
        (MethodSpec::Bsf { k }, Some(v), None) => *k = v,
        (MethodSpec::Lasso { max_trees }, None, Some(v)) => *max_trees = Some(v),
        (_, None, None) => {}
        _ => {
            return Err(Error::Config(
                "--k applies only to BSF and --max-trees only to LASSO".into(),
            ))
        }
    }
    let forest = load_forest(&a.forest)?;
    let ds = load_data(&a.data)?;
    forest.check_schema(&ds)?;
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    let p = prediction_matrix(&forest, &ds, &rows)?;
    let cv = CvOptions {
        folds: a.folds,
        seed: cli.seed.unwrap_or(DEFAULT_SEED),
        ..CvOptions::default()
    };
    let result = prune(&p, ds.response(), spec, &cv)?;
    let path = out_file(cli, "prune.json")?;
    fs::write(&path, result.to_json()?)?;
    outln!(o, "method: {}", result.label);
    outln!(o, "selected: {:?}", result.selected);
    outln!(o, "weights: {:?}", result.weights);
    outln!(o, "validation_mspe: {}", result.validation_mspe);
    if result.fallback {
        outln!(o, "note: lasso selected no trees; fell back to the best single tree");
    }
    Ok(())
}

fn merge(o: &mut String, cli: &Cli, a: &MergeArgs) -> Result<()> {
    let forest = load_forest(&a.forest)?;
    let result = load_prune(&a.prune)?;
    let merged = merge_selection(&forest, &result, a.max_leaves)?;
    let text = merged.tree.to_text(None);
    fs::write(out_file(cli, "merged.txt")?, &text)?;
    fs::write(
        out_file(cli, "merged.json")?,
        serde_json::to_string_pretty(&merged)? + "\n",
    )?;
    o.push_str(&text);
    outln!(
        o,
        "merged trees {:?}: {} leaves, depth {}",
        merged.source_indices,
        merged.leaf_count,
        merged.tree.depth()
    );
    Ok(())
}

fn bounds(o: &mut String, cli: &Cli, a: &BoundsArgs) -> Result<()> {
    if let Some(path) = &a.simulate {
        let mut config: BoundSimConfig = serde_json::from_str(&read_config(path)?)
            .map_err(|e| Error::Config(format!("invalid bounds config {}: {e}", path.display())))?;
        if let Some(s) = cli.seed {
            config.scenario.seed = s;
        }
        let sim = simulate_bounds(&config)?;
        sim.write_summary_csv(fs::File::create(out_file(cli, "bounds_summary.csv")?)?)?;
        sim.write_reports_csv(fs::File::create(out_file(cli, "bounds_reports.csv")?)?)?;
        outln!(
            o,
            "{:<8} {:>6} {:>8} {:>16} {:>18}",
            "method",
            "reps",
            "breach%",
            "use%",
            "risk_delta%"
        );
        for s in &sim.summary {
            let sd = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.1}"));
            outln!(
                o,
                "{:<8} {:>6} {:>8.1} {:>9.1} ± {:<5} {:>10.1} ± {:<5}",
                s.label,
                s.reps,
                s.breach_pct,
                s.use_pct_mean,
                sd(s.use_pct_sd),
                s.risk_delta_pct_mean,
                sd(s.risk_delta_pct_sd)
            );
        }
        return Ok(());
    }

    let inputs = BoundInputs {
        n: a.n,
        b: a.b,
        delta: a.delta,
        m: a.m,
        r: a.r,
        lambda_l1: a.lambda_l1,
        k: a.k,
        tau: a.tau,
        sigma: a.sigma,
    };
    let rows: Vec<(BoundKind, String, Result<f64>)> = vec![
        (BoundKind::Lasso, "lasso".into(), lasso_generalization_bound(&inputs)),
        (BoundKind::Bsf, format!("bsf (K={})", a.k), bsf_bound(&inputs)),
        (BoundKind::Sfs, "sfs".into(), sfs_bound(&inputs)),
        (
            BoundKind::Finite,
            format!("finite (|H|={})", a.cardinality.unwrap_or(0)),
            match a.cardinality {
                Some(c) => finite_class_bound(c, a.n, a.delta, a.m),
                None => Err(Error::Config(
                    "--cardinality is required for the finite-class bound".into(),
                )),
            },
        ),
        (
            BoundKind::Risk,
            "lasso_risk".into(),
            lasso_risk_bound(a.tau, a.m, a.sigma, a.b, a.n),
        ),
    ];
    if a.kind != BoundKind::All {
        let (_, name, value) = rows.into_iter().find(|r| r.0 == a.kind).expect("every kind has a row");
        let v = value?;
        outln!(o, "{:<20} value", "bound");
        outln!(o, "{name:<20} {v}");
        return Ok(());
    }
    outln!(o, "{:<20} value", "bound");
    for (kind, name, value) in rows {
        if kind == BoundKind::Finite && a.cardinality.is_none() {
            continue;
        }
        match value {
            Ok(v) => outln!(o, "{name:<20} {v}"),
            Err(e) => outln!(o, "{name:<20} n/a ({e})"),
        }
    }
    Ok(())
}

fn viz(o: &mut String, cli: &Cli, a: &VizArgs) -> Result<()> {
    let forest = load_forest(&a.forest)?;
    let ds = load_data(&a.data)?;
    forest.check_schema(&ds)?;
    let selected = match &a.prune {
        Some(p) => {
            let r = load_prune(p)?;
            if let Some(&bad) = r.selected.iter().find(|&&i| i >= forest.len()) {
                return Err(Error::InvalidInput(format!(
                    "prune result selects tree {bad} but the forest has {} trees",
                    forest.len()
                )));
            }
            r.selected
        }
        None => Vec::new(),
    };
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    let p = prediction_matrix(&forest, &ds, &rows)?;
    let dist = correlation_distance(&p);
    if !dist.constant_columns.is_empty() {
        log::warn!(
            "constant-prediction trees {:?} get correlation 0",
            dist.constant_columns
        );
    }
    let layout = classical_mds(&dist.values, 2)?;
    let individual = (0..p.n_trees())
        .map(|j| mspe(p.column(j), ds.response()))
        .collect::<Result<Vec<f64>>>()?;
    let path = out_file(cli, "layout.csv")?;
    write_layout_csv(&layout, &selected, &individual, fs::File::create(&path)?)?;
    outln!(
        o,
        "wrote {} ({} trees, stress {:.4})",
        path.display(),
        p.n_trees(),
        layout.stress
    );
    Ok(())
}

fn report(o: &mut String, cli: &Cli, a: &ReportArgs) -> Result<()> {
    let records = read_records_csv(&a.records)?;
    let reports = summarize(&records, &a.baseline)?;
    let path = out_file(cli, "report.csv")?;
    forestprune::experiment::write_summary_csv(&reports, fs::File::create(&path)?)?;
    print_comparisons(o, &reports);
    Ok(())
}
