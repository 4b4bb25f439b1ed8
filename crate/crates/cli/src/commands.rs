use std::fmt;
use std::fs;
use std::path::Path;

use cfselect::config::RunConfig;
use cfselect::evaluation::{
    evaluate as run_evaluation, read_outcomes, sweep as run_sweep, write_manifest, write_metrics, write_outcomes,
    write_survival, write_sweep, EvalSettings, Manifest, MetricsRow, OutcomeRow,
};
use cfselect::explainers::{desired_class, run_ensemble, Candidate, ExplainContext};
use cfselect::mcda::{select_counterfactual, Metric, SelectionResult};
use cfselect::metrics::{score, CriteriaVector};
use cfselect::model::{load_model, save_model, train as train_model, Model};
use cfselect::records::{instance_to_map, read_candidates, write_candidates};
use cfselect::schema::FeatureSchema;
use cfselect::{Dataset64, Instance64, Schema64};
use num_rational::Ratio;
use serde_json::json;

use crate::{Common, ExplainArgs};

/// A failed command; the variant picks the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or arguments, detected before any work.
    Config(String),
    /// Anything that went wrong while running.
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

fn runtime(e: impl fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn config(e: impl fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

/// Loads the config, applies flag overrides and validates it.
fn load_config(common: &Common, need_data: bool) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::from_file(&common.config).map_err(config)?;
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &common.out {
        cfg.set_output_dir(out);
    }
    cfg.validate(need_data).map_err(|m| Failure::Config(format!("{}: {m}", common.config.display())))?;
    Ok(cfg)
}

fn output_dir(cfg: &RunConfig) -> Result<std::path::PathBuf, Failure> {
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn load_trained(cfg: &RunConfig, data: &Dataset64) -> Result<Model<f64>, Failure> {
    let path = cfg.model_path();
    if !path.is_file() {
        return Err(Failure::Runtime(format!(
            "model file {} does not exist; run `cfselect train` first",
            path.display()
        )));
    }
    let model = load_model::<f64>(&path).map_err(runtime)?;
    model.check_schema(data).map_err(runtime)?;
    Ok(model)
}

/// Up to three decimals, trailing zeros dropped.
fn short(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn triple(v: &[f64]) -> String {
    format!("({})", v.iter().map(|&x| short(x)).collect::<Vec<_>>().join(", "))
}

pub fn train(common: &Common) -> Result<(), Failure> {
    let cfg = load_config(common, true)?;
    let data = cfg.load_data::<f64>().map_err(runtime)?;
    let trained = train_model(&data, &cfg.model.train).map_err(runtime)?;
    output_dir(&cfg)?;
    let path = cfg.model_path();
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(runtime)?;
    }
    save_model(&trained.model, &path).map_err(runtime)?;
    let r = &trained.report;
    println!("dataset: {} ({} training rows)", data.name(), r.train_rows);
    println!("train accuracy: {:.4}", r.train_accuracy);
    if let Some(v) = r.validation_accuracy {
        println!("validation accuracy: {v:.4} ({} rows)", r.validation_rows);
    }
    println!("model: {}", path.display());
    Ok(())
}

pub fn explain(args: &ExplainArgs) -> Result<(), Failure> {
    let src = &args.source;
    let fixture = src.fixture.is_some();
    let mut cfg = load_config(&args.common, !fixture)?;
    if let Some(m) = &args.metric {
        cfg.selection.metric = m.parse::<Metric>().map_err(Failure::Config)?;
    }
    let metric = cfg.selection.metric;

    if let Some(path) = &src.fixture {
        let schema: Schema64 = cfg.dataset.schema().map_err(config)?;
        let classes = cfg
            .dataset
            .classes
            .clone()
            .ok_or_else(|| Failure::Config("fixture replay needs dataset.classes".into()))?;
        let dump = read_candidates::<f64>(path, &schema, &classes).map_err(runtime)?;
        let desired = check_desired(args, &classes, dump.query_class)?;
        let sel = select_counterfactual(
            &dump.query,
            &schema,
            desired,
            &dump.candidates,
            |i, c| {
                dump.criteria[i].ok_or_else(|| {
                    Failure::Runtime(format!("candidate {} ({}) has no stored criteria", i + 1, c.source))
                })
            },
            metric,
        )?;
        return report_selection(&cfg, &schema, &classes, &dump.query, dump.query_class, &sel);
    }

    let data = cfg.load_data::<f64>().map_err(runtime)?;
    let model = load_trained(&cfg, &data)?;
    let x: Instance64 = match (src.instance_id, &src.values) {
        (Some(id), _) => {
            if id >= data.len() {
                return Err(Failure::Config(format!("instance id {id} out of range (0..{})", data.len())));
            }
            data.row(id).clone()
        }
        (None, Some(text)) => data.schema().parse_assignments(text).map_err(config)?,
        (None, None) => unreachable!("clap enforces one instance source"),
    };
    let classes = data.classes().to_vec();
    let ctx = ExplainContext::new(&data, &model);
    let query_class = model.predict(&x);
    let desired = check_desired(args, &classes, query_class)?;
    let ensemble = run_ensemble(&x, &ctx, &cfg.explainers);
    let k = cfg.selection.neighbors;
    let mut scored: Vec<Option<CriteriaVector<f64>>> = vec![None; ensemble.candidates.len()];
    let sel = select_counterfactual(
        &x,
        data.schema(),
        desired,
        &ensemble.candidates,
        |i, c: &Candidate<f64>| {
            let s = score(&x, &c.x_prime, c.predicted, &ctx, k).map_err(runtime)?;
            scored[i] = Some(s);
            Ok::<_, Failure>(s)
        },
        metric,
    )?;
    if let Some(path) = &args.dump {
        write_candidates(path, data.schema(), &classes, &x, query_class, &ensemble.candidates, Some(&scored))
            .map_err(runtime)?;
    }
    report_selection(&cfg, data.schema(), &classes, &x, query_class, &sel)
}

/// The class to reach: the other class, or `--desired` when it names it.
fn check_desired(args: &ExplainArgs, classes: &[String], query_class: usize) -> Result<usize, Failure> {
    let desired = desired_class(query_class);
    if let Some(name) = &args.desired {
        let want = classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Failure::Config(format!("unknown class `{name}` (expected one of {classes:?})")))?;
        if want == query_class {
            return Err(Failure::Config(format!(
                "the model already predicts `{name}` for this instance; nothing to explain"
            )));
        }
        debug_assert_eq!(want, desired);
    }
    Ok(desired)
}

fn report_selection(
    cfg: &RunConfig,
    schema: &FeatureSchema<f64>,
    classes: &[String],
    x: &Instance64,
    query_class: usize,
    sel: &SelectionResult<f64>,
) -> Result<(), Failure> {
    let c = &sel.counts;
    println!(
        "query predicted `{}`, desired `{}`; metric {}",
        classes[query_class],
        classes[sel.desired],
        sel.metric.label()
    );
    println!(
        "candidates: all {} -> valid {} -> actionable {} -> front {} -> chosen {}",
        c.all, c.valid, c.actionable, c.front, c.chosen
    );
    for e in &sel.explainers {
        let s = &e.counts;
        println!(
            "  {:<18} {:>4} {:>4} {:>4} {:>4} {:>4}",
            e.explainer, s.all, s.valid, s.actionable, s.front, s.chosen
        );
    }
    if !sel.front.is_empty() {
        println!("front (proximity, feasibility, dpow; distance to ideal):");
        for (i, m) in sel.front.iter().enumerate() {
            let mark = if sel.chosen == Some(i) { '*' } else { ' ' };
            println!(
                " {mark} {:<22} {} {}",
                m.candidate.source.to_string(),
                triple(&m.criteria.selection()),
                short(m.distance)
            );
        }
    }
    if let Some(ideal) = &sel.ideal {
        println!("ideal point: {}", triple(&ideal.raw));
    }
    let record = match sel.chosen() {
        None => {
            println!("no counterfactual found");
            json!({ "covered": false, "message": "no counterfactual found" })
        }
        Some(m) => {
            println!("chosen: {}", m.candidate.source);
            for (j, f) in schema.features().iter().enumerate() {
                let (a, b) = (&x.values[j], &m.candidate.x_prime.values[j]);
                if a != b {
                    println!("  {}: {a} -> {b}", f.name);
                }
            }
            json!({
                "covered": true,
                "explainer": m.candidate.source.explainer,
                "restart": m.candidate.source.restart,
                "values": instance_to_map(schema, &m.candidate.x_prime),
                "criteria": m.criteria,
            })
        }
    };
    let dir = output_dir(cfg)?;
    let path = dir.join(format!("explain_{}.json", cfg.dataset.name));
    let doc = json!({
        "query": instance_to_map(schema, x),
        "predicted": classes[query_class],
        "desired": classes[sel.desired],
        "metric": sel.metric.name(),
        "counts": sel.counts,
        "explainers": sel.explainers,
        "front": sel.front.iter().map(|m| json!({
            "explainer": m.candidate.source.explainer,
            "restart": m.candidate.source.restart,
            "criteria": m.criteria,
            "distance": m.distance,
        })).collect::<Vec<_>>(),
        "ideal": sel.ideal.as_ref().map(|i| &i.raw),
        "selected": record,
    });
    let text = serde_json::to_string_pretty(&doc).expect("serialisable");
    fs::write(&path, text + "\n").map_err(runtime)?;
    Ok(())
}

fn report_path(dir: &Path, stem: &str, dataset: &str, ext: &str) -> std::path::PathBuf {
    dir.join(format!("{stem}_{dataset}.{ext}"))
}

pub fn evaluate(common: &Common, instances: Option<usize>) -> Result<(), Failure> {
    let mut cfg = load_config(common, true)?;
    if let Some(n) = instances {
        if n == 0 {
            return Err(Failure::Config("--instances must be >= 1".into()));
        }
        cfg.evaluation.instances = n;
    }
    let data = cfg.load_data::<f64>().map_err(runtime)?;
    let model = load_trained(&cfg, &data)?;
    let settings = EvalSettings::from_config(&cfg);
    let run = run_evaluation(&data, &model, &settings).map_err(runtime)?;
    let dir = output_dir(&cfg)?;
    let ds = data.name();

    let rows = MetricsRow::from_run(&run).map_err(runtime)?;
    write_metrics(&report_path(&dir, "metrics", ds, "csv"), &rows, settings.neighbors, run.instances.len())
        .map_err(runtime)?;
    let survival = run.survival();
    write_survival(&report_path(&dir, "survival", ds, "csv"), &survival).map_err(runtime)?;
    write_outcomes(&report_path(&dir, "outcomes", ds, "csv"), &OutcomeRow::from_run(&run)).map_err(runtime)?;
    let reduction = run.dominance_reduction();
    let manifest = Manifest {
        dataset: ds.to_string(),
        seeds: [
            ("split".to_string(), cfg.dataset.seed),
            ("train".to_string(), cfg.model.train.seed),
            ("explainers".to_string(), cfg.explainers.seed),
            ("evaluation".to_string(), cfg.evaluation.seed),
        ]
        .into(),
        neighbors: settings.neighbors,
        metric: settings.primary.name().to_string(),
        methods: run.method_names(),
        normalization: "min-max per query over valid and actionable candidates".to_string(),
        grid: cfg.evaluation.grid,
        instances: run.instances.len(),
        config_hash: cfg.hash(),
        model_hash: model.hash(),
        dominance_reduction: reduction,
        empty_explainers: run.empty_explainers.clone(),
    };
    write_manifest(&report_path(&dir, "manifest", ds, "json"), &manifest).map_err(runtime)?;

    println!("{} instances of {ds}", run.instances.len());
    println!(
        "{:<18} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6} {:>6} {:>6}",
        "method", "prox", "feas", "dpow", "spars", "instab", "cover", "act", "rank"
    );
    let cell = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    for r in &rows {
        println!(
            "{:<18} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6.2} {:>6.2} {:>6.2}",
            r.method,
            cell(r.prox),
            cell(r.feas),
            cell(r.dpow),
            cell(r.spars),
            cell(r.instab),
            r.cover,
            r.act,
            r.rank
        );
        if r.method.starts_with("ideal_") && r.cover < 1.0 {
            log::warn!("{}: coverage {:.2} below 1", r.method, r.cover);
        }
    }
    match reduction {
        Some(v) => println!("dominance filter removed {:.1}% of valid and actionable candidates", 100.0 * v),
        None => println!("dominance filter: no valid and actionable candidates"),
    }
    println!("reports: {}", dir.display());
    Ok(())
}

pub fn sweep(common: &Common, grid: Option<u32>) -> Result<(), Failure> {
    let cfg = load_config(common, false)?;
    let n = grid.unwrap_or(cfg.evaluation.grid);
    if n == 0 {
        return Err(Failure::Config("--grid must be >= 1".into()));
    }
    let dir = cfg.output_dir();
    let ds = &cfg.dataset.name;
    let outcomes = report_path(&dir, "outcomes", ds, "csv");
    if !outcomes.is_file() {
        return Err(Failure::Runtime(format!(
            "{} does not exist; run `cfselect evaluate` first",
            outcomes.display()
        )));
    }
    let rows = read_outcomes(&outcomes).map_err(runtime)?;
    let result = run_sweep(&OutcomeRow::method_criteria(&rows), Ratio::new(1, n)).map_err(runtime)?;
    let path = report_path(&dir, "sweep", ds, "csv");
    write_sweep(&path, &result).map_err(runtime)?;
    println!("{} weight triples", result.rows.len());
    let corners = [("proximity", [1, 0, 0]), ("dpow", [0, 1, 0]), ("feasibility", [0, 0, 1])];
    for (name, [p, d, f]) in corners {
        if let Some(r) = result.rows.iter().find(|r| {
            r.weights.w_p == Ratio::from_integer(p)
                && r.weights.w_d == Ratio::from_integer(d)
                && r.weights.w_f == Ratio::from_integer(f)
        }) {
            println!("  all weight on {name:<11} -> {}", r.winner);
        }
    }
    println!("sweep: {}", path.display());
    Ok(())
}
