//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when
//! any criterion fails. Runs without the libtest harness so the lines are
//! always shown.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cfselect::data::{load_dataset, Dataset};
use cfselect::evaluation::{
    evaluate, explain_query, rank_table, sweep, EvalSettings, EvaluationRun, MeasureMatrix, MetricsRow,
};
use cfselect::explainers::{ExplainContext, ExplainerConfig};
use cfselect::heom::heom_distance;
use cfselect::mcda::{
    dominates, normalize, pareto_front, select_counterfactual, select_ideal, Direction, Metric,
};
use cfselect::metrics::{score, CriteriaVector};
use cfselect::model::{train, TrainConfig};
use cfselect::records::read_candidates;
use cfselect::schema::{FeatureValue, Instance};
use cfselect::{Dataset64, Model64};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Trained German model and one evaluation run over 30 test rows, shared by
/// the criteria that need them.
struct German {
    data: Dataset64,
    model: Model64,
    settings: EvalSettings,
    run: EvaluationRun<f64>,
    elapsed: Duration,
}

fn german() -> German {
    let dir = root().join("data");
    let data = load_dataset::<f64>(&dir.join("german.csv"), &dir.join("german.toml")).expect("german data");
    let model = train(&data, &TrainConfig::default()).expect("training").model;
    let settings = EvalSettings {
        explainers: ExplainerConfig::default(),
        neighbors: 5,
        instances: 30,
        seed: 0,
        metrics: Metric::IDEAL.to_vec(),
        primary: Metric::L2,
    };
    let t0 = Instant::now();
    let run = evaluate(&data, &model, &settings).expect("evaluation");
    German {
        data,
        model,
        settings,
        run,
        elapsed: t0.elapsed(),
    }
}

fn brute_front(v: &[[f64; 3]], dirs: &[Direction; 3]) -> Vec<usize> {
    (0..v.len())
        .filter(|&i| !(0..v.len()).any(|j| dominates(&v[j], &v[i], dirs).unwrap()))
        .collect()
}

fn c1_pareto() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t0 = Instant::now();
    for _ in 0..1000 {
        let n = rng.gen_range(0..=200);
        let dirs: [Direction; 3] = std::array::from_fn(|_| if rng.gen() { Direction::Min } else { Direction::Max });
        // coarse grid so ties and duplicates are common
        let levels = rng.gen_range(2..12);
        let v: Vec<[f64; 3]> = (0..n)
            .map(|_| std::array::from_fn(|_| rng.gen_range(0..levels) as f64))
            .collect();
        let mut got = pareto_front(&v, &dirs).unwrap();
        got.sort_unstable();
        assert_eq!(got, brute_front(&v, &dirs), "front of {v:?} under {dirs:?}");
    }
    let t = t0.elapsed();
    assert!(t < Duration::from_secs(10), "took {t:?}");
    format!("1000 sets in {:.2} s", t.as_secs_f64())
}

fn argmins(v: &[f64]) -> Vec<usize> {
    let m = v.iter().copied().fold(f64::INFINITY, f64::min);
    (0..v.len()).filter(|&i| v[i] == m).collect()
}

fn c2_manhattan_sum() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dirs = [Direction::Min, Direction::Max, Direction::Min];
    for round in 0..1000 {
        let n = rng.gen_range(1..60);
        let front: Vec<Vec<f64>> = if round % 2 == 0 {
            // already normalised values on a dyadic grid: exact arithmetic, many ties
            let pts: Vec<[f64; 3]> = (0..n)
                .map(|_| std::array::from_fn(|_| rng.gen_range(0..=16) as f64 / 16.0))
                .collect();
            let idx = pareto_front(&pts, &[Direction::Min; 3]).unwrap();
            idx.iter().map(|&i| pts[i].to_vec()).collect()
        } else {
            let raw: Vec<[f64; 3]> = (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(-5.0..5.0))).collect();
            let idx = pareto_front(&raw, &dirs).unwrap();
            let kept: Vec<[f64; 3]> = idx.iter().map(|&i| raw[i]).collect();
            normalize(&kept, &dirs).unwrap()
        };
        let (chosen, d) = select_ideal(&front, Metric::L1);
        let sums: Vec<f64> = front.iter().map(|v| v.iter().sum()).collect();
        let by_l1 = argmins(&d);
        assert_eq!(by_l1, argmins(&sums), "front {front:?}");
        assert_eq!(chosen, by_l1.first().copied());
    }
    "1000 fronts".to_string()
}

fn c3_selection_invariant(g: &German) -> String {
    let ctx = ExplainContext::new(&g.data, &g.model);
    let schema = g.data.schema();
    let dirs = CriteriaVector::<f64>::SELECTION_DIRECTIONS;
    let mut checked = 0;
    let t0 = Instant::now();
    for &row in &g.run.instances {
        let x = g.data.row(row);
        let q = explain_query(x, &ctx, &g.settings).expect("query run");
        let pool: Vec<[f64; 3]> = q
            .ensemble
            .candidates
            .iter()
            .filter(|c| c.valid && schema.is_actionable(x, &c.x_prime))
            .map(|c| score(x, &c.x_prime, c.predicted, &ctx, g.settings.neighbors).unwrap().selection())
            .collect();
        for sel in &q.selections {
            assert!(sel.counts.is_monotone(), "row {row}: {:?}", sel.counts);
            for e in &sel.explainers {
                assert!(e.counts.is_monotone(), "row {row}: {e:?}");
            }
            assert_eq!(sel.counts.actionable, pool.len());
            if let Some(m) = sel.chosen() {
                assert_eq!(g.model.predict(&m.candidate.x_prime), q.desired, "row {row}: invalid");
                assert!(schema.is_actionable(x, &m.candidate.x_prime), "row {row}: not actionable");
                let c = m.criteria.selection();
                assert!(
                    !pool.iter().any(|p| dominates(p, &c, &dirs).unwrap()),
                    "row {row}: chosen {c:?} is dominated"
                );
                checked += 1;
            }
        }
    }
    let t = t0.elapsed() + g.elapsed;
    assert!(t < Duration::from_secs(300), "took {t:?}");
    format!("{checked} selections over {} German rows, 3 metrics", g.run.instances.len())
}

fn c4_fixture() -> String {
    let t0 = Instant::now();
    let dir = root().join("fixtures/toy_adult");
    let cfg = cfselect::config::RunConfig::from_file(&dir.join("config.toml")).unwrap();
    let schema = cfg.dataset.schema::<f64>().unwrap();
    let classes = cfg.dataset.classes.clone().unwrap();
    let dump = read_candidates::<f64>(&dir.join("candidates.jsonl"), &schema, &classes).unwrap();
    let sel = select_counterfactual(
        &dump.query,
        &schema,
        dump.desired,
        &dump.candidates,
        |i, _| dump.criteria[i].ok_or(i),
        Metric::L2,
    )
    .unwrap();
    let c = sel.counts;
    assert_eq!([c.all, c.valid, c.actionable, c.front, c.chosen], [82, 77, 59, 13, 1]);
    let ideal = sel.ideal.as_ref().unwrap();
    // oracle: per-criterion best over the front, computed here independently
    let best = |j: usize, max: bool| {
        let vals = sel.front.iter().map(|m| m.criteria.selection()[j]);
        if max {
            vals.fold(f64::NEG_INFINITY, f64::max)
        } else {
            vals.fold(f64::INFINITY, f64::min)
        }
    };
    assert_eq!(ideal.raw, vec![best(0, false), best(1, false), best(2, true)]);
    assert_eq!(ideal.raw, vec![0.04, 0.11, 1.0]);
    let t = t0.elapsed();
    assert!(t < Duration::from_secs(1), "took {t:?}");
    format!("82 -> 77 -> 59 -> 13 -> 1, ideal (0.04, 0.11, 1) in {} ms", t.as_millis())
}

fn c5_coverage(g: &German) -> String {
    let rows = MetricsRow::from_run(&g.run).unwrap();
    let mut parts = Vec::new();
    for r in rows.iter().filter(|r| r.method.starts_with("ideal_")) {
        if r.cover < 1.0 {
            // tolerated only down to 0.97, and only when misses were logged
            assert!(r.cover >= 0.97, "{}: cover {}", r.method, r.cover);
        }
        assert_eq!(r.act, r.cover, "{}: act {} vs cover {}", r.method, r.act, r.cover);
        parts.push(format!("{} cover {:.2} act {:.2}", r.method, r.cover, r.act));
    }
    assert_eq!(parts.len(), 3);
    assert!(g.elapsed < Duration::from_secs(600));
    parts.join(", ")
}

#[allow(clippy::approx_constant)] // 6.28 is a transcribed score
fn c6_table_ranks() -> String {
    // German column block: prox, feas, dpow, spars, instab, cover, act
    let table: [(&str, [f64; 7]); 13] = [
        ("Dice", [1.69, 3.92, 0.44, 1.93, 4.15, 1.00, 1.00]),
        ("FACE", [5.05, 1.91, 0.60, 8.12, 3.82, 1.00, 0.98]),
        ("Cadex", [1.38, 3.74, 0.41, 2.64, 3.87, 0.97, 0.97]),
        ("Fimap", [6.85, 3.01, 0.60, 9.91, 3.71, 0.97, 0.97]),
        ("Wachter", [11.67, 7.29, 0.64, 14.65, 5.91, 0.37, 0.37]),
        ("CEM", [0.62, 4.18, 0.31, 2.15, 3.99, 0.13, 0.13]),
        ("CFProto", [3.56, 4.40, 0.48, 4.79, 4.53, 0.99, 0.91]),
        ("GrowingSpheres", [7.65, 5.79, 0.60, 10.73, 5.42, 1.00, 1.00]),
        ("ActionableRecourse", [1.01, 3.55, 0.44, 1.39, 3.60, 0.23, 0.23]),
        ("random selection", [4.39, 3.95, 0.50, 6.28, 4.61, 1.00, 0.98]),
        ("Manhattan", [3.83, 2.15, 0.85, 6.06, 3.50, 1.00, 1.00]),
        ("Euclidean", [3.21, 2.46, 0.80, 4.99, 3.68, 1.00, 1.00]),
        ("Chebyshev", [2.90, 2.70, 0.74, 4.38, 3.71, 1.00, 1.00]),
    ];
    let t0 = Instant::now();
    let m = MeasureMatrix::new(
        table.iter().map(|(n, _)| n.to_string()).collect(),
        table.iter().map(|(_, r)| r.map(Some)).collect(),
    );
    let ranks = rank_table(&m).unwrap();
    let best = argmins(&ranks);
    assert_eq!(best.len(), 1, "tied minimum {ranks:?}");
    assert_eq!(table[best[0]].0, "Manhattan", "ranks {ranks:?}");
    assert!(t0.elapsed() < Duration::from_secs(1));
    let mut sorted: Vec<f64> = ranks.clone();
    sorted.sort_by(f64::total_cmp);
    format!("Manhattan mean rank {:.3}, runner-up {:.3}", ranks[best[0]], sorted[1])
}

fn random_instance(data: &Dataset<f64>, rng: &mut ChaCha8Rng) -> Instance<f64> {
    let base = data.row(*data.train_indices().choose(rng).unwrap()).clone();
    let values = base
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| match v {
            FeatureValue::Num(_) => {
                let (lo, hi) = data.ranges().get(j).unwrap();
                // may leave the fitted range
                FeatureValue::Num(rng.gen_range(lo - 0.2 * (hi - lo)..=hi + 0.2 * (hi - lo)))
            }
            FeatureValue::Cat(_) => {
                let cats = &data.schema().feature(j).categories;
                if rng.gen_bool(0.1) {
                    FeatureValue::Cat("unseen".into())
                } else {
                    FeatureValue::Cat(cats.choose(rng).unwrap().clone())
                }
            }
        })
        .collect();
    Instance::new(values)
}

fn c7_heom(g: &German) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let schema = g.data.schema();
    for _ in 0..10_000 {
        let a = random_instance(&g.data, &mut rng);
        let b = random_instance(&g.data, &mut rng);
        let ab = heom_distance(&a, &b, schema, g.data.ranges());
        let ba = heom_distance(&b, &a, schema, g.data.ranges());
        assert_eq!(ab, ba);
        assert!(ab >= 0.0);
        assert_eq!(heom_distance(&a, &a, schema, g.data.ranges()), 0.0);
    }
    "10000 pairs".to_string()
}

fn c8_sweep_corners(g: &German) -> String {
    let rows = MetricsRow::from_run(&g.run).unwrap();
    let s = sweep(&g.run.method_criteria(), Ratio::new(1, 16)).unwrap();
    assert_eq!(s.rows.len(), 153);
    let best = |pick: fn(&MetricsRow) -> Option<f64>, max: bool| -> Vec<String> {
        let vals: Vec<f64> = rows
            .iter()
            .map(|r| pick(r).map_or(f64::NAN, |v| if max { -v } else { v }))
            .map(|v| if v.is_nan() { f64::INFINITY } else { v })
            .collect();
        argmins(&vals).into_iter().map(|i| rows[i].method.clone()).collect()
    };
    let corners = [
        ("proximity", [1, 0, 0], best(|r| r.prox, false)),
        ("dpow", [0, 1, 0], best(|r| r.dpow, true)),
        ("feasibility", [0, 0, 1], best(|r| r.feas, false)),
    ];
    let mut parts = Vec::new();
    for (name, [p, d, f], want) in corners {
        let row = s
            .rows
            .iter()
            .find(|r| {
                r.weights.w_p == Ratio::from_integer(p)
                    && r.weights.w_d == Ratio::from_integer(d)
                    && r.weights.w_f == Ratio::from_integer(f)
            })
            .unwrap();
        assert!(want.contains(&row.winner), "{name}: sweep {} vs table {want:?}", row.winner);
        parts.push(format!("{name} -> {}", row.winner));
    }
    parts.join(", ")
}

fn c9_dominance(g: &German) -> String {
    let r = g.run.dominance_reduction().expect("some valid and actionable candidates");
    assert!(r >= 0.5, "reduction {r}");
    format!("dominance filter removes {:.1}% on average", 100.0 * r)
}

fn c10_gradient(g: &German) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let enc = g.model.encoder();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = random_instance(&g.data, &mut rng);
        let z = enc.encode(&x);
        let class = rng.gen_range(0..2);
        let (p, grad) = g.model.proba_gradient_encoded(&z, class);
        // difference the smaller probability, which has the finer absolute
        // resolution; the two class probabilities sum to one
        let (probe, sign) = if p > 0.5 { (1 - class, -1.0) } else { (class, 1.0) };
        for j in 0..z.len() {
            let mut up = z.clone();
            let mut down = z.clone();
            up[j] += h;
            down[j] -= h;
            let diff = g.model.predict_proba_encoded(&up)[probe] - g.model.predict_proba_encoded(&down)[probe];
            let fd = sign * diff / (2.0 * h);
            // absolute floor for vanishing gradients
            let rel = (grad[j] - fd).abs() / grad[j].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
    format!("100 points, worst relative error {worst:.1e}")
}

fn check(id: usize, name: &str, f: impl FnOnce() -> String) -> bool {
    let t0 = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(f));
    let secs = t0.elapsed().as_secs_f64();
    match res {
        Ok(detail) => {
            println!("PASS {id:>2} {name}: {detail} [{secs:.2} s]");
            true
        }
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            println!("FAIL {id:>2} {name}: {msg}");
            false
        }
    }
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored
    let setup = Instant::now();
    let g = german();
    println!(
        "German: {} rows, {} evaluated, setup {:.1} s",
        g.data.len(),
        g.run.instances.len(),
        setup.elapsed().as_secs_f64()
    );
    let results = [
        check(1, "pareto front equals brute force", c1_pareto),
        check(2, "L1 choice equals unweighted-sum choice", c2_manhattan_sum),
        check(3, "selection valid, actionable, non-dominated", || c3_selection_invariant(&g)),
        check(4, "toy fixture replay", c4_fixture),
        check(5, "pipeline coverage and actionability", || c5_coverage(&g)),
        check(6, "reference German scores rank Manhattan first", c6_table_ranks),
        check(7, "HEOM symmetry, non-negativity, identity", || c7_heom(&g)),
        check(8, "sweep corners match per-criterion best", || c8_sweep_corners(&g)),
        check(9, "dominance filter removes at least half", || c9_dominance(&g)),
        check(10, "probability gradient matches finite differences", || c10_gradient(&g)),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
