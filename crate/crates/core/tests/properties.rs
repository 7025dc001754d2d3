use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use pubcast::cohort::{cohort_members, count_matrices, productivity, CohortOptions, TimeGrid};
use pubcast::corpus::{parse_counts_file, PublicationCorpus};
use pubcast::creativity::{train, CreativityModel, ModelParams};
use pubcast::evaluation::{event_auc, ks_two_sample, pearson, sorted_pearson, Grouping};
use pubcast::matrix::Grid;
use pubcast::predictor::{event_probability, predict};
use pubcast::regression::{fit_log_linear, fit_log_log};

const FIRST_YEAR: i32 = 1990;
const LAST_YEAR: i32 = 2004;

/// Sparse corpora over a short span: (researcher index, year, count) triples.
fn corpus_strategy() -> impl Strategy<Value = PublicationCorpus> {
    prop::collection::vec((0usize..25, FIRST_YEAR..=LAST_YEAR, 0u64..4), 0..120).prop_map(|rows| {
        let mut c = PublicationCorpus::new(None);
        for (r, y, k) in rows {
            c.add(&format!("res-{r:02}"), y, k).unwrap();
        }
        c
    })
}

fn relabel(corpus: &PublicationCorpus, rename: impl Fn(&str) -> String) -> PublicationCorpus {
    let mut out = PublicationCorpus::new(None);
    for rec in corpus.records() {
        out.add(&rename(&rec.researcher_id), rec.year, rec.count).unwrap();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn history_is_monotone(corpus in corpus_strategy()) {
        for r in corpus.researchers() {
            let mut prev = 0;
            for y in FIRST_YEAR - 1..=LAST_YEAR + 1 {
                let h = corpus.history(r, y);
                prop_assert!(h >= prev);
                prev = h;
            }
            prop_assert_eq!(prev, corpus.years_of(r).unwrap().values().sum::<u64>());
        }
    }

    #[test]
    fn cohorts_partition_researchers(corpus in corpus_strategy(), j in 1usize..=6) {
        let grid = TimeGrid::new(FIRST_YEAR, 1995, 8).unwrap();
        let all: BTreeSet<String> = corpus.researchers().map(str::to_string).collect();
        let max_h = all.iter().map(|r| corpus.history(r, LAST_YEAR)).max().unwrap_or(0);
        let mut seen = BTreeSet::new();
        for i in 0..=max_h {
            let members = cohort_members(&corpus, i, j, &grid, CohortOptions::default()).unwrap();
            for m in members {
                prop_assert!(seen.insert(m), "researcher in two cohorts");
            }
        }
        prop_assert_eq!(seen, all);
    }

    #[test]
    fn count_matrices_agree_with_membership(corpus in corpus_strategy()) {
        let grid = TimeGrid::new(FIRST_YEAR, 1995, 8).unwrap();
        let counts = count_matrices(&corpus, &grid, 10, 8, CohortOptions::default()).unwrap();
        for (i, j, &n) in counts.n.cells() {
            let members = cohort_members(&corpus, i as u64, j, &grid, CohortOptions::default()).unwrap();
            prop_assert_eq!(n, members.len() as u64);
            let m: u64 = members.iter().map(|r| corpus.count_in(r, grid.cutpoint(j))).sum();
            prop_assert_eq!(*counts.m.get(i, j), m);
        }
    }

    #[test]
    fn counts_file_round_trip(corpus in corpus_strategy()) {
        let mut buf = Vec::new();
        corpus.write_counts(&mut buf).unwrap();
        let back = parse_counts_file(buf.as_slice(), None).unwrap();
        prop_assert_eq!(&back, &corpus);
        let mut again = Vec::new();
        back.write_counts(&mut again).unwrap();
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn productivity_ignores_researcher_labels(corpus in corpus_strategy()) {
        let grid = TimeGrid::new(FIRST_YEAR, 1995, 8).unwrap();
        let renamed = relabel(&corpus, |id| format!("x{}", id.chars().rev().collect::<String>()));
        let a = count_matrices(&corpus, &grid, 10, 8, CohortOptions::default()).unwrap();
        let b = count_matrices(&renamed, &grid, 10, 8, CohortOptions::default()).unwrap();
        prop_assert_eq!(productivity(&a), productivity(&b));
    }

    #[test]
    fn log_log_is_log_linear_on_log_x(
        points in prop::collection::vec((0.1f64..100.0, 0.01f64..50.0), 2..30),
        weighted in any::<bool>(),
    ) {
        let weights: Vec<f64> = (0..points.len()).map(|k| 1.0 + k as f64).collect();
        let w = weighted.then_some(weights.as_slice());
        let logged: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y)).collect();
        match (fit_log_log(&points, w), fit_log_linear(&logged, w)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.intercept, b.intercept);
                prop_assert_eq!(a.slope, b.slope);
                prop_assert_eq!(a.p_value, b.p_value);
                prop_assert_eq!(a.residual_variance, b.residual_variance);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn sorted_pearson_is_pearson_of_order_statistics(
        x in prop::collection::vec(-50.0f64..50.0, 2..40),
        seed in any::<u64>(),
    ) {
        let mut y = x.clone();
        // deterministic permutation from the seed
        let n = y.len();
        for k in (1..n).rev() {
            let swap = (seed.wrapping_mul(6364136223846793005).wrapping_add(k as u64) >> 33) as usize % (k + 1);
            y.swap(k, swap);
        }
        let distinct = x.iter().any(|v| *v != x[0]);
        prop_assert_eq!(sorted_pearson(&x, &y), distinct.then_some(1.0));
        let mut xs = x.clone();
        let mut ys = y.clone();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        prop_assert_eq!(sorted_pearson(&x, &y), pearson(&xs, &ys));
    }

    #[test]
    fn two_sample_ks_of_a_sample_with_itself_is_zero(a in prop::collection::vec(0u64..30, 1..200)) {
        let r = ks_two_sample(&a, &a).unwrap();
        prop_assert_eq!(r.statistic, 0.0);
        prop_assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn ks_outputs_are_probabilities(
        a in prop::collection::vec(0u64..30, 1..100),
        b in prop::collection::vec(0u64..30, 1..100),
    ) {
        let r = ks_two_sample(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.statistic));
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn event_auc_ignores_researcher_order(corpus in corpus_strategy(), seed in any::<u64>()) {
        let params = ModelParams::new(12, 8, 4, 4, FIRST_YEAR, 1995);
        let lambda = Grid::from_fn(12, 8, |i, j| 0.2 * i as f64 / (1.0 + 0.1 * j as f64));
        let model = CreativityModel::from_lambda(params, lambda).unwrap();
        let mut ids: Vec<String> = corpus.researchers().map(str::to_string).collect();
        let forward = event_auc(&model, &corpus, Some(&ids), 1998, Grouping::PerCohort);
        let n = ids.len();
        for k in (1..n).rev() {
            ids.swap(k, (seed >> (k % 60)) as usize % (k + 1));
        }
        let shuffled = event_auc(&model, &corpus, Some(&ids), 1998, Grouping::PerCohort);
        match (forward, shuffled) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "order changed the outcome"),
        }
    }

    #[test]
    fn trajectories_accumulate(
        histories in prop::collection::vec(0i64..40, 1..12),
        rate in 0.01f64..5.0,
        seed in any::<u64>(),
    ) {
        let params = ModelParams::new(30, 6, 5, 3, 1990, 1995);
        let model = CreativityModel::from_lambda(params, Grid::filled(30, 6, rate)).unwrap();
        let initial: Vec<(String, i64)> = histories.iter().enumerate().map(|(k, &h)| (format!("p{k}"), h)).collect();
        let run = predict(&model, &initial, 1, 6, 3, seed).unwrap();
        let by_id: BTreeMap<&str, i64> = initial.iter().map(|(id, h)| (id.as_str(), *h)).collect();
        for (r, id) in run.researchers.iter().enumerate() {
            for rep in 0..3 {
                let path = run.path(r, rep);
                prop_assert_eq!(path[0] as i64, by_id[id.as_str()]);
                prop_assert!(path.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn event_probability_increases_with_rate(a in 1e-6f64..20.0, b in 1e-6f64..20.0) {
        let params = ModelParams::new(2, 1, 1, 1, 2000, 2000);
        let model = CreativityModel::from_lambda(params, Grid::from_fn(2, 1, |i, _| if i == 1 { a } else { b })).unwrap();
        let pa = event_probability(&model, 1, 1).unwrap();
        let pb = event_probability(&model, 2, 1).unwrap();
        prop_assert!(pa > 0.0 && pa < 1.0);
        if a < b {
            prop_assert!(pa <= pb);
        }
    }

    #[test]
    fn training_is_deterministic_and_positive(corpus in corpus_strategy()) {
        let params = ModelParams::new(8, 10, 3, 5, FIRST_YEAR, 1995);
        let grid = params.grid().unwrap();
        let counts = count_matrices(&corpus, &grid, 8, 5, CohortOptions::default()).unwrap();
        let eta = productivity(&counts);
        if let Ok(a) = train(&eta, &counts, &params) {
            let b = train(&eta, &counts, &params).unwrap();
            prop_assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
            prop_assert!(a.lambda.cells().all(|(_, _, v)| *v > 0.0 && v.is_finite()));
        }
    }
}

#[test]
fn accessor_reads_every_cell() {
    let params = ModelParams::new(9, 7, 3, 3, 1990, 1995);
    let lambda = Grid::from_fn(9, 7, |i, j| i as f64 + j as f64 / 10.0);
    let model = CreativityModel::from_lambda(params, lambda.clone()).unwrap();
    for (i, j, v) in lambda.cells() {
        assert_eq!(model.creativity_at(i as u64, j).unwrap(), *v);
    }
    assert_eq!(model.creativity_at(0, 3).unwrap(), *lambda.get(1, 3));
    assert_eq!(model.creativity_at(49, 3).unwrap(), *lambda.get(9, 3));
    assert!(model.creativity_at(1, 8).is_err());
}

#[test]
fn stored_candidates_are_recomputable_from_fits() {
    let params = ModelParams::new(12, 9, 6, 5, 1990, 1995);
    let truth = |i: usize, j: usize| (0.2 + 0.3 * (i as f64).ln() - 0.02 * (j as f64 - 1.0)).exp();
    let counts = pubcast::cohort::CohortCounts {
        n: Grid::filled(6, 5, 10_000),
        m: Grid::from_fn(6, 5, |i, j| (10_000.0 * truth(i, j) * (1.0 + 0.01 * ((i * j) % 3) as f64)).round() as u64),
    };
    let model = train(&productivity(&counts), &counts, &params).unwrap();
    for i in 1..=6 {
        for j in 1..=5 {
            let row = model.row_fit(i).unwrap().fit.predict(j as f64 - 1.0);
            let col = model.column_fit(j).unwrap().fit.predict(i as f64);
            assert_eq!(model.row_candidate.get(i, j).unwrap(), row);
            assert_eq!(model.column_candidate.get(i, j).unwrap(), col);
        }
    }
    // rows are monotone in j as their slope dictates, columns in i likewise
    for i in 1..=12 {
        let slope = model.row_fit(i).unwrap().fit.slope;
        for j in 1..9 {
            let (a, b) = (*model.row_candidate.get(i, j), *model.row_candidate.get(i, j + 1));
            if let (Some(a), Some(b)) = (a, b) {
                assert_eq!(b > a, slope > 0.0, "row {i}");
            }
        }
    }
    for j in 1..=9 {
        let slope = model.column_fit(j).unwrap().fit.slope;
        for i in 1..12 {
            let (a, b) = (*model.column_candidate.get(i, j), *model.column_candidate.get(i + 1, j));
            if let (Some(a), Some(b)) = (a, b) {
                assert_eq!(b > a, slope > 0.0, "column {j}");
            }
        }
    }
}
