use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tokenqoe_core::assign::{assign_condition, spread, AssignmentCounter, Planner};
use tokenqoe_core::model::{scores, Category, ConditionId, Dimension, Grid, Language, QosConfig, RatingRecord};
use tokenqoe_core::pca;
use tokenqoe_core::pipeline::{filter_outlier_raters, run_pipeline, surviving_records, zscore_normalize};
use tokenqoe_core::shaper::{schedule_emission, tokenize};
use tokenqoe_core::stats;
use tokenqoe_core::PipelineParams;

fn qos_strategy() -> impl Strategy<Value = QosConfig> {
    let g = Grid::standard();
    (0..g.speeds.len(), 0..g.pause_positions.len(), 0..g.pause_durations.len())
        .prop_map(move |(a, b, c)| QosConfig::new(g.speeds[a], g.pause_positions[b], g.pause_durations[c]).unwrap())
}

fn text_strategy() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            "[a-zA-Z]{1,8}",
            Just(" ".to_string()),
            Just("  \n".to_string()),
            Just("\t".to_string()),
            "[一-龥]{1,3}",
            "[,.!?，。]",
        ],
        0..40,
    )
    .prop_map(|parts| parts.concat())
}

/// Records for `raters` raters over `conds` conditions with the given
/// per-record score triples.
fn records(scores_by_rater: &[Vec<(i32, i32, i32)>]) -> Vec<RatingRecord> {
    let combos = Grid::standard().combinations();
    let mut out = Vec::new();
    for (r, rows) in scores_by_rater.iter().enumerate() {
        for (c, &(o, ct, rs)) in rows.iter().enumerate() {
            let (content, qos) = combos[c];
            out.push(RatingRecord {
                session_id: format!("s{r}"),
                rater_id: format!("r{r}"),
                question_id: "q".into(),
                category: Category::CreativeTasks,
                content,
                qos,
                scores: scores(o, ct, rs),
                timestamp: chrono::DateTime::from_timestamp_millis(c as i64).unwrap(),
            });
        }
    }
    out
}

fn score_matrix() -> impl Strategy<Value = Vec<Vec<(i32, i32, i32)>>> {
    (2usize..7, 3usize..12).prop_flat_map(|(raters, conds)| {
        prop::collection::vec(prop::collection::vec((1..=5i32, 1..=5i32, 1..=5i32), conds), raters)
    })
}

proptest! {
    #[test]
    fn tokens_reconstruct_the_text(text in text_strategy(), zh in any::<bool>()) {
        let lang = if zh { Language::Zh } else { Language::En };
        prop_assert_eq!(tokenize(&text, lang).concat(), text);
    }

    #[test]
    fn schedule_duration_law(n in 1usize..300, qos in qos_strategy()) {
        let tokens: Vec<String> = (0..n).map(|i| format!("t{i} ")).collect();
        let s = schedule_emission(&tokens, &qos);
        prop_assert_eq!(s.total_duration_s, (n - 1) as f64 * qos.speed_s_per_token + qos.pause_dur_s);
        prop_assert_eq!(s.text(), tokens.concat());
        prop_assert_eq!(s, schedule_emission(&tokens, &qos));
    }

    #[test]
    fn longer_pause_shifts_only_tokens_after_it(n in 1usize..100, qos in qos_strategy(), delta in 0.5f64..4.0) {
        let tokens: Vec<String> = (0..n).map(|i| format!("w{i} ")).collect();
        let longer = QosConfig { pause_dur_s: qos.pause_dur_s + delta, ..qos };
        let a = schedule_emission(&tokens, &qos);
        let b = schedule_emission(&tokens, &longer);
        let k = tokenqoe_core::shaper::pause_index(n, qos.pause_pos);
        for i in 0..n {
            let d = b.items[i].emit_at_s - a.items[i].emit_at_s;
            if i < k {
                prop_assert_eq!(d, 0.0);
            } else {
                prop_assert!((d - delta).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zscores_have_zero_mean_unit_sd(m in score_matrix()) {
        let normalized = zscore_normalize(&records(&m));
        let mut groups: std::collections::BTreeMap<(String, Dimension), Vec<f64>> = Default::default();
        for n in &normalized {
            groups.entry((n.rater_id.clone(), n.dimension)).or_default().push(n.z);
        }
        for zs in groups.values() {
            let sd = stats::population_std(zs);
            if zs.iter().all(|z| *z == 0.0) {
                continue;
            }
            prop_assert!(stats::mean(zs).abs() < 1e-9);
            prop_assert!((sd - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn larger_tau_never_shrinks_valid_set(m in score_matrix(), t1 in 0.5f64..3.0, extra in 0.0f64..2.0) {
        let normalized = zscore_normalize(&records(&m));
        let small = filter_outlier_raters(&normalized, t1);
        let large = filter_outlier_raters(&normalized, t1 + extra);
        prop_assert!(small.valid.is_subset(&large.valid));
    }

    #[test]
    fn pipeline_is_idempotent_on_survivors(m in score_matrix()) {
        let recs = records(&m);
        let params = PipelineParams::default();
        let (_, report) = run_pipeline(&recs, &params).unwrap();
        let survivors = surviving_records(&recs, &report);
        let (_, again) = run_pipeline(&survivors, &params).unwrap();
        prop_assert_eq!(again.final_raters, report.final_raters);
    }

    #[test]
    fn scaled_mos_spans_zero_to_five(m in score_matrix()) {
        let (table, _) = run_pipeline(&records(&m), &PipelineParams::default()).unwrap();
        for dim in Dimension::ALL {
            let vals: Vec<(f64, f64)> = table.iter().filter(|(_, d, _)| *d == dim).map(|(_, _, e)| (e.mos_z, e.mos_scaled)).collect();
            for (_, s) in &vals {
                prop_assert!((0.0..=5.0).contains(s));
            }
            let lo = vals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
            let hi = vals.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                prop_assert!(vals.iter().any(|(_, s)| *s == 0.0));
                prop_assert!(vals.iter().any(|(_, s)| *s == 5.0));
            }
        }
    }

    #[test]
    fn rank_correlations_ignore_monotone_transforms(
        pairs in prop::collection::vec((-50i32..50, -50i32..50), 3..40),
        shift in -10.0f64..10.0,
        scale in 0.1f64..5.0,
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let b: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        let t: Vec<f64> = a.iter().map(|x| (scale * x + shift).exp().min(f64::MAX).max(f64::MIN_POSITIVE) + x).collect();
        match (stats::spearman(&a, &b), stats::spearman(&t, &b)) {
            (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
            (x, y) => prop_assert_eq!(x.is_err(), y.is_err()),
        }
        match (stats::kendall(&a, &b), stats::kendall(&t, &b)) {
            (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
            (x, y) => prop_assert_eq!(x.is_err(), y.is_err()),
        }
    }

    #[test]
    fn pca_invariants(rows in prop::collection::vec(prop::array::uniform5(-5.0f64..5.0), 6..40)) {
        prop_assume!((0..5).all(|k| rows.iter().any(|r| r[k] != rows[0][k])));
        let r = pca::pca(&rows).unwrap();
        let total: f64 = r.explained_variance_ratio.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        for k in 0..5 {
            let m = r.scores.iter().map(|s| s[k]).sum::<f64>() / r.scores.len() as f64;
            prop_assert!(m.abs() < 1e-9);
        }
        for (row, s) in rows.iter().zip(&r.scores) {
            prop_assert_eq!(&r.project(&r.standardize(row)), s);
        }
    }

    #[test]
    fn assignment_stays_balanced(seed in any::<u64>(), steps in 1usize..300) {
        let combos = Grid::standard().combinations();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counter = AssignmentCounter::default();
        let qos_points = Grid::standard().qos_points();
        let contents = Grid::standard().content_configs;
        for _ in 0..steps {
            assign_condition("r", "q", &combos, &mut counter, &BTreeSet::new(), &mut rng).unwrap();
            prop_assert!(spread(&counter.qos_counts("q", &qos_points)) <= 1);
            prop_assert!(spread(&counter.content_counts("q", &contents)) <= 1);
        }
    }

    #[test]
    fn planner_never_repeats_a_condition(seed in any::<u64>(), raters in 1usize..6) {
        let grid = Grid::standard();
        let qs: Vec<String> = (0..6).map(|i| format!("q{i}")).collect();
        let mut planner = Planner::new(qs.clone(), &grid);
        let mut seen: std::collections::BTreeMap<String, BTreeSet<ConditionId>> = Default::default();
        let ts = chrono::DateTime::from_timestamp_millis(0).unwrap();
        for s in 0..4 * raters {
            let rater = format!("r{}", s % raters);
            let plan = planner.plan(&rater, &format!("s{s}"), seed.wrapping_add(s as u64), ts).unwrap();
            for item in &plan.items {
                prop_assert!(seen.entry(rater.clone()).or_default().insert(item.condition()));
            }
            planner.apply(&plan);
            for q in &qs {
                prop_assert!(spread(&planner.counter().qos_counts(q, &grid.qos_points())) <= 1);
            }
        }
    }
}
