use std::fs::OpenOptions;
use std::io::Write;

use chrono::{TimeZone, Utc};
use proptest::prelude::*;

use tokenqoe::files;
use tokenqoe::store::{Store, RATINGS};
use tokenqoe_core::model::{scores, Category, ConditionId, Dimension, Grid, RatingRecord};
use tokenqoe_core::pipeline::{MosEntry, MosTable};

fn record(i: usize, ms: i64, s: [i32; 3]) -> RatingRecord {
    let combos = Grid::standard().combinations();
    let (content, qos) = combos[i % combos.len()];
    RatingRecord {
        session_id: format!("s{i:06}"),
        rater_id: "r000001".into(),
        question_id: format!("q{}", i % 7),
        category: Category::ALL[i % 5],
        content,
        qos,
        scores: scores(s[0], s[1], s[2]),
        timestamp: Utc.timestamp_millis_opt(ms).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mos_csv_keeps_floats_exact(values in prop::collection::vec((-1e3f64..1e3, 0f64..=5.0, 1usize..500), 1..40)) {
        let mut table = MosTable::default();
        let combos = Grid::standard().combinations();
        for (i, (z, m, n)) in values.iter().enumerate() {
            let (content, qos) = combos[i % combos.len()];
            let cond = ConditionId { question_id: format!("q{}", i / combos.len()), content, qos };
            let dim = Dimension::ALL[i % 3];
            table.entries.entry(cond).or_default().insert(dim, MosEntry { mos_z: *z, mos_scaled: *m, n_valid: *n });
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mos.csv");
        files::write_mos_csv(&p, &table, &[("seed", "1".into())]).unwrap();
        prop_assert_eq!(files::read_mos_csv(&p).unwrap().entries, table.entries);
    }

    #[test]
    fn store_survives_any_torn_append(
        n in 1usize..12,
        cut_frac in 0.0f64..1.0,
        ms in 1_600_000_000_000i64..1_900_000_000_000,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let (store, _) = Store::open(dir.path()).unwrap();
        let recs: Vec<_> = (0..n).map(|i| record(i, ms + i as i64, [1 + (i % 5) as i32, 3, 5])).collect();
        for r in &recs {
            store.append_rating(r).unwrap();
        }
        let extra = serde_json::to_vec(&record(n, ms, [2, 2, 2])).unwrap();
        let cut = ((extra.len() as f64) * cut_frac) as usize;
        let mut f = OpenOptions::new().append(true).open(dir.path().join(RATINGS)).unwrap();
        f.write_all(&extra[..cut]).unwrap();
        drop(f);

        let (store, snap) = Store::open(dir.path()).unwrap();
        prop_assert_eq!(&snap.ratings, &recs);
        let next = record(n + 1, ms, [4, 4, 4]);
        store.append_rating(&next).unwrap();
        let (_, snap) = Store::open(dir.path()).unwrap();
        prop_assert_eq!(snap.ratings.len(), n + 1);
        prop_assert_eq!(snap.ratings.last(), Some(&next));
    }
}
