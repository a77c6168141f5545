use std::collections::{BTreeSet, HashMap};

use aerial_core::extract::extract_rules_with_stats;
use aerial_core::miners::{brute_force_frequent, eclat_frequent, fpgrowth_frequent, generate_rules, mine_rules};
use aerial_core::nn::{read_checkpoint, write_checkpoint, Matrix};
use aerial_core::rule::{read_jsonl, write_jsonl};
use aerial_core::tabular::{one_hot_encode, to_transactions, zscore_discretize, NumericTable};
use aerial_core::{
    evaluate_rules, extract_rules, AutoencoderModel, Dataset, ExtractionConfig, Miner, OneHotSchema,
    Rule, TransactionDb,
};
use proptest::prelude::*;

fn item_db(n_items: usize, rows: Vec<Vec<bool>>) -> TransactionDb {
    let names: Vec<String> = (0..n_items).map(|i| format!("i{i}")).collect();
    let transactions = rows
        .into_iter()
        .map(|r| (0..n_items).filter(|&i| r[i]).collect())
        .collect();
    TransactionDb::new(OneHotSchema::single_items(&names), transactions).unwrap()
}

fn arb_db(max_items: usize, max_rows: usize) -> impl Strategy<Value = TransactionDb> {
    (1..=max_items).prop_flat_map(move |k| {
        prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.45), k), 1..=max_rows)
            .prop_map(move |rows| item_db(k, rows))
    })
}

/// Bitmask enumeration: every non-empty subset, counted by scanning rows.
fn subset_oracle(db: &TransactionDb, min_support: f64) -> BTreeSet<(Vec<usize>, usize)> {
    let n = db.len();
    let masks: Vec<u32> = db
        .transactions()
        .iter()
        .map(|t| t.iter().fold(0u32, |m, &i| m | 1 << i))
        .collect();
    let mut out = BTreeSet::new();
    for set in 1u32..(1 << db.n_items()) {
        let count = masks.iter().filter(|&&m| m & set == set).count();
        if count as f64 / n as f64 >= min_support {
            let items = (0..db.n_items()).filter(|&i| set >> i & 1 == 1).collect();
            out.insert((items, count));
        }
    }
    out
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (1usize..6, 1usize..20).prop_flat_map(|(cols, rows)| {
        prop::collection::vec(1usize..5, cols).prop_flat_map(move |sizes| {
            let row = sizes.iter().map(|&k| 0..k).collect::<Vec<_>>();
            prop::collection::vec(row, rows).prop_map(move |coded| {
                let names = (0..sizes.len()).map(|c| format!("c{c}")).collect();
                let cats = sizes.iter().map(|&k| (0..k).map(|v| format!("v{v}")).collect()).collect();
                Dataset::from_codes(names, cats, coded).unwrap()
            })
        })
    })
}

fn random_model(sizes: &[usize], hidden: &[usize], seed: u64) -> (OneHotSchema, AutoencoderModel) {
    let names: Vec<String> = (0..sizes.len()).map(|c| format!("c{c}")).collect();
    let cats = sizes.iter().map(|&k| (0..k).map(|v| format!("v{v}")).collect()).collect();
    let schema = OneHotSchema::new(names, cats).unwrap();
    let mut model = AutoencoderModel::for_schema(&schema, hidden, seed).unwrap();
    // Xavier weights alone give near-uniform outputs; stretch them.
    for p in model.params_mut() {
        for v in p.iter_mut() {
            *v *= 4.0;
        }
    }
    (schema, model)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn miners_match_subset_enumeration(db in arb_db(9, 40), s in prop::sample::select(vec![0.05, 0.1, 0.3, 0.5, 1.0])) {
        let expected = subset_oracle(&db, s);
        for mined in [brute_force_frequent(&db, s).unwrap(), fpgrowth_frequent(&db, s).unwrap(), eclat_frequent(&db, s).unwrap()] {
            let got: BTreeSet<_> = mined.iter().map(|x| (x.items.clone(), x.count)).collect();
            prop_assert_eq!(got.len(), mined.len());
            prop_assert_eq!(&got, &expected);
            let keys: Vec<_> = mined.iter().map(|x| (x.items.len(), x.items.clone())).collect();
            prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn capped_miners_agree(db in arb_db(10, 30), s in 0.05f64..0.6, a in 1usize..4) {
        let fp = mine_rules(Miner::FpGrowth, &db, s, 0.5, a).unwrap();
        let ec = mine_rules(Miner::Eclat, &db, s, 0.5, a).unwrap();
        let bf = mine_rules(Miner::BruteForce, &db, s, 0.5, a).unwrap();
        prop_assert_eq!(&fp, &ec);
        prop_assert_eq!(&fp, &bf);
        prop_assert!(fp.iter().all(|r| r.antecedent.len() <= a));
    }

    #[test]
    fn rule_fields_match_direct_counts(db in arb_db(8, 30), s in 0.1f64..0.5, c in 0.0f64..1.0) {
        let frequent = brute_force_frequent(&db, s).unwrap();
        let rules = generate_rules(&frequent, &db, c, 3).unwrap();
        let n = db.len() as f64;
        for r in &rules {
            let mut all = r.antecedent.clone();
            all.push(r.consequent);
            let joint = db.transactions().iter().filter(|t| all.iter().all(|i| t.contains(i))).count();
            let ante = db.transactions().iter().filter(|t| r.antecedent.iter().all(|i| t.contains(i))).count();
            prop_assert_eq!(r.support, joint as f64 / n);
            prop_assert_eq!(r.confidence, joint as f64 / ante as f64);
            prop_assert!(r.confidence >= c);
        }
    }

    #[test]
    fn one_hot_round_trip(ds in arb_dataset()) {
        let (schema, m) = one_hot_encode(&ds).unwrap();
        prop_assert_eq!(m.width(), ds.categories().iter().map(Vec::len).sum::<usize>());
        for (r, codes) in ds.rows().iter().enumerate() {
            let row = m.row(r);
            for (c, span) in schema.spans().iter().enumerate() {
                let ones: Vec<usize> = span.clone().filter(|&i| row[i] == 1.0).collect();
                prop_assert_eq!(ones.len(), 1);
                prop_assert!(span.clone().all(|i| row[i] == 0.0 || row[i] == 1.0));
                prop_assert_eq!(ones[0] - span.start, codes[c]);
                let (col, val) = schema.describe(ones[0]);
                prop_assert_eq!(col, ds.columns()[c].as_str());
                prop_assert_eq!(val, ds.label(r, c));
            }
        }
        let db = to_transactions(&m);
        prop_assert!(db.transactions().iter().all(|t| t.len() == ds.n_columns()));
    }

    #[test]
    fn zscore_bins_ignore_positive_affine_maps(
        values in prop::collection::vec(-100i32..100, 2..30),
        scale in 0.01f64..100.0,
        shift in -1e3f64..1e3,
    ) {
        let xs: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        // Values sitting on the cutoff may flip under rounding.
        prop_assume!(sd == 0.0 || xs.iter().all(|x| (((x - mean) / sd).abs() - 1.0).abs() > 1e-9));
        let table = |f: &dyn Fn(f64) -> f64| NumericTable {
            columns: vec!["x".into()],
            rows: xs.iter().map(|&x| vec![f(x)]).collect(),
        };
        let a = zscore_discretize(&table(&|x| x), 1.0).unwrap();
        let b = zscore_discretize(&table(&|x| scale * x + shift), 1.0).unwrap();
        let labels = |d: &Dataset| (0..d.n_rows()).map(|r| d.label(r, 0).to_owned()).collect::<Vec<_>>();
        prop_assert_eq!(labels(&a), labels(&b));
    }

    #[test]
    fn spans_are_distributions(
        sizes in prop::collection::vec(2usize..5, 3..6),
        seed in any::<u64>(),
        x in prop::collection::vec(0.0f64..=1.0, 20),
    ) {
        let width: usize = sizes.iter().sum();
        let (_, model) = random_model(&sizes, &[4, 2], seed);
        let out = model.forward(&x[..width.min(20)].iter().copied().chain(std::iter::repeat(0.5)).take(width).collect::<Vec<_>>());
        for span in model.spans() {
            let s: f64 = out[span.clone()].iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12, "span sums to {}", s);
            prop_assert!(out[span.clone()].iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn report_invariants(db in arb_db(7, 30), s in 0.1f64..0.5, rotate in 0usize..50) {
        let rules = mine_rules(Miner::Eclat, &db, s, 0.0, 2).unwrap();
        let r = evaluate_rules(&rules, &db, 0.0).unwrap();
        if !r.empty {
            prop_assert!((0.0..=1.0).contains(&r.avg_confidence));
            prop_assert!((-1.0..=1.0).contains(&r.avg_zhang));
            prop_assert!(r.avg_support <= r.avg_coverage + 1e-12);
            prop_assert!(r.avg_coverage <= r.total_data_coverage + 1e-12);
        }
        let mut shuffled = rules.clone();
        if !shuffled.is_empty() {
            let k = rotate % shuffled.len();
            shuffled.rotate_left(k);
        }
        let again = evaluate_rules(&shuffled, &db, 0.0).unwrap();
        prop_assert_eq!(r.rule_count, again.rule_count);
        prop_assert!((r.avg_confidence - again.avg_confidence).abs() < 1e-12);
        prop_assert!((r.avg_zhang - again.avg_zhang).abs() < 1e-12);
        prop_assert_eq!(r.total_data_coverage, again.total_data_coverage);
    }

    #[test]
    fn raising_thresholds_only_removes(
        sizes in prop::collection::vec(2usize..4, 3..6),
        seed in any::<u64>(),
        lo in 0.3f64..0.7,
        step in 0.0f64..0.3,
    ) {
        let (schema, model) = random_model(&sizes, &[5, 3], seed);
        let hi = lo + step;
        let cfg = |tau_a: f64, tau_c: f64| ExtractionConfig { tau_a, tau_c, ..ExtractionConfig::default() };
        let loose: BTreeSet<Rule> = extract_rules(&model, &schema, &cfg(0.5, lo)).unwrap().into_iter().collect();
        let strict: BTreeSet<Rule> = extract_rules(&model, &schema, &cfg(0.5, hi)).unwrap().into_iter().collect();
        prop_assert!(strict.is_subset(&loose));

        let (_, a) = extract_rules_with_stats(&model, &schema, &cfg(lo, 0.8)).unwrap();
        let (_, b) = extract_rules_with_stats(&model, &schema, &cfg(hi, 0.8)).unwrap();
        let a: BTreeSet<_> = a.passing.into_iter().collect();
        let b: BTreeSet<_> = b.passing.into_iter().collect();
        prop_assert!(b.is_subset(&a));
    }

    #[test]
    fn checkpoint_round_trip(sizes in prop::collection::vec(2usize..4, 2..5), seed in any::<u64>()) {
        let (_, model) = random_model(&sizes, &[3, 2], seed);
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice(), model.spans().to_vec()).unwrap();
        prop_assert_eq!(back.params(), model.params());
        let mut again = Vec::new();
        write_checkpoint(&back, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn rules_file_round_trip(db in arb_db(6, 20), s in 0.1f64..0.5) {
        let rules = mine_rules(Miner::FpGrowth, &db, s, 0.3, 2).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &rules, db.schema(), None).unwrap();
        let back = read_jsonl(buf.as_slice(), db.schema()).unwrap();
        prop_assert_eq!(&back, &rules);
        let by_key: HashMap<_, _> = rules.iter().map(|r| (r.key(), r.confidence)).collect();
        prop_assert!(back.iter().all(|r| by_key[&r.key()] == r.confidence));
    }
}

#[test]
fn batch_forward_equals_row_forward() {
    let (schema, model) = random_model(&[3, 2, 4], &[4, 2], 11);
    let width = schema.total_features();
    let rows: Vec<Vec<f64>> = (0..5).map(|r| (0..width).map(|i| ((r * 7 + i * 3) % 5) as f64 / 4.0).collect()).collect();
    let batch = model.forward_batch(&Matrix::from_vec(5, width, rows.concat()));
    for (r, row) in rows.iter().enumerate() {
        let single = model.forward(row);
        for (a, b) in single.iter().zip(batch.row(r)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
