use std::collections::BTreeMap;

use geoclass::cluster::{kmeans_restarts, KMeansOptions};
use geoclass::evaluate::{anova_f, quantile_sorted, FValue};
use geoclass::ingest::{read_district_table, reconstruct_suppressed, DistrictCode, RateTable, Schema};
use geoclass::ini::Ini;
use geoclass::kselect::one_se_rule;
use geoclass::matrix::Matrix;
use geoclass::preprocess::{correlation_matrix, prune_multicollinear, zscore, Domain, FeatureMatrix, VariableMeta};
use geoclass::profile::{flag_risk, ClusterProfile, Comparator, Direction, RiskRule, VariableProfile};
use geoclass::validate::{rank_desc, UsageRecord};
use proptest::prelude::*;

fn rate_table(rows: &[Vec<f64>]) -> RateTable {
    let d = rows[0].len();
    RateTable {
        districts: (0..rows.len()).map(|i| DistrictCode::new(&format!("E0700{i:04}"), "d")).collect(),
        variables: (0..d).map(|j| VariableMeta::new(&format!("v{j}"), Domain::Demographic, "x")).collect(),
        values: Matrix::from_rows(rows),
    }
}

fn features(rows: &[Vec<f64>]) -> FeatureMatrix {
    let t = rate_table(rows);
    FeatureMatrix::from_z(t.districts, t.variables, t.values).unwrap()
}

fn non_constant(rows: &[Vec<f64>]) -> bool {
    (0..rows[0].len()).all(|j| rows.iter().any(|r| r[j] != rows[0][j]))
}

fn matrix_strategy(n: std::ops::Range<usize>, d: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (n, d).prop_flat_map(|(n, d)| prop::collection::vec(prop::collection::vec(-50.0f64..150.0, d), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zscore_columns_are_standard(rows in matrix_strategy(3..40, 1..6)) {
        prop_assume!(non_constant(&rows));
        let t = rate_table(&rows);
        let f = zscore(&t, &t.variables).unwrap();
        let n = rows.len() as f64;
        for j in 0..f.n_variables() {
            let col = f.z.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            prop_assert!(mean.abs() < 1e-10);
            prop_assert!((sd - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn correlation_is_symmetric_and_bounded(rows in matrix_strategy(3..30, 2..6)) {
        prop_assume!(non_constant(&rows));
        let c = correlation_matrix(&rate_table(&rows)).unwrap();
        let d = c.variables.len();
        for i in 0..d {
            prop_assert_eq!(c.r.get(i, i), 1.0);
            for j in 0..d {
                prop_assert_eq!(c.r.get(i, j), c.r.get(j, i));
                prop_assert!(c.r.get(i, j).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn pruning_respects_threshold(rows in matrix_strategy(4..30, 2..8), threshold in 0.05f64..1.0) {
        prop_assume!(non_constant(&rows));
        let c = correlation_matrix(&rate_table(&rows)).unwrap();
        let p = prune_multicollinear(&c, threshold, &[]).unwrap();
        prop_assert!(!p.kept.is_empty());
        prop_assert!(c.max_abs_off_diagonal(&p.kept) <= threshold);
        prop_assert_eq!(p.kept.len() + p.removals.len(), c.variables.len());
    }

    #[test]
    fn anova_partitions_total_sum_of_squares(
        rows in matrix_strategy(4..30, 1..4),
        labels in prop::collection::vec(0usize..3, 30),
    ) {
        let n = rows.len();
        let mut a: Vec<usize> = labels[..n].to_vec();
        // make sure all three clusters are used
        a[0] = 0;
        a[1] = 1;
        a[2] = 2;
        let f = features(&rows);
        let report = anova_f(&f, &a, 3).unwrap();
        for (j, row) in report.rows.iter().enumerate() {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let grand = col.iter().sum::<f64>() / n as f64;
            let total: f64 = col.iter().map(|x| (x - grand).powi(2)).sum();
            let rel = 1e-9 * total.max(1.0);
            prop_assert!((row.ss_between + row.ss_within - total).abs() < rel);
            prop_assert!(row.ss_between >= 0.0 && row.ss_within >= 0.0);
            if let FValue::Finite(v) = row.f {
                prop_assert!(v >= 0.0);
            }
        }
    }

    #[test]
    fn kmeans_is_translation_invariant(
        rows in prop::collection::vec(prop::collection::vec(-20i32..20, 2), 6..25),
        shift in prop::collection::vec(-100i32..100, 2),
        k in 1usize..4,
    ) {
        let pts: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64 * 0.25).collect()).collect();
        let moved: Vec<Vec<f64>> = pts.iter().map(|r| r.iter().zip(&shift).map(|(v, s)| v + *s as f64).collect()).collect();
        let opts = KMeansOptions::default();
        let a = kmeans_restarts(&Matrix::from_rows(&pts), k, 20, 9, &opts).unwrap();
        let b = kmeans_restarts(&Matrix::from_rows(&moved), k, 20, 9, &opts).unwrap();
        prop_assert!((a.wcss - b.wcss).abs() <= 1e-8 * a.wcss.max(1.0));
        prop_assert_eq!(a.sizes().iter().sum::<usize>(), pts.len());
    }

    #[test]
    fn kmeans_ignores_thread_count(rows in matrix_strategy(8..40, 1..4), k in 1usize..5, seed in any::<u64>()) {
        let m = Matrix::from_rows(&rows);
        let opts = KMeansOptions::default();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| kmeans_restarts(&m, k, 16, seed, &opts)).unwrap();
        let b = three.install(|| kmeans_restarts(&m, k, 16, seed, &opts)).unwrap();
        prop_assert_eq!(a.assignments, b.assignments);
        prop_assert_eq!(a.wcss.to_bits(), b.wcss.to_bits());
        prop_assert_eq!(a.best_restart, b.best_restart);
    }

    #[test]
    fn quantiles_are_monotone_and_bounded(mut xs in prop::collection::vec(-1e3f64..1e3, 1..40), p in 0.0f64..1.0, q in 0.0f64..1.0) {
        xs.sort_by(f64::total_cmp);
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let a = quantile_sorted(&xs, lo);
        let b = quantile_sorted(&xs, hi);
        prop_assert!(a <= b);
        prop_assert!(xs[0] <= a && b <= xs[xs.len() - 1]);
    }

    #[test]
    fn one_se_rule_matches_brute_force(gap in prop::collection::vec(-1.0f64..2.0, 2..10), s in prop::collection::vec(0.0f64..0.3, 10)) {
        let se = &s[..gap.len()];
        let expected = (0..gap.len() - 1)
            .find(|&i| gap[i] >= gap[i + 1] - se[i + 1])
            .unwrap_or(gap.len() - 1)
            + 1;
        prop_assert_eq!(one_se_rule(1, &gap, se), expected);
    }

    #[test]
    fn ranks_are_a_permutation(vals in prop::collection::vec(0u8..20, 1..40)) {
        let usage: Vec<UsageRecord> = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| UsageRecord { area_code: format!("A{i:03}"), used_last_3_months: v as f64, never_or_lapsed: 0.0 })
            .collect();
        let ranks = rank_desc(&usage, |u| u.used_last_3_months);
        let mut seen: Vec<usize> = ranks.values().copied().collect();
        seen.sort();
        prop_assert_eq!(seen, (1..=usage.len()).collect::<Vec<_>>());
        for a in &usage {
            for b in &usage {
                let (ra, rb) = (ranks[&a.area_code], ranks[&b.area_code]);
                if a.used_last_3_months > b.used_last_3_months {
                    prop_assert!(ra < rb);
                }
                if a.used_last_3_months == b.used_last_3_months && a.area_code < b.area_code {
                    prop_assert!(ra < rb);
                }
            }
        }
    }

    /// Pushing a flagged cluster further in the direction of each rule atom,
    /// or loosening every threshold, never clears the flag.
    #[test]
    fn risk_rule_is_monotone(zs in prop::collection::vec(-3.0f64..3.0, 11), push in 0.0f64..2.0, loosen in 0.0f64..2.0) {
        let names = ["aged_16_24", "aged_25_34", "aged_35_44", "mixed", "indian", "pakistani_bangladeshi", "black", "other_minority", "nvq3_plus", "unemployed", "inactive"];
        let profile = |z: &[f64]| ClusterProfile {
            cluster: 0,
            name: "c".into(),
            size: 1,
            variables: names.iter().zip(z).map(|(n, &m)| VariableProfile { variable: n.to_string(), mean_z: m, direction: Direction::of(m, 0.1) }).collect(),
            at_risk: false,
            rationale: vec![],
        };
        let rule = RiskRule::default();
        let before = flag_risk(vec![profile(&zs)], &rule).unwrap()[0].at_risk;
        prop_assume!(before);

        let mut pushed = zs.clone();
        for a in rule.expr.atoms() {
            let j = names.iter().position(|n| *n == a.variable).unwrap();
            match a.cmp {
                Comparator::Lt | Comparator::Le => pushed[j] -= push,
                Comparator::Gt | Comparator::Ge => pushed[j] += push,
            }
        }
        prop_assert!(flag_risk(vec![profile(&pushed)], &rule).unwrap()[0].at_risk);

        let mut loose = rule.clone();
        for a in loose.expr.atoms_mut() {
            match a.cmp {
                Comparator::Lt | Comparator::Le => a.threshold += loosen,
                Comparator::Gt | Comparator::Ge => a.threshold -= loosen,
            }
        }
        prop_assert!(flag_risk(vec![profile(&zs)], &loose).unwrap()[0].at_risk);
    }

    /// Random count tables with zero to three suppressed cells in the group.
    #[test]
    fn reconstruction_preserves_group_totals(
        counts in prop::collection::vec(prop::collection::vec(600u32..20_000, 4), 1..12),
        masks in prop::collection::vec(prop::collection::vec(any::<bool>(), 4), 12),
    ) {
        let schema_text = "\
[table]
code_column = code
name_column = name
suppression_threshold = 500
region_prefixes = E07

[group.g]
total = total

[measure.a]
group = g
denominator = total

[measure.b]
group = g
denominator = total

[measure.c]
group = g
denominator = total

[measure.d]
group = g
denominator = total
";
        let schema = Schema::from_ini(&Ini::parse(schema_text).unwrap()).unwrap();
        let mut csv = String::from("code,name,total,a,b,c,d\n");
        let mut totals = Vec::new();
        for (i, row) in counts.iter().enumerate() {
            let total: u32 = row.iter().sum();
            totals.push(total as f64);
            // at most three of the four cells are hidden
            let hidden: Vec<bool> = masks[i].iter().enumerate().map(|(j, &m)| m && j < 3).collect();
            let cells: Vec<String> = row.iter().zip(&hidden).map(|(v, &h)| if h { "!".to_string() } else { v.to_string() }).collect();
            csv.push_str(&format!("E070{i:05},d{i},{total},{}\n", cells.join(",")));
        }
        let raw = read_district_table(csv.as_bytes(), &schema).unwrap();
        let filled = reconstruct_suppressed(&raw).unwrap();
        for (r, total) in totals.iter().enumerate() {
            let sum: f64 = filled.cells[r].iter().map(|c| c.value.unwrap()).sum();
            prop_assert!((sum - total).abs() < 1e-9, "row {}: {} vs {}", r, sum, total);
            let hidden: Vec<usize> = (0..3).filter(|&j| masks[r][j]).collect();
            if hidden.len() == 1 {
                let known: f64 = (0..4).filter(|j| *j != hidden[0]).map(|j| counts[r][j] as f64).sum();
                prop_assert_eq!(filled.cells[r][hidden[0]].value.unwrap(), total - known);
            }
        }
    }
}

#[test]
fn name_override_is_rejected_for_unknown_cluster() {
    let p =
        ClusterProfile { cluster: 0, name: "x".into(), size: 1, variables: vec![], at_risk: false, rationale: vec![] };
    let err = geoclass::profile::name_clusters(vec![p], &BTreeMap::from([(4, "nope".to_string())])).unwrap_err();
    assert!(err.to_string().contains('4'));
}
