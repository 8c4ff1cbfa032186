//! Chart-data export: the per-pair explanation flattened into rows that any
//! plotting tool can turn into the likelihood bar chart. One row per bar,
//! four bar groups: global, per-aspect solo, all-sufficient, and
//! without-necessary; class 0 and 1 keep their two colors apart.

use std::fmt::Write as _;

use semrel_core::explain::{ExplanationJson, PredictionJson};

#[derive(Debug, thiserror::Error)]
pub enum ChartError {
    #[error("pair `{0}`,`{1}` not present in the explanations file")]
    PairNotFound(String, String),
}

/// CSV rows `group,label,likelihood,predicted_class` for one pair. The pair
/// matches in either entity order.
pub fn export_chart_data(
    explanations: &[ExplanationJson],
    entity1: &str,
    entity2: &str,
) -> Result<String, ChartError> {
    let record = explanations
        .iter()
        .find(|e| {
            (e.pair[0] == entity1 && e.pair[1] == entity2)
                || (e.pair[0] == entity2 && e.pair[1] == entity1)
        })
        .ok_or_else(|| ChartError::PairNotFound(entity1.to_string(), entity2.to_string()))?;

    let mut out = String::from("group,label,likelihood,predicted_class\n");
    let mut push = |group: &str, label: &str, p: &PredictionJson| {
        writeln!(out, "{group},{},{},{}", escape(label), p.likelihood, p.class).unwrap();
    };
    push("global", "global", &record.global);
    for aspect in &record.aspects {
        push("solo", &aspect.label, &aspect.solo);
    }
    if let Some(p) = &record.all_sufficient {
        push("all_sufficient", "all sufficient", p);
    }
    if let Some(p) = &record.without_necessary {
        push("without_necessary", "without necessary", p);
    }
    Ok(out)
}

fn escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use semrel_core::explain::{AspectJson, PredictionJson};

    fn sample() -> Vec<ExplanationJson> {
        vec![ExplanationJson {
            pair: ["p1".into(), "p2".into()],
            global: PredictionJson { class: 1, likelihood: 0.9 },
            aspects: vec![
                AspectJson {
                    class_id: "d1".into(),
                    label: "d1".into(),
                    solo: PredictionJson { class: 1, likelihood: 0.8 },
                    ablated: PredictionJson { class: 0, likelihood: 0.7 },
                    necessary: true,
                    sufficient: true,
                },
                AspectJson {
                    class_id: "d2".into(),
                    label: "d2".into(),
                    solo: PredictionJson { class: 0, likelihood: 0.6 },
                    ablated: PredictionJson { class: 1, likelihood: 0.9 },
                    necessary: false,
                    sufficient: false,
                },
            ],
            all_sufficient: Some(PredictionJson { class: 1, likelihood: 0.8 }),
            without_necessary: Some(PredictionJson { class: 0, likelihood: 0.7 }),
            empty_aspects: false,
        }]
    }

    #[test]
    fn four_bar_groups() {
        let csv = export_chart_data(&sample(), "p1", "p2").unwrap();
        let body: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(body.len(), 5); // global + 2 solos + all_sufficient + without_necessary
        let groups: std::collections::BTreeSet<&str> =
            body.iter().map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(groups.len(), 4);
        for line in &body {
            let fields: Vec<&str> = line.split(',').collect();
            let likelihood: f64 = fields[2].parse().unwrap();
            assert!((0.5..=1.0).contains(&likelihood));
            assert!(fields[3] == "0" || fields[3] == "1");
        }
    }

    #[test]
    fn pair_matches_either_order() {
        assert!(export_chart_data(&sample(), "p2", "p1").is_ok());
    }

    #[test]
    fn unknown_pair_is_not_found() {
        assert!(matches!(
            export_chart_data(&sample(), "p1", "zzz"),
            Err(ChartError::PairNotFound(_, _))
        ));
    }

    #[test]
    fn empty_aspects_yield_single_global_row() {
        let record = ExplanationJson {
            pair: ["a".into(), "b".into()],
            global: PredictionJson { class: 0, likelihood: 0.55 },
            aspects: vec![],
            all_sufficient: None,
            without_necessary: None,
            empty_aspects: true,
        };
        let csv = export_chart_data(&[record], "a", "b").unwrap();
        assert_eq!(csv.lines().count(), 2); // header + global
    }
}
