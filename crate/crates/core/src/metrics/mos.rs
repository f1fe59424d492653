use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// One rating by one panel member.
#[derive(Clone, Debug, PartialEq)]
pub struct MosRecord {
    pub rater_id: String,
    pub scene_id: String,
    pub score: f64,
}

/// Accepts 1 and 2 (degraded output) and 3 through 10 in steps of 0.5.
pub fn validate_mos(r: &MosRecord) -> Result<()> {
    let s = r.score;
    let on_grid = s == 1.0 || s == 2.0 || ((3.0..=10.0).contains(&s) && (s * 2.0).fract() == 0.0);
    if on_grid {
        Ok(())
    } else {
        Err(Error::InvalidScore {
            rater_id: r.rater_id.clone(),
            scene_id: r.scene_id.clone(),
            score: s,
        })
    }
}

/// Mean opinion score per method, rounded to two decimals.
///
/// `grouping` maps each rated scene id to the method that produced it.
/// Every method named in `grouping` must receive at least one record.
pub fn mos_aggregate(
    records: &[MosRecord],
    grouping: &HashMap<String, String>,
) -> Result<BTreeMap<String, f64>> {
    let mut sums: BTreeMap<&str, (f64, usize)> = grouping
        .values()
        .map(|m| (m.as_str(), (0.0, 0)))
        .collect();
    for r in records {
        validate_mos(r)?;
        let method = grouping
            .get(&r.scene_id)
            .ok_or_else(|| Error::UnknownScene(r.scene_id.clone()))?;
        let e = sums.get_mut(method.as_str()).expect("method seeded from grouping");
        // on-grid scores are multiples of 0.5, so these sums are exact in any order
        e.0 += r.score;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(m, (sum, n))| {
            if n == 0 {
                Err(Error::EmptyPanel(m.to_string()))
            } else {
                Ok((m.to_string(), (sum / n as f64 * 100.0).round() / 100.0))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(rater: &str, scene: &str, score: f64) -> MosRecord {
        MosRecord {
            rater_id: rater.into(),
            scene_id: scene.into(),
            score,
        }
    }

    #[test]
    fn grid() {
        for ok in [1.0, 2.0, 3.0, 3.5, 7.5, 10.0] {
            assert!(validate_mos(&rec("r", "s", ok)).is_ok(), "{ok}");
        }
        for bad in [0.0, 1.5, 2.5, 4.25, 10.5, f64::NAN, -3.0] {
            assert!(matches!(validate_mos(&rec("r", "s", bad)), Err(Error::InvalidScore { .. })), "{bad}");
        }
    }

    #[test]
    fn aggregate_means() {
        let grouping: HashMap<String, String> = [("a1", "A"), ("a2", "A"), ("b1", "B")]
            .into_iter()
            .map(|(s, m)| (s.to_string(), m.to_string()))
            .collect();
        let records = vec![
            rec("r1", "a1", 7.0),
            rec("r2", "a2", 8.0),
            rec("r1", "b1", 6.0),
            rec("r2", "b1", 6.0),
        ];
        let m = mos_aggregate(&records, &grouping).unwrap();
        assert_eq!(m["A"], 7.5);
        assert_eq!(m["B"], 6.0);

        let records = vec![rec("r1", "a1", 7.0)];
        assert!(matches!(mos_aggregate(&records, &grouping), Err(Error::EmptyPanel(m)) if m == "B"));
        let records = vec![rec("r1", "zz", 7.0)];
        assert!(matches!(mos_aggregate(&records, &grouping), Err(Error::UnknownScene(_))));
        let records = vec![rec("r1", "a1", 2.5), rec("r1", "b1", 3.0)];
        assert!(matches!(mos_aggregate(&records, &grouping), Err(Error::InvalidScore { .. })));
    }

    #[test]
    fn rounds_to_two_decimals() {
        let grouping: HashMap<String, String> = [("s".to_string(), "M".to_string())].into();
        let records = vec![rec("a", "s", 7.0), rec("b", "s", 7.5), rec("c", "s", 8.0), rec("d", "s", 7.0), rec("e", "s", 7.0), rec("f", "s", 7.0)];
        // 43.5 / 6 = 7.25
        assert_eq!(mos_aggregate(&records, &grouping).unwrap()["M"], 7.25);
        let records = vec![rec("a", "s", 7.0), rec("b", "s", 7.5), rec("c", "s", 7.5)];
        // 22 / 3 = 7.333..
        assert_eq!(mos_aggregate(&records, &grouping).unwrap()["M"], 7.33);
    }
}
