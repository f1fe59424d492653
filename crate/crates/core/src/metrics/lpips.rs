//! Adapter contract for an external LPIPS implementation.
//!
//! Two adapter kinds are supported:
//!
//! - an executable invoked as `<adapter> --pred <file> --gt <file>` that prints
//!   a single decimal number on stdout and exits 0;
//! - a precomputed CSV with header `scene_id,lpips`.
//!
//! Values are looked up by prediction key (the file stem, e.g. `0042_f2.0`)
//! and, for CSV adapters, fall back to the bare scene id.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpipsAdapter {
    /// Program followed by any fixed leading arguments.
    Command(Vec<String>),
    Csv(PathBuf),
}

impl LpipsAdapter {
    /// `*.csv` paths are read as tables; anything else is split on whitespace
    /// into a program and leading arguments.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec.is_empty() {
            return Err(Error::AdapterFailure("empty adapter specification".into()));
        }
        if spec.to_ascii_lowercase().ends_with(".csv") {
            Ok(LpipsAdapter::Csv(PathBuf::from(spec)))
        } else {
            Ok(LpipsAdapter::Command(spec.split_whitespace().map(String::from).collect()))
        }
    }
}

/// One prediction/ground-truth pair to score.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpipsPair {
    pub key: String,
    pub scene_id: String,
    pub pred: PathBuf,
    pub gt: PathBuf,
}

fn parse_value(text: &str, context: &str) -> Result<f64> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| Error::AdapterFailure(format!("{context}: not a number: {:?}", text.trim())))?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::AdapterFailure(format!(
            "{context}: LPIPS must be finite and non-negative, got {v}"
        )));
    }
    Ok(v)
}

fn read_table(path: &Path) -> Result<HashMap<String, f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::AdapterFailure(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::AdapterFailure(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() != 2 || &headers[0] != "scene_id" || &headers[1] != "lpips" {
        return Err(Error::AdapterFailure(format!(
            "{}: expected header `scene_id,lpips`",
            path.display()
        )));
    }
    let mut out = HashMap::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let ctx = format!("{} line {line}", path.display());
        let row = row.map_err(|e| Error::AdapterFailure(format!("{ctx}: {e}")))?;
        if row.len() != 2 || row[0].is_empty() {
            return Err(Error::AdapterFailure(format!("{ctx}: malformed row")));
        }
        out.insert(row[0].to_string(), parse_value(&row[1], &ctx)?);
    }
    Ok(out)
}

fn run_command(argv: &[String], pair: &LpipsPair) -> Result<f64> {
    let (program, leading) = argv
        .split_first()
        .ok_or_else(|| Error::AdapterFailure("empty command".into()))?;
    let output = Command::new(program)
        .args(leading)
        .arg("--pred")
        .arg(&pair.pred)
        .arg("--gt")
        .arg(&pair.gt)
        .output()
        .map_err(|e| Error::AdapterFailure(format!("{program}: {e}")))?;
    if !output.status.success() {
        return Err(Error::AdapterFailure(format!(
            "{program} exited with {} on {}: {}",
            output.status,
            pair.key,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    parse_value(&stdout, &format!("{program} on {}", pair.key))
}

/// Scores every pair, returning values in input order.
pub fn lpips_for_pairs(pairs: &[LpipsPair], adapter: &LpipsAdapter) -> Result<Vec<f64>> {
    match adapter {
        LpipsAdapter::Csv(path) => {
            let table = read_table(path)?;
            pairs
                .iter()
                .map(|p| {
                    table
                        .get(&p.key)
                        .or_else(|| table.get(&p.scene_id))
                        .copied()
                        .ok_or_else(|| Error::MissingScene(p.key.clone()))
                })
                .collect()
        }
        LpipsAdapter::Command(argv) => pairs.iter().map(|p| run_command(argv, p)).collect(),
    }
}

/// Pairs every `.png` in `pred_dir` with the same-named file in `gt_dir` and
/// scores them, keyed by file stem.
pub fn lpips_adapter(
    pred_dir: &Path,
    gt_dir: &Path,
    adapter: &LpipsAdapter,
) -> Result<BTreeMap<String, f64>> {
    let entries = fs::read_dir(pred_dir)
        .map_err(|e| Error::AdapterFailure(format!("{}: {e}", pred_dir.display())))?;
    let mut pairs = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Error::AdapterFailure(format!("{}: {e}", pred_dir.display())))?
            .path();
        if path.extension().and_then(|e| e.to_str()) != Some("png") {
            continue;
        }
        let name = path.file_name().expect("file entry").to_owned();
        let key = path.file_stem().expect("file entry").to_string_lossy().into_owned();
        let gt = gt_dir.join(&name);
        if !gt.is_file() {
            return Err(Error::MissingScene(key));
        }
        let scene_id = key.rsplit_once("_f").map_or(key.as_str(), |(s, _)| s).to_string();
        pairs.push(LpipsPair {
            key,
            scene_id,
            pred: path,
            gt,
        });
    }
    pairs.sort_by(|a, b| a.key.cmp(&b.key));
    let values = lpips_for_pairs(&pairs, adapter)?;
    Ok(pairs.into_iter().map(|p| p.key).zip(values).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(key: &str) -> LpipsPair {
        LpipsPair {
            key: key.into(),
            scene_id: key.split("_f").next().unwrap().into(),
            pred: PathBuf::from("p.png"),
            gt: PathBuf::from("g.png"),
        }
    }

    #[test]
    fn parse_kinds() {
        assert_eq!(
            LpipsAdapter::parse("scores.CSV").unwrap(),
            LpipsAdapter::Csv("scores.CSV".into())
        );
        assert_eq!(
            LpipsAdapter::parse("python3 lpips.py").unwrap(),
            LpipsAdapter::Command(vec!["python3".into(), "lpips.py".into()])
        );
        assert!(LpipsAdapter::parse("  ").is_err());
    }

    #[test]
    fn csv_passthrough() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        fs::write(&p, "scene_id,lpips\na_f2.0,0.125\nb_f2.0,0.5\nc,0.0909\n").unwrap();
        let v = lpips_for_pairs(&[pair("a_f2.0"), pair("b_f2.0"), pair("c_f4.0")], &LpipsAdapter::Csv(p.clone())).unwrap();
        assert_eq!(v, vec![0.125, 0.5, 0.0909]);
        assert!(matches!(
            lpips_for_pairs(&[pair("d_f2.0")], &LpipsAdapter::Csv(p)),
            Err(Error::MissingScene(k)) if k == "d_f2.0"
        ));
    }

    #[test]
    fn malformed_csv_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "scene_id,lpips\na,0.1\nb,zero\n").unwrap();
        match lpips_for_pairs(&[pair("a")], &LpipsAdapter::Csv(p.clone())) {
            Err(Error::AdapterFailure(msg)) => assert!(msg.contains("line 3"), "{msg}"),
            other => panic!("{other:?}"),
        }
        fs::write(&p, "scene,score\na,0.1\n").unwrap();
        assert!(matches!(
            lpips_for_pairs(&[pair("a")], &LpipsAdapter::Csv(p.clone())),
            Err(Error::AdapterFailure(_))
        ));
        fs::write(&p, "scene_id,lpips\na,-0.5\n").unwrap();
        assert!(matches!(
            lpips_for_pairs(&[pair("a")], &LpipsAdapter::Csv(p)),
            Err(Error::AdapterFailure(_))
        ));
    }

    #[cfg(unix)]
    #[test]
    fn command_adapter() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let (pred, gt) = (dir.path().join("pred"), dir.path().join("gt"));
        fs::create_dir_all(&pred).unwrap();
        fs::create_dir_all(&gt).unwrap();
        for d in [&pred, &gt] {
            fs::write(d.join("s1_f2.0.png"), b"x").unwrap();
            fs::write(d.join("s2_f4.0.png"), b"x").unwrap();
        }
        let script = dir.path().join("adapter.sh");
        // prints 0 when --pred and --gt name files with the same content
        fs::write(
            &script,
            "#!/bin/sh\n[ \"$1\" = --pred ] && [ \"$3\" = --gt ] || exit 3\nif cmp -s \"$2\" \"$4\"; then echo 0; else echo 0.25; fi\n",
        )
        .unwrap();
        fs::set_permissions(&script, fs::Permissions::from_mode(0o755)).unwrap();
        let adapter = LpipsAdapter::Command(vec![script.to_string_lossy().into_owned()]);
        let v = lpips_adapter(&pred, &gt, &adapter).unwrap();
        assert_eq!(v.len(), 2);
        assert!(v.values().all(|&x| x >= 0.0));
        assert_eq!(v["s1_f2.0"], 0.0);

        let failing = dir.path().join("fail.sh");
        fs::write(&failing, "#!/bin/sh\necho boom >&2\nexit 1\n").unwrap();
        fs::set_permissions(&failing, fs::Permissions::from_mode(0o755)).unwrap();
        let adapter = LpipsAdapter::Command(vec![failing.to_string_lossy().into_owned()]);
        assert!(matches!(lpips_adapter(&pred, &gt, &adapter), Err(Error::AdapterFailure(_))));

        fs::remove_file(gt.join("s2_f4.0.png")).unwrap();
        assert!(matches!(
            lpips_adapter(&pred, &gt, &LpipsAdapter::Command(vec!["true".into()])),
            Err(Error::MissingScene(_))
        ));
    }
}
