//! Line-oriented text formats for embeddings and pairs.
//!
//! Embedding files start with `#diffanon-embeddings v1 dim=<D>` and hold one
//! tab-separated record per line:
//! `subject_id, sample_id, label, attack_type_or_dash, v_1 .. v_D`.
//! Floats use Rust's shortest round-trip representation, so a write/read
//! cycle reproduces every bit.
//!
//! Pair files start with `#diffanon-pairs v1` and hold
//! `ref_sample_id, probe_sample_id, pair_label, pair_attack_type_or_dash`
//! per line, resolved against an embedding file.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{AttackType, Dataset, EmbeddingRecord, Label, PairLabel, PairRecord, DEFAULT_DIM};
use crate::error::{Error, Result};

const EMBEDDINGS_MAGIC: &str = "#diffanon-embeddings v1";
const PAIRS_HEADER: &str = "#diffanon-pairs v1";

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_attack_type(field: &str) -> std::result::Result<Option<AttackType>, String> {
    if field == "-" {
        Ok(None)
    } else {
        field.parse().map(Some)
    }
}

fn attack_type_field(t: Option<AttackType>) -> &'static str {
    t.map_or("-", AttackType::as_str)
}

fn parse_dim_header(path: &Path, header: &str) -> Result<usize> {
    let rest = header
        .strip_prefix(EMBEDDINGS_MAGIC)
        .ok_or_else(|| parse_err(path, 1, format!("expected header `{EMBEDDINGS_MAGIC} dim=<D>`")))?;
    let dim = rest
        .trim()
        .strip_prefix("dim=")
        .and_then(|d| d.parse::<usize>().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| parse_err(path, 1, "header is missing a positive `dim=<D>`"))?;
    Ok(dim)
}

/// Reads an embedding file. A zero-length file is an empty dataset.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Ok(Dataset::new(DEFAULT_DIM, Vec::new()));
    };
    let dim = parse_dim_header(path, header)?;

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record_no = records.len() + 1;
        let mut fields = line.split('\t');
        let mut next = |name: &str| {
            fields
                .next()
                .ok_or_else(|| parse_err(path, line_no, format!("missing field `{name}`")))
        };
        let subject_id = next("subject_id")?.to_string();
        let sample_id = next("sample_id")?.to_string();
        let label: Label = next("label")?.parse().map_err(|e: String| parse_err(path, line_no, e))?;
        let attack_type =
            parse_attack_type(next("attack_type")?).map_err(|e| parse_err(path, line_no, e))?;

        let vector = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(path, line_no, format!("invalid float `{f}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if vector.len() != dim {
            return Err(parse_err(
                path,
                line_no,
                format!(
                    "record {record_no} (`{sample_id}`) has {} values, expected dimension {dim}",
                    vector.len()
                ),
            ));
        }
        if !seen.insert(sample_id.clone()) {
            return Err(parse_err(path, line_no, format!("duplicate sample_id `{sample_id}`")));
        }
        let record = EmbeddingRecord {
            subject_id,
            sample_id,
            label,
            attack_type,
            vector,
        };
        record
            .validate(dim)
            .map_err(|e| parse_err(path, line_no, format!("record {record_no}: {e}")))?;
        records.push(record);
    }
    Ok(Dataset::new(dim, records))
}

/// Writes an embedding file. All invariants are checked before anything
/// touches the filesystem.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    dataset.validate()?;
    let mut out = String::new();
    let _ = writeln!(out, "{EMBEDDINGS_MAGIC} dim={}", dataset.dim);
    for r in &dataset.records {
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}",
            r.subject_id,
            r.sample_id,
            r.label,
            attack_type_field(r.attack_type)
        );
        for v in &r.vector {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a pair file and resolves its sample ids against `dataset`.
pub fn read_pairs(path: impl AsRef<Path>, dataset: &Dataset) -> Result<Vec<PairRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let by_id: HashMap<&str, &EmbeddingRecord> = dataset
        .records
        .iter()
        .map(|r| (r.sample_id.as_str(), r))
        .collect();

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == PAIRS_HEADER => {}
        Some(_) => return Err(parse_err(path, 1, format!("expected header `{PAIRS_HEADER}`"))),
        None => return Ok(Vec::new()),
    }

    let mut pairs = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let lookup = |id: &str| {
            by_id
                .get(id)
                .map(|r| (*r).clone())
                .ok_or_else(|| parse_err(path, line_no, format!("unknown sample_id `{id}`")))
        };
        let reference = lookup(fields[0])?;
        let probe = lookup(fields[1])?;
        let pair_label: PairLabel = fields[2].parse().map_err(|e: String| parse_err(path, line_no, e))?;
        let pair_attack_type = parse_attack_type(fields[3]).map_err(|e| parse_err(path, line_no, e))?;
        let pair = PairRecord {
            reference,
            probe,
            pair_label,
            pair_attack_type,
        };
        pair.validate().map_err(|e| parse_err(path, line_no, e.to_string()))?;
        pairs.push(pair);
    }
    Ok(pairs)
}

pub fn write_pairs(pairs: &[PairRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    for p in pairs {
        p.validate()?;
    }
    let mut out = String::new();
    let _ = writeln!(out, "{PAIRS_HEADER}");
    for p in pairs {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            p.reference.sample_id,
            p.probe.sample_id,
            p.pair_label,
            attack_type_field(p.pair_attack_type)
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_records(n: usize, dim: usize, seed: u64) -> Vec<EmbeddingRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let v = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                if i % 5 == 0 {
                    EmbeddingRecord::attack(format!("s{}", i % 7), format!("x{i}"), AttackType::Morphing, v)
                } else {
                    EmbeddingRecord::bona_fide(format!("s{}", i % 7), format!("x{i}"), v)
                }
            })
            .collect()
    }

    #[test]
    fn three_records_512d() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        let ds = Dataset::new(512, random_records(3, 512, 1));
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.records.len(), 3);
        assert!(back.records.iter().all(|r| r.vector.len() == 512));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        let mut records = random_records(100, 16, 2);
        records[3].vector[0] = -0.0;
        records[4].vector[1] = f64::MIN_POSITIVE;
        records[5].vector[2] = 1e-308 / 3.0;
        let ds = Dataset::new(16, records);
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        for (a, b) in ds.records.iter().zip(&back.records) {
            let bits_a: Vec<u64> = a.vector.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.vector.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        assert_eq!(ds, back);
    }

    #[test]
    fn short_record_names_record_and_dimension() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        let ds = Dataset::new(512, random_records(3, 512, 3));
        write_dataset(&ds, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let cut = lines[2].rfind('\t').unwrap();
        lines[2].truncate(cut);
        fs::write(&path, lines.join("\n")).unwrap();
        let err = read_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("record 2"), "{err}");
        assert!(err.contains("511 values"), "{err}");
        assert!(err.contains("expected dimension 512"), "{err}");
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        fs::write(&path, "").unwrap();
        assert!(read_dataset(&path).unwrap().records.is_empty());
    }

    #[test]
    fn empty_list_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        write_dataset(&Dataset::new(512, vec![]), &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "#diffanon-embeddings v1 dim=512\n");
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.dim, 512);
        assert!(back.records.is_empty());
    }

    #[test]
    fn duplicate_sample_id_fails_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        let mut records = random_records(4, 4, 4);
        records[2].sample_id = records[0].sample_id.clone();
        assert!(write_dataset(&Dataset::new(4, records), &path).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        fs::write(&path, "#diffanon-embeddings v1 dim=2\ns\ta\tbona_fide\t-\t1\t2\ns\tb\tbona_fide\t-\t1\tx\n").unwrap();
        match read_dataset(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&path, "#diffanon-embeddings v1 dim=2\ns\ta\tbona_fide\t-\t1\tNaN\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Parse { line: 2, .. })));
        fs::write(&path, "#diffanon-embeddings v1 dim=1\ns\ta\tbona_fide\t-\t1\ns\ta\tbona_fide\t-\t2\n").unwrap();
        let err = read_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
    }

    #[test]
    fn pair_file_unknown_id_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(
            1,
            vec![
                EmbeddingRecord::bona_fide("s", "a", vec![1.0]),
                EmbeddingRecord::bona_fide("s", "b", vec![0.5]),
            ],
        );
        let path = dir.path().join("p.txt");
        fs::write(&path, "#diffanon-pairs v1\na\tb\tbona_fide_pair\t-\na\tzz\tbona_fide_pair\t-\n").unwrap();
        match read_pairs(&path, &ds) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("zz"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pairs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = EmbeddingRecord::bona_fide("s", "a", vec![1.0]);
        let b = EmbeddingRecord::bona_fide("s", "b", vec![0.5]);
        let c = EmbeddingRecord::attack("s", "c", AttackType::Retouching, vec![0.25]);
        let ds = Dataset::new(1, vec![a.clone(), b.clone(), c.clone()]);
        let pairs = vec![PairRecord::bona_fide(a.clone(), b), PairRecord::attack(a, c, AttackType::Retouching)];
        let path = dir.path().join("p.txt");
        write_pairs(&pairs, &path).unwrap();
        assert_eq!(read_pairs(&path, &ds).unwrap(), pairs);
    }
}
