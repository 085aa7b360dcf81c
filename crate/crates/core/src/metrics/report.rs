//! CSV and SVG export of an [`EvaluationReport`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{DetCurve, DetPoint, EvaluationReport};
use crate::embeddings::AttackType;
use crate::error::{Error, Result};

pub const HISTOGRAM_BINS: usize = 40;
const PLOT_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportFiles {
    pub det: Vec<PathBuf>,
    pub histograms: Vec<PathBuf>,
    pub metrics: PathBuf,
    pub summary: PathBuf,
    pub plot: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub bona_fide: usize,
    pub attack: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub model: String,
    pub fusion: String,
    /// `None` marks a failed cell.
    pub d_eer: Vec<(AttackType, Option<f64>)>,
    pub average: Option<f64>,
}

fn write(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn det_csv(det: &DetCurve) -> String {
    let mut s = String::from("threshold,apcer,bpcer\n");
    for p in &det.points {
        let _ = writeln!(s, "{},{},{}", p.threshold, p.apcer, p.bpcer);
    }
    s
}

/// Equal-width bins spanning both score lists; the last bin is closed.
pub fn histogram(bona_fide: &[f64], attack: &[f64], bins: usize) -> Vec<HistogramBin> {
    let all = bona_fide.iter().chain(attack);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return Vec::new();
    }
    let bins = if hi > lo { bins.max(1) } else { 1 };
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lo: lo + b as f64 * width,
            hi: if b + 1 == bins { hi } else { lo + (b + 1) as f64 * width },
            bona_fide: 0,
            attack: 0,
        })
        .collect();
    let index = |s: f64| {
        if width > 0.0 {
            (((s - lo) / width) as usize).min(bins - 1)
        } else {
            0
        }
    };
    bona_fide.iter().for_each(|&s| out[index(s)].bona_fide += 1);
    attack.iter().for_each(|&s| out[index(s)].attack += 1);
    out
}

fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut s = String::from("bin_lo,bin_hi,bona_fide,attack\n");
    for b in bins {
        let _ = writeln!(s, "{},{},{},{}", b.lo, b.hi, b.bona_fide, b.attack);
    }
    s
}

fn metrics_csv(report: &EvaluationReport) -> String {
    let mut s = String::from("attack_type,n_attack,n_bona_fide,d_eer,d_eer_threshold,bpcer100,bpcer20\n");
    for m in &report.per_type {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            m.attack_type, m.n_attack, report.n_bona_fide, m.d_eer, m.d_eer_threshold, m.bpcer100, m.bpcer20
        );
    }
    let _ = writeln!(s, "average,,,{},,,", report.average_d_eer);
    s
}

pub(crate) fn summary_header(types: &[AttackType]) -> String {
    let mut s = String::from("model,fusion");
    for t in types {
        let _ = write!(s, ",deer_{t}");
    }
    s.push_str(",average\n");
    s
}

pub(crate) fn summary_line(row: &SummaryRow) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "failed".to_string(), |x| x.to_string());
    let mut s = format!("{},{}", row.model, row.fusion);
    for (_, v) in &row.d_eer {
        let _ = write!(s, ",{}", cell(*v));
    }
    let _ = writeln!(s, ",{}", cell(row.average));
    s
}

impl SummaryRow {
    pub fn from_report(report: &EvaluationReport) -> Self {
        SummaryRow {
            model: report.model.clone(),
            fusion: report.fusion.clone(),
            d_eer: report.per_type.iter().map(|m| (m.attack_type, Some(m.d_eer))).collect(),
            average: Some(report.average_d_eer),
        }
    }
}

pub(crate) fn write_summary(path: &Path, types: &[AttackType], rows: &[SummaryRow]) -> Result<()> {
    let mut s = summary_header(types);
    for r in rows {
        s.push_str(&summary_line(r));
    }
    write(path, &s)
}

const COLOURS: [&str; 7] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"];

fn det_svg(report: &EvaluationReport) -> String {
    const SIZE: f64 = 480.0;
    const MARGIN: f64 = 60.0;
    let decades = -PLOT_FLOOR.log10();
    let scale = |r: f64| (r.max(PLOT_FLOOR).log10() + decades) / decades * SIZE;
    let px = |r: f64| MARGIN + scale(r);
    let py = |r: f64| MARGIN + SIZE - scale(r);

    let total = SIZE + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#);
    for (k, label) in ["0.1%", "1%", "10%", "100%"].iter().enumerate() {
        let r = PLOT_FLOOR * 10f64.powi(k as i32);
        let (x, y) = (px(r), py(r));
        let _ = writeln!(
            s,
            r##"<line x1="{x}" y1="{MARGIN}" x2="{x}" y2="{}" stroke="#ccc"/><line x1="{MARGIN}" y1="{y}" x2="{}" y2="{y}" stroke="#ccc"/>"##,
            MARGIN + SIZE,
            MARGIN + SIZE
        );
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="middle">{label}</text><text x="{}" y="{y}" text-anchor="end" dominant-baseline="middle">{label}</text>"#,
            MARGIN + SIZE + 16.0,
            MARGIN - 6.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">APCER</text>"#,
        MARGIN + SIZE / 2.0,
        total - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">BPCER</text>"#,
        MARGIN + SIZE / 2.0
    );
    for (i, m) in report.per_type.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let pts: Vec<String> = m
            .det
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.apcer), py(p.bpcer)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{colour}">{} (D-EER {:.2}%)</text>"#,
            MARGIN + 10.0,
            MARGIN + 18.0 + 16.0 * i as f64,
            m.attack_type,
            100.0 * m.d_eer
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `det_<type>.csv`, `hist_<type>.csv`, `metrics.csv`, `summary.csv`
/// and `det.svg` into `out_dir`, creating it if needed.
pub fn export_report(report: &EvaluationReport, out_dir: impl AsRef<Path>) -> Result<ReportFiles> {
    if report.per_type.is_empty() {
        return Err(Error::Evaluation("report has no attack types".into()));
    }
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut files = ReportFiles::default();
    for m in &report.per_type {
        let det = dir.join(format!("det_{}.csv", m.attack_type));
        write(&det, &det_csv(&m.det))?;
        files.det.push(det);

        let attack = report.scores.attacks.get(&m.attack_type).map_or(&[][..], Vec::as_slice);
        let hist = dir.join(format!("hist_{}.csv", m.attack_type));
        write(&hist, &histogram_csv(&histogram(&report.scores.bona_fide, attack, HISTOGRAM_BINS)))?;
        files.histograms.push(hist);
    }
    files.metrics = dir.join("metrics.csv");
    write(&files.metrics, &metrics_csv(report))?;

    files.summary = dir.join("summary.csv");
    let types: Vec<AttackType> = report.per_type.iter().map(|m| m.attack_type).collect();
    write_summary(&files.summary, &types, &[SummaryRow::from_report(report)])?;

    files.plot = dir.join("det.svg");
    write(&files.plot, &det_svg(report))?;
    Ok(files)
}

fn read_csv(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header => {}
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected header `{header}`"),
            })
        }
    }
    Ok(lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| (i + 1, l.split(',').map(str::to_string).collect()))
        .collect())
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse `{v}`"),
    })
}

fn arity(path: &Path, line: usize, fields: &[String], n: usize) -> Result<()> {
    if fields.len() != n {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("expected {n} fields, found {}", fields.len()),
        });
    }
    Ok(())
}

pub fn read_det_csv(path: impl AsRef<Path>) -> Result<DetCurve> {
    let path = path.as_ref();
    let mut points = Vec::new();
    for (line, f) in read_csv(path, "threshold,apcer,bpcer")? {
        arity(path, line, &f, 3)?;
        points.push(DetPoint {
            threshold: field(path, line, &f[0])?,
            apcer: field(path, line, &f[1])?,
            bpcer: field(path, line, &f[2])?,
        });
    }
    Ok(DetCurve { points })
}

pub fn read_histogram_csv(path: impl AsRef<Path>) -> Result<Vec<HistogramBin>> {
    let path = path.as_ref();
    read_csv(path, "bin_lo,bin_hi,bona_fide,attack")?
        .into_iter()
        .map(|(line, f)| {
            arity(path, line, &f, 4)?;
            Ok(HistogramBin {
                lo: field(path, line, &f[0])?,
                hi: field(path, line, &f[1])?,
                bona_fide: field(path, line, &f[2])?,
                attack: field(path, line, &f[3])?,
            })
        })
        .collect()
}

/// `(type, d_eer, threshold, bpcer100, bpcer20)`
pub type MetricsRow = (AttackType, f64, f64, f64, f64);

/// Per-type rows of `metrics.csv` plus the average row.
pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<(Vec<MetricsRow>, f64)> {
    let path = path.as_ref();
    let mut rows = Vec::new();
    let mut average = None;
    for (line, f) in read_csv(path, "attack_type,n_attack,n_bona_fide,d_eer,d_eer_threshold,bpcer100,bpcer20")? {
        arity(path, line, &f, 7)?;
        if f[0] == "average" {
            average = Some(field(path, line, &f[3])?);
            continue;
        }
        rows.push((
            field(path, line, &f[0])?,
            field(path, line, &f[3])?,
            field(path, line, &f[4])?,
            field(path, line, &f[5])?,
            field(path, line, &f[6])?,
        ));
    }
    let average = average.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: "missing average row".into(),
    })?;
    Ok((rows, average))
}

pub fn read_summary_csv(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let bad = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    if header.len() < 3 || header[0] != "model" || header[1] != "fusion" || header[header.len() - 1] != "average" {
        return Err(bad(1, "unexpected summary header".into()));
    }
    let types: Vec<AttackType> = header[2..header.len() - 1]
        .iter()
        .map(|h| {
            h.strip_prefix("deer_")
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(1, format!("bad column `{h}`")))
        })
        .collect::<Result<_>>()?;
    let cell = |line: usize, v: &str| -> Result<Option<f64>> {
        if v == "failed" {
            Ok(None)
        } else {
            field(path, line, v).map(Some)
        }
    };
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let line = i + 2;
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != header.len() {
            return Err(bad(line, format!("expected {} fields, found {}", header.len(), f.len())));
        }
        let d_eer = types
            .iter()
            .zip(&f[2..f.len() - 1])
            .map(|(&t, v)| Ok((t, cell(line, v)?)))
            .collect::<Result<_>>()?;
        rows.push(SummaryRow {
            model: f[0].to_string(),
            fusion: f[1].to_string(),
            d_eer,
            average: cell(line, f[f.len() - 1])?,
        });
    }
    Ok(rows)
}
