//! CSV formats read and written by the pipeline.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! table reads back bit-identically.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rhotic_core::dataset::Label;
use rhotic_core::features::{tv_series_from_rows, FeatureSet, FrameSeries};
use rhotic_core::formant::{FormantTrack, NormRow, NormStat, NormTable, ParticipantProfile, Sex, TransformTrack};
use rhotic_core::segmentation::{BinnedSegment, RhoticInterval};
use rhotic_core::FRAME_RATE_HZ;

use crate::error::{write_err, MdxError, Result};

/// Header and data records of a CSV file. Line numbers in errors are
/// 1-based file lines.
struct Table {
    header: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| MdxError::at(path, e))?;
    let header = reader
        .headers()
        .map_err(|e| MdxError::at(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| MdxError::at(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec.iter().map(String::from).collect()));
    }
    Ok(Table { header, rows })
}

fn expect_header(path: &Path, table: &Table, expected: &[&str]) -> Result<()> {
    if table.header != expected {
        return Err(MdxError::at(
            path,
            format!("schema mismatch: header is '{}', expected '{}'", table.header.join(","), expected.join(",")),
        ));
    }
    Ok(())
}

fn parse_f64(path: &Path, line: usize, field: &str, text: &str) -> Result<f64> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| MdxError::at(path, format!("line {line}: {field} '{text}' is not a finite number")))
}

fn optional_f64(path: &Path, line: usize, field: &str, text: &str) -> Result<Option<f64>> {
    if text.is_empty() {
        Ok(None)
    } else {
        parse_f64(path, line, field, text).map(Some)
    }
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| write_err(path, e))?;
    }
    let mut text = String::new();
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    let mut f = File::create(path).map_err(|e| write_err(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| write_err(path, e))
}

fn join(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(",")
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const MANIFEST_HEADER: [&str; 6] = ["utterance_id", "participant_id", "avg_rating", "audio_path", "textgrid_path", "tv_path"];

/// One corpus utterance. Paths are as written in the file; empty
/// annotation or TV paths mean the file is not available.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub utterance_id: String,
    pub participant_id: String,
    pub avg_rating: f64,
    pub audio_path: String,
    pub textgrid_path: String,
    pub tv_path: String,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let t = read_table(path)?;
    expect_header(path, &t, &MANIFEST_HEADER)?;
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, r) in &t.rows {
        if r[0].is_empty() || r[1].is_empty() {
            return Err(MdxError::at(path, format!("line {line}: empty utterance or participant id")));
        }
        if !seen.insert(r[0].clone()) {
            return Err(MdxError::at(path, format!("line {line}: duplicate utterance id '{}'", r[0])));
        }
        out.push(ManifestRow {
            utterance_id: r[0].clone(),
            participant_id: r[1].clone(),
            avg_rating: parse_f64(path, *line, "avg_rating", &r[2])?,
            audio_path: r[3].clone(),
            textgrid_path: r[4].clone(),
            tv_path: r[5].clone(),
        });
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let lines = std::iter::once(MANIFEST_HEADER.join(",")).chain(rows.iter().map(|r| {
        join([
            quote(&r.utterance_id),
            quote(&r.participant_id),
            r.avg_rating.to_string(),
            quote(&r.audio_path),
            quote(&r.textgrid_path),
            quote(&r.tv_path),
        ])
    }));
    write_lines(path, lines)
}

pub const PARTICIPANTS_HEADER: [&str; 4] = ["participant_id", "age", "sex", "formant_ceiling_hz"];

pub fn read_participants(path: &Path) -> Result<Vec<ParticipantProfile>> {
    let t = read_table(path)?;
    expect_header(path, &t, &PARTICIPANTS_HEADER)?;
    t.rows
        .iter()
        .map(|(line, r)| {
            let sex = Sex::parse(&r[2]).ok_or_else(|| MdxError::at(path, format!("line {line}: unknown sex '{}'", r[2])))?;
            ParticipantProfile::new(
                r[0].clone(),
                parse_f64(path, *line, "age", &r[1])?,
                sex,
                parse_f64(path, *line, "formant_ceiling_hz", &r[3])?,
            )
            .map_err(|e| MdxError::at(path, format!("line {line}: {e}")))
        })
        .collect()
}

pub fn write_participants(path: &Path, rows: &[ParticipantProfile]) -> Result<()> {
    let lines = std::iter::once(PARTICIPANTS_HEADER.join(",")).chain(rows.iter().map(|p| {
        join([quote(&p.id), p.age.to_string(), p.sex.as_str().to_string(), p.formant_ceiling_hz.to_string()])
    }));
    write_lines(path, lines)
}

pub const NORMS_HEADER: [&str; 8] = ["age", "sex", "f1_mean", "f1_sd", "f2_mean", "f2_sd", "f3_mean", "f3_sd"];

pub fn read_norms(path: &Path) -> Result<NormTable> {
    let t = read_table(path)?;
    expect_header(path, &t, &NORMS_HEADER)?;
    let mut rows = Vec::with_capacity(t.rows.len());
    for (line, r) in &t.rows {
        let age = r[0]
            .parse::<u32>()
            .map_err(|_| MdxError::at(path, format!("line {line}: age '{}' is not a whole number of years", r[0])))?;
        let sex = Sex::parse(&r[1]).ok_or_else(|| MdxError::at(path, format!("line {line}: unknown sex '{}'", r[1])))?;
        let stat = |i: usize| -> Result<NormStat> {
            Ok(NormStat {
                mean: parse_f64(path, *line, NORMS_HEADER[i], &r[i])?,
                sd: parse_f64(path, *line, NORMS_HEADER[i + 1], &r[i + 1])?,
            })
        };
        rows.push(NormRow {
            age,
            sex,
            f1: stat(2)?,
            f2: stat(4)?,
            f3: stat(6)?,
        });
    }
    NormTable::new(rows).map_err(|e| MdxError::at(path, e))
}

pub fn write_norms(path: &Path, table: &NormTable) -> Result<()> {
    let lines = std::iter::once(NORMS_HEADER.join(",")).chain(table.rows().iter().map(|r| {
        join([
            r.age.to_string(),
            r.sex.as_str().to_string(),
            r.f1.mean.to_string(),
            r.f1.sd.to_string(),
            r.f2.mean.to_string(),
            r.f2.sd.to_string(),
            r.f3.mean.to_string(),
            r.f3.sd.to_string(),
        ])
    }));
    write_lines(path, lines)
}

/// Loads a tract-variable track (`time_s` then 6 or 9 value columns).
pub fn read_tv_track(path: &Path) -> Result<FrameSeries> {
    let t = read_table(path)?;
    let six = FeatureSet::Tv6.channel_names();
    let nine = FeatureSet::Tv9.channel_names();
    let names: Vec<&str> = t.header.iter().skip(1).map(String::as_str).collect();
    if t.header.first().map(String::as_str) != Some("time_s") || (names != six && names != nine) {
        return Err(MdxError::at(
            path,
            format!(
                "schema mismatch: header is '{}', expected 'time_s,{}[,{}]'",
                t.header.join(","),
                six.join(","),
                nine[6..].join(",")
            ),
        ));
    }
    let mut times = Vec::with_capacity(t.rows.len());
    let mut rows = Vec::with_capacity(t.rows.len());
    for (line, r) in &t.rows {
        times.push(parse_f64(path, *line, "time_s", &r[0])?);
        rows.push(
            r[1..]
                .iter()
                .zip(&names)
                .map(|(v, n)| parse_f64(path, *line, n, v))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    tv_series_from_rows(&times, &rows).map_err(|e| MdxError::at(path, e))
}

/// Writes any series as `time_s,<channel names>`.
pub fn write_series(path: &Path, series: &FrameSeries) -> Result<()> {
    let header = join(std::iter::once("time_s".to_string()).chain(series.names().iter().cloned()));
    let lines = std::iter::once(header).chain((0..series.len()).map(|k| {
        join(std::iter::once(series.time(k).to_string()).chain(series.channels().iter().map(|c| c[k].to_string())))
    }));
    write_lines(path, lines)
}

/// Reads a cached feature series written by [`write_series`] and checks
/// that its columns are those of `set`.
pub fn read_series(path: &Path, set: FeatureSet) -> Result<FrameSeries> {
    let t = read_table(path)?;
    let mut expected = vec!["time_s"];
    expected.extend(set.channel_names());
    expect_header(path, &t, &expected)?;
    if t.rows.is_empty() {
        return Err(MdxError::at(path, "no frames"));
    }
    let mut channels = vec![Vec::with_capacity(t.rows.len()); set.n_channels()];
    let mut start = 0.0;
    for (i, (line, r)) in t.rows.iter().enumerate() {
        if i == 0 {
            start = parse_f64(path, *line, "time_s", &r[0])?;
        }
        for (c, ch) in channels.iter_mut().enumerate() {
            ch.push(parse_f64(path, *line, expected[c + 1], &r[c + 1])?);
        }
    }
    FrameSeries::with_feature_set(set, channels, FRAME_RATE_HZ, start).map_err(|e| MdxError::at(path, e))
}

pub const FORMANT_TRACK_HEADER: [&str; 6] = ["time_s", "f1", "f2", "f3", "f3_minus_f2", "delta_f3_minus_f2"];

/// Raw formant track in Hz with empty fields for absent values.
pub fn write_formant_track(path: &Path, track: &FormantTrack, transforms: &TransformTrack) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let lines = std::iter::once(FORMANT_TRACK_HEADER.join(",")).chain(track.frames.iter().enumerate().map(|(k, f)| {
        join([
            f.time.to_string(),
            opt(f.f1()),
            opt(f.f2()),
            opt(f.f3()),
            opt(transforms.f3_minus_f2[k]),
            opt(transforms.delta_f3_minus_f2[k]),
        ])
    }));
    write_lines(path, lines)
}

/// Frame times and `[f1, f2, f3, f3−f2, Δ(f3−f2)]` per frame.
pub type FormantTable = (Vec<f64>, Vec<[Option<f64>; 5]>);

pub fn read_formant_track(path: &Path) -> Result<FormantTable> {
    let t = read_table(path)?;
    expect_header(path, &t, &FORMANT_TRACK_HEADER)?;
    let mut times = Vec::with_capacity(t.rows.len());
    let mut values = Vec::with_capacity(t.rows.len());
    for (line, r) in &t.rows {
        times.push(parse_f64(path, *line, "time_s", &r[0])?);
        let mut v = [None; 5];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = optional_f64(path, *line, FORMANT_TRACK_HEADER[i + 1], &r[i + 1])?;
        }
        values.push(v);
    }
    Ok((times, values))
}

const BINNED_PREFIX: [&str; 5] = ["bin", "start_s", "end_s", "label", "occupancy"];

pub fn write_binned(path: &Path, seg: &BinnedSegment) -> Result<()> {
    let header = join(BINNED_PREFIX.iter().map(|s| s.to_string()).chain(seg.channel_names.iter().cloned()));
    let lines = std::iter::once(header).chain(seg.bins.iter().enumerate().map(|(k, b)| {
        join(
            [
                k.to_string(),
                seg.interval.start_s.to_string(),
                seg.interval.end_s.to_string(),
                quote(&seg.interval.label),
                seg.occupancy[k].to_string(),
            ]
            .into_iter()
            .chain(b.iter().map(|v| v.to_string())),
        )
    }));
    write_lines(path, lines)
}

pub fn read_binned(path: &Path) -> Result<BinnedSegment> {
    let t = read_table(path)?;
    if t.header.len() <= BINNED_PREFIX.len() || t.header[..BINNED_PREFIX.len()] != BINNED_PREFIX {
        return Err(MdxError::at(path, format!("schema mismatch: header is '{}'", t.header.join(","))));
    }
    let first = t.rows.first().ok_or_else(|| MdxError::at(path, "no bins"))?;
    let interval = RhoticInterval::new(
        parse_f64(path, first.0, "start_s", &first.1[1])?,
        parse_f64(path, first.0, "end_s", &first.1[2])?,
        first.1[3].clone(),
    )
    .map_err(|e| MdxError::at(path, e))?;
    let channel_names: Vec<String> = t.header[BINNED_PREFIX.len()..].to_vec();
    let mut bins = Vec::with_capacity(t.rows.len());
    let mut occupancy = Vec::with_capacity(t.rows.len());
    for (k, (line, r)) in t.rows.iter().enumerate() {
        if r[0] != k.to_string() {
            return Err(MdxError::at(path, format!("line {line}: bins must be numbered 0, 1, ... in order")));
        }
        occupancy.push(
            r[4].parse::<usize>()
                .map_err(|_| MdxError::at(path, format!("line {line}: bad occupancy '{}'", r[4])))?,
        );
        bins.push(
            r[BINNED_PREFIX.len()..]
                .iter()
                .zip(&channel_names)
                .map(|(v, n)| parse_f64(path, *line, n, v))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok(BinnedSegment {
        bins,
        channel_names,
        interval,
        occupancy,
    })
}

pub const LABELS_HEADER: [&str; 4] = ["utterance_id", "participant_id", "avg_rating", "label"];

#[derive(Debug, Clone, PartialEq)]
pub struct LabelRow {
    pub utterance_id: String,
    pub participant_id: String,
    pub avg_rating: f64,
    pub label: Label,
}

pub fn write_labels(path: &Path, rows: &[LabelRow]) -> Result<()> {
    let lines = std::iter::once(LABELS_HEADER.join(",")).chain(rows.iter().map(|r| {
        join([
            quote(&r.utterance_id),
            quote(&r.participant_id),
            r.avg_rating.to_string(),
            r.label.as_u8().to_string(),
        ])
    }));
    write_lines(path, lines)
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let t = read_table(path)?;
    expect_header(path, &t, &LABELS_HEADER)?;
    t.rows
        .iter()
        .map(|(line, r)| {
            let label = r[3]
                .parse::<u8>()
                .ok()
                .and_then(Label::from_u8)
                .ok_or_else(|| MdxError::at(path, format!("line {line}: label '{}' is not 0 or 1", r[3])))?;
            Ok(LabelRow {
                utterance_id: r[0].clone(),
                participant_id: r[1].clone(),
                avg_rating: parse_f64(path, *line, "avg_rating", &r[2])?,
                label,
            })
        })
        .collect()
}

/// Writes rows of already formatted cells under `header`.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let lines = std::iter::once(header.join(",")).chain(rows.into_iter().map(|r| join(r.iter().map(|c| quote(c)))));
    write_lines(path, lines)
}
