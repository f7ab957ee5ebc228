//! Dataset-level class pixel statistics.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::SampleManifest;
use crate::types::ClassSet;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub pixel_counts: Vec<u64>,
    pub total_valid_pixels: u64,
    pub frequencies: Vec<f64>,
}

impl ClassStats {
    pub fn from_counts(pixel_counts: Vec<u64>) -> Result<Self> {
        let total: u64 = pixel_counts.iter().sum();
        if total == 0 {
            return Err(Error::Numeric("no valid pixels to compute frequencies from".into()));
        }
        let frequencies = pixel_counts.iter().map(|&n| n as f64 / total as f64).collect();
        Ok(Self {
            pixel_counts,
            total_valid_pixels: total,
            frequencies,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.pixel_counts.len()
    }
}

/// Sums the cached per-entry counts of a manifest.
pub fn count_pixels(manifest: &SampleManifest) -> Result<ClassStats> {
    if manifest.is_empty() {
        return Err(Error::InvalidArgument("manifest has no entries".into()));
    }
    let mut counts = vec![0u64; manifest.class_set().num_classes()];
    for e in manifest.entries() {
        for (acc, n) in counts.iter_mut().zip(&e.counts) {
            *acc += n;
        }
    }
    ClassStats::from_counts(counts)
}

/// Quotes a CSV field when needed. Empty fields are always quoted so an
/// empty class name stays distinguishable from a missing column.
pub(crate) fn csv_field(s: &str) -> String {
    if s.is_empty() || s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn stats_csv_string(stats: &ClassStats, class_set: &ClassSet) -> Result<String> {
    if class_set.num_classes() != stats.num_classes() {
        return Err(Error::DimMismatch(format!(
            "{} class names for {} counts",
            class_set.num_classes(),
            stats.num_classes()
        )));
    }
    let mut out = String::from("class,count,frequency\n");
    for c in 0..stats.num_classes() {
        out.push_str(&format!(
            "{},{},{:.6}\n",
            csv_field(class_set.name(c)),
            stats.pixel_counts[c],
            stats.frequencies[c]
        ));
    }
    Ok(out)
}

pub fn export_stats_csv(stats: &ClassStats, class_set: &ClassSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, stats_csv_string(stats, class_set)?).map_err(|e| Error::io(path, e))
}

/// One parsed row of a stats CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub class: String,
    pub count: u64,
    pub frequency: f64,
}

pub fn parse_stats_csv(text: &str) -> Result<Vec<StatsRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["class", "count", "frequency"] {
        return Err(Error::Format(format!("unexpected stats header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::Format(format!("stats row has {} fields", rec.len())));
        }
        let count = rec[1]
            .parse()
            .map_err(|_| Error::Format(format!("bad count {:?}", &rec[1])))?;
        let frequency = rec[2]
            .parse()
            .map_err(|_| Error::Format(format!("bad frequency {:?}", &rec[2])))?;
        rows.push(StatsRow {
            class: rec[0].to_string(),
            count,
            frequency,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::SampleEntry;

    fn entry(id: &str, counts: Vec<u64>) -> SampleEntry {
        SampleEntry {
            id: id.into(),
            image_rgb: "r".into(),
            image_nir: "n".into(),
            label: "l".into(),
            counts,
        }
    }

    fn manifest(entries: Vec<SampleEntry>) -> SampleManifest {
        SampleManifest::new(entries, ClassSet::numbered(2).unwrap(), "").unwrap()
    }

    #[test]
    fn sums_entries() {
        let s = count_pixels(&manifest(vec![entry("a", vec![10, 2]), entry("b", vec![6, 2])])).unwrap();
        assert_eq!(s.pixel_counts, vec![16, 4]);
        assert_eq!(s.total_valid_pixels, 20);
        assert_eq!(s.frequencies, vec![0.8, 0.2]);

        let single = count_pixels(&manifest(vec![entry("a", vec![3, 5])])).unwrap();
        assert_eq!(single.pixel_counts, vec![3, 5]);
        assert!(count_pixels(&manifest(vec![])).is_err());
    }

    #[test]
    fn order_independent() {
        let a = count_pixels(&manifest(vec![entry("a", vec![1, 2]), entry("b", vec![7, 0])])).unwrap();
        let b = count_pixels(&manifest(vec![entry("b", vec![7, 0]), entry("a", vec![1, 2])])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_format_and_round_trip() {
        let stats = ClassStats::from_counts(vec![16, 4]).unwrap();
        let cs = ClassSet::new(vec!["BG".into(), "DP".into()], 0).unwrap();
        let text = stats_csv_string(&stats, &cs).unwrap();
        assert_eq!(text, "class,count,frequency\nBG,16,0.800000\nDP,4,0.200000\n");
        let rows = parse_stats_csv(&text).unwrap();
        assert_eq!(rows.iter().map(|r| r.count).collect::<Vec<_>>(), stats.pixel_counts);
    }

    #[test]
    fn empty_class_name_is_quoted() {
        let stats = ClassStats::from_counts(vec![1, 1]).unwrap();
        let cs = ClassSet::new(vec!["".into(), "x".into()], 0).unwrap();
        let text = stats_csv_string(&stats, &cs).unwrap();
        assert!(text.contains("\n\"\",1,0.500000\n"), "{text}");
        assert_eq!(parse_stats_csv(&text).unwrap()[0].class, "");
    }

    #[test]
    fn export_to_unwritable_path_fails() {
        let stats = ClassStats::from_counts(vec![1, 1]).unwrap();
        let cs = ClassSet::numbered(2).unwrap();
        assert!(export_stats_csv(&stats, &cs, "/nonexistent-dir/x.csv").is_err());
    }
}
