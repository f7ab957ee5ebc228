//! Dataset-level confusion matrix, per-class IoU / recall, mIoU, and the
//! per-model IoU report CSV.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::csv_field;
use crate::types::LabelMap;

/// `cm[g][p]`: valid pixels with ground truth `g` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn row_sum(&self, gt: usize) -> u64 {
        self.counts[gt * self.num_classes..(gt + 1) * self.num_classes].iter().sum()
    }

    pub fn col_sum(&self, pred: usize) -> u64 {
        (0..self.num_classes).map(|g| self.get(g, pred)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one prediction/ground-truth pair. Invalid ground-truth pixels
    /// are skipped; every valid one needs a valid in-range prediction.
    pub fn accumulate(&mut self, pred: &LabelMap, gt: &LabelMap) -> Result<()> {
        if pred.height() != gt.height() || pred.width() != gt.width() {
            return Err(Error::DimMismatch(format!(
                "prediction {}x{} vs ground truth {}x{}",
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            )));
        }
        let c = self.num_classes;
        let w = gt.width().max(1);
        for (i, (&p, &g)) in pred.labels().iter().zip(gt.labels()).enumerate() {
            if !gt.is_valid(i) {
                continue;
            }
            let (x, y) = (i % w, i / w);
            if g as usize >= c {
                return Err(Error::LabelOutOfRange {
                    value: g,
                    num_classes: c,
                    x,
                    y,
                });
            }
            if !pred.is_valid(i) || p as usize >= c {
                return Err(Error::LabelOutOfRange {
                    value: p,
                    num_classes: c,
                    x,
                    y,
                });
            }
            self.counts[g as usize * c + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::DimMismatch(format!(
                "merging {}-class matrix into {}-class matrix",
                other.num_classes, self.num_classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Per-pair matrices built in parallel, then summed.
    pub fn from_pairs(num_classes: usize, pairs: &[(&LabelMap, &LabelMap)]) -> Result<Self> {
        pairs
            .par_iter()
            .map(|(p, g)| {
                let mut cm = Self::new(num_classes);
                cm.accumulate(p, g)?;
                Ok(cm)
            })
            .try_reduce(
                || Self::new(num_classes),
                |mut a, b| {
                    a.merge(&b)?;
                    Ok(a)
                },
            )
    }
}

pub fn confusion_accumulate(cm: &ConfusionMatrix, pred: &LabelMap, gt: &LabelMap) -> Result<ConfusionMatrix> {
    let mut out = cm.clone();
    out.accumulate(pred, gt)?;
    Ok(out)
}

/// IoU per class; `present[c]` is false when class `c` appears in neither
/// prediction nor ground truth (its IoU is then reported as 0 and excluded
/// from means).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassIou {
    pub iou: Vec<f64>,
    pub present: Vec<bool>,
}

impl ClassIou {
    pub fn miou(&self) -> Result<f64> {
        miou(&self.iou, &self.present)
    }

    /// Mean over the given classes that are present.
    pub fn mean_over(&self, classes: impl IntoIterator<Item = usize>) -> Result<f64> {
        let mut mask = vec![false; self.iou.len()];
        for c in classes {
            if c < mask.len() {
                mask[c] = self.present[c];
            }
        }
        miou(&self.iou, &mask)
    }
}

pub fn iou_per_class(cm: &ConfusionMatrix) -> ClassIou {
    let c = cm.num_classes();
    let mut iou = vec![0.0; c];
    let mut present = vec![false; c];
    for k in 0..c {
        let tp = cm.get(k, k);
        let denom = cm.row_sum(k) + cm.col_sum(k) - tp;
        if denom > 0 {
            iou[k] = tp as f64 / denom as f64;
            present[k] = true;
        }
    }
    ClassIou { iou, present }
}

/// Recall per class (`None` when the class has no ground-truth pixels).
pub fn recall_per_class(cm: &ConfusionMatrix) -> Vec<Option<f64>> {
    (0..cm.num_classes())
        .map(|k| {
            let row = cm.row_sum(k);
            (row > 0).then(|| cm.get(k, k) as f64 / row as f64)
        })
        .collect()
}

pub fn miou(ious: &[f64], present: &[bool]) -> Result<f64> {
    if ious.len() != present.len() {
        return Err(Error::DimMismatch(format!("{} IoUs with {} presence flags", ious.len(), present.len())));
    }
    let vals: Vec<f64> = ious.iter().zip(present).filter(|(_, p)| **p).map(|(v, _)| *v).collect();
    if vals.is_empty() {
        return Err(Error::InvalidArgument("mIoU over zero present classes".into()));
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// One report line; `None` marks an absent class.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub architecture: String,
    pub backbone: String,
    pub ious: Vec<Option<f64>>,
}

impl ReportRow {
    pub fn from_iou(architecture: impl Into<String>, backbone: impl Into<String>, iou: &ClassIou) -> Self {
        Self {
            architecture: architecture.into(),
            backbone: backbone.into(),
            ious: iou.iou.iter().zip(&iou.present).map(|(v, p)| p.then_some(*v)).collect(),
        }
    }
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// `architecture,backbone,<class names>,mIoU`, three decimals. The mIoU
/// column is the mean of the printed (rounded) values.
pub fn report_csv_string(class_names: &[String], rows: &[ReportRow]) -> Result<String> {
    let mut out = String::from("architecture,backbone");
    for n in class_names {
        out.push(',');
        out.push_str(&csv_field(n));
    }
    out.push_str(",mIoU\n");
    for r in rows {
        if r.ious.len() != class_names.len() {
            return Err(Error::DimMismatch(format!(
                "report row {}/{} has {} values for {} classes",
                r.architecture,
                r.backbone,
                r.ious.len(),
                class_names.len()
            )));
        }
        out.push_str(&csv_field(&r.architecture));
        out.push(',');
        out.push_str(&csv_field(&r.backbone));
        let printed: Vec<Option<f64>> = r.ious.iter().map(|v| v.map(round3)).collect();
        for v in &printed {
            out.push(',');
            if let Some(v) = v {
                out.push_str(&format!("{v:.3}"));
            }
        }
        let present: Vec<f64> = printed.iter().flatten().copied().collect();
        out.push(',');
        if !present.is_empty() {
            out.push_str(&format!("{:.3}", present.iter().sum::<f64>() / present.len() as f64));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn report_table(class_names: &[String], rows: &[ReportRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report_csv_string(class_names, rows)?).map_err(|e| Error::io(path, e))
}

/// Parsed report: class names from the header and per-row values plus the
/// printed mIoU.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    pub class_names: Vec<String>,
    pub rows: Vec<(ReportRow, Option<f64>)>,
}

pub fn parse_report_csv(text: &str) -> Result<ParsedReport> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let n = header.len();
    if n < 3 || &header[0] != "architecture" || &header[1] != "backbone" || &header[n - 1] != "mIoU" {
        return Err(Error::Format("report header must be architecture,backbone,<classes>,mIoU".into()));
    }
    let class_names: Vec<String> = header.iter().skip(2).take(n - 3).map(str::to_string).collect();
    let parse_cell = |s: &str, line: u64| -> Result<Option<f64>> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(None);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Format(format!("report line {line}: {s:?} is not a number")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Format(format!("report line {line}: IoU {v} outside [0, 1]")));
        }
        Ok(Some(v))
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != n {
            return Err(Error::Format(format!("report line {line}: {} fields, expected {n}", rec.len())));
        }
        let ious = (2..n - 1).map(|i| parse_cell(&rec[i], line)).collect::<Result<Vec<_>>>()?;
        let printed = parse_cell(&rec[n - 1], line)?;
        rows.push((
            ReportRow {
                architecture: rec[0].to_string(),
                backbone: rec[1].to_string(),
                ious,
            },
            printed,
        ));
    }
    Ok(ParsedReport { class_names, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::types::ClassSet;
    use proptest::prelude::*;
    use rand::Rng;

    fn lm(h: usize, w: usize, v: &[u8]) -> LabelMap {
        LabelMap::new(h, w, v.to_vec()).unwrap()
    }

    #[test]
    fn perfect_and_disjoint() {
        let g = lm(10, 10, &(0..100).map(|i| (i % 3) as u8).collect::<Vec<_>>());
        let mut cm = ConfusionMatrix::new(3);
        cm.accumulate(&g, &g).unwrap();
        assert_eq!((0..3).map(|c| cm.get(c, c)).sum::<u64>(), 100);
        let iou = iou_per_class(&cm);
        assert!(iou.iou.iter().all(|&v| v == 1.0));

        let wrong = lm(10, 10, &g.labels().iter().map(|&v| (v + 1) % 3).collect::<Vec<_>>());
        let mut cm = ConfusionMatrix::new(3);
        cm.accumulate(&wrong, &g).unwrap();
        assert!(iou_per_class(&cm).iou.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_class_hand_example() {
        // [[3,1],[1,5]]
        let g = lm(1, 10, &[0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
        let p = lm(1, 10, &[0, 0, 0, 1, 0, 1, 1, 1, 1, 1]);
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&p, &g).unwrap();
        assert_eq!(cm.counts(), &[3, 1, 1, 5]);
        let iou = iou_per_class(&cm);
        assert_eq!(iou.iou, vec![3.0 / 5.0, 5.0 / 7.0]);
        assert_eq!(recall_per_class(&cm), vec![Some(0.75), Some(5.0 / 6.0)]);
    }

    #[test]
    fn absent_classes_are_flagged_and_skipped() {
        let g = lm(1, 4, &[0, 0, 1, 1]);
        let mut cm = ConfusionMatrix::new(4);
        cm.accumulate(&g, &g).unwrap();
        let iou = iou_per_class(&cm);
        assert_eq!(iou.present, vec![true, true, false, false]);
        assert_eq!(iou.miou().unwrap(), 1.0);
        assert_eq!(iou.mean_over([1, 2, 3]).unwrap(), 1.0);
        assert!(iou.mean_over([2, 3]).is_err());
        assert_eq!(miou(&[0.4], &[true]).unwrap(), 0.4);
        assert!(miou(&[0.4], &[false]).is_err());
    }

    #[test]
    fn invalid_pixels_and_errors() {
        let g = LabelMap::new(1, 3, vec![0, 255, 1]).unwrap();
        let p = lm(1, 3, &[0, 1, 1]);
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&p, &g).unwrap();
        assert_eq!(cm.total(), 2);
        assert!(cm.accumulate(&lm(1, 2, &[0, 0]), &g).is_err());
        assert!(cm.accumulate(&lm(1, 3, &[0, 0, 5]), &g).is_err());
        assert!(ConfusionMatrix::new(2).merge(&ConfusionMatrix::new(3)).is_err());
    }

    #[test]
    fn table_rows_from_the_reference_results() {
        let a = [0.717, 0.385, 0.553, 0.312, 0.443, 0.352, 0.717, 0.420, 0.338];
        let m = miou(&a, &[true; 9]).unwrap();
        assert_eq!(format!("{m:.3}"), "0.471");
        // The ensemble row's printed 0.547 is 0.0008 above the mean of its
        // printed per-class values.
        let b = [0.753, 0.469, 0.604, 0.440, 0.525, 0.461, 0.769, 0.478, 0.417];
        let m = miou(&b, &[true; 9]).unwrap();
        assert!((m - 0.546_222).abs() < 1e-6);
    }

    #[test]
    fn report_round_trip() {
        let names = ClassSet::default().names().to_vec();
        assert_eq!(
            report_csv_string(&names, &[]).unwrap(),
            "architecture,backbone,BG,DP,DR,EN,ND,PS,WA,WW,WC,mIoU\n"
        );
        let mut rng = substream(1, 0);
        let rows: Vec<ReportRow> = (0..5)
            .map(|i| ReportRow {
                architecture: format!("arch, {i}"),
                backbone: if i == 0 { String::new() } else { "conv5".into() },
                ious: (0..9).map(|c| (c != 4 || i != 2).then(|| rng.random::<f64>())).collect(),
            })
            .collect();
        let text = report_csv_string(&names, &rows).unwrap();
        let parsed = parse_report_csv(&text).unwrap();
        assert_eq!(parsed.class_names, names);
        for ((got, printed), want) in parsed.rows.iter().zip(&rows) {
            assert_eq!(got.architecture, want.architecture);
            assert_eq!(got.backbone, want.backbone);
            for (g, w) in got.ious.iter().zip(&want.ious) {
                assert_eq!(g.is_some(), w.is_some());
                if let (Some(g), Some(w)) = (g, w) {
                    assert!((g - w).abs() <= 5e-4 + 1e-12);
                }
            }
            let vals: Vec<f64> = want.ious.iter().flatten().copied().collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((printed.unwrap() - mean).abs() <= 1e-3);
            // Self-consistent with the printed per-class values.
            let shown: Vec<f64> = got.ious.iter().flatten().copied().collect();
            assert!((printed.unwrap() - shown.iter().sum::<f64>() / shown.len() as f64).abs() <= 5e-4 + 1e-12);
        }
        assert!(report_csv_string(&names[..3], &rows).is_err());
    }

    #[test]
    fn report_parse_rejects_garbage() {
        assert!(parse_report_csv("a,b\n").is_err());
        assert!(parse_report_csv("architecture,backbone,BG,mIoU\nx,y,zz,0.1\n").is_err());
        assert!(parse_report_csv("architecture,backbone,BG,mIoU\nx,y,1.5,0.1\n").is_err());
        assert!(parse_report_csv("architecture,backbone,BG,mIoU\nx,y,0.5\n").is_err());
    }

    fn naive(c: usize, p: &LabelMap, g: &LabelMap) -> Vec<Vec<u64>> {
        let mut m = vec![vec![0u64; c]; c];
        for y in 0..g.height() {
            for x in 0..g.width() {
                let i = y * g.width() + x;
                if g.is_valid(i) {
                    m[g.get(y, x) as usize][p.get(y, x) as usize] += 1;
                }
            }
        }
        m
    }

    proptest! {
        #[test]
        fn matches_naive_oracle_and_is_additive(seed in any::<u64>(), c in 1usize..6, h in 1usize..12, w in 1usize..12) {
            let mut rng = substream(seed, 0);
            let mut mk = |invalid: bool| {
                let v: Vec<u8> = (0..h * w)
                    .map(|_| if invalid && rng.random::<f64>() < 0.1 { 255 } else { rng.random_range(0..c) as u8 })
                    .collect();
                LabelMap::new(h, w, v).unwrap()
            };
            let (p1, g1, p2, g2) = (mk(false), mk(true), mk(false), mk(true));
            let a = confusion_accumulate(&ConfusionMatrix::new(c), &p1, &g1).unwrap();
            let n = naive(c, &p1, &g1);
            for gi in 0..c {
                for pi in 0..c {
                    prop_assert_eq!(a.get(gi, pi), n[gi][pi]);
                }
            }
            let both = confusion_accumulate(&a, &p2, &g2).unwrap();
            let rev = confusion_accumulate(&confusion_accumulate(&ConfusionMatrix::new(c), &p2, &g2).unwrap(), &p1, &g1).unwrap();
            prop_assert_eq!(&both, &rev);
            let par = ConfusionMatrix::from_pairs(c, &[(&p1, &g1), (&p2, &g2)]).unwrap();
            prop_assert_eq!(&both, &par);
            for v in iou_per_class(&both).iou {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn relabeling_permutes_ious(seed in any::<u64>(), c in 2usize..6) {
            let mut rng = substream(seed, 1);
            let (h, w) = (6, 7);
            let p = LabelMap::new(h, w, (0..h * w).map(|_| rng.random_range(0..c) as u8).collect()).unwrap();
            let g = LabelMap::new(h, w, (0..h * w).map(|_| rng.random_range(0..c) as u8).collect()).unwrap();
            let mut perm: Vec<u8> = (0..c as u8).collect();
            for i in (1..c).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let map = |l: &LabelMap| LabelMap::new(h, w, l.labels().iter().map(|&v| perm[v as usize]).collect()).unwrap();
            let a = iou_per_class(&confusion_accumulate(&ConfusionMatrix::new(c), &p, &g).unwrap());
            let b = iou_per_class(&confusion_accumulate(&ConfusionMatrix::new(c), &map(&p), &map(&g)).unwrap());
            for k in 0..c {
                prop_assert_eq!(a.iou[k], b.iou[perm[k] as usize]);
            }
            prop_assert!((a.miou().unwrap() - b.miou().unwrap()).abs() < 1e-12);
        }
    }
}
