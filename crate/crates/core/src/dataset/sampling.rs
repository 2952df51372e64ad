use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SampleEntry {
    pub index: usize,
    pub label: u8,
}

/// Retained training pixels (sorted by linear index) and the seed that drew them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleIndex {
    pub entries: Vec<SampleEntry>,
    pub seed: u64,
}

impl SampleIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    /// CSV with a `# seed=<n>` comment line followed by `index,label` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# seed={}", self.seed).map_err(|e| Error::io("<sample csv>", e))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "label"]).map_err(|e| Error::parse("sample csv", e))?;
        for e in &self.entries {
            w.serialize((e.index, e.label)).map_err(|e| Error::parse("sample csv", e))?;
        }
        w.flush().map_err(|e| Error::io("<sample csv>", e))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader
            .read_line(&mut first)
            .map_err(|e| Error::io("<sample csv>", e))?;
        let seed = first
            .trim()
            .strip_prefix("# seed=")
            .ok_or_else(|| Error::parse("sample csv", "missing '# seed=' header comment"))?
            .parse::<u64>()
            .map_err(|e| Error::parse("sample csv", e))?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::parse("sample csv", e))?;
        if headers != vec!["index", "label"] {
            return Err(Error::parse("sample csv", "expected columns index,label"));
        }
        let mut entries = Vec::new();
        for (row, rec) in rdr.deserialize::<(usize, u8)>().enumerate() {
            let (index, label) = rec.map_err(|e| Error::parse("sample csv", format!("row {row}: {e}")))?;
            if label > 1 {
                return Err(Error::parse("sample csv", format!("row {row}: label {label}")));
            }
            entries.push(SampleEntry { index, label });
        }
        let mut seen: Vec<usize> = entries.iter().map(|e| e.index).collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::parse("sample csv", "duplicate pixel index"));
        }
        Ok(SampleIndex { entries, seed })
    }
}

/// Class-balanced sample of the training columns: every positive pixel plus
/// an equally sized uniform draw, without replacement, of negative pixels.
pub fn undersample(labels: &BinaryMask, train_cols: &Range<usize>, seed: u64) -> Result<SampleIndex> {
    undersample_valid(labels, train_cols, seed, None)
}

/// As [`undersample`], skipping pixels flagged invalid (nodata in any cube).
pub fn undersample_valid(
    labels: &BinaryMask,
    train_cols: &Range<usize>,
    seed: u64,
    valid: Option<&[bool]>,
) -> Result<SampleIndex> {
    let g = labels.geometry();
    if train_cols.end > g.width || train_cols.is_empty() {
        return Err(Error::Config(format!(
            "training columns {train_cols:?} outside width {}",
            g.width
        )));
    }
    if let Some(v) = valid {
        if v.len() != g.pixel_count() {
            return Err(Error::Alignment("validity mask size differs from label mask".into()));
        }
    }
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for row in 0..g.height {
        for col in train_cols.clone() {
            let idx = row * g.width + col;
            if valid.is_some_and(|v| !v[idx]) {
                continue;
            }
            if labels.get(idx) == 1 {
                positives.push(idx);
            } else {
                negatives.push(idx);
            }
        }
    }
    if positives.is_empty() {
        return Err(Error::NoPositives);
    }
    if negatives.len() < positives.len() {
        return Err(Error::InsufficientNegatives {
            positives: positives.len(),
            negatives: negatives.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, negatives.len(), positives.len());

    let mut entries: Vec<SampleEntry> = positives
        .into_iter()
        .map(|index| SampleEntry { index, label: 1 })
        .chain(picked.into_iter().map(|i| SampleEntry {
            index: negatives[i],
            label: 0,
        }))
        .collect();
    entries.sort_unstable_by_key(|e| e.index);
    Ok(SampleIndex { entries, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GridGeometry;
    use std::collections::BTreeSet;

    fn mask_with(width: usize, height: usize, ones: &[usize]) -> BinaryMask {
        let g = GridGeometry::unit(width, height).unwrap();
        let mut v = vec![0u8; width * height];
        for &i in ones {
            v[i] = 1;
        }
        BinaryMask::new(g, v).unwrap()
    }

    #[test]
    fn ten_positives_ninety_negatives() {
        let ones: Vec<usize> = (0..100).step_by(10).collect();
        let m = mask_with(10, 10, &ones);
        let s = undersample(&m, &(0..10), 7).unwrap();
        assert_eq!(s.len(), 20);
        assert_eq!(s.count_label(1), 10);
        assert_eq!(s.count_label(0), 10);
        // enumerate the positives directly
        let expected: BTreeSet<usize> = (0..100).filter(|&i| m.get(i) == 1).collect();
        let got: BTreeSet<usize> = s.entries.iter().filter(|e| e.label == 1).map(|e| e.index).collect();
        assert_eq!(got, expected);
        assert!(s.entries.iter().filter(|e| e.label == 0).all(|e| m.get(e.index) == 0));
    }

    #[test]
    fn no_positives_is_error() {
        let m = mask_with(4, 4, &[]);
        assert!(matches!(undersample(&m, &(0..4), 1), Err(Error::NoPositives)));
    }

    #[test]
    fn insufficient_negatives_is_error() {
        let m = mask_with(2, 2, &[0, 1, 2]);
        assert!(matches!(
            undersample(&m, &(0..2), 1),
            Err(Error::InsufficientNegatives { positives: 3, negatives: 1 })
        ));
    }

    #[test]
    fn only_training_columns_are_sampled() {
        let m = mask_with(6, 4, &[0, 7, 5]);
        let s = undersample(&m, &(0..4), 3).unwrap();
        assert!(s.entries.iter().all(|e| e.index % 6 < 4));
        assert_eq!(s.count_label(1), 2);
    }

    #[test]
    fn invalid_pixels_are_skipped() {
        let m = mask_with(4, 1, &[0, 1]);
        let valid = [true, false, true, true];
        let s = undersample_valid(&m, &(0..4), 9, Some(&valid)).unwrap();
        assert_eq!(s.count_label(1), 1);
        assert!(s.entries.iter().all(|e| e.index != 1));
    }

    #[test]
    fn seeds_are_reproducible_and_only_change_negatives() {
        let ones: Vec<usize> = (0..400).step_by(7).collect();
        let m = mask_with(20, 20, &ones);
        let a = undersample(&m, &(0..20), 11).unwrap();
        let b = undersample(&m, &(0..20), 11).unwrap();
        let c = undersample(&m, &(0..20), 12).unwrap();
        assert_eq!(a, b);
        let pos = |s: &SampleIndex| s.entries.iter().filter(|e| e.label == 1).copied().collect::<Vec<_>>();
        assert_eq!(pos(&a), pos(&c));
        assert_ne!(a.entries, c.entries);
    }

    #[test]
    fn training_region_of_roi_size() {
        // 192,687 positives in a 1363 x 1433 training region
        let g = GridGeometry::unit(1363, 1433).unwrap();
        let n = g.pixel_count();
        let mut v = vec![0u8; n];
        let stride = n / 192_687;
        for k in 0..192_687 {
            v[k * stride] = 1;
        }
        let m = BinaryMask::new(g, v).unwrap();
        let s = undersample(&m, &(0..1363), 2019).unwrap();
        assert_eq!(s.count_label(1), 192_687);
        assert_eq!(s.count_label(0), 192_687);
    }

    #[test]
    fn csv_round_trip() {
        let m = mask_with(5, 5, &[3, 8, 14]);
        let s = undersample(&m, &(0..5), 42).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"# seed=42\nindex,label\n"));
        assert_eq!(SampleIndex::read_csv(&buf[..]).unwrap(), s);
        assert!(SampleIndex::read_csv(&b"index,label\n1,0\n"[..]).is_err());
        assert!(SampleIndex::read_csv(&b"# seed=1\nindex,label\n1,0\n1,1\n"[..]).is_err());
    }
}
