//! Line-oriented dataset files.
//!
//! The first line is a header:
//!
//! ```text
//! #dirnet-dataset v1 world.canvas_size=100 world.context_expand=2 ...
//! ```
//!
//! carrying the format tag, version and the generating [`WorldConfig`] as sorted
//! `key=value` tokens. Every following line is one sample with tab-separated fields in this
//! order:
//!
//! 1. `scene_id`
//! 2. `class_id`
//! 3. `matched_gt` (`-1` when unmatched)
//! 4. `is_positive` (`0`/`1`)
//! 5. proposal `x1`, `y1`, `x2`, `y2` (four fields)
//! 6. regressed `x1`, `y1`, `x2`, `y2` (four fields)
//! 7. `proposal_iou`
//! 8. `cls_score_sim`
//! 9. `purity_star`, `integrity_star`, `iou_star`
//! 10. foresight features, comma-separated
//! 11. hindsight features, comma-separated
//!
//! Reals are written in scientific notation with 17 significant digits, which reads back to
//! the identical `f64`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::kv::KvMap;

use super::{Sample, Targets, WorldConfig};

pub const DATASET_TAG: &str = "#dirnet-dataset";
pub const DATASET_VERSION: &str = "v1";
const FIELDS: usize = 19;

/// Formats a real with 17 significant digits.
pub fn fmt_exact(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn header_line(cfg: &WorldConfig) -> String {
    let mut kv = KvMap::default();
    cfg.echo(&mut kv);
    let mut line = format!("{DATASET_TAG} {DATASET_VERSION}");
    for (k, v) in kv.iter() {
        line.push(' ');
        line.push_str(k);
        line.push('=');
        line.push_str(v);
    }
    line
}

pub fn write_dataset<W: Write>(mut w: W, cfg: &WorldConfig, samples: &[Sample]) -> Result<()> {
    writeln!(w, "{}", header_line(cfg))?;
    for s in samples {
        let mut cols: Vec<String> = Vec::with_capacity(FIELDS);
        cols.push(s.scene_id.to_string());
        cols.push(s.class_id.to_string());
        cols.push(s.matched_gt.map_or("-1".to_owned(), |i| i.to_string()));
        cols.push(if s.is_positive { "1" } else { "0" }.to_owned());
        for b in [&s.proposal, &s.regressed] {
            cols.extend([b.x1, b.y1, b.x2, b.y2].map(fmt_exact));
        }
        cols.extend(
            [
                s.proposal_iou,
                s.cls_score_sim,
                s.targets.purity,
                s.targets.integrity,
                s.targets.iou,
            ]
            .map(fmt_exact),
        );
        for f in [&s.features_foresight, &s.features_hindsight] {
            cols.push(f.iter().map(|&v| fmt_exact(v)).collect::<Vec<_>>().join(","));
        }
        writeln!(w, "{}", cols.join("\t"))?;
    }
    Ok(())
}

/// Reads a dataset file back; returns the world config echoed in the header and the samples.
pub fn read_dataset<R: BufRead>(r: R) -> Result<(WorldConfig, Vec<Sample>)> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty dataset file".into()))??;
    let mut tokens = header.split(' ');
    if tokens.next() != Some(DATASET_TAG) {
        return Err(Error::Format("missing dataset tag".into()));
    }
    match tokens.next() {
        Some(DATASET_VERSION) => {}
        other => return Err(Error::Format(format!("unsupported dataset version {other:?}"))),
    }
    let mut kv = KvMap::default();
    for tok in tokens {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header token `{tok}`")))?;
        kv.insert(k, v);
    }
    let mut cfg = WorldConfig::default();
    cfg.apply(&mut kv)?;
    kv.finish()?;

    let mut samples = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        samples.push(parse_record(&line).map_err(|e| Error::Format(format!("record {}: {e}", n + 1)))?);
    }
    Ok((cfg, samples))
}

fn parse_record(line: &str) -> std::result::Result<Sample, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != FIELDS {
        return Err(format!("expected {FIELDS} fields, found {}", cols.len()));
    }
    let real = |i: usize| cols[i].parse::<f64>().map_err(|e| format!("field {}: {e}", i + 1));
    let bbox = |i: usize| -> std::result::Result<BoundingBox, String> {
        BoundingBox::new(real(i)?, real(i + 1)?, real(i + 2)?, real(i + 3)?).map_err(|e| e.to_string())
    };
    let vector = |i: usize| -> std::result::Result<Vec<f64>, String> {
        cols[i]
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|v| v.parse::<f64>().map_err(|e| format!("field {}: {e}", i + 1)))
            .collect()
    };
    let matched: i64 = cols[2].parse().map_err(|e| format!("field 3: {e}"))?;
    Ok(Sample {
        scene_id: cols[0].parse().map_err(|e| format!("field 1: {e}"))?,
        class_id: cols[1].parse().map_err(|e| format!("field 2: {e}"))?,
        matched_gt: usize::try_from(matched).ok(),
        is_positive: match cols[3] {
            "1" => true,
            "0" => false,
            other => return Err(format!("field 4: bad flag `{other}`")),
        },
        proposal: bbox(4)?,
        regressed: bbox(8)?,
        proposal_iou: real(12)?,
        cls_score_sim: real(13)?,
        targets: Targets {
            purity: real(14)?,
            integrity: real(15)?,
            iou: real(16)?,
        },
        features_foresight: vector(17)?,
        features_hindsight: vector(18)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::build_dataset;
    use proptest::prelude::*;

    #[test]
    fn round_trip_is_exact() {
        let cfg = WorldConfig {
            num_scenes: 8,
            ..Default::default()
        };
        let ds = build_dataset(&cfg, 2).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &cfg, &ds).unwrap();
        let (cfg2, ds2) = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(ds2, ds);
        let mut again = Vec::new();
        write_dataset(&mut again, &cfg2, &ds2).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn header_only_dataset() {
        let cfg = WorldConfig {
            num_scenes: 0,
            ..Default::default()
        };
        let mut buf = Vec::new();
        write_dataset(&mut buf, &cfg, &[]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("#dirnet-dataset v1 "));
        assert!(text.contains("world.num_scenes=0"));
        let (_, ds) = read_dataset(buf.as_slice()).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_dataset("".as_bytes()).is_err());
        assert!(read_dataset("#other v1\n".as_bytes()).is_err());
        assert!(read_dataset("#dirnet-dataset v9\n".as_bytes()).is_err());
        assert!(read_dataset("#dirnet-dataset v1 world.bogus=1\n".as_bytes()).is_err());
        assert!(read_dataset("#dirnet-dataset v1\n1\t2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn fmt_exact_round_trips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            prop_assert_eq!(fmt_exact(v).parse::<f64>().unwrap(), v);
        }
    }
}
