//! COCO run-length encoding.
//!
//! Runs alternate background/foreground starting with background and walk the
//! mask in column-major order. `counts` is either the compact ASCII form used
//! by COCO tooling or a plain list of run lengths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Mask;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RleCounts {
    Compact(String),
    Runs(Vec<u32>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    /// `[height, width]`.
    pub size: [usize; 2],
    pub counts: RleCounts,
}

impl Rle {
    pub fn encode(mask: &Mask) -> Self {
        let runs = mask_to_runs(mask);
        Rle {
            size: [mask.height(), mask.width()],
            counts: RleCounts::Compact(runs_to_string(&runs)),
        }
    }

    pub fn decode(&self) -> Result<Mask> {
        let [h, w] = self.size;
        let runs = match &self.counts {
            RleCounts::Compact(s) => string_to_runs(s)?,
            RleCounts::Runs(r) => r.clone(),
        };
        let total: u64 = runs.iter().map(|r| *r as u64).sum();
        if total != (h * w) as u64 {
            return Err(Error::parse(
                "mask_rle",
                format!("runs cover {total} pixels, expected {}", h * w),
            ));
        }
        let mut mask = Mask::new(w, h);
        let mut pos = 0usize;
        let mut value = false;
        for r in runs {
            if value {
                for i in pos..pos + r as usize {
                    mask.set(i / h, i % h, true);
                }
            }
            pos += r as usize;
            value = !value;
        }
        Ok(mask)
    }
}

fn mask_to_runs(mask: &Mask) -> Vec<u32> {
    let (w, h) = (mask.width(), mask.height());
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u32;
    for col in 0..w {
        for row in 0..h {
            let v = mask.get(col, row);
            if v != current {
                runs.push(len);
                len = 0;
                current = v;
            }
            len += 1;
        }
    }
    runs.push(len);
    runs
}

fn runs_to_string(runs: &[u32]) -> String {
    let mut s = String::new();
    for (i, r) in runs.iter().enumerate() {
        let mut x = *r as i64;
        if i > 2 {
            x -= runs[i - 2] as i64;
        }
        loop {
            let mut c = (x & 0x1f) as u8;
            x >>= 5;
            let more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                c |= 0x20;
            }
            s.push((c + 48) as char);
            if !more {
                break;
            }
        }
    }
    s
}

fn string_to_runs(s: &str) -> Result<Vec<u32>> {
    let bytes = s.as_bytes();
    let mut runs: Vec<u32> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0;
        loop {
            let Some(&b) = bytes.get(p) else {
                return Err(Error::parse("mask_rle", "truncated counts string"));
            };
            if !(48..48 + 64).contains(&b) || k > 12 {
                return Err(Error::parse(
                    "mask_rle",
                    format!("invalid counts character `{}`", b as char),
                ));
            }
            let c = (b - 48) as i64;
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            k += 1;
            if c & 0x20 == 0 {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
        }
        let m = runs.len();
        if m > 2 {
            x += runs[m - 2] as i64;
        }
        let run = u32::try_from(x)
            .map_err(|_| Error::parse("mask_rle", format!("negative run length {x}")))?;
        runs.push(run);
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Strings below were produced by the reference COCO encoder.

    #[test]
    fn decodes_reference_square() {
        let rle = Rle {
            size: [20, 20],
            counts: RleCounts::Compact("W3::00000000000000000Q3".into()),
        };
        let m = rle.decode().unwrap();
        assert_eq!(m.count(), 100);
        for (c, r) in m.iter_set() {
            assert!((5..15).contains(&c) && (3..13).contains(&r));
        }
        assert_eq!(Rle::encode(&m), rle);
    }

    #[test]
    fn decodes_reference_irregular() {
        let rle = Rle {
            size: [7, 9],
            counts: RleCounts::Compact("0182L000N40L20;N".into()),
        };
        let m = rle.decode().unwrap();
        let expected = Mask::from_fn(9, 7, |c, r| {
            (r == 0 && c == 0) || (r == 6 && c == 8) || ((2..5).contains(&r) && (1..7).contains(&c)) || c == 4
        });
        assert_eq!(m, expected);
        assert_eq!(m.count(), 24);
        assert_eq!(Rle::encode(&m), rle);
    }

    #[test]
    fn plain_runs_accepted() {
        let rle = Rle {
            size: [2, 2],
            counts: RleCounts::Runs(vec![1, 2, 1]),
        };
        let m = rle.decode().unwrap();
        assert!(!m.get(0, 0) && m.get(0, 1) && m.get(1, 0) && !m.get(1, 1));
    }

    #[test]
    fn rejects_wrong_total() {
        let rle = Rle {
            size: [2, 2],
            counts: RleCounts::Runs(vec![1, 2]),
        };
        assert!(rle.decode().is_err());
        let bad = Rle {
            size: [2, 2],
            counts: RleCounts::Compact("\u{7f}".into()),
        };
        assert!(bad.decode().is_err());
    }

    proptest! {
        #[test]
        fn round_trip(w in 1usize..24, h in 1usize..24, seed in any::<u64>()) {
            let mut x = seed | 1;
            let m = Mask::from_fn(w, h, |_, _| {
                x ^= x << 13; x ^= x >> 7; x ^= x << 17;
                x % 3 == 0
            });
            prop_assert_eq!(Rle::encode(&m).decode().unwrap(), m);
        }
    }
}
