//! The code metadata document: everything needed to encode, repair and
//! reconstruct, as pretty-printed JSON with a fixed key order.
//!
//! Node and row numbers in the document are 1-based. Index-array rows are
//! written as space-separated `(row,node)` pairs with `(0,0)` for empty
//! cells; coefficient rows are space-separated hex values aligned with the
//! occupied cells of the same row.

use std::fs;
use std::path::Path;

use gsrc::codec::{CoefficientTable, GeneralizedCode, MdsReport};
use gsrc::galois::{Elem, Field, FieldDesc};
use gsrc::layout::{CodeParams, IndexArray, Layout, NodeGroups, ParityPattern, Partitioning, SymbolId};
use serde::{Deserialize, Serialize};

use crate::shard::{node_label, parse_node};
use crate::CliError;

pub const FORMAT: &str = "gsrc-code";
pub const VERSION: u32 = 1;
pub const SYMBOL_ORDER: &str = "high-order-first";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeMetadata {
    pub format: String,
    pub version: u32,
    pub params: ParamsDoc,
    pub field: FieldDoc,
    pub seed: u64,
    pub symbol_order: String,
    pub verification: VerificationDoc,
    pub original_length: Option<u64>,
    pub node_groups: Vec<Vec<String>>,
    pub partitions: Vec<PartitionDoc>,
    pub index_arrays: Vec<Vec<String>>,
    pub coefficients: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDoc {
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub d: usize,
    pub alpha: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDoc {
    pub w: u8,
    pub polynomial: String,
    pub poly_hex: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationDoc {
    pub level: String,
    pub subsets_checked: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionDoc {
    pub node: String,
    pub designated: Vec<usize>,
    pub subsets: Vec<Vec<usize>>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Mismatch(format!("metadata: {}", msg.into()))
}

impl CodeMetadata {
    pub fn from_code(code: &GeneralizedCode, report: &MdsReport, original_length: Option<u64>) -> Self {
        let layout = code.layout();
        let p = layout.params;
        let desc = code.field().desc();
        let one_based = |s: &[usize]| s.iter().map(|x| x + 1).collect::<Vec<_>>();
        let pattern = code.pattern();
        CodeMetadata {
            format: FORMAT.into(),
            version: VERSION,
            params: ParamsDoc { n: p.n, k: p.k, r: p.r(), d: p.d(), alpha: p.alpha },
            field: FieldDoc { w: desc.w, polynomial: desc.poly_string(), poly_hex: format!("{:#x}", desc.full_poly()) },
            seed: p.seed,
            symbol_order: SYMBOL_ORDER.into(),
            verification: VerificationDoc {
                level: report.level.to_string(),
                subsets_checked: report.checked,
                passed: report.passed(),
            },
            original_length,
            node_groups: layout.groups.groups.iter().map(|g| g.iter().map(|&j| node_label(p.k, j)).collect()).collect(),
            partitions: layout
                .partitions
                .iter()
                .map(|part| PartitionDoc {
                    node: node_label(p.k, part.node),
                    designated: one_based(part.designated()),
                    subsets: part.subsets.iter().map(|s| one_based(s)).collect(),
                })
                .collect(),
            index_arrays: pattern
                .arrays()
                .iter()
                .map(|a| {
                    (0..a.rows())
                        .map(|i| {
                            a.row(i)
                                .iter()
                                .map(|c| c.map_or_else(|| "(0,0)".to_string(), |s| s.to_string()))
                                .collect::<Vec<_>>()
                                .join(" ")
                        })
                        .collect()
                })
                .collect(),
            coefficients: code
                .coefficients()
                .rows
                .iter()
                .map(|arr| {
                    arr.iter().map(|row| row.iter().map(|c| format!("{c:x}")).collect::<Vec<_>>().join(" ")).collect()
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metadata serializes");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let meta: CodeMetadata = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if meta.format != FORMAT || meta.version != VERSION {
            return Err(bad(format!("unsupported document {:?} version {}", meta.format, meta.version)));
        }
        if meta.symbol_order != SYMBOL_ORDER {
            return Err(bad(format!("unsupported symbol order {:?}", meta.symbol_order)));
        }
        Ok(meta)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        CodeMetadata::parse(&text).map_err(|e| match e {
            CliError::Mismatch(m) => CliError::Mismatch(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_text()).map_err(|e| CliError::io(path, e))
    }

    pub fn params(&self) -> Result<CodeParams, CliError> {
        let ParamsDoc { n, k, r, d, alpha } = self.params;
        let p = CodeParams::new(n, k, alpha, self.field.w, self.seed).map_err(|e| bad(e.to_string()))?;
        if r != p.r() || d != p.d() {
            return Err(bad("r and d are inconsistent with n and k"));
        }
        Ok(p)
    }

    /// Rebuilds the code. Structural consistency is checked; the MDS property
    /// is taken from the recorded verification.
    pub fn to_code(&self) -> Result<GeneralizedCode, CliError> {
        let p = self.params()?;
        let full = parse_hex(&self.field.poly_hex).ok_or_else(|| bad("bad poly_hex"))?;
        if full >> self.field.w != 1 {
            return Err(bad("poly_hex does not have degree w"));
        }
        let desc = FieldDesc::new(self.field.w, full & ((1 << self.field.w) - 1)).map_err(|e| bad(e.to_string()))?;
        if desc.poly_string() != self.field.polynomial {
            return Err(bad("polynomial and poly_hex disagree"));
        }
        let field = Field::new(desc).map_err(|e| bad(e.to_string()))?;

        let node = |s: &str| parse_node(p.k, p.k, s).map_err(bad);
        let groups = NodeGroups {
            groups: self
                .node_groups
                .iter()
                .map(|g| g.iter().map(|s| node(s)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<_, _>>()?,
        };
        let zero_based = |s: &[usize]| -> Result<Vec<usize>, CliError> {
            s.iter()
                .map(|&x| x.checked_sub(1).filter(|&x| x < p.alpha).ok_or_else(|| bad("row out of range")))
                .collect()
        };
        let mut partitions = Vec::with_capacity(self.partitions.len());
        for doc in &self.partitions {
            let designated = zero_based(&doc.designated)?;
            let subsets = doc.subsets.iter().map(|s| zero_based(s)).collect::<Result<Vec<_>, _>>()?;
            let rho = subsets
                .iter()
                .position(|s| *s == designated)
                .ok_or_else(|| bad(format!("designated subset of {} is not one of its subsets", doc.node)))?;
            partitions.push(Partitioning { node: node(&doc.node)?, subsets, rho });
        }

        let mut arrays = Vec::with_capacity(self.index_arrays.len());
        for rows in &self.index_arrays {
            let parsed = rows.iter().map(|r| parse_cells(r)).collect::<Result<Vec<_>, _>>()?;
            let cols = parsed.first().map_or(0, Vec::len);
            if parsed.iter().any(|r| r.len() != cols) {
                return Err(bad("index array rows differ in length"));
            }
            arrays.push(IndexArray::from_cells(parsed.len(), cols, parsed.concat()).map_err(|e| bad(e.to_string()))?);
        }
        let pattern = ParityPattern::from_arrays(p.k, arrays).map_err(|e| bad(e.to_string()))?;

        let rows = self
            .coefficients
            .iter()
            .map(|arr| arr.iter().map(|row| parse_coeff_row(row)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;

        let layout = Layout { params: p, groups, partitions, pattern };
        GeneralizedCode::from_parts(layout, field, CoefficientTable { rows }).map_err(|e| bad(e.to_string()))
    }
}

fn parse_hex(s: &str) -> Option<u32> {
    u32::from_str_radix(s.strip_prefix("0x")?, 16).ok()
}

fn parse_cells(row: &str) -> Result<Vec<Option<SymbolId>>, CliError> {
    row.split_whitespace()
        .map(|tok| {
            let inner = tok.strip_prefix('(').and_then(|t| t.strip_suffix(')'));
            let (i, j) = inner.and_then(|t| t.split_once(',')).ok_or_else(|| bad(format!("bad cell {tok:?}")))?;
            let (i, j): (usize, usize) = match (i.parse(), j.parse()) {
                (Ok(i), Ok(j)) => (i, j),
                _ => return Err(bad(format!("bad cell {tok:?}"))),
            };
            match (i, j) {
                (0, 0) => Ok(None),
                (0, _) | (_, 0) => Err(bad(format!("bad cell {tok:?}"))),
                _ => Ok(Some(SymbolId::new(i - 1, j - 1))),
            }
        })
        .collect()
}

fn parse_coeff_row(row: &str) -> Result<Vec<Elem>, CliError> {
    row.split_whitespace()
        .map(|t| Elem::from_str_radix(t, 16).map_err(|_| bad(format!("bad coefficient {t:?}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use gsrc::codec::VerifyLevel;

    fn example() -> (GeneralizedCode, MdsReport) {
        let p = CodeParams::new(5, 3, 4, 4, 3).unwrap();
        GeneralizedCode::construct(&p, VerifyLevel::Exhaustive).unwrap()
    }

    #[test]
    fn worked_example_document() {
        let (code, report) = example();
        let meta = CodeMetadata::from_code(&code, &report, None);
        assert_eq!(meta.field.polynomial, "x^4+x^3+1");
        assert_eq!(meta.field.poly_hex, "0x19");
        assert_eq!(meta.node_groups, vec![vec!["d1", "d2"], vec!["d3"]]);
        let designated: Vec<Vec<usize>> = meta.partitions.iter().map(|p| p.designated.clone()).collect();
        assert_eq!(designated, vec![vec![1, 2], vec![3, 4], vec![1, 3]]);
        assert_eq!(meta.index_arrays[1][0], "(1,1) (1,2) (1,3) (3,1) (2,3)");
        assert_eq!(meta.index_arrays[1][1], "(2,1) (2,2) (2,3) (4,1) (0,0)");
        assert_eq!(meta.verification.level, "exhaustive");
    }

    #[test]
    fn text_round_trip_is_byte_identical() {
        let (code, report) = example();
        let text = CodeMetadata::from_code(&code, &report, Some(1234)).to_text();
        let again = CodeMetadata::parse(&text).unwrap();
        assert_eq!(again.to_text(), text);
        let rebuilt = again.to_code().unwrap();
        assert_eq!(CodeMetadata::from_code(&rebuilt, &report, Some(1234)).to_text(), text);
        assert_eq!(rebuilt.coefficients(), code.coefficients());
        assert_eq!(rebuilt.layout(), code.layout());
    }

    #[test]
    fn tampering_is_rejected() {
        let (code, report) = example();
        let meta = CodeMetadata::from_code(&code, &report, None);

        let mut m = meta.clone();
        m.coefficients[0][0] = "0 1 1".into();
        assert!(m.to_code().is_err());

        let mut m = meta.clone();
        m.index_arrays[1][0] = "(1,1) (1,2) (1,3) (3,1) (3,1)".into();
        assert!(m.to_code().is_err());

        let mut m = meta.clone();
        m.partitions[0].designated = vec![1, 3];
        assert!(m.to_code().is_err());

        let mut m = meta.clone();
        m.field.poly_hex = "0x1f".into();
        assert!(m.to_code().is_err());

        let mut m = meta;
        m.params.r = 3;
        assert!(m.to_code().is_err());

        assert!(CodeMetadata::parse("{}").is_err());
    }
}
