//! Coefficients, encoding, reconstruction and MDS verification.

use std::collections::BTreeSet;
use std::fmt;

use log::warn;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::{Elem, Field, FieldMatrix};
use crate::layout::{build_layout, CodeParams, Layout, ParityPattern, SymbolId};

/// Retry budget for coefficient draws.
pub const MAX_DRAWS: u32 = 64;

/// Exhaustive verification is used while `C(n,k) * (r alpha)^3` stays under this.
pub const EXHAUSTIVE_BUDGET: f64 = 1e10;

/// Default number of random subsets for sampled verification.
pub const DEFAULT_SAMPLES: usize = 200;

/// Per parity array, per row, one nonzero coefficient for each occupied cell
/// of that row, in column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub rows: Vec<Vec<Vec<Elem>>>,
}

impl CoefficientTable {
    pub fn random<R: Rng + ?Sized>(pattern: &ParityPattern, field: &Field, rng: &mut R) -> Self {
        let rows = (0..pattern.parities())
            .map(|l| {
                (0..pattern.alpha())
                    .map(|i| pattern.row_symbols(l, i).map(|_| field.random_nonzero(rng)).collect())
                    .collect()
            })
            .collect();
        CoefficientTable { rows }
    }

    fn check(&self, pattern: &ParityPattern, field: &Field) -> Result<()> {
        if self.rows.len() != pattern.parities() {
            return Err(Error::Format("coefficient table has the wrong number of arrays".into()));
        }
        for (l, arr) in self.rows.iter().enumerate() {
            if arr.len() != pattern.alpha() {
                return Err(Error::Format(format!("coefficients of P_{} have the wrong row count", l + 1)));
            }
            for (i, row) in arr.iter().enumerate() {
                if row.len() != pattern.row_symbols(l, i).count() {
                    return Err(Error::Format(format!(
                        "coefficients of P_{} row {} do not match its occupied cells",
                        l + 1,
                        i + 1
                    )));
                }
                for &c in row {
                    if c == 0 || field.elem(c as u32).is_err() {
                        return Err(Error::Format(format!(
                            "coefficient {c:#x} in P_{} row {} is zero or out of range",
                            l + 1,
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// How thoroughly to check the MDS property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyLevel {
    /// Every `k`-subset of the `n` nodes.
    Exhaustive,
    /// `N` random `k`-subsets plus every subset that keeps all parity nodes.
    Sampled(usize),
    /// Exhaustive when affordable, otherwise `Sampled(DEFAULT_SAMPLES)`.
    Auto,
}

impl VerifyLevel {
    pub fn resolve(self, params: &CodeParams) -> VerifyLevel {
        match self {
            VerifyLevel::Auto => {
                let cost = binomial(params.n, params.k) * ((params.r() * params.alpha) as f64).powi(3);
                if cost <= EXHAUSTIVE_BUDGET {
                    VerifyLevel::Exhaustive
                } else {
                    VerifyLevel::Sampled(DEFAULT_SAMPLES)
                }
            }
            other => other,
        }
    }
}

impl fmt::Display for VerifyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyLevel::Exhaustive => write!(f, "exhaustive"),
            VerifyLevel::Sampled(n) => write!(f, "sampled({n})"),
            VerifyLevel::Auto => write!(f, "auto"),
        }
    }
}

impl std::str::FromStr for VerifyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("unknown verification level {s:?}"));
        match s {
            "exhaustive" => Ok(VerifyLevel::Exhaustive),
            "auto" => Ok(VerifyLevel::Auto),
            "sampled" => Ok(VerifyLevel::Sampled(DEFAULT_SAMPLES)),
            _ => {
                let n = s.strip_prefix("sampled(").and_then(|t| t.strip_suffix(')')).ok_or_else(bad)?;
                n.parse().map(VerifyLevel::Sampled).map_err(|_| bad())
            }
        }
    }
}

/// Outcome of an MDS check. Subsets are 0-based node indexes over
/// `d_1..d_k, p_1..p_r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdsReport {
    pub level: VerifyLevel,
    pub checked: usize,
    pub failing: Vec<Vec<usize>>,
}

impl MdsReport {
    pub fn passed(&self) -> bool {
        self.failing.is_empty()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `k * alpha` data symbols, node-major: `data[j * alpha + i]` is `a_{i,j}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stripe {
    pub k: usize,
    pub alpha: usize,
    pub data: Vec<Elem>,
}

impl Stripe {
    pub fn new(k: usize, alpha: usize, data: Vec<Elem>) -> Result<Self> {
        if data.len() != k * alpha {
            return Err(Error::ShapeMismatch(format!("{} symbols for a {k}x{alpha} stripe", data.len())));
        }
        Ok(Stripe { k, alpha, data })
    }

    pub fn zeros(params: &CodeParams) -> Self {
        Stripe { k: params.k, alpha: params.alpha, data: vec![0; params.k * params.alpha] }
    }

    pub fn random<R: Rng + ?Sized>(params: &CodeParams, field: &Field, rng: &mut R) -> Self {
        let data = (0..params.k * params.alpha).map(|_| field.random(rng)).collect();
        Stripe { k: params.k, alpha: params.alpha, data }
    }

    pub fn node(&self, j: usize) -> &[Elem] {
        &self.data[j * self.alpha..(j + 1) * self.alpha]
    }

    pub fn get(&self, s: SymbolId) -> Elem {
        self.data[s.node * self.alpha + s.row]
    }
}

/// All `n * alpha` symbols of an encoded stripe, node-major; nodes
/// `0..k` are systematic and `k..n` are parities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedStripe {
    pub k: usize,
    pub alpha: usize,
    pub data: Vec<Elem>,
}

impl CodedStripe {
    pub fn n(&self) -> usize {
        self.data.len() / self.alpha
    }

    pub fn node(&self, j: usize) -> &[Elem] {
        &self.data[j * self.alpha..(j + 1) * self.alpha]
    }

    pub fn systematic(&self) -> Stripe {
        Stripe { k: self.k, alpha: self.alpha, data: self.data[..self.k * self.alpha].to_vec() }
    }

    /// `p_{row, l}` with 0-based `l`.
    pub fn parity(&self, row: usize, l: usize) -> Elem {
        self.data[(self.k + l) * self.alpha + row]
    }
}

/// A code ready for use: layout, field and coefficient table.
#[derive(Debug, Clone)]
pub struct GeneralizedCode {
    layout: Layout,
    field: Field,
    coeffs: CoefficientTable,
    equations: Vec<Vec<Vec<(SymbolId, Elem)>>>,
}

impl GeneralizedCode {
    /// Builds the layout for `params`, then draws coefficients over the
    /// params' default field until `level` verification passes.
    pub fn construct(params: &CodeParams, level: VerifyLevel) -> Result<(Self, MdsReport)> {
        let layout = build_layout(params)?;
        let field = Field::new(params.field_desc()?)?;
        let (coeffs, report) = assign_coefficients(&layout, &field, params.seed, level)?;
        Ok((GeneralizedCode::from_parts(layout, field, coeffs)?, report))
    }

    /// Assembles a code without verifying it.
    pub fn from_parts(layout: Layout, field: Field, coeffs: CoefficientTable) -> Result<Self> {
        layout.validate()?;
        coeffs.check(&layout.pattern, &field)?;
        let pattern = &layout.pattern;
        let equations = (0..pattern.parities())
            .map(|l| {
                (0..pattern.alpha())
                    .map(|i| pattern.row_symbols(l, i).zip(coeffs.rows[l][i].iter().copied()).collect())
                    .collect()
            })
            .collect();
        Ok(GeneralizedCode { layout, field, coeffs, equations })
    }

    pub fn params(&self) -> &CodeParams {
        &self.layout.params
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn pattern(&self) -> &ParityPattern {
        &self.layout.pattern
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn coefficients(&self) -> &CoefficientTable {
        &self.coeffs
    }

    /// Terms of parity symbol `p_{row,l}` (0-based `l`).
    pub fn equation(&self, l: usize, row: usize) -> &[(SymbolId, Elem)] {
        &self.equations[l][row]
    }

    /// Prepares a decoder for the given set of `k` distinct nodes (0-based).
    pub fn decoder(&self, nodes: &[usize]) -> Result<Decoder> {
        Decoder::new(self, nodes)
    }
}

/// Draws coefficient tables from a ChaCha8 stream seeded with `seed` until one
/// passes verification at `level`.
pub fn assign_coefficients(
    layout: &Layout,
    field: &Field,
    seed: u64,
    level: VerifyLevel,
) -> Result<(CoefficientTable, MdsReport)> {
    let p = &layout.params;
    let bound = binomial(p.n, p.k) * (p.r() * p.alpha) as f64;
    if (field.order() as f64) < bound {
        warn!(
            "GF(2^{}) is below the sufficient field size {bound} for ({}, {}, alpha={}); relying on verification",
            field.w(),
            p.n,
            p.k,
            p.alpha
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_DRAWS {
        let coeffs = CoefficientTable::random(&layout.pattern, field, &mut rng);
        let code = GeneralizedCode::from_parts(layout.clone(), field.clone(), coeffs)?;
        let report = verify_mds(&code, level);
        if report.passed() {
            return Ok((code.coeffs, report));
        }
    }
    Err(Error::MdsSearchExhausted { attempts: MAX_DRAWS })
}

/// Parity symbols for a stripe; the systematic part is copied verbatim.
pub fn encode(code: &GeneralizedCode, s: &Stripe) -> Result<CodedStripe> {
    let p = code.params();
    if s.k != p.k || s.alpha != p.alpha || s.data.len() != p.k * p.alpha {
        return Err(Error::ShapeMismatch(format!("stripe is {}x{}, code is {}x{}", s.k, s.alpha, p.k, p.alpha)));
    }
    let f = code.field();
    let mut data = Vec::with_capacity(p.n * p.alpha);
    data.extend_from_slice(&s.data);
    for l in 0..p.r() {
        for i in 0..p.alpha {
            let v = code.equation(l, i).iter().fold(0, |acc, &(sym, c)| f.add(acc, f.mul(c, s.get(sym))));
            data.push(v);
        }
    }
    Ok(CodedStripe { k: p.k, alpha: p.alpha, data })
}

/// Recovers the stripe from `k` node shards given as `(node, symbols)`.
pub fn reconstruct(code: &GeneralizedCode, available: &[(usize, &[Elem])]) -> Result<Stripe> {
    let nodes: Vec<usize> = available.iter().map(|(j, _)| *j).collect();
    let shards: Vec<&[Elem]> = available.iter().map(|(_, s)| *s).collect();
    code.decoder(&nodes)?.decode(&shards)
}

type Terms = Vec<(SymbolId, Elem)>;

/// Decoding matrices for one particular set of surviving nodes.
#[derive(Debug, Clone)]
pub struct Decoder {
    field: Field,
    k: usize,
    r: usize,
    alpha: usize,
    nodes: Vec<usize>,
    /// Missing systematic nodes, whose symbols are the unknowns.
    missing: Vec<usize>,
    /// `(parity, row)` of each equation used, with its known terms.
    rows: Vec<(usize, usize, Terms)>,
    inverse: FieldMatrix,
}

impl Decoder {
    fn new(code: &GeneralizedCode, nodes: &[usize]) -> Result<Self> {
        let p = code.params();
        let distinct: BTreeSet<usize> = nodes.iter().copied().collect();
        if nodes.len() != p.k || distinct.len() != p.k {
            return Err(Error::WrongNodeCount { expected: p.k, got: distinct.len() });
        }
        if let Some(&bad) = distinct.iter().find(|&&j| j >= p.n) {
            return Err(Error::UnknownNode(bad + 1));
        }
        let (a, missing, rows) = system(code, &distinct);
        let inverse = a
            .inverse(code.field())
            .map_err(|_| Error::SingularSystem { nodes: distinct.iter().map(|j| j + 1).collect() })?;
        Ok(Decoder {
            field: code.field().clone(),
            k: p.k,
            r: p.r(),
            alpha: p.alpha,
            nodes: nodes.to_vec(),
            missing,
            rows,
            inverse,
        })
    }

    /// Decodes one stripe; `shards[t]` holds the symbols of `nodes[t]`.
    pub fn decode(&self, shards: &[&[Elem]]) -> Result<Stripe> {
        let (k, alpha, f) = (self.k, self.alpha, &self.field);
        if shards.len() != self.nodes.len() {
            return Err(Error::WrongNodeCount { expected: self.nodes.len(), got: shards.len() });
        }
        if let Some(bad) = shards.iter().find(|s| s.len() != alpha) {
            return Err(Error::ShapeMismatch(format!("shard holds {} symbols, expected {alpha}", bad.len())));
        }
        let mut data = vec![0; k * alpha];
        let mut parity: Vec<Option<&[Elem]>> = vec![None; self.r];
        for (&j, s) in self.nodes.iter().zip(shards) {
            if j < k {
                data[j * alpha..(j + 1) * alpha].copy_from_slice(s);
            } else {
                parity[j - k] = Some(s);
            }
        }
        let rhs: Vec<Elem> = self
            .rows
            .iter()
            .map(|(l, i, known)| {
                let p = parity[*l].expect("equation from a supplied parity")[*i];
                known.iter().fold(p, |acc, &(sym, c)| f.add(acc, f.mul(c, data[sym.node * alpha + sym.row])))
            })
            .collect();
        let mut solved = vec![0; rhs.len()];
        for (u, out) in solved.iter_mut().enumerate() {
            let row = self.inverse.row(u);
            *out = row.iter().zip(&rhs).fold(0, |acc, (&a, &b)| f.add(acc, f.mul(a, b)));
        }
        for (t, &j) in self.missing.iter().enumerate() {
            data[j * alpha..(j + 1) * alpha].copy_from_slice(&solved[t * alpha..(t + 1) * alpha]);
        }
        Ok(Stripe { k, alpha, data })
    }
}

type Equations = Vec<(usize, usize, Vec<(SymbolId, Elem)>)>;

/// The square system over the symbols of the missing systematic nodes,
/// using every row of every supplied parity.
fn system(code: &GeneralizedCode, nodes: &BTreeSet<usize>) -> (FieldMatrix, Vec<usize>, Equations) {
    let p = code.params();
    let alpha = p.alpha;
    let missing: Vec<usize> = (0..p.k).filter(|j| !nodes.contains(j)).collect();
    let mut col = vec![usize::MAX; p.k];
    for (t, &j) in missing.iter().enumerate() {
        col[j] = t;
    }
    let size = missing.len() * alpha;
    let mut a = FieldMatrix::zeros(size, size);
    let mut rows = Vec::with_capacity(size);
    for (r, l) in nodes.iter().filter(|&&j| j >= p.k).map(|&j| j - p.k).enumerate() {
        for i in 0..alpha {
            let mut known = Vec::new();
            for &(sym, c) in code.equation(l, i) {
                match col[sym.node] {
                    usize::MAX => known.push((sym, c)),
                    t => a[(r * alpha + i, t * alpha + sym.row)] = c,
                }
            }
            rows.push((l, i, known));
        }
    }
    (a, missing, rows)
}

fn subset_solvable(code: &GeneralizedCode, nodes: &BTreeSet<usize>) -> bool {
    let (a, _, _) = system(code, nodes);
    a.rank(code.field()) == a.rows()
}

/// Checks that the chosen `k`-subsets of nodes each determine the stripe.
pub fn verify_mds(code: &GeneralizedCode, level: VerifyLevel) -> MdsReport {
    let p = code.params();
    let level = level.resolve(p);
    let subsets: Vec<BTreeSet<usize>> = match level {
        VerifyLevel::Exhaustive => k_subsets(p.n, p.k),
        VerifyLevel::Sampled(count) => {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed ^ 0x5eed_5eed);
            let mut chosen: BTreeSet<Vec<usize>> = BTreeSet::new();
            for _ in 0..count {
                let mut s = sample(&mut rng, p.n, p.k).into_vec();
                s.sort_unstable();
                chosen.insert(s);
            }
            // All parities present: the largest systems.
            let keep = p.k.saturating_sub(p.r());
            for sys in k_subsets(p.k, keep) {
                let mut s: Vec<usize> = sys.into_iter().collect();
                s.extend((p.k..p.n).take(p.k - keep));
                chosen.insert(s);
            }
            chosen.into_iter().map(|s| s.into_iter().collect()).collect()
        }
        VerifyLevel::Auto => unreachable!("resolved above"),
    };
    let failing = subsets.iter().filter(|s| !subset_solvable(code, s)).map(|s| s.iter().copied().collect()).collect();
    MdsReport { level, checked: subsets.len(), failing }
}

fn k_subsets(n: usize, k: usize) -> Vec<BTreeSet<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().copied().collect());
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else { break };
        idx[pos] += 1;
        for i in pos + 1..k {
            idx[i] = idx[i - 1] + 1;
        }
    }
    out
}
