//! Single-node repair of systematic nodes.
//!
//! To rebuild `d_l` with designated rows `S`:
//!
//! 1. read rows `S` of every surviving systematic node and of `p_1`;
//! 2. solve `a_{x,l}` for `x` in `S` from the `p_1` rows;
//! 3. read rows `S` of `p_2..p_r`;
//! 4. read the scheduled extras of those rows not already held;
//! 5. solve each remaining symbol of `d_l` from the one equation it appears in.
//!
//! Planning depends on the layout alone; execution needs the coefficients.

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::codec::GeneralizedCode;
use crate::error::{Error, Result};
use crate::galois::Elem;
use crate::layout::{div_ceil, CodeParams, Layout, SymbolId};

pub type Rational = Ratio<u64>;

/// A symbol stored on some node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SymbolRef {
    Data(SymbolId),
    /// `p_{row, parity}`, both 0-based.
    Parity {
        row: usize,
        parity: usize,
    },
}

impl SymbolRef {
    /// Node the symbol lives on, 0-based over `d_1..d_k, p_1..p_r`.
    pub fn node(&self, k: usize) -> usize {
        match *self {
            SymbolRef::Data(s) => s.node,
            SymbolRef::Parity { parity, .. } => k + parity,
        }
    }
}

impl fmt::Display for SymbolRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymbolRef::Data(s) => write!(f, "a{s}"),
            SymbolRef::Parity { row, parity } => write!(f, "p({},{})", row + 1, parity + 1),
        }
    }
}

/// Solve `target` from the equation of parity symbol `p_{row,parity}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solve {
    pub target: SymbolId,
    pub parity: usize,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairPlan {
    pub params: CodeParams,
    pub failed: usize,
    pub rows: Vec<usize>,
    pub step1: Vec<SymbolRef>,
    pub step2: Vec<Solve>,
    pub step3: Vec<SymbolRef>,
    pub step4: Vec<SymbolRef>,
    pub step5: Vec<Solve>,
}

impl RepairPlan {
    /// Every symbol the plan reads, in step order.
    pub fn reads(&self) -> impl Iterator<Item = &SymbolRef> {
        self.step1.iter().chain(&self.step3).chain(&self.step4)
    }

    /// Symbols read from each surviving node (0-based over all `n` nodes).
    pub fn reads_per_node(&self) -> Vec<usize> {
        let mut per = vec![0; self.params.n];
        for s in self.reads() {
            per[s.node(self.params.k)] += 1;
        }
        per
    }
}

/// Accounting of one repair. Every read symbol is also transferred, so the
/// two counts coincide.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairTrace {
    pub failed: usize,
    pub accessed: usize,
    pub transferred: usize,
    pub gamma: Rational,
}

/// Plans the repair of systematic node `failed` (0-based).
pub fn plan_repair(layout: &Layout, failed: usize) -> Result<RepairPlan> {
    let p = &layout.params;
    if failed >= p.k {
        return Err(Error::UnknownNode(failed + 1));
    }
    let part = &layout.partitions[failed];
    let rows = part.designated().to_vec();
    let pattern = &layout.pattern;

    let mut held: HashSet<SymbolRef> = HashSet::new();
    let mut step1 = Vec::new();
    for j in (0..p.k).filter(|&j| j != failed) {
        for &x in &rows {
            step1.push(SymbolRef::Data(SymbolId::new(x, j)));
        }
    }
    for &x in &rows {
        step1.push(SymbolRef::Parity { row: x, parity: 0 });
    }
    held.extend(step1.iter().copied());

    let step2 = rows.iter().map(|&x| Solve { target: SymbolId::new(x, failed), parity: 0, row: x }).collect();

    let mut step3 = Vec::new();
    for l in 1..p.r() {
        for &x in &rows {
            step3.push(SymbolRef::Parity { row: x, parity: l });
        }
    }
    held.extend(step3.iter().copied());

    // Each unknown appears in at most one cell per equation, and each
    // equation holds at most one unknown of the failed node, so the first
    // equation mentioning an unknown is the one that solves it.
    let mut solver: HashMap<SymbolId, (usize, usize)> = HashMap::new();
    for l in 1..p.r() {
        for &x in &rows {
            for sym in pattern.row_symbols(l, x).skip(p.k) {
                if sym.node == failed {
                    solver.entry(sym).or_insert((l, x));
                }
            }
        }
    }
    let mut step5 = Vec::new();
    for i in (0..p.alpha).filter(|&i| !part.is_designated(i)) {
        let target = SymbolId::new(i, failed);
        let &(parity, row) = solver.get(&target).ok_or(Error::UnsolvableSchedule {
            node: failed + 1,
            row: i + 1,
            unknown_node: failed + 1,
        })?;
        step5.push(Solve { target, parity, row });
    }
    step5.sort_by_key(|s| (s.parity, s.row));

    let mut step4 = Vec::new();
    for s in &step5 {
        for sym in pattern.row_symbols(s.parity, s.row) {
            let r = SymbolRef::Data(sym);
            if sym.node != failed && held.insert(r) {
                step4.push(r);
            }
        }
    }

    Ok(RepairPlan { params: *p, failed, rows, step1, step2, step3, step4, step5 })
}

/// `(n-1) * ceil(alpha/r) / alpha`.
pub fn lower_bound(p: &CodeParams) -> Rational {
    Ratio::new(((p.n - 1) * p.portion()) as u64, p.alpha as u64)
}

/// Lower bound plus `(r-1) * ceil(alpha/r) * ceil(k/r) / alpha`.
pub fn upper_bound(p: &CodeParams) -> Rational {
    let extra = (p.r() - 1) * p.portion() * div_ceil(p.k, p.r());
    lower_bound(p) + Ratio::new(extra as u64, p.alpha as u64)
}

/// Bandwidth of a plan in units of `alpha` symbols, checked against the bounds.
pub fn bandwidth(plan: &RepairPlan) -> Result<RepairTrace> {
    let p = &plan.params;
    let accessed = plan.reads().count();
    let gamma = Ratio::new(accessed as u64, p.alpha as u64);
    let (lo, hi) = (lower_bound(p), upper_bound(p));
    if gamma < lo || gamma > hi {
        return Err(Error::BoundViolation {
            node: plan.failed + 1,
            gamma: gamma.to_string(),
            lower: lo.to_string(),
            upper: hi.to_string(),
        });
    }
    Ok(RepairTrace { failed: plan.failed, accessed, transferred: accessed, gamma })
}

/// Mean repair bandwidth over all systematic nodes.
pub fn average_repair_bandwidth(layout: &Layout) -> Result<Rational> {
    let k = layout.params.k;
    let mut total = Rational::from_integer(0);
    for l in 0..k {
        total += bandwidth(&plan_repair(layout, l)?)?.gamma;
    }
    Ok(total / Rational::from_integer(k as u64))
}

/// Minimum-storage point at `d = n - 1` for a file of `m` symbols:
/// `(alpha, gamma)` with `alpha = m/k` and `gamma = alpha (n-1)/(n-k)`, both in
/// symbols. Divide `gamma` by `alpha` for node units.
pub fn msr_point(n: usize, k: usize, m: u64) -> (Rational, Rational) {
    let alpha = Ratio::new(m, k as u64);
    (alpha, alpha * Ratio::new((n - 1) as u64, (n - k) as u64))
}

/// Runs `plan` against the surviving symbols returned by `fetch` and returns
/// the `alpha` symbols of the failed node. `fetch` is only asked for symbols
/// the plan lists.
pub fn execute_repair<F>(code: &GeneralizedCode, plan: &RepairPlan, mut fetch: F) -> Result<Vec<Elem>>
where
    F: FnMut(SymbolRef) -> Option<Elem>,
{
    let field = code.field();
    let mut known: HashMap<SymbolRef, Elem> = HashMap::new();
    for &s in plan.reads() {
        let v = fetch(s).ok_or_else(|| Error::MissingSymbol(s.to_string()))?;
        known.insert(s, v);
    }
    for s in plan.step2.iter().chain(&plan.step5) {
        let mut acc = *known
            .get(&SymbolRef::Parity { row: s.row, parity: s.parity })
            .ok_or_else(|| Error::MissingSymbol(format!("p({},{})", s.row + 1, s.parity + 1)))?;
        let mut coef = 0;
        for &(sym, c) in code.equation(s.parity, s.row) {
            if sym == s.target {
                coef = c;
                continue;
            }
            let v = known.get(&SymbolRef::Data(sym)).ok_or_else(|| Error::MissingSymbol(format!("a{sym}")))?;
            acc = field.add(acc, field.mul(c, *v));
        }
        let v = field.div(acc, coef)?;
        known.insert(SymbolRef::Data(s.target), v);
    }
    (0..plan.params.alpha)
        .map(|i| {
            known
                .get(&SymbolRef::Data(SymbolId::new(i, plan.failed)))
                .copied()
                .ok_or_else(|| Error::MissingSymbol(format!("a({},{})", i + 1, plan.failed + 1)))
        })
        .collect()
}
