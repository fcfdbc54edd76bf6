//! Index-array construction.
//!
//! Every parity node `l` owns an index array `P_l` with `alpha` rows. Row `i`
//! of `P_l` lists the data symbols combined into parity symbol `p_{i,l}`. The
//! first array is the plain row layout; arrays `P_2..P_r` carry
//! `ceil(k/r)` extra columns, one per node group, into which the
//! non-designated symbols of that group's nodes are scheduled.
//!
//! Construction walks the systematic nodes group by group. Each node gets a
//! valid partitioning of its row indexes into `r` subsets, one of which (the
//! designated subset, `portion = ceil(alpha/r)` rows) is what the node reads
//! from every survivor when it is repaired. The remaining symbols of the node
//! are scheduled into the designated rows of the group's extra column, so that
//! repair can solve each of them from a single parity equation.
//!
//! While the granulation level `run = ceil(alpha / r^nu)` of group `nu` is
//! above one, designated subsets are drawn from run/step patterns (runs of
//! `run` consecutive rows, consecutive runs separated by `step` rows). Later
//! groups only need distinct designated subsets, but still try the stride
//! pattern first since it keeps repair reads local.

use std::collections::HashSet;
use std::fmt;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::FieldDesc;

pub(crate) fn div_ceil(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// `ceil(alpha / r^e)`, treating overflowing powers as "larger than alpha".
fn ceil_div_pow(alpha: usize, r: usize, e: u32) -> usize {
    match r.checked_pow(e) {
        Some(p) => div_ceil(alpha, p),
        None => 1,
    }
}

/// Code parameters `(n, k, alpha)` plus field width and coefficient seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeParams {
    pub n: usize,
    pub k: usize,
    pub alpha: usize,
    pub w: u8,
    pub seed: u64,
}

impl CodeParams {
    pub fn new(n: usize, k: usize, alpha: usize, w: u8, seed: u64) -> Result<Self> {
        let p = CodeParams { n, k, alpha, w, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let CodeParams { n, k, alpha, w, .. } = *self;
        if k < 2 || k >= n {
            return Err(Error::InvalidParams(format!("need 2 <= k < n, got n={n} k={k}")));
        }
        if !matches!(w, 4 | 8 | 16) {
            return Err(Error::InvalidParams(format!("field width w={w} not in {{4, 8, 16}}")));
        }
        if alpha == 0 {
            return Err(Error::InvalidParams("alpha must be at least 1".into()));
        }
        if let Some(max) = self.max_alpha() {
            if alpha > max {
                return Err(Error::InvalidParams(format!("alpha={alpha} exceeds r^ceil(k/r) = {max}")));
            }
        }
        Ok(())
    }

    /// Number of parity nodes.
    pub fn r(&self) -> usize {
        self.n - self.k
    }

    /// Repair degree; always `n - 1`.
    pub fn d(&self) -> usize {
        self.n - 1
    }

    /// Number of node groups, `ceil(k/r)`, which is also the number of extra
    /// columns in `P_2..P_r`.
    pub fn groups(&self) -> usize {
        div_ceil(self.k, self.r())
    }

    /// `ceil(alpha/r)`: size of every designated subset.
    pub fn portion(&self) -> usize {
        div_ceil(self.alpha, self.r())
    }

    /// `r^ceil(k/r)`, or `None` if it does not fit in `usize`.
    pub fn max_alpha(&self) -> Option<usize> {
        self.r().checked_pow(self.groups() as u32)
    }

    /// File size `M = k * alpha` in symbols.
    pub fn file_symbols(&self) -> usize {
        self.k * self.alpha
    }

    /// Granulation level of group `nu` (1-based).
    pub fn run(&self, nu: usize) -> usize {
        ceil_div_pow(self.alpha, self.r(), nu as u32)
    }

    /// Distance between consecutive runs for group `nu` (1-based): the block
    /// size of the previous level minus the run length. The first group has a
    /// single run, so its step is taken against `portion` and comes out zero.
    pub fn step(&self, nu: usize) -> usize {
        ceil_div_pow(self.alpha, self.r(), nu.max(2) as u32 - 1) - self.run(nu)
    }

    pub fn field_desc(&self) -> Result<FieldDesc> {
        FieldDesc::default_for(self.w)
    }
}

/// A data symbol `a_{row,node}`; both indexes are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymbolId {
    pub row: usize,
    pub node: usize,
}

impl SymbolId {
    pub fn new(row: usize, node: usize) -> Self {
        SymbolId { row, node }
    }
}

impl fmt::Display for SymbolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row + 1, self.node + 1)
    }
}

/// A slot of an index array; `None` is the unassigned `(0,0)` pair.
pub type Cell = Option<SymbolId>;

/// One `alpha x cols` index array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexArray {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
}

impl IndexArray {
    fn new(rows: usize, cols: usize, k: usize) -> Self {
        let mut cells = vec![None; rows * cols];
        for i in 0..rows {
            for j in 0..k {
                cells[i * cols + j] = Some(SymbolId::new(i, j));
            }
        }
        IndexArray { rows, cols, cells }
    }

    pub fn from_cells(rows: usize, cols: usize, cells: Vec<Cell>) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!("{} cells for a {rows}x{cols} index array", cells.len())));
        }
        Ok(IndexArray { rows, cols, cells })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.cols + col]
    }

    fn set(&mut self, row: usize, col: usize, cell: Cell) {
        self.cells[row * self.cols + col] = cell;
    }

    pub fn row(&self, row: usize) -> &[Cell] {
        &self.cells[row * self.cols..(row + 1) * self.cols]
    }
}

/// The `r` index arrays `P_1..P_r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityPattern {
    k: usize,
    arrays: Vec<IndexArray>,
}

impl ParityPattern {
    /// Fresh pattern: identity rows everywhere, all extra cells unassigned.
    pub fn empty(params: &CodeParams) -> Self {
        let (k, alpha) = (params.k, params.alpha);
        let mut arrays = vec![IndexArray::new(alpha, k, k)];
        for _ in 1..params.r() {
            arrays.push(IndexArray::new(alpha, k + params.groups(), k));
        }
        ParityPattern { k, arrays }
    }

    pub fn from_arrays(k: usize, arrays: Vec<IndexArray>) -> Result<Self> {
        let pattern = ParityPattern { k, arrays };
        pattern.check_shape()?;
        Ok(pattern)
    }

    fn check_shape(&self) -> Result<()> {
        let first = self.arrays.first().ok_or_else(|| Error::Format("no index arrays".into()))?;
        let alpha = first.rows;
        if first.cols != self.k {
            return Err(Error::Format("P_1 must have exactly k columns".into()));
        }
        for (l, a) in self.arrays.iter().enumerate() {
            if a.rows != alpha || (l > 0 && a.cols < self.k) {
                return Err(Error::Format(format!("index array P_{} has a bad shape", l + 1)));
            }
            for i in 0..alpha {
                for j in 0..self.k {
                    if a.get(i, j) != Some(SymbolId::new(i, j)) {
                        return Err(Error::Format(format!(
                            "P_{} row {} column {} is not the row symbol",
                            l + 1,
                            i + 1,
                            j + 1
                        )));
                    }
                }
                let mut seen = HashSet::new();
                for cell in a.row(i).iter().flatten() {
                    if cell.row >= alpha || cell.node >= self.k || !seen.insert(*cell) {
                        return Err(Error::Format(format!(
                            "P_{} row {} holds invalid or repeated symbol {cell}",
                            l + 1,
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> usize {
        self.arrays[0].rows
    }

    /// Number of parity nodes `r`.
    pub fn parities(&self) -> usize {
        self.arrays.len()
    }

    /// Number of extra columns in `P_2..P_r`.
    pub fn extra_columns(&self) -> usize {
        self.arrays.get(1).map_or(0, |a| a.cols - self.k)
    }

    /// Index array of parity `l` (0-based: `array(0)` is `P_1`).
    pub fn array(&self, l: usize) -> &IndexArray {
        &self.arrays[l]
    }

    pub fn arrays(&self) -> &[IndexArray] {
        &self.arrays
    }

    /// Cell of extra column `group` (0-based) in row `row` of parity `l >= 1`.
    pub fn extra(&self, l: usize, row: usize, group: usize) -> Cell {
        self.arrays[l].get(row, self.k + group)
    }

    fn set_extra(&mut self, l: usize, row: usize, group: usize, cell: Cell) {
        let k = self.k;
        self.arrays[l].set(row, k + group, cell);
    }

    /// Symbols combined into parity symbol `p_{row,l}`, in column order.
    pub fn row_symbols(&self, l: usize, row: usize) -> impl Iterator<Item = SymbolId> + '_ {
        self.arrays[l].row(row).iter().flatten().copied()
    }
}

impl fmt::Display for ParityPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (l, a) in self.arrays.iter().enumerate() {
            writeln!(f, "P_{}:", l + 1)?;
            for i in 0..a.rows {
                let row: Vec<String> =
                    a.row(i).iter().map(|c| c.map_or_else(|| "(0,0)".to_string(), |s| s.to_string())).collect();
                writeln!(f, "  {}", row.join(" "))?;
            }
        }
        Ok(())
    }
}

/// A valid partitioning of one node's row indexes `{0..alpha}` into `r`
/// disjoint subsets (some possibly empty when `alpha < r`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partitioning {
    pub node: usize,
    /// Sorted internally and by smallest element; empty subsets last.
    pub subsets: Vec<Vec<usize>>,
    /// Index of the designated subset in `subsets`.
    pub rho: usize,
}

impl Partitioning {
    fn new(node: usize, designated: &[usize], mut subsets: Vec<Vec<usize>>) -> Self {
        for s in subsets.iter_mut() {
            s.sort_unstable();
        }
        subsets.sort_by_key(|s| s.first().copied().unwrap_or(usize::MAX));
        let rho = subsets.iter().position(|s| s == designated).expect("designated subset present");
        Partitioning { node, subsets, rho }
    }

    pub fn designated(&self) -> &[usize] {
        &self.subsets[self.rho]
    }

    /// Non-designated subsets in increasing order.
    pub fn others(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.subsets.iter().enumerate().filter(|(i, _)| *i != self.rho).map(|(_, s)| s)
    }

    pub fn is_designated(&self, row: usize) -> bool {
        self.designated().binary_search(&row).is_ok()
    }

    fn family(&self) -> HashSet<Vec<usize>> {
        self.subsets.iter().filter(|s| !s.is_empty()).cloned().collect()
    }
}

/// The node groups `J_1..J_{ceil(k/r)}` in natural order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeGroups {
    pub groups: Vec<Vec<usize>>,
}

impl NodeGroups {
    /// Group index (0-based) and position within the group of `node`.
    pub fn locate(&self, node: usize) -> Option<(usize, usize)> {
        self.groups.iter().enumerate().find_map(|(g, members)| members.iter().position(|&m| m == node).map(|p| (g, p)))
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Splits `d_1..d_k` into consecutive groups of `r` nodes.
pub fn partition_nodes(params: &CodeParams) -> NodeGroups {
    let r = params.r();
    let groups = (0..params.k).collect::<Vec<_>>().chunks(r).map(<[usize]>::to_vec).collect();
    NodeGroups { groups }
}

/// Construction phase of a node's group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// `run > 1`: the designated subset must follow the run/step pattern.
    Structured,
    /// Only distinctness of designated subsets is required.
    Distinct,
}

/// A complete layout: params, node groups, per-node partitionings and the
/// resulting index arrays. Depends only on `(n, k, alpha)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub params: CodeParams,
    pub groups: NodeGroups,
    pub partitions: Vec<Partitioning>,
    pub pattern: ParityPattern,
}

impl Layout {
    pub fn designated(&self, node: usize) -> &[usize] {
        self.partitions[node].designated()
    }

    /// Cross-checks partitions against the pattern: every scheduled symbol of
    /// node `j` sits in a designated row of `j`, in `j`'s group column, and
    /// every non-designated symbol of `j` is scheduled exactly once.
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let pattern = &self.pattern;
        if pattern.k() != p.k || pattern.alpha() != p.alpha || pattern.parities() != p.r() {
            return Err(Error::Format("pattern shape does not match params".into()));
        }
        if p.r() > 1 && pattern.extra_columns() != p.groups() {
            return Err(Error::Format("pattern has the wrong number of extra columns".into()));
        }
        if self.partitions.len() != p.k {
            return Err(Error::Format("need one partitioning per systematic node".into()));
        }
        let mut scheduled = vec![0usize; p.k * p.alpha];
        for l in 1..p.r() {
            for row in 0..p.alpha {
                for g in 0..p.groups() {
                    let Some(sym) = pattern.extra(l, row, g) else { continue };
                    let part = &self.partitions[sym.node];
                    let in_group = self.groups.locate(sym.node).map(|(gg, _)| gg) == Some(g);
                    if !in_group || !part.is_designated(row) || part.is_designated(sym.row) {
                        return Err(Error::Format(format!(
                            "P_{} row {} column {} holds misplaced symbol {sym}",
                            l + 1,
                            row + 1,
                            p.k + g + 1
                        )));
                    }
                    scheduled[sym.node * p.alpha + sym.row] += 1;
                }
            }
        }
        for (j, part) in self.partitions.iter().enumerate() {
            let mut all: Vec<usize> = part.subsets.concat();
            all.sort_unstable();
            if part.node != j || all != (0..p.alpha).collect::<Vec<_>>() {
                return Err(Error::Format(format!("partitioning of d{} is not a partition", j + 1)));
            }
            if part.designated().len() != p.portion() {
                return Err(Error::Format(format!(
                    "designated subset of d{} does not have {} rows",
                    j + 1,
                    p.portion()
                )));
            }
            for row in 0..p.alpha {
                let want = usize::from(!part.is_designated(row));
                if scheduled[j * p.alpha + row] != want {
                    return Err(Error::Format(format!(
                        "symbol ({},{}) scheduled {} times",
                        row + 1,
                        j + 1,
                        scheduled[j * p.alpha + row]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Rows generated by laying out runs of `run` consecutive indexes, each run
/// starting `run + step` after the previous one, from `start`, until `size`
/// indexes are collected. Positions are taken modulo `alpha`. A run may not
/// straddle the `alpha -> 1` boundary unless `wrap_runs` is set.
fn run_pattern(
    alpha: usize,
    start: usize,
    run: usize,
    step: usize,
    size: usize,
    wrap_runs: bool,
) -> Option<Vec<usize>> {
    if run == 0 || size > alpha {
        return None;
    }
    let mut seen = vec![false; alpha];
    let mut out = Vec::with_capacity(size);
    let mut pos = start;
    while out.len() < size {
        for q in 0..run {
            if out.len() == size {
                break;
            }
            let x = (pos + q) % alpha;
            if (q > 0 && x == 0 && !wrap_runs) || seen[x] {
                return None;
            }
            seen[x] = true;
            out.push(x);
        }
        pos += run + step;
    }
    out.sort_unstable();
    Some(out)
}

/// Condition 1: `designated` consists of runs of `run` consecutive rows whose
/// starts are `run + step` apart, measured cyclically over `alpha` rows.
pub fn check_condition1(designated: &[usize], alpha: usize, run: usize, step: usize) -> bool {
    let mut want = designated.to_vec();
    want.sort_unstable();
    (0..alpha).any(|start| run_pattern(alpha, start, run, step, want.len(), false).is_some_and(|p| p == want))
}

/// Condition 2: partitionings are equal within each group, designated subsets
/// are pairwise distinct, and when `portion` divides `alpha` the designated
/// subsets of a group are disjoint (covering all rows for a full group).
pub fn check_condition2(all: &[Partitioning], groups: &NodeGroups, alpha: usize) -> bool {
    let mut designated = HashSet::new();
    if !all.iter().all(|p| designated.insert(p.designated().to_vec())) {
        return false;
    }
    let portion = all.first().map_or(0, |p| p.designated().len());
    for members in &groups.groups {
        let parts: Vec<&Partitioning> = members.iter().map(|&j| &all[j]).collect();
        let Some(first) = parts.first() else { continue };
        let family = first.family();
        if parts.iter().any(|p| p.family() != family) {
            return false;
        }
        if portion > 0 && alpha.is_multiple_of(portion) && parts.len() * portion <= alpha {
            let mut used = HashSet::new();
            for p in &parts {
                if !p.designated().iter().all(|&x| used.insert(x)) {
                    return false;
                }
            }
            if parts.len() * portion == alpha && used.len() != alpha {
                return false;
            }
        }
    }
    true
}

/// Checks that, for every group, each non-designated symbol of each member is
/// scheduled in that group's extra column of exactly one of `P_2..P_r`, and in
/// no other extra column. Requires `r | alpha`.
pub fn check_proposition2(pattern: &ParityPattern, parts: &[Partitioning], groups: &NodeGroups) -> Result<bool> {
    let (alpha, r) = (pattern.alpha(), pattern.parities());
    if alpha % r != 0 {
        return Err(Error::PreconditionViolated(format!("r={r} does not divide alpha={alpha}")));
    }
    let mut count = vec![vec![0usize; groups.len()]; pattern.k() * alpha];
    for l in 1..r {
        for row in 0..alpha {
            let cells = (0..pattern.extra_columns()).filter_map(|g| pattern.extra(l, row, g).map(|s| (g, s)));
            for (g, s) in cells {
                count[s.node * alpha + s.row][g] += 1;
            }
        }
    }
    for (g, members) in groups.groups.iter().enumerate() {
        for &j in members {
            let part = &parts[j];
            for row in (0..alpha).filter(|&x| !part.is_designated(x)) {
                let c = &count[j * alpha + row];
                if c[g] != 1 || c.iter().sum::<usize>() != 1 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Cell bookkeeping for one group's extra column: how many cells of each row
/// (across `P_2..P_r`) each member is allotted. Allotments are found by
/// augmenting paths, so a new member can displace earlier members' cells to
/// other rows they also designate.
#[derive(Debug, Clone)]
struct GroupCells {
    alpha: usize,
    capacity: usize,
    demand: usize,
    members: Vec<Vec<usize>>,
    alloc: Vec<Vec<usize>>,
    used: Vec<usize>,
}

impl GroupCells {
    fn new(alpha: usize, capacity: usize, demand: usize) -> Self {
        GroupCells { alpha, capacity, demand, members: Vec::new(), alloc: Vec::new(), used: vec![0; alpha] }
    }

    /// Adds a member designating `rows`; returns the new state if every
    /// member's demand can still be met.
    fn with_member(&self, rows: &[usize]) -> Option<GroupCells> {
        let mut next = self.clone();
        next.members.push(rows.to_vec());
        next.alloc.push(vec![0; self.alpha]);
        let t = next.members.len() - 1;
        for _ in 0..self.demand {
            let mut visited = vec![false; self.alpha];
            if !next.augment(t, &mut visited) {
                return None;
            }
        }
        Some(next)
    }

    fn augment(&mut self, t: usize, visited: &mut [bool]) -> bool {
        for idx in 0..self.members[t].len() {
            let x = self.members[t][idx];
            if visited[x] {
                continue;
            }
            visited[x] = true;
            if self.used[x] < self.capacity {
                self.used[x] += 1;
                self.alloc[t][x] += 1;
                return true;
            }
            for u in 0..self.members.len() {
                if u != t && self.alloc[u][x] > 0 && self.augment(u, visited) {
                    self.alloc[u][x] -= 1;
                    self.alloc[t][x] += 1;
                    return true;
                }
            }
        }
        false
    }

    fn spare(&self, row: usize) -> usize {
        self.capacity - self.used[row]
    }
}

/// Accumulated construction state, threaded through [`valid_partitioning`].
#[derive(Debug, Clone)]
pub struct LayoutState {
    params: CodeParams,
    partitions: Vec<Option<Partitioning>>,
    cells: GroupCells,
    group_family: Option<Vec<Vec<usize>>>,
    group_members: Vec<usize>,
}

impl LayoutState {
    pub fn new(params: CodeParams) -> Self {
        let demand = params.alpha - params.portion();
        LayoutState {
            params,
            partitions: vec![None; params.k],
            cells: GroupCells::new(params.alpha, params.r() - 1, demand),
            group_family: None,
            group_members: Vec::new(),
        }
    }

    fn start_group(&mut self) {
        let p = &self.params;
        self.cells = GroupCells::new(p.alpha, p.r() - 1, p.alpha - p.portion());
        self.group_family = None;
        self.group_members.clear();
    }

    fn designated_so_far(&self) -> HashSet<Vec<usize>> {
        self.partitions.iter().flatten().map(|p| p.designated().to_vec()).collect()
    }

    /// Completes `designated` to a partitioning of all rows: reuse the group's
    /// family if it contains the subset, else translate it by multiples of
    /// `run` if that tiles the rows, else split the remainder evenly.
    fn family_for(&self, designated: &[usize], run: usize) -> Vec<Vec<usize>> {
        let (alpha, r) = (self.params.alpha, self.params.r());
        if let Some(f) = &self.group_family {
            if f.iter().any(|s| s == designated) {
                return f.clone();
            }
        }
        let mut covered = vec![false; alpha];
        designated.iter().for_each(|&x| covered[x] = true);
        let mut family = vec![designated.to_vec()];
        let mut tiles = true;
        for q in 1..r {
            let mut t: Vec<usize> = designated.iter().map(|&x| (x + q * run) % alpha).collect();
            t.sort_unstable();
            if t.iter().any(|&x| std::mem::replace(&mut covered[x], true)) {
                tiles = false;
                break;
            }
            family.push(t);
        }
        if tiles && covered.iter().all(|&c| c) {
            return family;
        }
        let rest: Vec<usize> = (0..alpha).filter(|x| designated.binary_search(x).is_err()).collect();
        let mut family = vec![designated.to_vec()];
        let mut offset = 0;
        for q in 0..r - 1 {
            let size = div_ceil(rest.len() - offset, r - 1 - q);
            family.push(rest[offset..offset + size].to_vec());
            offset += size;
        }
        family
    }
}

/// Picks the partitioning of `node` (0-based) given everything chosen so far.
///
/// Candidates, in order: unused members of the group's family, run/step
/// patterns by increasing start row, then (outside the structured phase, or
/// when no structured candidate fits) every run/step pattern, and finally the
/// rows with the most spare cells. The first candidate whose scheduling still
/// fits the group column wins, preferring candidates disjoint from the
/// group's earlier picks, then candidates distinct from every earlier pick.
pub fn valid_partitioning(
    state: &LayoutState,
    node: usize,
    run: usize,
    step: usize,
    phase: Phase,
) -> Result<(Partitioning, Vec<Vec<usize>>)> {
    let p = &state.params;
    let (alpha, portion) = (p.alpha, p.portion());
    let taken = state.designated_so_far();
    let group_rows: HashSet<usize> = state
        .group_members
        .iter()
        .filter_map(|&j| state.partitions[j].as_ref())
        .flat_map(|p| p.designated().iter().copied())
        .collect();

    let structured = |rows: &[usize]| check_condition1(rows, alpha, run.max(1), step);
    let accept = |rows: &[usize], tier: usize| -> bool {
        if tier < 2 && taken.contains(rows) {
            return false;
        }
        if tier == 0 && rows.iter().any(|x| group_rows.contains(x)) {
            return false;
        }
        state.cells.with_member(rows).is_some()
    };

    let mut candidates: Vec<Vec<usize>> = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |c: Vec<usize>, out: &mut Vec<Vec<usize>>| {
        if seen.insert(c.clone()) {
            out.push(c);
        }
    };
    if let Some(f) = &state.group_family {
        for s in f.iter().filter(|s| s.len() == portion) {
            push(s.clone(), &mut candidates);
        }
    }
    for start in 0..alpha {
        if let Some(c) = run_pattern(alpha, start, run.max(1), step, portion, false) {
            push(c, &mut candidates);
        }
    }
    let structured_count = candidates.len();
    for len in 1..=portion {
        for gap in 0..alpha {
            for start in 0..alpha {
                if let Some(c) = run_pattern(alpha, start, len, gap, portion, true) {
                    push(c, &mut candidates);
                }
            }
        }
    }
    let mut by_spare: Vec<usize> = (0..alpha).collect();
    by_spare.sort_by_key(|&x| (std::cmp::Reverse(state.cells.spare(x)), x));
    let mut greedy = by_spare[..portion].to_vec();
    greedy.sort_unstable();
    push(greedy, &mut candidates);

    let mut pools: Vec<&[Vec<usize>]> = Vec::new();
    if phase == Phase::Structured {
        pools.push(&candidates[..structured_count]);
    }
    pools.push(&candidates[..]);

    for (pi, pool) in pools.iter().enumerate() {
        for tier in 0..3 {
            let found =
                pool.iter().filter(|c| pi > 0 || phase != Phase::Structured || structured(c)).find(|c| accept(c, tier));
            if let Some(rows) = found {
                if pi > 0 && phase == Phase::Structured {
                    debug!("d{}: no run/step pattern fits, using {:?}", node + 1, rows);
                }
                let family = state.family_for(rows, run.max(1));
                let part = Partitioning::new(node, rows, family.clone());
                return Ok((part, family));
            }
        }
    }
    Err(Error::NoValidPartition { node: node + 1, run, step })
}

/// Builds the complete layout for `params`.
pub fn build_layout(params: &CodeParams) -> Result<Layout> {
    params.validate()?;
    let groups = partition_nodes(params);
    let mut pattern = ParityPattern::empty(params);
    let mut state = LayoutState::new(*params);

    for (g, members) in groups.groups.iter().enumerate() {
        let nu = g + 1;
        let (run, step) = (params.run(nu), params.step(nu));
        let phase = if run > 1 { Phase::Structured } else { Phase::Distinct };
        state.start_group();
        for &j in members {
            let (part, family) = valid_partitioning(&state, j, run, step, phase)?;
            state.cells = state.cells.with_member(part.designated()).expect("candidate was checked to fit");
            if state.group_family.is_none() {
                state.group_family = Some(family);
            }
            state.group_members.push(j);
            state.partitions[j] = Some(part);
        }
        schedule_group(params, &state, members, g, &mut pattern);
    }

    let partitions = state.partitions.into_iter().map(|p| p.expect("every node partitioned")).collect();
    let layout = Layout { params: *params, groups, partitions, pattern };
    debug_assert!(layout.validate().is_ok(), "{:?}", layout.validate());
    Ok(layout)
}

/// Only the index arrays of [`build_layout`].
pub fn build_index_arrays(params: &CodeParams) -> Result<ParityPattern> {
    build_layout(params).map(|l| l.pattern)
}

/// Writes the group's symbols into its extra column. Within each row, cells
/// go to members in order, lowest parity array first; each member then fills
/// its cells (array-major, rows ascending) with its non-designated symbols
/// (subset order, rows ascending).
fn schedule_group(params: &CodeParams, state: &LayoutState, members: &[usize], g: usize, pattern: &mut ParityPattern) {
    let r = params.r();
    let mut owner = vec![vec![None; params.alpha]; r];
    for row in 0..params.alpha {
        let mut l = 1;
        for (t, alloc) in state.cells.alloc.iter().enumerate() {
            for _ in 0..alloc[row] {
                owner[l][row] = Some(t);
                l += 1;
            }
        }
    }
    for (t, &j) in members.iter().enumerate() {
        let part = state.partitions[j].as_ref().expect("member partitioned");
        let cells = (1..r).flat_map(|l| part.designated().iter().map(move |&row| (l, row)));
        let cells = cells.filter(|&(l, row)| owner[l][row] == Some(t));
        let symbols = part.others().flat_map(|s| s.iter().copied());
        for ((l, row), sym_row) in cells.zip(symbols) {
            pattern.set_extra(l, row, g, Some(SymbolId::new(sym_row, j)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, k: usize, alpha: usize) -> CodeParams {
        CodeParams::new(n, k, alpha, 8, 0).unwrap()
    }

    fn one_based(rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|x| x + 1).collect()
    }

    #[test]
    fn params_validation() {
        assert!(CodeParams::new(5, 3, 4, 4, 0).is_ok());
        assert!(CodeParams::new(5, 3, 5, 4, 0).is_err());
        assert!(CodeParams::new(5, 5, 1, 4, 0).is_err());
        assert!(CodeParams::new(5, 1, 1, 4, 0).is_err());
        assert!(CodeParams::new(5, 3, 0, 4, 0).is_err());
        assert!(CodeParams::new(5, 3, 4, 5, 0).is_err());
        assert!(CodeParams::new(14, 10, 64, 16, 0).is_ok());
        assert!(CodeParams::new(14, 10, 65, 16, 0).is_err());
    }

    #[test]
    fn granulation_levels() {
        let p = params(5, 3, 4);
        assert_eq!((p.portion(), p.run(1), p.step(1)), (2, 2, 0));
        assert_eq!((p.run(2), p.step(2)), (1, 1));
        let p = params(14, 10, 64);
        assert_eq!((p.run(1), p.run(2), p.run(3)), (16, 4, 1));
        assert_eq!((p.step(1), p.step(2), p.step(3)), (0, 12, 3));
    }

    #[test]
    fn node_groups() {
        let g = partition_nodes(&params(5, 3, 4));
        assert_eq!(g.groups, vec![vec![0, 1], vec![2]]);
        let g = partition_nodes(&params(14, 10, 64));
        assert_eq!(g.groups, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7], vec![8, 9]]);
        let g = partition_nodes(&params(8, 4, 4));
        assert_eq!(g.groups, vec![vec![0, 1, 2, 3]]);
        assert_eq!(g.locate(2), Some((0, 2)));
        assert_eq!(g.locate(9), None);
    }

    #[test]
    fn condition1_examples() {
        assert!(check_condition1(&[0, 1], 4, 2, 0));
        assert!(check_condition1(&[0, 2], 4, 1, 1));
        // Every cyclic window of two rows at alpha = 4, none of which is {1,4}
        // once runs may not straddle the wrap.
        let windows: Vec<Vec<usize>> = (0..3).map(|s| vec![s, s + 1]).collect();
        assert!(!windows.contains(&vec![0, 3]));
        assert!(!check_condition1(&[0, 3], 4, 2, 0));
        // Runs of 4 spaced 8 apart over 16 rows.
        assert!(check_condition1(&[0, 1, 2, 3, 8, 9, 10, 11], 16, 4, 4));
        assert!(!check_condition1(&[0, 1, 2, 3, 7, 8, 9, 10], 16, 4, 4));
    }

    #[test]
    fn worked_example_partitions() {
        let layout = build_layout(&params(5, 3, 4)).unwrap();
        let d: Vec<Vec<usize>> = (0..3).map(|j| one_based(layout.designated(j))).collect();
        assert_eq!(d, vec![vec![1, 2], vec![3, 4], vec![1, 3]]);
        assert_eq!(layout.partitions[0].subsets, vec![vec![0, 1], vec![2, 3]]);
        assert!(check_condition2(&layout.partitions, &layout.groups, 4));
        assert!(check_proposition2(&layout.pattern, &layout.partitions, &layout.groups).unwrap());
    }

    #[test]
    fn worked_example_extra_columns() {
        let layout = build_layout(&params(5, 3, 4)).unwrap();
        let p = &layout.pattern;
        let s = |row: usize, node: usize| Some(SymbolId::new(row - 1, node - 1));
        let first: Vec<Cell> = (0..4).map(|i| p.extra(1, i, 0)).collect();
        assert_eq!(first, vec![s(3, 1), s(4, 1), s(1, 2), s(2, 2)]);
        let second: Vec<Cell> = (0..4).map(|i| p.extra(1, i, 1)).collect();
        assert_eq!(second, vec![s(2, 3), None, s(4, 3), None]);
        let row1: Vec<SymbolId> = p.row_symbols(1, 0).collect();
        assert_eq!(
            row1,
            vec![s(1, 1).unwrap(), s(1, 2).unwrap(), s(1, 3).unwrap(), s(3, 1).unwrap(), s(2, 3).unwrap()]
        );
    }

    #[test]
    fn condition2_examples() {
        let groups = NodeGroups { groups: vec![vec![0, 1]] };
        let a = Partitioning::new(0, &[0, 1], vec![vec![0, 1], vec![2, 3]]);
        let b = Partitioning::new(1, &[2, 3], vec![vec![0, 1], vec![2, 3]]);
        assert!(check_condition2(&[a.clone(), b], &groups, 4));
        let dup = Partitioning::new(1, &[0, 1], vec![vec![0, 1], vec![2, 3]]);
        assert!(!check_condition2(&[a.clone(), dup], &groups, 4));
        let other_family = Partitioning::new(1, &[1, 2], vec![vec![1, 2], vec![0, 3]]);
        assert!(!check_condition2(&[a, other_family], &groups, 4));
    }

    #[test]
    fn proposition2_examples() {
        let layout = build_layout(&params(6, 4, 4)).unwrap();
        assert!(check_proposition2(&layout.pattern, &layout.partitions, &layout.groups).unwrap());

        // Move one scheduled symbol from the group-1 column to the group-2 column.
        let mut broken = layout.pattern.clone();
        let (row, cell) = (0..4).find_map(|i| broken.extra(1, i, 0).map(|c| (i, c))).unwrap();
        broken.set_extra(1, row, 0, None);
        broken.set_extra(1, row, 1, Some(cell));
        assert!(!check_proposition2(&broken, &layout.partitions, &layout.groups).unwrap());

        let odd = build_layout(&params(5, 3, 3)).unwrap();
        assert!(matches!(
            check_proposition2(&odd.pattern, &odd.partitions, &odd.groups),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn alpha_one_has_no_scheduled_symbols() {
        for (n, k) in [(5, 3), (6, 4), (14, 10)] {
            let layout = build_layout(&params(n, k, 1)).unwrap();
            for l in 1..n - k {
                for g in 0..layout.pattern.extra_columns() {
                    assert_eq!(layout.pattern.extra(l, 0, g), None);
                }
            }
            assert!(layout.partitions.iter().all(|p| p.designated() == [0]));
        }
    }

    #[test]
    fn optimal_alpha_is_digit_structured() {
        let layout = build_layout(&CodeParams::new(14, 10, 64, 16, 0).unwrap()).unwrap();
        for j in 0..10 {
            let (g, t) = layout.groups.locate(j).unwrap();
            let place = 4usize.pow(2 - g as u32);
            let want: Vec<usize> = (0..64).filter(|i| (i / place) % 4 == t).collect();
            assert_eq!(layout.designated(j), want.as_slice(), "d{}", j + 1);
        }
        assert!(check_condition2(&layout.partitions, &layout.groups, 64));
        assert!(check_proposition2(&layout.pattern, &layout.partitions, &layout.groups).unwrap());
    }

    #[test]
    fn structured_groups_satisfy_condition1_at_optimal_alpha() {
        for (n, k, alpha) in [(5, 3, 4), (6, 4, 4), (9, 6, 9), (14, 10, 64), (8, 4, 4), (10, 6, 16)] {
            let p = CodeParams::new(n, k, alpha, 16, 0).unwrap();
            let layout = build_layout(&p).unwrap();
            for (g, members) in layout.groups.groups.iter().enumerate() {
                let (run, step) = (p.run(g + 1), p.step(g + 1));
                for &j in members {
                    assert!(
                        check_condition1(layout.designated(j), alpha, run.max(1), step),
                        "({n},{k},{alpha}) d{}",
                        j + 1
                    );
                }
            }
        }
    }

    #[test]
    fn access_locality_at_optimal_alpha() {
        for (n, k) in [(5, 3), (6, 4)] {
            let layout = build_layout(&params(n, k, 4)).unwrap();
            for l in 0..k {
                let part = &layout.partitions[l];
                for arr in 0..n - k {
                    for &row in part.designated() {
                        for sym in layout.pattern.row_symbols(arr, row) {
                            if sym.node != l {
                                assert!(part.is_designated(sym.row), "d{} row {} sym {sym}", l + 1, row + 1);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let p = params(9, 6, 7);
        assert_eq!(build_layout(&p).unwrap(), build_layout(&p).unwrap());
    }

    #[test]
    fn layouts_validate_across_alpha() {
        for (n, k) in [(5, 3), (6, 4), (9, 6), (7, 4), (10, 8)] {
            let p0 = params(n, k, 1);
            for alpha in 1..=p0.max_alpha().unwrap() {
                let layout = build_layout(&params(n, k, alpha)).unwrap();
                layout.validate().unwrap();
            }
        }
    }
}
