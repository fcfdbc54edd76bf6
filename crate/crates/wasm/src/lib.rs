//! JSON views of layouts, repair plans and bandwidth sweeps for the demo page.
//!
//! Everything here works from the layout alone: no field, no coefficients,
//! no MDS check. Bandwidth depends only on the index arrays.

use gsrc::bench::{decimal, rs_baseline};
use gsrc::layout::{build_layout, CodeParams, Layout};
use gsrc::repair::{average_repair_bandwidth, bandwidth, lower_bound, plan_repair, upper_bound, Rational, SymbolRef};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest alpha the page will build; keeps the DOM and the search bounded.
pub const MAX_ALPHA: usize = 256;

fn params(n: usize, k: usize, alpha: usize) -> Result<CodeParams, String> {
    let p = CodeParams::new(n, k, alpha, 16, 0).map_err(|e| e.to_string())?;
    if alpha > MAX_ALPHA {
        return Err(format!("the demo is limited to alpha <= {MAX_ALPHA}"));
    }
    Ok(p)
}

fn rat(x: Rational) -> Value {
    json!({ "num": x.numer(), "den": x.denom(), "text": x.to_string(), "decimal": decimal(x) })
}

fn label(k: usize, node: usize) -> String {
    if node < k {
        format!("d{}", node + 1)
    } else {
        format!("p{}", node - k + 1)
    }
}

fn one_based(s: &[usize]) -> Vec<usize> {
    s.iter().map(|x| x + 1).collect()
}

fn layout_value(layout: &Layout) -> Result<Value, String> {
    let p = layout.params;
    let arrays: Vec<Value> = layout
        .pattern
        .arrays()
        .iter()
        .map(|a| {
            let rows: Vec<Vec<Value>> = (0..a.rows())
                .map(|i| a.row(i).iter().map(|c| c.map_or(Value::Null, |s| json!([s.row + 1, s.node + 1]))).collect())
                .collect();
            json!(rows)
        })
        .collect();
    let mut nodes = Vec::new();
    for part in &layout.partitions {
        let plan = plan_repair(layout, part.node).map_err(|e| e.to_string())?;
        let trace = bandwidth(&plan).map_err(|e| e.to_string())?;
        nodes.push(json!({
            "node": label(p.k, part.node),
            "designated": one_based(part.designated()),
            "subsets": part.subsets.iter().map(|s| one_based(s)).collect::<Vec<_>>(),
            "symbols": trace.accessed,
            "gamma": rat(trace.gamma),
        }));
    }
    let avg = average_repair_bandwidth(layout).map_err(|e| e.to_string())?;
    Ok(json!({
        "n": p.n, "k": p.k, "r": p.r(), "alpha": p.alpha,
        "groups": layout.groups.groups.iter().map(|g| g.iter().map(|&j| label(p.k, j)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "arrays": arrays,
        "nodes": nodes,
        "average": rat(avg),
        "lower": rat(lower_bound(&p)),
        "upper": rat(upper_bound(&p)),
    }))
}

/// Index arrays, partitions and per-node bandwidth of the `(n, k, alpha)` layout.
pub fn layout_view(n: usize, k: usize, alpha: usize) -> Result<Value, String> {
    let layout = build_layout(&params(n, k, alpha)?).map_err(|e| e.to_string())?;
    layout_value(&layout)
}

/// Step-by-step repair plan for systematic node `node` (1-based).
pub fn repair_view(n: usize, k: usize, alpha: usize, node: usize) -> Result<Value, String> {
    let p = params(n, k, alpha)?;
    if node == 0 || node > k {
        return Err(format!("node must be in 1..={k}"));
    }
    let layout = build_layout(&p).map_err(|e| e.to_string())?;
    let plan = plan_repair(&layout, node - 1).map_err(|e| e.to_string())?;
    let trace = bandwidth(&plan).map_err(|e| e.to_string())?;
    let names = |v: &[SymbolRef]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let solves = |v: &[gsrc::repair::Solve]| {
        v.iter()
            .map(
                |s| json!({ "target": format!("a{}", s.target), "from": format!("p({},{})", s.row + 1, s.parity + 1) }),
            )
            .collect::<Vec<_>>()
    };
    let per_node: Vec<Value> =
        plan.reads_per_node().iter().enumerate().map(|(j, &c)| json!({ "node": label(k, j), "symbols": c })).collect();
    Ok(json!({
        "node": label(k, node - 1),
        "rows": one_based(&plan.rows),
        "step1": names(&plan.step1),
        "step2": solves(&plan.step2),
        "step3": names(&plan.step3),
        "step4": names(&plan.step4),
        "step5": solves(&plan.step5),
        "per_node": per_node,
        "symbols": trace.accessed,
        "gamma": rat(trace.gamma),
        "lower": rat(lower_bound(&p)),
        "upper": rat(upper_bound(&p)),
    }))
}

/// Average repair bandwidth per alpha; unservable alpha values carry an error.
pub fn sweep_view(n: usize, k: usize, alphas: &[usize]) -> Value {
    let mut alphas = alphas.to_vec();
    alphas.sort_unstable();
    alphas.dedup();
    let rows: Vec<Value> = alphas
        .into_iter()
        .map(|alpha| {
            let row = params(n, k, alpha).and_then(|p| {
                let avg = if alpha == 1 {
                    rs_baseline(n, k)
                } else {
                    average_repair_bandwidth(&build_layout(&p).map_err(|e| e.to_string())?)
                        .map_err(|e| e.to_string())?
                };
                let rs = rs_baseline(n, k);
                Ok(json!({
                    "alpha": alpha,
                    "average": rat(avg),
                    "lower": rat(lower_bound(&p)),
                    "upper": rat(upper_bound(&p)),
                    "reduction_pct": rat((rs - avg) / rs * Rational::from_integer(100)),
                }))
            });
            row.unwrap_or_else(|e| json!({ "alpha": alpha, "error": e }))
        })
        .collect();
    json!({ "n": n, "k": k, "rs": rat(rs_baseline(n, k)), "rows": rows })
}

fn to_js(v: Result<Value, String>) -> Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn layout_json(n: usize, k: usize, alpha: usize) -> Result<String, JsValue> {
    to_js(layout_view(n, k, alpha))
}

#[wasm_bindgen]
pub fn repair_plan_json(n: usize, k: usize, alpha: usize, node: usize) -> Result<String, JsValue> {
    to_js(repair_view(n, k, alpha, node))
}

#[wasm_bindgen]
pub fn sweep_json(n: usize, k: usize, alphas: Vec<usize>) -> String {
    sweep_view(n, k, &alphas).to_string()
}

/// `r^ceil(k/r)`, capped at the demo limit.
#[wasm_bindgen]
pub fn max_alpha(n: usize, k: usize) -> usize {
    if k == 0 || k >= n {
        return 0;
    }
    CodeParams { n, k, alpha: 1, w: 16, seed: 0 }.max_alpha().unwrap_or(usize::MAX).min(MAX_ALPHA)
}
