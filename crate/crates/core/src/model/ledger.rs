//! Per-layer shape table derived from constructed parameters.

use std::fmt::Write;

use super::DccrnParams;
use crate::tensor::{ConvKernel, Real};

/// One row: component, input data shape, kernel shape, output data shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerRow {
    pub component: String,
    pub input: Vec<usize>,
    pub kernel: String,
    pub output: Vec<usize>,
}

fn tuple(dims: &[usize]) -> String {
    let parts: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
    format!("({})", parts.join(", "))
}

fn kernel_shape<T: Real>(k: &ConvKernel<T>) -> String {
    tuple(k.weights.shape())
}

/// Builds the ledger from the tensors actually held by `params`, so a
/// mis-built model shows up as a mismatching row.
pub fn shape_ledger<T: Real>(params: &DccrnParams<T>) -> Vec<LedgerRow> {
    let cfg = &params.config;
    let (n, d, m) = (cfg.frame_size, cfg.growth, cfg.sub_frames);
    let sub = cfg.sub_frame_len();
    let blocks = params.blocks.len();
    let mut rows = vec![LedgerRow {
        component: "change channel".into(),
        input: vec![n, 1],
        kernel: kernel_shape(&params.entry),
        output: vec![n, params.entry.out_channels()],
    }];
    let first = &params.blocks[0];
    for (l, k) in first.layers.iter().enumerate() {
        let same = params.blocks.iter().all(|b| b.layers[l].weights.shape() == k.weights.shape());
        let mut kernel = kernel_shape(k);
        if l == cfg.middle_layer() {
            kernel.push('+');
        }
        if same {
            kernel.push_str(&format!(" x{blocks}"));
        }
        rows.push(LedgerRow {
            component: format!("dense layer {}", l + 1),
            input: vec![n, k.in_channels()],
            kernel,
            output: vec![n, k.out_channels()],
        });
    }
    rows.push(LedgerRow {
        component: "change channel".into(),
        input: vec![n, d],
        kernel: kernel_shape(&params.exit),
        output: vec![n, params.exit.out_channels()],
    });
    rows.push(LedgerRow {
        component: "reshape".into(),
        input: vec![n, 1],
        kernel: "-".into(),
        output: vec![m, sub, 1],
    });
    let gru: Vec<String> = params
        .gru
        .iter()
        .map(|g| format!("({}+{}, {}) x3", g.input_size(), g.hidden_size(), g.hidden_size()))
        .collect();
    let out = params.gru.last().map_or(0, |g| g.hidden_size());
    rows.push(LedgerRow {
        component: "gru".into(),
        input: vec![m, sub, 1],
        kernel: gru.join("; "),
        output: vec![out, 1],
    });
    rows
}

/// Fixed-width text rendering used by `inspect`.
pub fn render_ledger(rows: &[LedgerRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<16} {:<16} {:<36} {:<16}", "component", "input", "kernel", "output");
    for r in rows {
        let _ = writeln!(s, "{:<16} {:<16} {:<36} {:<16}", r.component, tuple(&r.input), r.kernel, tuple(&r.output));
    }
    s.lines().map(str::trim_end).collect::<Vec<_>>().join("\n") + "\n"
}
