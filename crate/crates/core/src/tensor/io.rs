//! CSV layout for field snapshots: one row per node with columns
//! `s, x2, .., xn, h11, h12, .., h1n, h22, .., hnn` (frame components, upper triangle).

use std::path::Path;
use std::sync::Arc;

use crate::error::{CuspError, Result};
use crate::geometry::CuspModel;
use crate::tensor::frame::{FrameField, FrameTensor};

/// Formats a float losslessly (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn field_header(n: usize) -> Vec<String> {
    let mut h = vec!["s".to_string()];
    for k in 2..=n {
        h.push(format!("x{k}"));
    }
    for a in 1..=n {
        for b in a..=n {
            h.push(format!("h{a}{b}"));
        }
    }
    h
}

pub fn write_field_csv(path: &Path, h: &FrameField) -> Result<()> {
    let model = h.model();
    let n = model.n();
    let sl = model.slice_len();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(field_header(n))?;
    let mut vals = vec![0.0; n * n];
    for i in 0..model.ns() {
        for j in 0..sl {
            let node = i * sl + j;
            h.at(node, &mut vals);
            let mut row = vec![fmt_f64(model.s()[i])];
            row.extend(model.torus_coords(j).into_iter().map(fmt_f64));
            for a in 0..n {
                for b in a..n {
                    row.push(fmt_f64(vals[a * n + b]));
                }
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_csv(path: &Path, model: Arc<CuspModel>) -> Result<FrameField> {
    let n = model.n();
    let mut r = csv::Reader::from_path(path)?;
    let mut h = FrameTensor::zeros(model.clone(), 2);
    let mut count = 0;
    let mut vals = vec![0.0; n * n];
    for (node, rec) in r.records().enumerate() {
        let rec = rec?;
        if node >= model.num_nodes() || rec.len() != n + n * (n + 1) / 2 {
            return Err(CuspError::Io(format!("{}: unexpected layout", path.display())));
        }
        let mut col = n;
        for a in 0..n {
            for b in a..n {
                let v: f64 = rec[col].trim().parse().map_err(|e| CuspError::Io(format!("{}: {e}", path.display())))?;
                vals[a * n + b] = v;
                vals[b * n + a] = v;
                col += 1;
            }
        }
        h.set_at(node, &vals);
        count += 1;
    }
    if count != model.num_nodes() {
        return Err(CuspError::Io(format!("{}: expected {} rows", path.display(), model.num_nodes())));
    }
    Ok(h)
}
