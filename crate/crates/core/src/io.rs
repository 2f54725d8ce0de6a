//! CSV readers and writers for evaluation tables, grids and results.
//!
//! Lines starting with `#` are comments; writers can emit one as a header
//! (used for provenance hashes).

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{OverfitRow, ReplicationResult};
use crate::grid::GridDensity;
use crate::predictive::{EvalTensor, PointEvaluations};
use crate::sampler::WeightedSample;

/// Shortest round-trip text for a float, in scientific notation for very
/// large or small magnitudes.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn writer<W: Write>(mut w: W, comment: Option<&str>) -> Result<csv::Writer<W>> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(csv::Writer::from_writer(w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model_id: String,
    pub draw_id: usize,
    pub point_id: usize,
    pub log_lik: f64,
    pub dlog_lik: f64,
    pub d2log_lik: f64,
}

/// Read an evaluation table. Models are indexed in order of first
/// appearance; every `(model, point)` cell must hold draws `0..S` for a
/// common `S` and points must be `0..n`.
pub fn read_eval_table<R: Read>(r: R) -> Result<(Vec<String>, EvalTensor)> {
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), Vec<Option<(f64, f64, f64)>>> = HashMap::new();
    for (line, row) in reader(r).deserialize::<EvalRow>().enumerate() {
        let row = row?;
        let k = *index.entry(row.model_id.clone()).or_insert_with(|| {
            ids.push(row.model_id.clone());
            ids.len() - 1
        });
        let slot = cells.entry((k, row.point_id)).or_default();
        if slot.len() <= row.draw_id {
            slot.resize(row.draw_id + 1, None);
        }
        if slot[row.draw_id].is_some() {
            return Err(Error::Table(format!(
                "row {}: duplicate (model {}, draw {}, point {})",
                line + 1,
                row.model_id,
                row.draw_id,
                row.point_id
            )));
        }
        slot[row.draw_id] = Some((row.log_lik, row.dlog_lik, row.d2log_lik));
    }
    if ids.is_empty() {
        return Err(Error::Table("no rows".into()));
    }
    let n = cells.keys().map(|(_, i)| i + 1).max().unwrap_or(0);
    let k = ids.len();
    let mut out = Vec::with_capacity(k * n);
    let mut draws = None;
    for m in 0..k {
        for i in 0..n {
            let slot = cells
                .remove(&(m, i))
                .ok_or_else(|| Error::Table(format!("model {} has no rows for point {i}", ids[m])))?;
            if *draws.get_or_insert(slot.len()) != slot.len() {
                return Err(Error::Table(format!(
                    "model {} point {i} has {} draws, expected {}",
                    ids[m],
                    slot.len(),
                    draws.unwrap()
                )));
            }
            let mut l = Vec::with_capacity(slot.len());
            let mut d1 = Vec::with_capacity(slot.len());
            let mut d2 = Vec::with_capacity(slot.len());
            for (s, v) in slot.into_iter().enumerate() {
                let (a, b, c) =
                    v.ok_or_else(|| Error::Table(format!("model {} point {i} is missing draw {s}", ids[m])))?;
                l.push(a);
                d1.push(b);
                d2.push(c);
            }
            out.push(PointEvaluations::new(m, i, l, d1, d2)?);
        }
    }
    Ok((ids, EvalTensor::from_cells(k, n, out)?))
}

pub fn write_eval_table<W: Write>(w: W, comment: Option<&str>, ids: &[String], t: &EvalTensor) -> Result<()> {
    if ids.len() != t.models() {
        return Err(Error::DimensionMismatch(format!("{} ids for {} models", ids.len(), t.models())));
    }
    let mut wr = writer(w, comment)?;
    for cell in t.cells() {
        for s in 0..cell.draws() {
            wr.serialize(EvalRow {
                model_id: ids[cell.model].clone(),
                draw_id: s,
                point_id: cell.point,
                log_lik: cell.loglik[s],
                dlog_lik: cell.dloglik[s],
                d2log_lik: cell.d2loglik[s],
            })?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Grid CSV with columns `y` and one log-density column per name.
pub fn write_grids<W: Write>(w: W, comment: Option<&str>, grids: &[(&str, &GridDensity)]) -> Result<()> {
    let Some((_, first)) = grids.first() else {
        return Err(Error::DimensionMismatch("no grids to write".into()));
    };
    if let Some((name, _)) = grids.iter().find(|(_, g)| !g.same_grid(first)) {
        return Err(Error::GridMismatch(format!("grid {name} differs from the first")));
    }
    let mut wr = writer(w, comment)?;
    let mut header = vec!["y".to_string()];
    header.extend(grids.iter().map(|(n, _)| n.to_string()));
    wr.write_record(&header)?;
    for j in 0..first.len() {
        let mut rec = vec![format_float(first.x(j))];
        rec.extend(grids.iter().map(|(_, g)| format_float(g.logvals[j])));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// Single grid as `y,log_density`.
pub fn write_grid<W: Write>(w: W, comment: Option<&str>, g: &GridDensity) -> Result<()> {
    write_grids(w, comment, &[("log_density", g)])
}

pub fn read_grid<R: Read>(r: R) -> Result<GridDensity> {
    #[derive(Deserialize)]
    struct Row {
        y: f64,
        log_density: f64,
    }
    let rows: Vec<Row> = reader(r).deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.len() < 2 {
        return Err(Error::Table("a grid needs at least two rows".into()));
    }
    let (lo, hi) = (rows[0].y, rows[rows.len() - 1].y);
    let g = GridDensity::from_log_fn(lo, hi, rows.len(), |_| 0.0)?;
    let h = g.step();
    for (j, row) in rows.iter().enumerate() {
        if (row.y - g.x(j)).abs() > 1e-9 * h.max(1.0) * 1e3 {
            return Err(Error::Table(format!("row {j}: grid is not uniform")));
        }
    }
    Ok(GridDensity {
        logvals: rows.iter().map(|r| r.log_density).collect(),
        ..g
    })
}

/// Data CSV `point_id,y`; rows are returned in `point_id` order.
pub fn read_data<R: Read>(r: R) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    struct Row {
        point_id: usize,
        y: f64,
    }
    let mut rows: Vec<Row> = reader(r).deserialize().collect::<std::result::Result<_, _>>()?;
    rows.sort_by_key(|r| r.point_id);
    for (i, r) in rows.iter().enumerate() {
        if r.point_id != i {
            return Err(Error::Table(format!("point ids must be 0..n, found {} at position {i}", r.point_id)));
        }
    }
    Ok(rows.into_iter().map(|r| r.y).collect())
}

pub fn write_data<W: Write>(w: W, comment: Option<&str>, ys: &[f64]) -> Result<()> {
    let mut wr = writer(w, comment)?;
    wr.write_record(["point_id", "y"])?;
    for (i, y) in ys.iter().enumerate() {
        wr.write_record([i.to_string(), format_float(*y)])?;
    }
    wr.flush()?;
    Ok(())
}

/// `scenario,replication,method,w1,...,wK,test_log_score,test_hyva_score`.
pub fn write_results<W: Write>(w: W, comment: Option<&str>, scenario: u8, results: &[ReplicationResult]) -> Result<()> {
    let k = results
        .first()
        .and_then(|r| r.reports.first())
        .map_or(0, |r| r.weights.len());
    let mut wr = writer(w, comment)?;
    let mut header: Vec<String> = vec!["scenario".into(), "replication".into(), "method".into()];
    header.extend((1..=k).map(|j| format!("w{j}")));
    header.extend(["test_log_score".into(), "test_hyva_score".into()]);
    wr.write_record(&header)?;
    for r in results {
        for rep in &r.reports {
            let mut rec = vec![scenario.to_string(), r.replication.to_string(), rep.method.to_string()];
            rec.extend(rep.weights.as_slice().iter().map(|v| format_float(*v)));
            rec.push(format_float(rep.test_log_score));
            rec.push(format_float(rep.test_hyva_score));
            wr.write_record(&rec)?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn write_samples<W: Write>(w: W, comment: Option<&str>, s: &WeightedSample) -> Result<()> {
    let mut wr = writer(w, comment)?;
    wr.write_record(["value", "log_weight"])?;
    for (v, lw) in s.values.iter().zip(&s.logweights) {
        wr.write_record([format_float(*v), format_float(*lw)])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_overfit<W: Write>(w: W, comment: Option<&str>, rows: &[OverfitRow]) -> Result<()> {
    let mut wr = writer(w, comment)?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_overfit<R: Read>(r: R) -> Result<Vec<OverfitRow>> {
    Ok(reader(r).deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Draws;
    use crate::predictive::build_eval_tensor;

    #[test]
    fn eval_table_round_trip() {
        let models = vec![Draws::gaussian("a", 0.0, 1.0), Draws::gaussian("b", 1.0, 2.0)];
        let t = build_eval_tensor(&models, &[0.1, -0.4, 2.0]).unwrap();
        let ids = vec!["a".to_string(), "b".to_string()];
        let mut buf = Vec::new();
        write_eval_table(&mut buf, Some("manifest: abc"), &ids, &t).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# manifest: abc\nmodel_id,draw_id,point_id,log_lik,dlog_lik,d2log_lik\n"));
        let (ids2, t2) = read_eval_table(buf.as_slice()).unwrap();
        assert_eq!(ids2, ids);
        assert_eq!(t2, t);
    }

    #[test]
    fn eval_table_rejects_gaps() {
        let text = "model_id,draw_id,point_id,log_lik,dlog_lik,d2log_lik\na,0,0,0,0,0\na,0,1,0,0,0\na,1,1,0,0,0\n";
        assert!(matches!(read_eval_table(text.as_bytes()), Err(Error::Table(_))));
        let dup = "model_id,draw_id,point_id,log_lik,dlog_lik,d2log_lik\na,0,0,0,0,0\na,0,0,0,0,0\n";
        assert!(read_eval_table(dup.as_bytes()).is_err());
        let nan = "model_id,draw_id,point_id,log_lik,dlog_lik,d2log_lik\na,0,0,NaN,0,0\n";
        assert!(matches!(read_eval_table(nan.as_bytes()), Err(Error::NonFiniteEvaluation { .. })));
    }

    #[test]
    fn grid_and_data_round_trip() {
        let g = GridDensity::from_log_fn(-1.0, 1.0, 11, |y| -y * y).unwrap();
        let mut buf = Vec::new();
        write_grid(&mut buf, None, &g).unwrap();
        assert!(buf.starts_with(b"y,log_density\n"));
        assert_eq!(read_grid(buf.as_slice()).unwrap().logvals, g.logvals);

        let mut buf = Vec::new();
        write_data(&mut buf, Some("x"), &[1.5, -2.0]).unwrap();
        assert_eq!(read_data(buf.as_slice()).unwrap(), vec![1.5, -2.0]);
        assert_eq!(read_data("point_id,y\n1,3\n0,2\n".as_bytes()).unwrap(), vec![2.0, 3.0]);
        assert!(read_data("point_id,y\n0,1\n2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn overfit_header() {
        let rows = vec![OverfitRow {
            p: 1,
            iter: 0,
            insample_lpd: -1.0,
            loo_lpd: -1.5,
            insample_hyva: 0.1,
            loo_hyva: 0.2,
        }];
        let mut buf = Vec::new();
        write_overfit(&mut buf, None, &rows).unwrap();
        assert!(buf.starts_with(b"p,iter,insample_lpd,loo_lpd,insample_hyva,loo_hyva\n"));
        assert_eq!(read_overfit(buf.as_slice()).unwrap(), rows);
    }
}
