//! CSV dumps of flows and derived fields.
//!
//! Header `axis0,…,axis{k−1},t,component,value`; rows are time-major, then
//! row-major over nodes, then component. Numbers are written with 17
//! significant digits so that reading a dump back reproduces every value
//! bit for bit.

use std::io::{Read, Write};

use super::{BoundaryPolicy, FieldSample, GraphFlow, SpaceTimeGrid};
use crate::{Error, Real, Result};

fn header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = (0..k).map(|d| format!("axis{d}")).collect();
    h.extend(["t", "component", "value"].map(String::from));
    h
}

fn fmt<T: Real>(x: T) -> String {
    format!("{:.16e}", x.to_f64_lossy())
}

fn write_rows<T: Real, W: Write>(
    w: &mut csv::Writer<W>,
    grid: &SpaceTimeGrid<T>,
    t: T,
    ncomp: usize,
    data: &[T],
) -> Result<()> {
    let mut record: Vec<String> = Vec::with_capacity(grid.k() + 3);
    for node in 0..grid.num_nodes() {
        for c in 0..ncomp {
            record.clear();
            record.extend((0..grid.k()).map(|d| fmt(grid.coord(node, d))));
            record.push(fmt(t));
            record.push(c.to_string());
            record.push(fmt(data[node * ncomp + c]));
            w.write_record(&record)?;
        }
    }
    Ok(())
}

/// Writes every stored time level of a flow.
pub fn write_flow_csv<T: Real, W: Write>(flow: &GraphFlow<T>, out: W) -> Result<()> {
    let grid = flow.grid();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(grid.k()))?;
    for m in 0..flow.time_levels() {
        write_rows(&mut w, grid, grid.time(m), grid.codim(), flow.slice(m))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one derived field sample.
pub fn write_field_csv<T: Real, W: Write>(field: &FieldSample<T>, out: W) -> Result<()> {
    let grid = field.grid();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(grid.k()))?;
    write_rows(&mut w, grid, field.time(), field.ncomp(), field.data())?;
    w.flush()?;
    Ok(())
}

/// Reads a flow dump that must match `grid` exactly: same axes, node
/// coordinates, time levels and component count, in the canonical row
/// order. Non-finite values are reported with the offending node's
/// coordinates.
pub fn read_flow_csv<T: Real, R: Read>(
    input: R,
    grid: &SpaceTimeGrid<T>,
    boundary: BoundaryPolicy,
) -> Result<GraphFlow<T>> {
    let mut r = csv::Reader::from_reader(input);
    let expected = header(grid.k());
    let got: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if got != expected {
        return Err(Error::ShapeMismatch(format!(
            "dump header {got:?} does not match expected {expected:?}"
        )));
    }
    let (nn, m) = (grid.num_nodes(), grid.codim());
    let total = nn * m * grid.time_levels();
    let mut values = Vec::with_capacity(total);
    let tol_x = 1e-9 * grid.h().to_f64_lossy();
    let tol_t = 1e-9 * grid.dt().to_f64_lossy();
    let parse = |s: &str, row: usize| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::ShapeMismatch(format!("row {row}: cannot parse {s:?} as a number")))
    };
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let idx = values.len();
        if idx >= total {
            return Err(Error::ShapeMismatch(format!(
                "dump has more than the {total} rows the grid needs"
            )));
        }
        if rec.len() != expected.len() {
            return Err(Error::ShapeMismatch(format!("row {row}: wrong number of columns")));
        }
        let (lvl, node, comp) = (idx / (nn * m), (idx / m) % nn, idx % m);
        let coords: Vec<f64> = (0..grid.k()).map(|d| parse(&rec[d], row)).collect::<Result<_>>()?;
        for (d, &x) in coords.iter().enumerate() {
            if (x - grid.coord(node, d).to_f64_lossy()).abs() > tol_x {
                return Err(Error::ShapeMismatch(format!(
                    "row {row}: axis{d} = {x} but the grid node is at {}",
                    grid.coord(node, d)
                )));
            }
        }
        let t = parse(&rec[grid.k()], row)?;
        if (t - grid.time(lvl).to_f64_lossy()).abs() > tol_t {
            return Err(Error::ShapeMismatch(format!(
                "row {row}: t = {t} but time level {lvl} is at {}",
                grid.time(lvl)
            )));
        }
        if rec[grid.k() + 1].trim() != comp.to_string() {
            return Err(Error::ShapeMismatch(format!(
                "row {row}: component {} where {comp} was expected",
                &rec[grid.k() + 1]
            )));
        }
        let v = parse(&rec[grid.k() + 2], row)?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                node: coords,
                time: t,
                component: comp,
                value: v,
            });
        }
        values.push(T::lit(v));
    }
    if values.len() != total {
        return Err(Error::ShapeMismatch(format!(
            "dump has {} rows, the grid needs {total}",
            values.len()
        )));
    }
    GraphFlow::new(grid.clone(), values, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow() -> GraphFlow<f64> {
        let g = SpaceTimeGrid::new(2, 2, vec![0.0, 0.0], vec![1.0, 1.0], 0.25, (0.0, 0.2), 0.1).unwrap();
        GraphFlow::from_fn(
            g,
            BoundaryPolicy::DirichletFrozen,
            |x: &[f64], t: f64, out: &mut [f64]| {
                out[0] = (x[0] + 0.1).ln() * (1.0 + t) / 3.0;
                out[1] = (x[1] * 7.0).sin() + t;
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let f = flow();
        let mut buf = Vec::new();
        write_flow_csv(&f, &mut buf).unwrap();
        let back = read_flow_csv(buf.as_slice(), f.grid(), f.boundary()).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn header_and_row_order() {
        let f = flow();
        let mut buf = Vec::new();
        write_flow_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("axis0,axis1,t,component,value"));
        let second: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
        // Second data row: first node, component 1.
        assert_eq!(second[3], "1");
        assert_eq!(text.lines().count(), 1 + 25 * 2 * 3);
    }

    #[test]
    fn injected_nan_reports_coordinates() {
        let f = flow();
        let mut buf = Vec::new();
        write_flow_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        // Row for level 1, node 7 (x = 0.25, y = 0.5), component 0.
        let row = 1 + (25 + 7) * 2;
        let mut cols: Vec<String> = lines[row].split(',').map(String::from).collect();
        cols[4] = "NaN".into();
        lines[row] = cols.join(",");
        let bad = lines.join("\n");
        match read_flow_csv(bad.as_bytes(), f.grid(), f.boundary()) {
            Err(Error::NonFinite { node, time, .. }) => {
                assert_eq!(node, vec![0.25, 0.5]);
                assert!((time - 0.1).abs() < 1e-15);
            }
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn shape_mismatch_is_detected() {
        let f = flow();
        let mut buf = Vec::new();
        write_flow_csv(&f, &mut buf).unwrap();
        let other = f.grid().with_time(0.0, 0.05, 5);
        assert!(matches!(
            read_flow_csv(buf.as_slice(), &other, f.boundary()),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
