//! CSV encoding of fields and paths.

use kacgas_core::{DensityField, DensityPath, Grid};

/// Long-format CSV of a path: one row per (time, node).
pub fn path_csv(path: &DensityPath, header: [&str; 3]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    let nodes: Vec<f64> = path.grid().nodes();
    for (t, field) in path.times().iter().zip(path.fields()) {
        for (u, v) in nodes.iter().zip(field.values()) {
            w.serialize((t, u, v)).expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory write")
}

pub fn profile_csv(field: &DensityField, header: [&str; 2]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    let nodes: Vec<f64> = field.grid().nodes();
    for (u, v) in nodes.iter().zip(field.values()) {
        w.serialize((u, v)).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

/// Reads a three-column path CSV (any header names). Rows must be grouped by time with
/// the nodes of a uniform grid on `[-1, 1]` in increasing order.
pub fn read_path_csv(bytes: &[u8]) -> Result<DensityPath, String> {
    let mut r = csv::Reader::from_reader(bytes);
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        let row: (f64, f64, f64) = rec.map_err(|e| format!("row {}: {e}", i + 2))?;
        rows.push(row);
    }
    let Some(&(t0, _, _)) = rows.first() else {
        return Err("path file has no data rows".into());
    };
    let len = rows.iter().take_while(|r| r.0 == t0).count();
    if len < 3 || rows.len() % len != 0 {
        return Err(format!("{} rows do not split into blocks of {len} nodes", rows.len()));
    }
    let grid = Grid::new(len - 1).map_err(|e| e.to_string())?;
    let nodes: Vec<f64> = grid.nodes();
    let mut times = Vec::new();
    let mut fields = Vec::new();
    for block in rows.chunks(len) {
        let t = block[0].0;
        for (j, (bt, u, _)) in block.iter().enumerate() {
            if *bt != t {
                return Err(format!("time {t} block has a row at time {bt}"));
            }
            if (u - nodes[j]).abs() > 1e-9 {
                return Err(format!("node {j} at time {t} is {u}, expected {}", nodes[j]));
            }
        }
        times.push(t);
        let values = block.iter().map(|r| r.2).collect();
        fields.push(DensityField::new(grid, values).map_err(|e| format!("time {t}: {e}"))?);
    }
    DensityPath::new(times, fields).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_round_trips_bit_exactly() {
        let g = Grid::new(7).unwrap();
        let a = DensityField::from_fn(g, |u: f64| 0.5 + 0.3 * u + 0.01 * (7.0 * u).sin()).unwrap();
        let b = DensityField::from_fn(g, |u: f64| 0.5 + 0.1 * u / 3.0).unwrap();
        let p = DensityPath::new(vec![0.0, 0.1 / 3.0], vec![a, b]).unwrap();
        let bytes = path_csv(&p, ["t", "u", "rho"]);
        assert!(bytes.starts_with(b"t,u,rho\n"));
        assert_eq!(read_path_csv(&bytes).unwrap(), p);
    }

    #[test]
    fn malformed_paths_are_rejected() {
        assert!(read_path_csv(b"t,u,rho\n").is_err());
        assert!(read_path_csv(b"t,u,rho\n0,-1,0.5\n0,0,0.5\n0,1,x\n").is_err());
        assert!(read_path_csv(b"t,u,rho\n0,-1,0.5\n0,0.5,0.5\n0,1,0.5\n").is_err());
    }
}
