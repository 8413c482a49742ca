use std::fmt::Write as _;
use std::path::Path;

use super::FlowTrajectory;
use crate::error::{Error, Result};
use crate::mesh::{Field, Shape};

/// Monitor series as CSV with columns `t,E_raw,ut_L2_sq,tension_L2`.
pub fn trajectory_csv(traj: &FlowTrajectory) -> String {
    let mut s = String::from("t,E_raw,ut_L2_sq,tension_L2\n");
    for m in &traj.monitors {
        let _ = writeln!(s, "{},{},{},{}", m.t, m.e_raw, m.ut_l2_sq, m.tension_l2);
    }
    s
}

/// Writes a vertex field with a `t value_dim` header line.
pub fn write_snapshot(path: &Path, t: f64, field: &Field) -> Result<()> {
    let w = field.width();
    let mut s = String::new();
    let _ = writeln!(s, "{t} {w}");
    for v in 0..field.num_vertices() {
        let row: Vec<String> = field.at(v).iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(f64, Field)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Input(format!("{}: empty snapshot", path.display())))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let bad = |ln: usize, m: &str| Error::Input(format!("{}:{}: {m}", path.display(), ln + 1));
    if h.len() != 2 {
        return Err(bad(0, "expected header `t value_dim`"));
    }
    let t: f64 = h[0].parse().map_err(|_| bad(0, "bad time"))?;
    let w: usize = h[1].parse().map_err(|_| bad(0, "bad value dimension"))?;
    if w == 0 {
        return Err(bad(0, "value dimension must be positive"));
    }
    let mut values = Vec::new();
    for (ln, l) in lines {
        let row: Vec<f64> =
            l.split_whitespace().map(|x| x.parse().map_err(|_| bad(ln, "bad number"))).collect::<Result<_>>()?;
        if row.len() != w {
            return Err(bad(ln, "wrong number of values"));
        }
        values.extend(row);
    }
    let shape = if w == 1 { Shape::Scalar } else { Shape::Vector(w) };
    Ok((t, Field::from_values(shape, values)?))
}
