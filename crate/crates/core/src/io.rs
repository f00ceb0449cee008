//! Plain-text serialization: fields as CSV, meshes as Wavefront OBJ, traces and reports.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::barriers::Barrier;
use crate::continuation::{CmcSolution, ContinuationTrace};
use crate::error::{Error, Result};
use crate::sphere::{CapDomain, PolarGrid, ScalarField};

/// Writes `# grid` metadata followed by `node,theta,phi,u` rows. Values use 17 significant
/// digits, so [`read_field_csv`] restores them bit for bit.
pub fn write_field_csv<W: Write>(u: &ScalarField, mut out: W) -> Result<()> {
    let g = u.grid();
    let a = g.domain().axis();
    writeln!(
        out,
        "# grid n_theta={} n_phi={} theta_max={:.16e} axis={:.16e},{:.16e},{:.16e}",
        g.n_theta(),
        g.n_phi(),
        g.domain().theta_max(),
        a[0],
        a[1],
        a[2]
    )?;
    writeln!(out, "node,theta,phi,u")?;
    for k in 0..g.num_nodes() {
        let (theta, phi) = g.coords(k);
        writeln!(out, "{k},{theta:.16e},{phi:.16e},{:.16e}", u.get(k))?;
    }
    Ok(())
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("line {line}: bad number {s:?}")))
}

fn parse_header(line: &str) -> Result<PolarGrid> {
    let mut n_theta = None;
    let mut n_phi = None;
    let mut theta_max = None;
    let mut axis = None;
    for item in line.trim_start_matches("# grid").split_whitespace() {
        let (key, value) = item.split_once('=').ok_or_else(|| Error::Parse(format!("bad header item {item:?}")))?;
        match key {
            "n_theta" => n_theta = value.parse::<usize>().ok(),
            "n_phi" => n_phi = value.parse::<usize>().ok(),
            "theta_max" => theta_max = Some(parse_f64(value, 1)?),
            "axis" => {
                let v = value.split(',').map(|s| parse_f64(s, 1)).collect::<Result<Vec<_>>>()?;
                axis = <[f64; 3]>::try_from(v).ok();
            }
            _ => return Err(Error::Parse(format!("unknown header key {key:?}"))),
        }
    }
    match (n_theta, n_phi, theta_max, axis) {
        (Some(nt), Some(np), Some(tm), Some(a)) => PolarGrid::new(CapDomain::new(a, tm)?, nt, np),
        _ => Err(Error::Parse("incomplete grid header".into())),
    }
}

/// Reads a field written by [`write_field_csv`].
pub fn read_field_csv<R: Read>(input: R) -> Result<ScalarField> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))??;
    let grid = parse_header(&header)?;
    let columns = lines.next().ok_or_else(|| Error::Parse("missing column header".into()))??;
    if columns.trim() != "node,theta,phi,u" {
        return Err(Error::Parse(format!("unexpected columns {columns:?}")));
    }
    let mut values = vec![f64::NAN; grid.num_nodes()];
    let mut seen = 0;
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("line {}: expected 4 columns", i + 3)));
        }
        let node: usize = fields[0].trim().parse().map_err(|_| Error::Parse(format!("line {}: bad node", i + 3)))?;
        if node >= values.len() {
            return Err(Error::Parse(format!("line {}: node {node} out of range", i + 3)));
        }
        values[node] = parse_f64(fields[3], i + 3)?;
        seen += 1;
    }
    if seen != grid.num_nodes() {
        return Err(Error::Parse(format!("expected {} nodes, found {seen}", grid.num_nodes())));
    }
    ScalarField::new(grid, values)
}

/// Vertices `e^u p` in node order; the pole fans to the first ring and each band of quads is
/// split into two triangles.
pub fn write_obj<W: Write>(u: &ScalarField, mut out: W) -> Result<()> {
    let g = u.grid();
    writeln!(out, "# radial graph, {} vertices", g.num_nodes())?;
    for k in 0..g.num_nodes() {
        let p = g.point(k);
        let rho = u.get(k).exp();
        writeln!(out, "v {:.10e} {:.10e} {:.10e}", rho * p[0], rho * p[1], rho * p[2])?;
    }
    let n_phi = g.n_phi() as isize;
    // OBJ indices start at 1.
    let v = |ring: usize, slot: isize| g.index(ring, slot) + 1;
    for j in 0..n_phi {
        writeln!(out, "f {} {} {}", v(0, 0), v(1, j), v(1, j + 1))?;
    }
    for i in 1..g.n_theta() {
        for j in 0..n_phi {
            let (a, b, c, d) = (v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1));
            writeln!(out, "f {a} {b} {c}")?;
            writeln!(out, "f {a} {c} {d}")?;
        }
    }
    Ok(())
}

pub fn write_trace_csv<W: Write>(trace: &ContinuationTrace, mut out: W) -> Result<()> {
    writeln!(out, "stage,t,step,iterations,residual,min_gap,min_interior_gap,boundary_normal_derivative")?;
    for e in &trace.entries {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            e.stage,
            e.t,
            e.step,
            e.iterations,
            e.residual,
            e.min_gap,
            e.min_interior_gap,
            e.boundary_normal_derivative
        )?;
    }
    Ok(())
}

/// Human-readable summary of constants, monotonicity checks and barrier certificates.
pub fn write_certificates<W: Write>(sol: &CmcSolution, mut out: W) -> Result<()> {
    writeln!(out, "homotopy constants: C = {}, eps = {:.6e}", sol.constants.c, sol.constants.eps)?;
    writeln!(out, "hand-off residual: {:.3e}", sol.handoff_residual)?;
    writeln!(out, "final residual |Q[u] + nH|: {:.3e}", sol.final_residual)?;
    writeln!(out)?;
    writeln!(out, "monotonicity checks (d/drho (rho Upsilon) >= 0):")?;
    for r in &sol.rho_reports {
        let status = match (r.applicable, r.passed()) {
            (false, _) => "waived",
            (true, true) => "ok",
            (true, false) => "FAILED",
        };
        writeln!(out, "  {:<5} t = {:.2}: min {:+.6e} at node {} [{status}]", r.family, r.t, r.min_value, r.min_node)?;
    }
    writeln!(out)?;
    writeln!(out, "barrier certificates:")?;
    if sol.certificates.is_empty() {
        writeln!(out, "  none")?;
    }
    for cert in &sol.certificates {
        let status = if cert.is_valid() { "valid" } else { "INVALID" };
        match &cert.barrier {
            Barrier::Height(b) => writeln!(
                out,
                "  height: C = {}, A = {:.6}, base = {:.6e}, min Q~[w] = {:.6e}, bound L = {:.6e} [{status}]",
                b.c, b.a, b.base, cert.min_q_tilde, cert.bound
            )?,
            Barrier::Gradient { barrier, eps_strip } => writeln!(
                out,
                "  gradient: C = {}, K = {}, mu = {:.6e}, strip = {:.6}, min Q~[w] = {:.6e}, bound = {:.6e} [{status}]",
                barrier.c,
                barrier.k,
                barrier.mu(),
                eps_strip,
                cert.min_q_tilde,
                cert.bound
            )?,
        }
    }
    if let Some(r) = &sol.barrier_report {
        writeln!(out, "  margins: min(u - w) = {:.6e}, min(u_bar - u) = {:.6e}", r.above_barrier, r.below_subsolution)?;
    }
    if !sol.warnings.is_empty() {
        writeln!(out)?;
        writeln!(out, "warnings:")?;
        for w in &sol.warnings {
            writeln!(out, "  {w}")?;
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn save_field_csv(u: &ScalarField, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write_field_csv(u, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_field_csv(path: &Path) -> Result<ScalarField> {
    read_field_csv(File::open(path)?)
}

/// OBJ mesh of `u`.
pub fn export_mesh(u: &ScalarField, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write_obj(u, &mut w)?;
    w.flush()?;
    Ok(())
}
