//! CSV tables. Every file starts with a `# schema: <name>/<version>` line,
//! then a fixed header, then rows of numbers in `{:.16e}` form (17
//! significant digits, '.' decimal point, independent of locale).

use std::io::{self, Write};

use crate::hjb::{ThetaSample, ValueSurfacePair};
use crate::monopoly::MonopolyCurve;
use crate::simulate::PathRecord;

pub const PATH_SCHEMA: &str = "bertrand.path/1";
pub const PATH_HEADER: [&str; 7] = ["t", "x1", "x2", "p1", "p2", "d1", "d2"];

pub const SURFACE_SCHEMA: &str = "bertrand.surface/1";
pub const SURFACE_HEADER: [&str; 10] = ["x1", "x2", "v1", "v2", "p1", "p2", "d1", "d2", "s1", "s2"];

pub const THETA_SCHEMA: &str = "bertrand.theta/1";
pub const THETA_HEADER: [&str; 5] = ["theta", "p1", "d1", "p2", "d2"];

pub const MONOPOLY_SCHEMA: &str = "bertrand.monopoly/1";
pub const MONOPOLY_HEADER: [&str; 5] = ["x", "v", "v_prime", "price", "demand"];

/// Number as written to every CSV.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes one table: schema line, header, rows.
pub fn write_table<W, R>(w: &mut W, schema: &str, header: &[&str], rows: R) -> io::Result<()>
where
    W: Write,
    R: IntoIterator,
    R::Item: AsRef<[f64]>,
{
    writeln!(w, "# schema: {schema}")?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let row = row.as_ref();
        debug_assert_eq!(row.len(), header.len());
        let cells: Vec<String> = row.iter().map(|&x| format_number(x)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_path<W: Write>(w: &mut W, path: &PathRecord) -> io::Result<()> {
    let rows = (0..path.len()).map(|k| {
        [
            path.times[k],
            path.x1[k],
            path.x2[k],
            path.price1[k],
            path.price2[k],
            path.demand1[k],
            path.demand2[k],
        ]
    });
    write_table(w, PATH_SCHEMA, &PATH_HEADER, rows)
}

/// One row per grid node, x2 varying fastest.
pub fn write_surfaces<W: Write>(w: &mut W, s: &ValueSurfacePair) -> io::Result<()> {
    let g = &s.grid;
    let rows = (0..g.len()).map(|k| {
        let (i, j) = g.unflat(k);
        [
            g.x1(i),
            g.x2(j),
            s.v1[k],
            s.v2[k],
            s.price1[k],
            s.price2[k],
            s.demand1[k],
            s.demand2[k],
            s.shadow1[k],
            s.shadow2[k],
        ]
    });
    write_table(w, SURFACE_SCHEMA, &SURFACE_HEADER, rows)
}

pub fn write_theta_slice<W: Write>(w: &mut W, samples: &[ThetaSample]) -> io::Result<()> {
    let rows = samples.iter().map(|s| [s.theta, s.price1, s.demand1, s.price2, s.demand2]);
    write_table(w, THETA_SCHEMA, &THETA_HEADER, rows)
}

pub fn write_monopoly<W: Write>(w: &mut W, c: &MonopolyCurve) -> io::Result<()> {
    let rows = (0..c.x.len()).map(|k| [c.x[k], c.v[k], c.v_prime[k], c.price[k], c.demand[k]]);
    write_table(w, MONOPOLY_SCHEMA, &MONOPOLY_HEADER, rows)
}

/// Splits a CSV written here into its schema name and numeric rows.
/// Meant for tests and round-trip checks.
pub fn read_table(text: &str) -> Option<(String, Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let schema = lines.next()?.strip_prefix("# schema: ")?.to_string();
    let header: Vec<String> = lines.next()?.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for line in lines {
        let row: Option<Vec<f64>> = line.split(',').map(|c| c.parse().ok()).collect();
        rows.push(row?);
    }
    Some((schema, header, rows))
}
