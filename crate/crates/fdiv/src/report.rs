//! CSV table builders and the versioned JSON envelope shared by the CLI
//! subcommands. Floats are written in Rust's shortest round-trip form, so
//! re-parsing an emitted artifact reproduces the in-memory values exactly.

use crate::contour::GridSurface;
use crate::divergence::Divergence;
use crate::pushforward::PushforwardHistogram;
use crate::util::linspace;
use crate::{Error, Result};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// Wraps a payload with a `schema_version` field for JSON emission.
#[derive(Serialize)]
pub struct Versioned<T: Serialize> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub payload: T,
}

pub fn to_versioned_json<T: Serialize>(payload: T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        payload,
    })?)
}

/// s-curve table: `d,s_<name1>,s_<name2>,...` sampled uniformly.
pub fn s_curves_csv(divs: &[Divergence], lo: f64, hi: f64, points: usize) -> String {
    let mut out = String::from("d");
    for d in divs {
        out.push_str(&format!(",s_{}", d.name()));
    }
    out.push('\n');
    for x in linspace(lo, hi, points) {
        out.push_str(&x.to_string());
        for d in divs {
            out.push_str(&format!(",{}", d.s_curve(x)));
        }
        out.push('\n');
    }
    out
}

/// Parse an s-curve table back into (names, rows).
pub fn s_curves_from_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(Error::Parse {
        format: "s-curve csv",
        reason: "empty file".into(),
    })?;
    let mut cols = header.split(',');
    if cols.next() != Some("d") {
        return Err(Error::Parse {
            format: "s-curve csv",
            reason: "first column must be d".into(),
        });
    }
    let names: Vec<String> = cols
        .map(|c| {
            c.strip_prefix("s_")
                .map(str::to_string)
                .ok_or(Error::Parse {
                    format: "s-curve csv",
                    reason: format!("column {c:?} lacks the s_ prefix"),
                })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = lines
        .map(|line| {
            line.split(',')
                .map(|cell| {
                    cell.parse::<f64>().map_err(|e| Error::Parse {
                        format: "s-curve csv",
                        reason: format!("bad float {cell:?}: {e}"),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    for row in &rows {
        if row.len() != names.len() + 1 {
            return Err(Error::Parse {
                format: "s-curve csv",
                reason: "ragged row".into(),
            });
        }
    }
    Ok((names, rows))
}

/// Contour table: `mu,sigma,value`, row-major over the grid.
pub fn surface_csv(surface: &GridSurface) -> String {
    let mut out = String::from("mu,sigma,value\n");
    for (i, &mu) in surface.mu_axis.iter().enumerate() {
        for (j, &sigma) in surface.sigma_axis.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", mu, sigma, surface.values[i][j]));
        }
    }
    out
}

pub fn surface_rows_from_csv(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut lines = text.lines();
    if lines.next() != Some("mu,sigma,value") {
        return Err(Error::Parse {
            format: "contour csv",
            reason: "unexpected header".into(),
        });
    }
    lines
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 3 {
                return Err(Error::Parse {
                    format: "contour csv",
                    reason: "expected 3 cells".into(),
                });
            }
            let f = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    format: "contour csv",
                    reason: format!("bad float {s:?}: {e}"),
                })
            };
            Ok((f(cells[0])?, f(cells[1])?, f(cells[2])?))
        })
        .collect()
}

/// Pushforward table: `d_center,p_tilde,q_tilde`.
pub fn pushforward_csv(hist: &PushforwardHistogram) -> String {
    let mut out = String::from("d_center,p_tilde,q_tilde\n");
    for i in 0..hist.bins() {
        out.push_str(&format!(
            "{},{},{}\n",
            hist.bin_center(i),
            hist.p_density[i],
            hist.q_density[i]
        ));
    }
    out
}

pub fn pushforward_rows_from_csv(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut lines = text.lines();
    if lines.next() != Some("d_center,p_tilde,q_tilde") {
        return Err(Error::Parse {
            format: "pushforward csv",
            reason: "unexpected header".into(),
        });
    }
    lines
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 3 {
                return Err(Error::Parse {
                    format: "pushforward csv",
                    reason: "expected 3 cells".into(),
                });
            }
            let f = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    format: "pushforward csv",
                    reason: format!("bad float {s:?}: {e}"),
                })
            };
            Ok((f(cells[0])?, f(cells[1])?, f(cells[2])?))
        })
        .collect()
}

/// Fixed-width text rendering of the tail-weight table.
pub fn tail_table_text(rows: &[crate::algebra::TailTableRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:>8} {:>8}  {}\n",
        "divergence", "L", "R", "bounded"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<14} {:>8.4} {:>8.4}  {}\n",
            r.name,
            r.left,
            r.right,
            if r.bounded { "yes" } else { "no" }
        ));
    }
    out
}
