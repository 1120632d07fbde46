//! Deterministic serialization: JSON and CSV with floats printed to 17
//! significant digits, enough to round-trip every f64 bit pattern exactly.
//! Identical inputs produce byte-identical files; nothing here emits
//! timestamps or machine state.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::locus::{LocusCurve, MeshPoint};
use crate::sim::{Trajectory, VerificationReport};

/// 17 significant digits: one leading digit plus 16 after the point.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize to JSON with fixed float formatting and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigitFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Serialize(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Serialize(e.to_string()))
}

impl LocusCurve {
    /// `z0,r0,dpsi_dr,sign,branch` rows: branch points with sign -1/+1 and
    /// fold markers appended with sign 0.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z0,r0,dpsi_dr,sign,branch\n");
        for (b, branch) in self.branches.iter().enumerate() {
            for p in branch {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt_f64(p.z0),
                    fmt_f64(p.r0),
                    fmt_f64(p.dpsi_dr),
                    p.brouwer_sign,
                    b
                ));
            }
        }
        for fold in &self.folds {
            out.push_str(&format!(
                "{},{},{},0,{}\n",
                fmt_f64(fold.z0),
                fmt_f64(fold.r0),
                fmt_f64(fold.dpsi_dr),
                fold.branch
            ));
        }
        out
    }
}

/// `x,y,z,branch` rows of the revolved surface.
pub fn mesh_to_csv(mesh: &[MeshPoint]) -> String {
    let mut out = String::from("x,y,z,branch\n");
    for p in mesh {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(p.x),
            fmt_f64(p.y),
            fmt_f64(p.z),
            p.branch
        ));
    }
    out
}

impl Trajectory {
    /// `t,x,y,z,side` rows in time order; crossing events carry side 0 and
    /// regular samples the sign of the active field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,z,side\n");
        let mut events = self.events.iter().peekable();
        let mut write_row = |t: f64, x: f64, y: f64, z: f64, side: i8| {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(t),
                fmt_f64(x),
                fmt_f64(y),
                fmt_f64(z),
                side
            ));
        };
        for sample in &self.samples {
            while let Some(e) = events.peek() {
                if e.t <= sample.t {
                    write_row(e.t, e.state.x, e.state.y, e.state.z, 0);
                    events.next();
                } else {
                    break;
                }
            }
            write_row(
                sample.t,
                sample.state.x,
                sample.state.y,
                sample.state.z,
                sample.side.signum(),
            );
        }
        for e in events {
            write_row(e.t, e.state.x, e.state.y, e.state.z, 0);
        }
        out
    }
}

impl Serialize for VerificationReport {
    fn serialize<S>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error>
    where
        S: serde::Serializer,
    {
        use serde::ser::SerializeStruct;

        #[derive(Serialize)]
        struct Record<'a> {
            epsilon: f64,
            fixed_point: Option<f64>,
            error: Option<f64>,
            failure: &'a Option<String>,
        }

        let records: Vec<Record> = self
            .epsilons
            .iter()
            .enumerate()
            .map(|(i, &epsilon)| Record {
                epsilon,
                fixed_point: self.fixed_points[i],
                error: self.errors[i],
                failure: &self.failures[i],
            })
            .collect();

        let mut s = serializer.serialize_struct("VerificationReport", 4)?;
        s.serialize_field("z0", &self.z0)?;
        s.serialize_field("predicted_r0", &self.predicted_r0)?;
        s.serialize_field("records", &records)?;
        s.serialize_field("convergence_order", &self.convergence_order)?;
        s.end()
    }
}
