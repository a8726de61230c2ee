use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anisoeig::harness::ComparisonReport;
use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// Pretty JSON with every float written as `{:.16e}` (17 significant
/// digits), so output bytes depend only on the values.
struct FixedFloats<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{:.16e}", f64::from(v))
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Output directory; every write names the file in its error.
pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<OutDir> {
        fs::create_dir_all(path)
            .with_context(|| format!("cannot create output directory {}", path.display()))?;
        Ok(OutDir(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn write_with(&self, name: &str, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
        let path = self.path(name);
        let ctx = || format!("cannot write {}", path.display());
        let mut w = BufWriter::new(File::create(&path).with_context(ctx)?);
        f(&mut w).with_context(ctx)?;
        w.flush().with_context(ctx)
    }

    pub fn write_str(&self, name: &str, text: &str) -> Result<()> {
        self.write_with(name, |w| w.write_all(text.as_bytes()))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<String> {
        let text = to_json(value)?;
        self.write_str(name, &text)?;
        Ok(text)
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// `profiles.csv`: `s, u*, z*, m*` at the step midpoints of `u*`.
pub fn write_profiles(w: &mut dyn Write, report: &ComparisonReport) -> io::Result<()> {
    let t = &report.profiles;
    writeln!(w, "s,u_star,z_star,m_star")?;
    for k in 0..t.s.len() {
        writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", t.s[k], t.u_star[k], t.z_star[k], t.m_star[k])?;
    }
    Ok(())
}

/// `margins.csv`: one row per breakpoint `s`. The Talenti margin is
/// relative to the right-hand side, domination margins relative to
/// `∫m*(z*)^r`; both compare directly with the report tolerance. Empty
/// cells are outside the evaluated range.
pub fn write_margins(w: &mut dyn Write, report: &ComparisonReport) -> io::Result<()> {
    let dom = &report.domination;
    write!(w, "s,talenti_margin")?;
    for d in dom {
        write!(w, ",domination_margin_r{}", d.r)?;
    }
    writeln!(w)?;
    let steps = dom.first().map_or(0, |d| d.s.len());
    let cell_measure = report.measure / steps.max(1) as f64;
    let ta = &report.talenti;
    let mut talenti = vec![None; steps + 1];
    for (k, s) in ta.s.iter().enumerate() {
        let idx = (s / cell_measure).round() as usize;
        if idx <= steps {
            talenti[idx] = Some(ta.margin[k] / ta.rhs[k]);
        }
    }
    for k in 0..steps {
        write!(w, "{:.16e},{}", dom[0].s[k], cell(talenti[k + 1]))?;
        for d in dom {
            write!(w, ",{:.16e}", d.margin[k] / d.total)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        x: f64,
        n: usize,
        bad: f64,
        v: Vec<f64>,
    }

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_json(&Sample { x: 0.1, n: 3, bad: f64::NAN, v: vec![1.0, -2.5e-300] }).unwrap();
        assert!(s.contains("\"x\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        assert!(s.contains("\"bad\": null"));
        assert!(s.contains("-2.5000000000000000e-300"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }
}
