use std::fs::File;
use std::path::Path;

use anyhow::{Context, Result};
use centroidal_core::centroidal::MomentumSummary;
use centroidal_core::{SpatialForce, SpatialMotion, Transform};

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Table {
    writer: csv::Writer<File>,
}

impl Table {
    pub fn create(path: &Path, header: &[String]) -> Result<Self> {
        let mut writer = csv::Writer::from_path(path)
            .with_context(|| format!("cannot create `{}`", path.display()))?;
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        self.writer.write_record(values.iter().map(|&x| num(x)))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

fn named(prefix: &str, parts: &[&str]) -> Vec<String> {
    parts.iter().map(|p| format!("{prefix}_{p}")).collect()
}

const SIX: [&str; 6] = ["x", "y", "z", "rx", "ry", "rz"];
const ROT: [&str; 9] = ["00", "01", "02", "10", "11", "12", "20", "21", "22"];
const XYZ: [&str; 3] = ["x", "y", "z"];

fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn trajectory_header(dof: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(named("R", &ROT));
    h.extend(named("o", &XYZ));
    h.extend(indexed("s", dof));
    h.extend(named("v", &SIX));
    h.extend(indexed("sdot", dof));
    h
}

pub fn momentum_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(named("JA", &SIX));
    h.extend(named("JG", &SIX));
    h.extend(named("vloc", &SIX));
    h.extend(named("vave", &SIX));
    h
}

pub fn centroidal_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(named("RC", &ROT));
    h.extend(named("oC", &XYZ));
    h.extend(named("vloc", &SIX));
    h.extend(named("JA", &SIX));
    h.extend(named("JG", &SIX));
    h
}

pub fn pose_values(out: &mut Vec<f64>, h: &Transform) {
    for r in 0..3 {
        for c in 0..3 {
            out.push(h.rotation[(r, c)]);
        }
    }
    out.extend(h.origin.iter());
}

pub fn motion_values(out: &mut Vec<f64>, v: &SpatialMotion) {
    out.extend(v.linear.iter().chain(v.angular.iter()));
}

pub fn force_values(out: &mut Vec<f64>, f: &SpatialForce) {
    out.extend(f.linear.iter().chain(f.angular.iter()));
}

pub fn momentum_row(t: f64, m: &MomentumSummary) -> Vec<f64> {
    let mut row = vec![t];
    force_values(&mut row, &m.momentum_a);
    force_values(&mut row, &m.momentum_g);
    motion_values(&mut row, &m.locked_a);
    motion_values(&mut row, &m.average);
    row
}

pub fn centroidal_row(t: f64, frame: &Transform, m: &MomentumSummary) -> Vec<f64> {
    let mut row = vec![t];
    pose_values(&mut row, frame);
    motion_values(&mut row, &m.locked_a);
    force_values(&mut row, &m.momentum_a);
    force_values(&mut row, &m.momentum_g);
    row
}

pub fn fmt6(v: &[f64]) -> String {
    v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",")
}
