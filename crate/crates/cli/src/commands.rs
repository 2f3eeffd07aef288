use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use centroidal_core::centroidal::{
    integrate_centroidal_frame, locked_inertia_at, locked_velocity, momentum_summary,
    simulate_with_centroidal_frame, total_momentum, BaseMotion, CentroidalTrajectory, FrameTag,
    MomentumSummary,
};
use centroidal_core::dynamics::Unforced;
use centroidal_core::exec::Execution;
use centroidal_core::integrability::{flatness_report, holonomy as run_holonomy, GridSpec};
use centroidal_core::model::{builtin, parse_model, Model, State, VelocityState};
use centroidal_core::path::{parse_trajectory, ShapePath, Sinusoid};
use centroidal_core::spatial::Vec3;
use centroidal_core::{SpatialForce, SpatialMotion, Transform};
use nalgebra::DVector;

use crate::output::{self, num, Table};
use crate::svg::{self, Bounds};
use crate::{
    FlatnessArgs, HolonomyArgs, InitialState, List, ModelArgs, MomentumArgs, SimulateArgs,
};

pub const CONSERVATION_TOL: f64 = 1e-6;

pub fn load_model(args: &ModelArgs) -> Result<Model> {
    let model = match builtin(&args.model) {
        Some(m) => m,
        None if args.model.starts_with("three-link") => {
            bail!(
                "invalid builtin model `{}` (expected three-link:d=<value>)",
                args.model
            )
        }
        None => {
            let text = fs::read_to_string(&args.model)
                .with_context(|| format!("cannot read model file `{}`", args.model))?;
            parse_model(&text).with_context(|| format!("invalid model file `{}`", args.model))?
        }
    };
    Ok(match args.gravity {
        Some(g) => model.with_gravity(Vec3::from(g)),
        None => model,
    })
}

fn load_path(source: &str, model: &Model) -> Result<Box<dyn ShapePath>> {
    let path: Box<dyn ShapePath> = if let Some(rest) = source.strip_prefix("sinusoid") {
        let period = match rest {
            "" => 10.0,
            r => r
                .strip_prefix(":T=")
                .and_then(|t| t.parse::<f64>().ok())
                .filter(|t| *t > 0.0)
                .ok_or_else(|| {
                    anyhow!("invalid builtin trajectory `{source}` (expected sinusoid:T=<seconds>)")
                })?,
        };
        Box::new(Sinusoid::new(period))
    } else {
        let text = fs::read_to_string(source)
            .with_context(|| format!("cannot read trajectory file `{source}`"))?;
        Box::new(
            parse_trajectory(&text, model.dof())
                .with_context(|| format!("invalid trajectory file `{source}`"))?,
        )
    };
    if path.dof() != model.dof() {
        bail!(
            "trajectory `{source}` has {} joints, model has {}",
            path.dof(),
            model.dof()
        );
    }
    Ok(path)
}

fn vector_arg(name: &str, values: &Option<List>, len: usize) -> Result<DVector<f64>> {
    match values {
        None => Ok(DVector::zeros(len)),
        Some(List(v)) if v.len() == len => Ok(DVector::from_row_slice(v)),
        Some(List(v)) => bail!("--{name} expects {len} values, got {}", v.len()),
    }
}

fn initial_state(model: &Model, init: &InitialState) -> Result<(State, VelocityState)> {
    let s = vector_arg("s0", &init.s0, model.dof())?;
    let v = vector_arg("v0", &init.v0, 6)?;
    let sdot = vector_arg("sdot0", &init.sdot0, model.dof())?;
    Ok((
        State::at_shape(s),
        VelocityState::new(SpatialMotion::from_slice(v.as_slice()), sdot),
    ))
}

fn out_dir(out: &Option<PathBuf>) -> Result<Option<&Path>> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)
                .with_context(|| format!("cannot create `{}`", dir.display()))?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

fn parse_grid(text: &str, model: &Model) -> Result<GridSpec> {
    let mut grid = GridSpec::for_model(model, 20);
    let counts: Vec<usize> = text
        .split([',', 'x'])
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .with_context(|| format!("invalid --grid `{text}`"))
        })
        .collect::<Result<_>>()?;
    if counts.contains(&0) {
        bail!("--grid counts must be positive");
    }
    grid.counts = match counts.len() {
        1 => vec![counts[0]; model.dof()],
        n if n == model.dof() => counts,
        n => bail!("--grid has {n} counts, model has {} joints", model.dof()),
    };
    Ok(grid)
}

pub fn check_flatness(args: &FlatnessArgs) -> Result<u8> {
    let model = load_model(&args.model)?;
    let grid = parse_grid(&args.grid, &model)?;
    let report = flatness_report(&model, &grid, args.tol, args.h, Execution::Parallel)?;
    println!("verdict: {}", report.verdict);
    println!("max |B_ij|: {}", num(report.max_norm));
    println!("tolerance: {}", num(report.tol));
    println!("samples: {}", grid.len());
    for p in &report.pairs {
        println!(
            "pair ({}, {}): {}",
            p.joints[0],
            p.joints[1],
            num(p.max_norm)
        );
    }
    if let Some(w) = &report.worst {
        let s: Vec<String> = w.s.iter().map(|&x| num(x)).collect();
        println!(
            "worst sample: s = [{}], pair ({}, {})",
            s.join(", "),
            w.i,
            w.j
        );
    }
    if let Some(dir) = out_dir(&args.out)? {
        let path = dir.join("flatness.json");
        fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("cannot write `{}`", path.display()))?;
    }
    Ok(if report.flat { 0 } else { 2 })
}

fn summaries(model: &Model, traj: &CentroidalTrajectory) -> Result<Vec<MomentumSummary>> {
    traj.samples
        .iter()
        .map(|s| Ok(momentum_summary(model, &s.state, &s.velocity)?))
        .collect()
}

fn write_centroidal(
    path: &Path,
    traj: &CentroidalTrajectory,
    sums: &[MomentumSummary],
) -> Result<()> {
    let mut table = Table::create(path, &output::centroidal_header())?;
    for (s, m) in traj.samples.iter().zip(sums) {
        table.row(&output::centroidal_row(s.t, &s.frame, m))?;
    }
    table.finish()
}

fn write_momentum(
    path: &Path,
    times: impl Iterator<Item = f64>,
    sums: &[MomentumSummary],
) -> Result<()> {
    let mut table = Table::create(path, &output::momentum_header())?;
    for (t, m) in times.zip(sums) {
        table.row(&output::momentum_row(t, m))?;
    }
    table.finish()
}

fn write_snapshots(
    dir: &Path,
    model: &Model,
    traj: &CentroidalTrajectory,
    count: usize,
) -> Result<()> {
    let mut bounds = Bounds::empty();
    for s in &traj.samples {
        bounds.include_state(model, &s.state);
        bounds.include(&s.frame.origin);
    }
    let last = traj.samples.len() - 1;
    let t_end = traj.samples[last].t;
    for k in 0..count {
        let t = if count == 1 {
            0.0
        } else {
            t_end * k as f64 / (count - 1) as f64
        };
        let idx = traj.samples.partition_point(|s| s.t < t - 1e-9).min(last);
        let s = &traj.samples[idx];
        let path = dir.join(format!("snapshot_{k:02}_t{:.3}.svg", s.t));
        fs::write(
            &path,
            svg::snapshot(model, &s.state, &s.frame, s.t, &bounds),
        )
        .with_context(|| format!("cannot write `{}`", path.display()))?;
    }
    Ok(())
}

pub fn holonomy(args: &HolonomyArgs) -> Result<u8> {
    let model = load_model(&args.model)?;
    let path = load_path(&args.trajectory, &model)?;
    let h = run_holonomy(&model, path.as_ref(), args.dt)?;
    println!("drift angle [rad]: {}", num(h.angle));
    println!("origin displacement [m]: {}", num(h.displacement));
    println!("CoM deviation in C [m]: {}", num(h.com_deviation));
    let out = match (&args.out, args.snapshots) {
        (None, 0) => None,
        (None, _) => Some(PathBuf::from(".")),
        (Some(d), _) => Some(d.clone()),
    };
    if let Some(dir) = out_dir(&out)? {
        if args.out.is_some() {
            let sums = summaries(&model, &h.trajectory)?;
            write_centroidal(&dir.join("centroidal.csv"), &h.trajectory, &sums)?;
        }
        write_snapshots(dir, &model, &h.trajectory, args.snapshots)?;
    }
    Ok(0)
}

/// Largest departure of `_A J` and `_G J` from the gravity-only balance law
/// `d/dt _G J = (m g, 0)`, relative to the largest expected magnitude.
fn momentum_drift(
    model: &Model,
    traj: &CentroidalTrajectory,
    sums: &[MomentumSummary],
) -> (f64, f64) {
    let weight = model.gravity() * model.total_mass();
    let g0 = sums[0].momentum_g;
    let (mut err_a, mut err_g, mut scale_a, mut scale_g) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (s, m) in traj.samples.iter().zip(sums) {
        let expected_g = SpatialForce::new(g0.linear + weight * s.t, g0.angular);
        let expected_a = Transform::from_translation(m.com).apply_force(&expected_g);
        err_g = err_g.max((m.momentum_g - expected_g).norm());
        err_a = err_a.max((m.momentum_a - expected_a).norm());
        scale_g = scale_g.max(expected_g.norm());
        scale_a = scale_a.max(expected_a.norm());
    }
    let rel = |e: f64, s: f64| if s > 1e-12 { e / s } else { e };
    (rel(err_a, scale_a), rel(err_g, scale_g))
}

pub fn simulate(args: &SimulateArgs) -> Result<u8> {
    let model = load_model(&args.model)?;
    let (state0, nu0) = initial_state(&model, &args.initial)?;
    let traj = simulate_with_centroidal_frame(
        &model, &state0, &nu0, &Unforced, args.t_end, args.dt, None,
    )?;
    let sums = summaries(&model, &traj)?;
    if let Some(dir) = out_dir(&args.out)? {
        let mut table = Table::create(
            &dir.join("trajectory.csv"),
            &output::trajectory_header(model.dof()),
        )?;
        for s in &traj.samples {
            let mut row = vec![s.t];
            output::pose_values(&mut row, &s.state.pose);
            row.extend(s.state.s.iter());
            output::motion_values(&mut row, &s.velocity.v);
            row.extend(s.velocity.sdot.iter());
            table.row(&row)?;
        }
        table.finish()?;
        write_momentum(
            &dir.join("momentum.csv"),
            traj.samples.iter().map(|s| s.t),
            &sums,
        )?;
        write_centroidal(&dir.join("centroidal.csv"), &traj, &sums)?;
    }
    let (drift_a, drift_g) = momentum_drift(&model, &traj, &sums);
    println!("samples: {}", traj.samples.len());
    println!("final time [s]: {}", num(traj.last().t));
    println!("momentum drift A (relative): {}", num(drift_a));
    println!("momentum drift G (relative): {}", num(drift_g));
    if args.check_conservation {
        let ok = drift_a <= CONSERVATION_TOL && drift_g <= CONSERVATION_TOL;
        println!("conservation: {}", if ok { "pass" } else { "fail" });
        return Ok(if ok { 0 } else { 2 });
    }
    Ok(0)
}

pub fn momentum(args: &MomentumArgs) -> Result<u8> {
    let model = load_model(&args.model)?;
    let (state0, nu0) = initial_state(&model, &args.initial)?;
    let dir = out_dir(&args.out)?;
    let Some(source) = &args.trajectory else {
        let m = momentum_summary(&model, &state0, &nu0)?;
        let jb = total_momentum(&model, &state0, &nu0, FrameTag::B)?.value;
        let force = |f: &SpatialForce| output::fmt6(f.to_vector().as_slice());
        let motion = |v: &SpatialMotion| output::fmt6(v.to_vector().as_slice());
        println!("J_A: {}", force(&m.momentum_a));
        println!("J_B: {}", force(&jb));
        println!("J_G: {}", force(&m.momentum_g));
        println!(
            "v_loc(B): {}",
            motion(&locked_velocity(&model, &state0, &nu0, FrameTag::B)?)
        );
        println!("v_loc(A): {}", motion(&m.locked_a));
        println!(
            "v_loc(N): {}",
            motion(&locked_velocity(&model, &state0, &nu0, FrameTag::N)?)
        );
        println!("v_ave(G): {}", motion(&m.average));
        println!("p_com: {}", output::fmt6(m.com.as_slice()));
        let lg = locked_inertia_at(&model, &state0, FrameTag::G)?;
        println!("L_G diagonal: {}", output::fmt6(lg.diagonal().as_slice()));
        if let Some(dir) = dir {
            write_momentum(&dir.join("momentum.csv"), std::iter::once(0.0), &[m])?;
        }
        return Ok(0);
    };
    let path = load_path(source, &model)?;
    let (s_start, sdot_start) = path.eval(0.0);
    let start = State::new(state0.pose, s_start);
    let momentum = total_momentum(
        &model,
        &start,
        &VelocityState::new(nu0.v, sdot_start),
        FrameTag::A,
    )?
    .value;
    let traj = integrate_centroidal_frame(
        &model,
        path.as_ref(),
        &BaseMotion::FreeFloating { momentum },
        start.pose,
        None,
        args.dt,
    )?;
    let sums = summaries(&model, &traj)?;
    if let Some(dir) = dir {
        write_momentum(
            &dir.join("momentum.csv"),
            traj.samples.iter().map(|s| s.t),
            &sums,
        )?;
        write_centroidal(&dir.join("centroidal.csv"), &traj, &sums)?;
    }
    let (drift_a, drift_g) = momentum_drift(&model, &traj, &sums);
    let last = traj.last();
    println!("samples: {}", traj.samples.len());
    println!(
        "final base position: {}",
        output::fmt6(last.state.pose.origin.as_slice())
    );
    println!("momentum drift A (relative): {}", num(drift_a));
    println!("momentum drift G (relative): {}", num(drift_g));
    Ok(0)
}

pub fn info(args: &ModelArgs) -> Result<u8> {
    let model = load_model(args)?;
    let spec = model.spec();
    println!("base: {}", spec.base);
    println!("links: {}", model.num_links());
    for l in &spec.links {
        println!("  {} (mass {})", l.name, num(l.mass));
    }
    println!("joints: {}", model.dof());
    for j in &spec.joints {
        println!("  {} ({:?}): {} -> {}", j.name, j.kind, j.parent, j.child);
    }
    println!("total mass [kg]: {}", num(model.total_mass()));
    println!(
        "gravity [m/s^2]: {}",
        output::fmt6(model.gravity().as_slice())
    );
    println!("hash: {}", model.hash());
    Ok(0)
}
