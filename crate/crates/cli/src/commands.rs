//! Command implementations. Each returns the JSON document printed on
//! standard output; CSV artifacts go to the output directory.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gamelattice::convergence::sweep_with;
use gamelattice::mc::{evaluate_strategies_with, verify_embedding_with, EmbeddingOptions};
use gamelattice::{
    brute_force_value, solve_with, stopping_region, Execution, GamePayoff, Lattice, Side, Solution, SolveOptions,
    VolatilityModel,
};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub execution: Execution,
}

struct Solved {
    model: VolatilityModel,
    payoff: GamePayoff,
    solution: Solution,
    wall_time_ms: f64,
}

impl Context {
    fn solve(&self) -> Result<Solved, CliError> {
        let cfg = &self.config;
        let model = cfg.model.build()?;
        let payoff = cfg.payoff()?.build()?;
        let start = Instant::now();
        let lattice = Lattice::build(&model, cfg.s0, payoff.maturity(), cfg.n, self.execution)?;
        let opts = SolveOptions::default()
            .keep_surface(cfg.keep_surface)
            .stop_tolerance(cfg.stop_tolerance)
            .execution(self.execution);
        let solution = solve_with(&lattice, &payoff, opts)?;
        let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(Solved {
            model,
            payoff,
            solution,
            wall_time_ms,
        })
    }

    fn create(&self, name: &str) -> Result<(BufWriter<File>, PathBuf), CliError> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        Ok((BufWriter::new(File::create(&path)?), path))
    }

    /// Optional surface and lattice dumps; returns the written paths.
    fn dumps(&self, solved: &Solved) -> Result<Value, CliError> {
        let mut files = serde_json::Map::new();
        if self.config.keep_surface {
            let (w, path) = self.create("surface.csv")?;
            solved.solution.write_surface_csv(&solved.payoff, w)?;
            files.insert("surface_csv".into(), path_json(&path));
        }
        if self.config.dump_lattice {
            let (w, path) = self.create("lattice.csv")?;
            solved.solution.lattice().write_csv(w)?;
            files.insert("lattice_csv".into(), path_json(&path));
        }
        Ok(Value::Object(files))
    }

    fn echo(&self) -> Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }
}

fn path_json(p: &Path) -> Value {
    Value::String(p.display().to_string())
}

pub fn price(ctx: &Context) -> Result<Value, CliError> {
    let solved = ctx.solve()?;
    let files = ctx.dumps(&solved)?;
    Ok(json!({
        "value": solved.solution.value(),
        "n": solved.solution.n(),
        "h": solved.solution.h(),
        "convention": solved.payoff.convention().to_string(),
        "wall_time_ms": solved.wall_time_ms,
        "files": files,
        "config": ctx.echo(),
    }))
}

pub fn region(ctx: &Context) -> Result<Value, CliError> {
    let solved = ctx.solve()?;
    let mut summary = serde_json::Map::new();
    for side in [Side::Buyer, Side::Seller] {
        let r = stopping_region(&solved.solution, side);
        let (w, path) = ctx.create(&format!("{side}_region.csv"))?;
        r.write_csv(w)?;
        summary.insert(
            side.to_string(),
            json!({
                "csv": path_json(&path),
                "empty": r.is_empty(),
                "last_active_time": r.last_active_time(),
                "last_active_time_before_maturity": r.last_active_time_before_maturity(),
            }),
        );
    }
    let files = ctx.dumps(&solved)?;
    Ok(json!({
        "value": solved.solution.value(),
        "n": solved.solution.n(),
        "dz": solved.solution.lattice().dz(),
        "buyer": summary["buyer"],
        "seller": summary["seller"],
        "files": files,
        "config": ctx.echo(),
    }))
}

pub fn converge(ctx: &mut Context) -> Result<Value, CliError> {
    let cfg = &mut ctx.config;
    let s0_list = cfg.s0_list.get_or_insert_with(|| vec![cfg.s0]).clone();
    let n_list = cfg.n_list.get_or_insert_with(|| vec![cfg.n]).clone();
    let model = cfg.model.build()?;
    let spec = cfg.payoff()?.clone();
    let res = sweep_with(&model, &spec, &s0_list, &n_list, ctx.execution)?;
    let (w, rows_path) = ctx.create("sweep.csv")?;
    res.write_rows_csv(w)?;
    let (w, diffs_path) = ctx.create("sweep_diffs.csv")?;
    res.write_diffs_csv(w)?;
    Ok(json!({
        "rows": res.rows,
        "diffs": res.diffs,
        "rates": res.rates,
        "rate_caveat": res.rate_caveat,
        "files": {"rows_csv": path_json(&rows_path), "diffs_csv": path_json(&diffs_path)},
        "config": ctx.echo(),
    }))
}

pub fn verify_embedding(ctx: &mut Context) -> Result<Value, CliError> {
    let cfg = &mut ctx.config;
    let dt = *cfg.dt.get_or_insert(cfg.h / 400.0);
    let model = cfg.model.build()?;
    let opts = EmbeddingOptions {
        dt: Some(dt),
        monitoring: cfg.monitoring,
        execution: ctx.execution,
        ..EmbeddingOptions::default()
    };
    let stats = verify_embedding_with(&model, cfg.s0.ln(), cfg.h, cfg.m, cfg.seed, opts)?;
    let mut out = serde_json::to_value(&stats).expect("stats serialize");
    out["max_z_score"] = json!(stats.max_z_score());
    out["config"] = ctx.echo();
    Ok(out)
}

pub fn mc_value(ctx: &mut Context) -> Result<Value, CliError> {
    let maturity = ctx.config.payoff()?.maturity;
    let n = ctx.config.n;
    let dt = *ctx.config.dt.get_or_insert(maturity / n as f64);
    let solved = ctx.solve()?;
    let cfg = &ctx.config;
    let est = evaluate_strategies_with(
        &solved.solution,
        &solved.model,
        &solved.payoff,
        cfg.mode,
        cfg.m,
        cfg.seed,
        dt,
        ctx.execution,
    )?;
    let mut out = serde_json::to_value(&est).expect("estimate serializes");
    out["lattice_value"] = json!(solved.solution.value());
    out["config"] = ctx.echo();
    Ok(out)
}

pub fn oracle(ctx: &Context) -> Result<Value, CliError> {
    let cfg = &ctx.config;
    if cfg.n > gamelattice::solver::MAX_ORACLE_STEPS {
        return Err(CliError::Config(format!(
            "oracle needs n <= {}, got {}",
            gamelattice::solver::MAX_ORACLE_STEPS,
            cfg.n
        )));
    }
    let solved = ctx.solve()?;
    let o = brute_force_value(solved.solution.lattice(), &solved.payoff)?;
    Ok(json!({
        "solver_value": solved.solution.value(),
        "oracle_infsup": o.inf_sup,
        "oracle_supinf": o.sup_inf,
        "n": cfg.n,
        "config": ctx.echo(),
    }))
}
