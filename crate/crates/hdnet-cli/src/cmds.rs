//! One function per subcommand. Each resolves its configuration, does the
//! work through the library, writes outputs plus a manifest, and prints a
//! short confirmation.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;

use hdnet::datagen::{generate as generate_dataset, GenConfig};
use hdnet::experiment::{
    build_codes, mean_and_se, run_experiment, sweep as run_sweep, RunParams, SweepCell,
};
use hdnet::estimator::MatchConfig;
use hdnet::graphenc::HopDepth;
use hdnet::io::{
    atomic_write, estimate_rows, load_dataset_bundle, read_json, save_encoder_state,
    write_codes, write_dataset_bundle, write_estimates_csv, write_json_pretty,
    write_sweep_outcome, AGGREGATED_SWEEP_FILE, COVARIATES_FILE, EDGES_FILE, GEN_CONFIG_FILE,
    RAW_SWEEP_FILE, TIMINGS_SWEEP_FILE, UNITS_FILE,
};
use hdnet::rhpt::standardize_columns;

use crate::manifest::{self, RunManifest};
use crate::{BenchArgs, EncodeArgs, EstimateArgs, GenerateArgs, SweepArgs};

const ENCODER_STATE_FILE: &str = "encoder.bin";
const CODES_FILE: &str = "codes.hv";
const ESTIMATES_FILE: &str = "estimates.csv";
const REPORT_FILE: &str = "report.json";
const BENCH_FILE: &str = "bench.csv";

/// Create the output directory itself if needed, but never its parents: a
/// missing parent is a user mistake, not something to paper over.
fn ensure_out_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            bail!("output path {} exists and is not a directory", dir.display());
        }
        return Ok(());
    }
    std::fs::create_dir(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let started_at = manifest::timestamp();
    let (mut cfg, input) = match (&args.preset, &args.config) {
        (Some(name), None) => {
            let canonical = name.replace('-', "_");
            (
                GenConfig::preset(&canonical, args.seed.unwrap_or(0))?,
                format!("preset:{canonical}"),
            )
        }
        (None, Some(path)) => {
            let cfg: GenConfig = read_json(path)?;
            (cfg, path.display().to_string())
        }
        _ => unreachable!("clap enforces exactly one configuration source"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;

    ensure_out_dir(&args.out)?;
    let ds = generate_dataset(&cfg)?;
    write_dataset_bundle(&args.out, &ds, &cfg, args.force)?;
    manifest::write(
        &args.out,
        &RunManifest {
            command: "generate".into(),
            version: manifest::version(),
            seed: cfg.seed,
            inputs: vec![input],
            outputs: vec![
                EDGES_FILE.into(),
                COVARIATES_FILE.into(),
                UNITS_FILE.into(),
                GEN_CONFIG_FILE.into(),
            ],
            config: serde_json::to_value(&cfg)?,
            started_at,
            finished_at: manifest::timestamp(),
        },
        args.force,
    )?;
    println!(
        "wrote dataset bundle (n={}, {} edges) to {}",
        ds.len(),
        ds.graph.edge_count(),
        args.out.display()
    );
    Ok(())
}

pub fn encode(args: EncodeArgs) -> Result<()> {
    let started_at = manifest::timestamp();
    let (mut ds, _) = load_dataset_bundle(&args.data)?;
    if args.standardize {
        standardize_columns(&mut ds.x);
    }
    let depth = HopDepth::from_u8(args.depth)?;
    let (encoder, roles, z) = build_codes(&ds, args.beta, args.lambda, depth, args.seed)?;

    ensure_out_dir(&args.out)?;
    save_encoder_state(&args.out.join(ENCODER_STATE_FILE), &encoder, &roles, args.force)?;
    write_codes(&args.out.join(CODES_FILE), &z, args.force)?;
    manifest::write(
        &args.out,
        &RunManifest {
            command: "encode".into(),
            version: manifest::version(),
            seed: args.seed,
            inputs: vec![args.data.display().to_string()],
            outputs: vec![ENCODER_STATE_FILE.into(), CODES_FILE.into()],
            config: json!({
                "beta": args.beta,
                "lambda": encoder.lambda(),
                "depth": args.depth,
                "standardize": args.standardize,
                "seed": args.seed,
            }),
            started_at,
            finished_at: manifest::timestamp(),
        },
        args.force,
    )?;
    println!(
        "wrote encoder state and {} codes (beta={}, depth={}) to {}",
        z.len(),
        args.beta,
        depth,
        args.out.display()
    );
    Ok(())
}

pub fn estimate(args: EstimateArgs) -> Result<()> {
    let started_at = manifest::timestamp();
    let (mut ds, _) = load_dataset_bundle(&args.data)?;
    if args.standardize {
        standardize_columns(&mut ds.x);
    }
    let params = RunParams {
        beta: args.beta,
        lambda: args.lambda,
        depth: HopDepth::from_u8(args.depth)?,
        match_config: MatchConfig {
            k: args.k,
            weighting: args.weighting.into(),
            ..MatchConfig::default()
        },
        split_fraction: args.split_frac,
        seed: args.seed,
    };
    let (report, est_in, est_out) = run_experiment(&ds, &params)?;

    ensure_out_dir(&args.out)?;
    let rows = estimate_rows(&ds, &[&est_in, &est_out])?;
    let metadata = serde_json::to_value(&report)?;
    write_estimates_csv(&args.out.join(ESTIMATES_FILE), &rows, &metadata, args.force)?;
    write_json_pretty(&args.out.join(REPORT_FILE), &report, args.force)?;
    manifest::write(
        &args.out,
        &RunManifest {
            command: "estimate".into(),
            version: manifest::version(),
            seed: args.seed,
            inputs: vec![args.data.display().to_string()],
            outputs: vec![ESTIMATES_FILE.into(), REPORT_FILE.into()],
            config: json!({
                "params": &params,
                "lambda_resolved": report.lambda,
                "standardize": args.standardize,
            }),
            started_at,
            finished_at: manifest::timestamp(),
        },
        args.force,
    )?;
    println!(
        "n={} depth={} k={}: eps_ate_in {:.4}  eps_pehe_in {:.4}  eps_ate_out {:.4}  eps_pehe_out {:.4}",
        report.n, report.depth, report.k, report.eps_ate_in, report.eps_pehe_in,
        report.eps_ate_out, report.eps_pehe_out
    );
    println!("wrote estimates and report to {}", args.out.display());
    Ok(())
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let started_at = manifest::timestamp();
    let depths: Vec<HopDepth> = args
        .depths
        .iter()
        .map(|&d| HopDepth::from_u8(d))
        .collect::<hdnet::Result<_>>()?;

    let mut cells = Vec::new();
    if !args.preset.is_empty() {
        for name in &args.preset {
            let canonical = name.replace('-', "_");
            let mut cfg = GenConfig::preset(&canonical, 0)?;
            if let Some(n) = args.n {
                cfg.n = n;
            }
            for &depth in &depths {
                cells.push(SweepCell {
                    label: format!("{canonical}_depth{depth}"),
                    config: cfg.clone(),
                    depth,
                });
            }
        }
    } else {
        for &k1 in &args.kappa1 {
            let mut cfg = GenConfig::dial(k1, 0);
            if let Some(n) = args.n {
                cfg.n = n;
            }
            for &depth in &depths {
                cells.push(SweepCell {
                    label: format!("kappa1_{k1}_depth{depth}"),
                    config: cfg.clone(),
                    depth,
                });
            }
        }
    }
    let seeds: Vec<u64> = (0..args.seeds as u64).map(|i| args.seed + i).collect();
    let base = RunParams {
        beta: args.beta,
        seed: args.seed,
        ..RunParams::default()
    };
    let outcome = run_sweep(&cells, &seeds, &base)?;

    ensure_out_dir(&args.out)?;
    write_sweep_outcome(&args.out, &outcome, args.force)?;
    manifest::write(
        &args.out,
        &RunManifest {
            command: "sweep".into(),
            version: manifest::version(),
            seed: args.seed,
            inputs: vec![],
            outputs: vec![
                RAW_SWEEP_FILE.into(),
                TIMINGS_SWEEP_FILE.into(),
                AGGREGATED_SWEEP_FILE.into(),
            ],
            config: json!({
                "cells": &cells,
                "seeds": &seeds,
                "beta": args.beta,
                "split_fraction": base.split_fraction,
                "k": base.match_config.k,
            }),
            started_at,
            finished_at: manifest::timestamp(),
        },
        args.force,
    )?;
    for agg in &outcome.aggregates {
        println!(
            "{}: eps_ate_in {:.4} ± {:.4}  eps_pehe_in {:.4} ± {:.4}",
            agg.cell, agg.eps_ate_in_mean, agg.eps_ate_in_se, agg.eps_pehe_in_mean,
            agg.eps_pehe_in_se
        );
    }
    println!(
        "wrote {} runs over {} cells to {}",
        outcome.rows.len(),
        cells.len(),
        args.out.display()
    );
    Ok(())
}

pub fn bench(args: BenchArgs) -> Result<()> {
    let started_at = manifest::timestamp();
    let mut csv = String::from(
        "n,beta,reps,encode_ms_mean,encode_ms_se,match_ms_mean,match_ms_se,total_ms_mean,total_ms_se\n",
    );
    let mut totals = Vec::new();
    for &n in &args.sizes {
        let cfg = GenConfig {
            n,
            seed: args.seed.wrapping_add(n as u64),
            ..GenConfig::default()
        };
        let ds = generate_dataset(&cfg)?;
        let params = RunParams {
            beta: args.beta,
            seed: args.seed,
            ..RunParams::default()
        };
        let (mut enc, mut mat, mut tot) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..args.reps {
            let (report, _, _) = run_experiment(&ds, &params)?;
            enc.push(report.encode_ms);
            mat.push(report.match_ms);
            tot.push(report.total_ms);
        }
        let (enc_m, enc_se) = mean_and_se(&enc);
        let (mat_m, mat_se) = mean_and_se(&mat);
        let (tot_m, tot_se) = mean_and_se(&tot);
        writeln!(
            csv,
            "{n},{},{},{enc_m},{enc_se},{mat_m},{mat_se},{tot_m},{tot_se}",
            args.beta, args.reps
        )?;
        println!(
            "n={n}: encode {:.0} ms  match {:.0} ms  total {:.0} ms (reps={})",
            enc_m, mat_m, tot_m, args.reps
        );
        totals.push((n, tot_m));
    }
    for pair in totals.windows(2) {
        let [(n0, t0), (n1, t1)] = pair else { unreachable!() };
        println!("scaling {n0} -> {n1}: total x{:.2}", t1 / t0);
    }

    ensure_out_dir(&args.out)?;
    atomic_write(&args.out.join(BENCH_FILE), csv.as_bytes(), args.force)?;
    manifest::write(
        &args.out,
        &RunManifest {
            command: "bench".into(),
            version: manifest::version(),
            seed: args.seed,
            inputs: vec![],
            outputs: vec![BENCH_FILE.into()],
            config: json!({
                "sizes": &args.sizes,
                "beta": args.beta,
                "reps": args.reps,
                "seed": args.seed,
            }),
            started_at,
            finished_at: manifest::timestamp(),
        },
        args.force,
    )?;
    println!("wrote timings to {}", args.out.display());
    Ok(())
}
