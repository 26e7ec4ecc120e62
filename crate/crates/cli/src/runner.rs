//! Experiment dispatch: takes a resolved config, runs the simulation and
//! statistics, and writes the plot-ready outputs.

use crate::config::{ExperimentKind, Load, Resolved};
use crate::output::{test_result_json, OutputDir};
use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use std::path::PathBuf;
use symq_core::disciplines::Discipline;
use symq_core::engine::{self, EventKind, SimConfig};
use symq_core::rbm::{self, RbmParams};
use symq_core::replication_rng;
use symq_core::scaling::{
    self, collect_cycles_parallel, occupancy_pmf, rescaled_grid, sample_stationary_counts,
    ScalingParams, TimeScaling,
};
use symq_core::service_dist::ServiceDistribution;
use symq_core::stats;

#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Seed offset per operating point, so different `r` values use disjoint
/// stream families.
fn seed_for_point(seed: u64, point: usize) -> u64 {
    seed.wrapping_add(1_000_003u64.wrapping_mul(point as u64))
}

fn scaling_points(
    cfg: &Resolved,
    service: &ServiceDistribution,
) -> Result<Vec<(ScalingParams, TimeScaling)>> {
    match &cfg.load {
        Load::Lambda(_) => bail!("experiment {} needs a scaling block", cfg.experiment.as_str()),
        Load::Scaling {
            r_list,
            beta,
            regime,
        } => r_list
            .iter()
            .map(|&r| {
                let params = match regime {
                    TimeScaling::Diffusion => ScalingParams::diffusion(r, *beta, service.mean()),
                    TimeScaling::HeavyTail => ScalingParams::heavy_tail(r, *beta, service),
                }?;
                if !params.is_stable() {
                    eprintln!(
                        "symq: note: r = {r}, beta = {beta} gives rho = {} (critical or \
                         overloaded)",
                        params.rho()
                    );
                }
                Ok((params, *regime))
            })
            .collect(),
    }
}

/// Arrival rate for experiments that accept either a direct lambda or a
/// single-`r` scaling block.
fn single_lambda(cfg: &Resolved, service: &ServiceDistribution) -> Result<f64> {
    match &cfg.load {
        Load::Lambda(l) => Ok(*l),
        Load::Scaling { r_list, beta, .. } => {
            if r_list.len() != 1 {
                bail!(
                    "experiment {} needs a single r (or a direct lambda), got {} values",
                    cfg.experiment.as_str(),
                    r_list.len()
                );
            }
            Ok(scaling::lambda_r(r_list[0], *beta, service.mean())?)
        }
    }
}

pub fn run(cfg: &Resolved) -> Result<RunReport> {
    let mut out = OutputDir::create(&cfg.out, &cfg.embedded)
        .with_context(|| format!("creating output directory {}", cfg.out.display()))?;
    eprintln!("symq: running {} -> {}", cfg.experiment.as_str(), cfg.out.display());
    match cfg.experiment {
        ExperimentKind::Stationary => run_stationary(cfg, &mut out)?,
        ExperimentKind::Insensitivity => run_insensitivity(cfg, &mut out)?,
        ExperimentKind::TransientMarginal => run_transient_marginal(cfg, &mut out)?,
        ExperimentKind::DiffusionScale | ExperimentKind::HeavyTailScale => {
            run_scaled_paths(cfg, &mut out)?
        }
        ExperimentKind::Collapse => run_collapse(cfg, &mut out)?,
        ExperimentKind::RbmCompare => run_rbm_compare(cfg, &mut out)?,
        ExperimentKind::CycleTails => run_cycle_tails(cfg, &mut out)?,
        ExperimentKind::RbmSelftest => run_rbm_selftest(cfg, &mut out)?,
    }
    eprintln!("symq: wrote {} file(s)", out.files.len());
    Ok(RunReport {
        out_dir: out.path().to_path_buf(),
        files: out.files,
    })
}

fn run_stationary(cfg: &Resolved, out: &mut OutputDir) -> Result<()> {
    let (_, discipline) = &cfg.disciplines[0];
    let (_, service) = &cfg.services[0];
    match &cfg.load {
        Load::Lambda(lambda) => {
            let rho = lambda * service.mean();
            let cycles =
                collect_cycles_parallel(discipline, service, *lambda, cfg.cycles, cfg.seed, 0)?;
            let mut rows = Vec::new();
            for k in 1..=cfg.k_max {
                let ci = stats::regenerative_ratio_ci(
                    &cycles,
                    |c| c.time_at_or_above(k),
                    |c| c.cycle_length,
                )?;
                rows.push(format!(
                    "{k},{},{},{},{},{}",
                    ci.estimate,
                    rho.powi(k as i32),
                    ci.se,
                    ci.lo,
                    ci.hi
                ));
            }
            out.write_csv("stationary.csv", "k,p_geq_emp,p_geq_geom,se,ci_lo,ci_hi", rows)?;

            let pmf = occupancy_pmf(&cycles);
            out.write_csv(
                "stationary_pmf.csv",
                "k,pmf",
                pmf.iter().enumerate().map(|(k, p)| format!("{k},{p}")),
            )?;

            let mean_q = stats::regenerative_ci(&cycles, |c| c.area)?;
            out.write_json(
                "summary.json",
                serde_json::json!({
                    "rho": rho,
                    "cycles": cycles.len(),
                    "mean_queue": {
                        "estimate": mean_q.estimate,
                        "se": mean_q.se,
                        "lo": mean_q.lo,
                        "hi": mean_q.hi,
                        "geometric": rho / (1.0 - rho),
                    },
                }),
            )?;
        }
        Load::Scaling { r_list, beta, .. } => {
            let points = scaling::stationary_limit_experiment(
                discipline, service, r_list, *beta, cfg.cycles, cfg.seed,
            )?;
            let mut ecdf_rows = Vec::new();
            for pt in &points {
                let mut cum = 0.0;
                for &(x, p) in &pt.scaled_atoms {
                    cum += p;
                    ecdf_rows.push(format!("{},{x},{cum}", pt.r));
                }
            }
            out.write_csv("stationary_ecdf.csv", "r,x,ecdf", ecdf_rows)?;
            let results: Vec<serde_json::Value> = points
                .iter()
                .map(|pt| {
                    serde_json::json!({
                        "r": pt.r,
                        "rho": pt.rho,
                        "ks_to_unit_exp": pt.ks_to_unit_exp,
                        "ks_geometric_analytic": if pt.rho > 0.0 {
                            scaling::geometric_scaled_ks_to_unit_exp(pt.rho)
                        } else {
                            1.0
                        },
                        "cycles": pt.cycles_used,
                    })
                })
                .collect();
            out.write_json("stationary_ks.json", serde_json::json!(results))?;
        }
    }
    Ok(())
}

fn run_insensitivity(cfg: &Resolved, out: &mut OutputDir) -> Result<()> {
    let (_, discipline) = &cfg.disciplines[0];
    let lambda = single_lambda(cfg, &cfg.services[0].1)?;

    // Every listed service plus an independent control copy of the first.
    let mut arms: Vec<(String, &ServiceDistribution)> = cfg
        .services
        .iter()
        .map(|(l, s)| (l.clone(), s))
        .collect();
    arms.push((format!("{}-control", arms[0].0), arms[0].1));

    let mut counts: Vec<(String, Vec<u64>)> = Vec::new();
    let mut pmf_rows = Vec::new();
    for (arm_idx, (label, service)) in arms.iter().enumerate() {
        let cycles = collect_cycles_parallel(
            discipline,
            service,
            lambda,
            cfg.cycles,
            cfg.seed,
            arm_idx as u32,
        )?;
        let pmf = occupancy_pmf(&cycles);
        for (k, p) in pmf.iter().enumerate() {
            pmf_rows.push(format!("{label},{k},{p}"));
        }
        let mut rng = replication_rng(cfg.seed, 10_000 + arm_idx as u32, 0);
        counts.push((label.clone(), sample_stationary_counts(&pmf, cfg.draws, &mut rng)));
    }
    out.write_csv("pmfs.csv", "service,k,pmf", pmf_rows)?;

    let mut tests = Vec::new();
    for a in 0..counts.len() {
        for b in (a + 1)..counts.len() {
            let r = stats::chi_square_pmf(&counts[a].1, &counts[b].1)?;
            let mut obj = test_result_json(&r);
            obj["a"] = serde_json::json!(counts[a].0);
            obj["b"] = serde_json::json!(counts[b].0);
            tests.push(obj);
        }
    }
    out.write_json(
        "tests.json",
        serde_json::json!({
            "lambda": lambda,
            "draws": cfg.draws,
            "cycles_per_service": cfg.cycles,
            "pairwise": tests,
        }),
    )?;
    Ok(())
}

fn run_transient_marginal(cfg: &Resolved, out: &mut OutputDir) -> Result<()> {
    let (_, service) = &cfg.services[0];
    let points = scaling_points(cfg, service)?;
    let disciplines: Vec<Discipline> =
        cfg.disciplines.iter().map(|(_, d)| d.clone()).collect();
    let labels: Vec<&str> = cfg.disciplines.iter().map(|(l, _)| l.as_str()).collect();

    let mut pmf_rows = Vec::new();
    let mut test_objs = Vec::new();
    let mut two_time_rows: Vec<Vec<String>> = vec![Vec::new(); disciplines.len()];
    for (idx, (params, regime)) in points.iter().enumerate() {
        let seed = seed_for_point(cfg.seed, idx);
        let outcome = scaling::transient_marginal_experiment(
            &disciplines,
            service,
            params,
            cfg.t,
            *regime,
            cfg.replications,
            seed,
        )?;
        for (arm, label) in labels.iter().enumerate() {
            let pmf = outcome.pmf(arm);
            for (k, p) in pmf.iter().enumerate() {
                pmf_rows.push(format!("{},{},{label},{k},{p}", params.r, cfg.t));
            }
        }
        for pt in &outcome.pairwise {
            let mut obj = test_result_json(&pt.result);
            obj["r"] = serde_json::json!(params.r);
            obj["a"] = serde_json::json!(labels[pt.a]);
            obj["b"] = serde_json::json!(labels[pt.b]);
            test_objs.push(obj);
        }
        eprintln!(
            "symq: r = {} done ({} arms x {} replications)",
            params.r,
            disciplines.len(),
            cfg.replications
        );

        if let Some(t2) = cfg.t2 {
            let joint = scaling::two_time_experiment(
                &disciplines,
                service,
                params,
                cfg.t,
                t2,
                *regime,
                cfg.replications,
                seed.wrapping_add(1),
            )?;
            for (arm, samples) in joint.per_arm.iter().enumerate() {
                for (q1, q2) in samples {
                    two_time_rows[arm]
                        .push(format!("{},{},{t2},{q1},{q2}", params.r, cfg.t));
                }
            }
        }
    }
    out.write_csv("marginal_pmf.csv", "r,t,discipline,k,pmf", pmf_rows)?;
    out.write_json("marginal_tests.json", serde_json::json!(test_objs))?;
    if cfg.t2.is_some() {
        for (arm, rows) in two_time_rows.into_iter().enumerate() {
            out.write_csv(
                &format!("two_time_{}.csv", labels[arm]),
                "r,t1,t2,q1,q2",
                rows,
            )?;
        }
    }
    Ok(())
}

fn run_scaled_paths(cfg: &Resolved, out: &mut OutputDir) -> Result<()> {
    let (_, discipline) = &cfg.disciplines[0];
    let (_, service) = &cfg.services[0];
    let points = scaling_points(cfg, service)?;
    let grid = rescaled_grid(cfg.t, cfg.grid_step);

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (idx, (params, regime)) in points.iter().enumerate() {
        let factor = params.time_factor(*regime)?;
        let raw_grid: Vec<f64> = grid.iter().map(|&t| t * factor).collect();
        let horizon = factor * cfg.t;
        let seed = seed_for_point(cfg.seed, idx);
        let runs: Vec<(engine::SamplePath, scaling::ScaledPath)> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replication_rng(seed, 0, rep as u32);
                let mut sim = SimConfig::new(horizon).with_grid(raw_grid.clone());
                sim.record_events = cfg.event_log;
                let path =
                    engine::simulate(discipline, service, params.lambda_r, &sim, &mut rng)?;
                let scaled = match regime {
                    TimeScaling::Diffusion => scaling::diffusion_scale(&path, params.r, cfg.t),
                    TimeScaling::HeavyTail => {
                        scaling::heavy_tail_scale(&path, params.r, factor, cfg.t)
                    }
                }?;
                Ok::<_, anyhow::Error>((path, scaled))
            })
            .collect::<Result<_, _>>()?;
        for (rep, (path, scaled)) in runs.iter().enumerate() {
            for s in &scaled.samples {
                rows.push(format!(
                    "{},{rep},{},{},{}",
                    params.r, s.time, s.q_hat, s.w_hat
                ));
            }
            if cfg.event_log {
                if let Some(events) = &path.events {
                    out.write_csv(
                        &format!("events_r{}_rep{rep}.csv", params.r),
                        "time,event,position,queue_length",
                        events.iter().map(|e| {
                            format!(
                                "{},{},{},{}",
                                e.time,
                                match e.kind {
                                    EventKind::Arrival => "A",
                                    EventKind::Departure => "D",
                                },
                                e.position,
                                e.queue_len
                            )
                        }),
                    )?;
                }
            }
        }
        summaries.push(serde_json::json!({
            "r": params.r,
            "rho": params.rho(),
            "lambda_r": params.lambda_r,
            "time_factor": factor,
            "c_r": params.c_r.map(|c| c.c_r),
            "c_r_at_boundary": params.c_r.map(|c| c.at_boundary),
            "replications": cfg.replications,
        }));
        eprintln!("symq: r = {} done", params.r);
    }
    out.write_csv("paths.csv", "r,rep,t,qhat,what", rows)?;
    out.write_json("summary.json", serde_json::json!(summaries))?;
    Ok(())
}

fn run_collapse(cfg: &Resolved, out: &mut OutputDir) -> Result<()> {
    let (_, discipline) = &cfg.disciplines[0];
    let (_, service) = &cfg.services[0];
    let points = scaling_points(cfg, service)?;
    let (params, _) = points
        .first()
        .ok_or_else(|| anyhow!("collapse needs a scaling point"))?;
    let outcome = scaling::collapse_check(
        discipline,
        service,
        params,
        cfg.t,
        cfg.replications,
        cfg.seed,
    )?;
    out.write_csv(
        "pairs.csv",
        "rep,qhat,what_scaled",
        outcome
            .pairs
            .iter()
            .enumerate()
            .map(|(rep, (q, w))| format!("{rep},{q},{w}")),
    )?;
    out.write_json(
        "summary.json",
        serde_json::json!({
            "r": outcome.r,
            "t": outcome.t,
            "workload_to_queue_ratio": outcome.ratio,
            "correlation": outcome.correlation,
            "mean_abs_deviation": outcome.mean_abs_deviation,
            "replications": cfg.replications,
        }),
    )?;
    Ok(())
}

fn run_rbm_compare(cfg: &Resolved, out: &mut OutputDir) -> Result<()> {
    let (_, discipline) = &cfg.disciplines[0];
    let (_, service) = &cfg.services[0];
    let points = scaling_points(cfg, service)?;
    let beta = match &cfg.load {
        Load::Scaling { beta, .. } => *beta,
        Load::Lambda(_) => bail!("rbm-compare needs a scaling block"),
    };
    let params_rbm = RbmParams::from_queue(service.mean(), service.second_moment(), beta)?;

    let mut sample_rows = Vec::new();
    let mut results = Vec::new();
    let mut max_q_hat: f64 = 1.0;
    for (idx, (params, _)) in points.iter().enumerate() {
        let raw_t = params.time_factor(TimeScaling::Diffusion)? * cfg.t;
        let seed = seed_for_point(cfg.seed, idx);
        let r = params.r;
        let lambda = params.lambda_r;
        let q_hats: Vec<f64> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replication_rng(seed, 0, rep as u32);
                let sim = SimConfig::new(raw_t).with_grid(vec![raw_t]);
                let path = engine::simulate(discipline, service, lambda, &sim, &mut rng)?;
                Ok::<_, anyhow::Error>(path.samples[0].queue_len as f64 / r)
            })
            .collect::<Result<_, _>>()?;
        for (rep, q) in q_hats.iter().enumerate() {
            sample_rows.push(format!("{r},{rep},{q}"));
            max_q_hat = max_q_hat.max(*q);
        }
        let ks = stats::ks_one_sample(&q_hats, |x| {
            rbm::transition_cdf(x, cfg.t, &params_rbm).expect("valid params")
        })?;
        results.push(serde_json::json!({
            "r": r,
            "rho": params.rho(),
            "t": cfg.t,
            "ks_distance": ks.statistic,
            "n": cfg.replications,
        }));
        eprintln!("symq: r = {r} done (KS = {:.4})", ks.statistic);
    }
    out.write_csv("qhat_samples.csv", "r,rep,qhat", sample_rows)?;

    let steps = (max_q_hat * 1.2 / 0.01).ceil() as usize;
    out.write_csv(
        "model_cdf.csv",
        "x,cdf",
        (0..=steps).map(|i| {
            let x = i as f64 * 0.01;
            format!(
                "{x},{}",
                rbm::transition_cdf(x, cfg.t, &params_rbm).expect("valid params")
            )
        }),
    )?;
    out.write_json(
        "compare.json",
        serde_json::json!({
            "rbm": {"mu": params_rbm.mu, "sigma2": params_rbm.sigma2, "beta": beta},
            "points": results,
        }),
    )?;
    Ok(())
}

fn run_cycle_tails(cfg: &Resolved, out: &mut OutputDir) -> Result<()> {
    let (_, discipline) = &cfg.disciplines[0];
    let (_, service) = &cfg.services[0];
    let lambda = single_lambda(cfg, service)?;
    let cycles = collect_cycles_parallel(discipline, service, lambda, cfg.cycles, cfg.seed, 0)?;
    let observed_max = cycles.iter().map(|c| c.max_q).max().unwrap_or(1);
    let x_max = cfg.x_max.unwrap_or(observed_max);
    let grid: Vec<usize> = (0..=x_max).collect();
    let points = stats::tail_curve(&cycles, &grid);
    out.write_csv(
        "tails.csv",
        "x,p,lo,hi",
        points
            .iter()
            .map(|p| format!("{},{},{},{}", p.x, p.p, p.lo, p.hi)),
    )?;
    out.write_csv(
        "tails_loglog.csv",
        "log10_x,log10_p",
        points
            .iter()
            .filter(|p| p.x >= 1 && p.p > 0.0)
            .map(|p| format!("{},{}", (p.x as f64).log10(), p.p.log10())),
    )?;
    out.write_json(
        "summary.json",
        serde_json::json!({
            "rho": lambda * service.mean(),
            "cycles": cycles.len(),
            "observed_max": observed_max,
        }),
    )?;
    Ok(())
}

fn run_rbm_selftest(cfg: &Resolved, out: &mut OutputDir) -> Result<()> {
    let (params, derived_beta) = match (cfg.rbm, &cfg.load) {
        (Some(p), _) => (p, None),
        (None, Load::Scaling { beta, .. }) => {
            let service = cfg.service();
            (
                RbmParams::from_queue(service.mean(), service.second_moment(), *beta)?,
                Some(*beta),
            )
        }
        (None, Load::Lambda(_)) => {
            bail!("rbm-selftest needs an rbm block or a scaling block to derive one")
        }
    };

    let n_grid = (cfg.t / cfg.grid_step).round().max(1.0) as usize;
    let grid: Vec<f64> = (1..=n_grid).map(|k| k as f64 * cfg.grid_step).collect();
    let values: Vec<f64> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = replication_rng(cfg.seed, 0, i as u32);
            rbm::simulate_path(&params, &grid, cfg.substeps, &mut rng)
                .map(|path| *path.last().expect("nonempty grid"))
        })
        .collect::<Result<_, _>>()?;
    let ks = stats::ks_one_sample(&values, |x| {
        rbm::transition_cdf(x, cfg.t, &params).expect("valid params")
    })?;

    let identity = derived_beta.map(|beta| params.sigma2 / (2.0 * params.mu.abs()) * beta);
    out.write_json(
        "selftest.json",
        serde_json::json!({
            "mu": params.mu,
            "sigma2": params.sigma2,
            "t": cfg.t,
            "paths": cfg.paths,
            "substeps": cfg.substeps,
            "ks_distance": ks.statistic,
            "stationary_mean_times_beta": identity,
        }),
    )?;
    out.write_csv(
        "marginal_samples.csv",
        "rep,value",
        values
            .iter()
            .enumerate()
            .map(|(rep, v)| format!("{rep},{v}")),
    )?;

    // Closed-form transition tables for plotting.
    let x_hi = values.iter().cloned().fold(1.0f64, f64::max) * 1.2;
    let mut cdf_rows = Vec::new();
    for &tt in &[cfg.t / 4.0, cfg.t / 2.0, cfg.t] {
        let steps = (x_hi / 0.02).ceil() as usize;
        for i in 0..=steps {
            let x = i as f64 * 0.02;
            cdf_rows.push(format!(
                "{tt},{x},{}",
                rbm::transition_cdf(x, tt, &params).expect("valid params")
            ));
        }
    }
    out.write_csv("cdf.csv", "t,x,cdf", cdf_rows)?;

    eprintln!(
        "symq: rbm self-test KS = {:.4} over {} paths",
        ks.statistic, cfg.paths
    );
    Ok(())
}
