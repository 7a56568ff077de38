//! Experiment harness: subcommand dispatch, configuration and seeding,
//! result persistence with manifests, and the acceptance battery runner.

mod config;
mod output;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use config::{pick_f64, pick_u64, Config};
use looplab_core::acceptance::{self, Level};
use looplab_core::cluster::{estimate_p, ClusterSource, ConnectionConfig, EstimatorMode};
use looplab_core::contour::outer_contours;
use looplab_core::excursion::{BoundaryInterval, ExcursionSampler};
use looplab_core::gff::GffSampler;
use looplab_core::graph::{build_half_plane, build_half_plane_scaled, build_quotient, experiment_box};
use looplab_core::harmonic::{ceq_n_q, height1_green_profile};
use looplab_core::loopsoup::{
    filter_min_jumps, loop_mass_spectrum, min_jump_cutoff, sample_loop_soup_at,
};
use looplab_core::sle::{closed_form_p, kappa_of_alpha, martingale_check, u0_of_alpha, ClosedFormMode};
use output::RunWriter;

#[derive(Parser)]
#[command(
    name = "looplab",
    about = "Simulation laboratory for loop soups, free-field clusters, boundary excursions,\n\
             cluster contours and the chordal Loewner flow on the discrete half-plane",
    version
)]
struct Cli {
    /// Key-value configuration file (TOML); command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV/JSON artifacts and manifests.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Discrete,
    Metric,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

#[derive(Subcommand)]
enum Cmd {
    /// Green values along the first interior row with the pi j^2 G check,
    /// on a truncation and its doubling.
    Green {
        #[arg(long)]
        w: Option<u64>,
        #[arg(long)]
        h: Option<u64>,
        #[arg(long)]
        jmax: Option<u64>,
    },
    /// Equivalent conductance between the identified boundary intervals.
    Ceq {
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long, value_name = "SCALED")]
        half_width: Option<f64>,
        #[arg(long, value_name = "SCALED")]
        height: Option<f64>,
    },
    /// Free-field samples with cluster summaries.
    SampleGff {
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        half_width: Option<f64>,
        #[arg(long)]
        height: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Loop-soup samples with per-soup counts and an optional full dump.
    SampleLoops {
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        w: Option<u64>,
        #[arg(long)]
        h: Option<u64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        kmax: Option<u64>,
        #[arg(long)]
        min_jumps: Option<u64>,
        /// Use the cutoff ceil(n^theta) instead of an explicit min-jumps.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<u64>,
        /// Also write every loop as a JSON line.
        #[arg(long)]
        dump: bool,
    },
    /// Excursion processes over one boundary interval.
    SampleExcursions {
        #[arg(long)]
        n: Option<u64>,
        /// Interval as `lo,hi` in scaled units.
        #[arg(long)]
        interval: Option<String>,
        #[arg(long)]
        u: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        half_width: Option<f64>,
        #[arg(long)]
        height: Option<f64>,
    },
    /// Monte Carlo connection probability between the two boundary
    /// intervals.
    EstimateP {
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        u: Option<f64>,
        #[arg(long)]
        v: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        half_width: Option<f64>,
        #[arg(long)]
        height: Option<f64>,
        #[arg(long)]
        kmax: Option<u64>,
    },
    /// Outer-contour families as JSON lines.
    Contours {
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        half_width: Option<f64>,
        #[arg(long)]
        height: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Restriction-martingale estimates along the Loewner flow.
    LoewnerMartingale {
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        v: Option<f64>,
        #[arg(long)]
        q0: Option<f64>,
        /// Comma-separated capacity times.
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        paths: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Closed forms: kappa(alpha), u0(alpha) and the connection formulas.
    Formulas {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        u: Option<f64>,
        #[arg(long)]
        v: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
    },
    /// Run the statistical acceptance battery.
    Accept {
        #[arg(long, value_enum)]
        level: Option<LevelArg>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring worker pool")?;
    }
    let cfg = Config::load(cli.config.as_deref())?;
    let out = cli.out.clone();
    match cli.cmd {
        Cmd::Green { w, h, jmax } => {
            let w = pick_u64(w, &cfg, "w", 200)? as i32;
            let h = pick_u64(h, &cfg, "h", 100)? as i32;
            let jmax = pick_u64(jmax, &cfg, "jmax", 20)? as i32;
            let mut writer = RunWriter::new(&out, "green");
            let mut drift = String::from("j,pi_j2_g,pi_j2_g_doubled,drift\n");
            let mut tables = Vec::new();
            for (name, ww, hh) in [("green.csv", w, h), ("green_doubled.csv", 2 * w, 2 * h)] {
                let g = build_half_plane(1, ww, hh)?;
                let rows = height1_green_profile(&g, jmax)?;
                let mut csv = String::from("j,G,pi_j2_G\n");
                for &(j, green, pj2) in &rows {
                    writeln!(csv, "{j},{green:.12e},{pj2:.8}")?;
                }
                writer.add_file(name, csv);
                tables.push(rows);
            }
            for (&(j, _, a), &(_, _, b)) in tables[0].iter().zip(tables[1].iter()) {
                writeln!(drift, "{j},{a:.8},{b:.8},{:.3e}", (a - b).abs())?;
            }
            writer.add_file("green_drift.csv", drift);
            let params = json!({"w": w, "h": h, "jmax": jmax});
            let hash = writer.commit(&params, 0)?;
            println!("green: wrote profile and doubling drift ({hash})");
        }
        Cmd::Ceq {
            n,
            q,
            a,
            half_width,
            height,
        } => {
            let n = pick_u64(n, &cfg, "n", 16)? as u32;
            let q = pick_f64(q, &cfg, "q", 4.0)?;
            let (dhw, dht) = experiment_box(q);
            let hw = pick_f64(half_width, &cfg, "half_width", dhw)?;
            let ht = pick_f64(height, &cfg, "height", dht)?;
            let g = build_half_plane_scaled(n, hw, ht)?;
            let a = pick_f64(a, &cfg, "a", (g.box_w() - 1) as f64 / n as f64)?;
            let qg = build_quotient(g, a, q)?;
            let ceq = ceq_n_q(&qg)?;
            let per_n = ceq / n as f64;
            let target = q.ln() / (8.0 * std::f64::consts::PI);
            let mut csv = String::from("n,q,a,ceq,ceq_over_n,target\n");
            writeln!(csv, "{n},{q},{a},{ceq:.10e},{per_n:.10e},{target:.10e}")?;
            let mut writer = RunWriter::new(&out, "ceq");
            writer.add_file("ceq.csv", csv);
            let params = json!({"n": n, "q": q, "a": a, "half_width": hw, "height": ht});
            let hash = writer.commit(&params, 0)?;
            println!(
                "ceq: Ceq = {ceq:.6}, Ceq/n = {per_n:.6} \
                 (8pi ratio {:.4}, 2pi ratio {:.4}) ({hash})",
                per_n / target,
                per_n * 2.0 * std::f64::consts::PI / q.ln()
            );
        }
        Cmd::SampleGff {
            n,
            half_width,
            height,
            seed,
            samples,
        } => {
            let n = pick_u64(n, &cfg, "n", 4)? as u32;
            let hw = pick_f64(half_width, &cfg, "half_width", 10.0)?;
            let ht = pick_f64(height, &cfg, "height", 6.0)?;
            let seed = pick_u64(seed, &cfg, "seed", 1)?;
            let samples = pick_u64(samples, &cfg, "samples", 100)?;
            let g = build_half_plane_scaled(n, hw, ht)?;
            let sampler = GffSampler::new(&g)?;
            let mut csv = String::from("sample,clusterCount,largestCluster\n");
            for r in 0..samples {
                let mut s = sampler.sample_at(seed, r);
                sampler.mark_at(&mut s, seed, r);
                let part = sampler.sign_clusters(&s)?;
                writeln!(csv, "{r},{},{}", part.cluster_count, part.largest_cluster())?;
            }
            let mut writer = RunWriter::new(&out, "sample-gff");
            writer.add_file("gff_clusters.csv", csv);
            let params =
                json!({"n": n, "half_width": hw, "height": ht, "seed": seed, "samples": samples});
            let hash = writer.commit(&params, seed)?;
            println!("sample-gff: {samples} samples on {} vertices ({hash})", g.interior_len());
        }
        Cmd::SampleLoops {
            n,
            w,
            h,
            alpha,
            kmax,
            min_jumps,
            theta,
            seed,
            samples,
            dump,
        } => {
            let n = pick_u64(n, &cfg, "n", 1)? as u32;
            let w = pick_u64(w, &cfg, "w", 6)? as i32;
            let h = pick_u64(h, &cfg, "h", 6)? as i32;
            let alpha = pick_f64(alpha, &cfg, "alpha", 0.5)?;
            let seed = pick_u64(seed, &cfg, "seed", 1)?;
            let samples = pick_u64(samples, &cfg, "samples", 100)?;
            let g = build_half_plane(n, w, h)?;
            let kmax = kmax.or(cfg.u64("kmax")?).map(|k| k as usize);
            let spectrum = loop_mass_spectrum(&g, kmax)?;
            let cutoff = match theta.or(cfg.f64("theta")?) {
                Some(theta) => min_jump_cutoff(n, theta),
                None => pick_u64(min_jumps, &cfg, "min_jumps", 0)? as usize,
            };
            let mut csv = String::from("sample,loops,retained,total_jumps\n");
            let mut dump_lines = String::new();
            for r in 0..samples {
                let soup = sample_loop_soup_at(&g, &spectrum, alpha, seed, r)?;
                let kept = filter_min_jumps(&soup, cutoff);
                let jumps: usize = kept.loops.iter().map(|l| l.jumps()).sum();
                writeln!(csv, "{r},{},{},{jumps}", soup.loops.len(), kept.loops.len())?;
                if dump {
                    for lp in &kept.loops {
                        let verts: Vec<[i32; 2]> = lp
                            .path
                            .iter()
                            .map(|&v| {
                                let p = g.vertex(v as usize);
                                [p.i, p.j]
                            })
                            .collect();
                        writeln!(
                            dump_lines,
                            "{}",
                            serde_json::to_string(&json!({"sample": r, "path": verts}))?
                        )?;
                    }
                }
            }
            let mut writer = RunWriter::new(&out, "sample-loops");
            writer.add_file("loops_counts.csv", csv);
            if dump {
                writer.add_file("loops.jsonl", dump_lines);
            }
            let params = json!({
                "n": n, "w": w, "h": h, "alpha": alpha, "kmax": spectrum.kmax,
                "min_jumps": cutoff, "seed": seed, "samples": samples,
                "tail_mass": spectrum.tail_mass,
            });
            let hash = writer.commit(&params, seed)?;
            println!(
                "sample-loops: {samples} soups, kmax {} (tail mass {:.2e}) ({hash})",
                spectrum.kmax, spectrum.tail_mass
            );
        }
        Cmd::SampleExcursions {
            n,
            interval,
            u,
            seed,
            samples,
            half_width,
            height,
        } => {
            let n = pick_u64(n, &cfg, "n", 4)? as u32;
            let interval = interval.or(cfg.string("interval")?).unwrap_or("-2,0".into());
            let (lo, hi) = parse_interval(&interval)?;
            let u = pick_f64(u, &cfg, "u", 0.25)?;
            let seed = pick_u64(seed, &cfg, "seed", 1)?;
            let samples = pick_u64(samples, &cfg, "samples", 50)?;
            let hw = pick_f64(half_width, &cfg, "half_width", 12.0 * hi.abs().max(lo.abs()).max(1.0))?;
            let ht = pick_f64(height, &cfg, "height", hw * 2.0 / 3.0)?;
            let g = build_half_plane_scaled(n, hw, ht)?;
            let sampler = ExcursionSampler::new(&g, BoundaryInterval::new(lo, hi), u)?;
            let k = sampler.columns.len();
            let mut endpoint_hist = vec![0u64; k * k];
            let mut paths = String::new();
            for r in 0..samples {
                let proc = sampler.sample(&g, seed, r, 3)?;
                for e in &proc.excursions {
                    let a = sampler.columns.iter().position(|&c| c == e.start.i).unwrap();
                    let b = sampler.columns.iter().position(|&c| c == e.end.i).unwrap();
                    endpoint_hist[a * k + b] += 1;
                    let verts: Vec<[i32; 2]> = e
                        .path
                        .iter()
                        .map(|&vx| {
                            let p = g.vertex(vx as usize);
                            [p.i, p.j]
                        })
                        .collect();
                    writeln!(
                        paths,
                        "{}",
                        serde_json::to_string(
                            &json!({"sample": r, "start": [e.start.i, 0], "end": [e.end.i, 0], "path": verts})
                        )?
                    )?;
                }
            }
            let mut csv = String::from("start_col,end_col,count,intensity\n");
            for a in 0..k {
                for b in 0..k {
                    writeln!(
                        csv,
                        "{},{},{},{:.8e}",
                        sampler.columns[a],
                        sampler.columns[b],
                        endpoint_hist[a * k + b],
                        sampler.intensity_matrix()[(a, b)]
                    )?;
                }
            }
            let mut writer = RunWriter::new(&out, "sample-excursions");
            writer.add_file("excursions.jsonl", paths);
            writer.add_file("endpoint_histogram.csv", csv);
            let params = json!({
                "n": n, "interval": [lo, hi], "u": u, "seed": seed, "samples": samples,
                "half_width": hw, "height": ht, "total_mass": sampler.total_mass(),
            });
            let hash = writer.commit(&params, seed)?;
            println!(
                "sample-excursions: {samples} draws, mean count {:.2} ({hash})",
                sampler.total_mass()
            );
        }
        Cmd::EstimateP {
            n,
            q,
            a,
            u,
            v,
            alpha,
            mode,
            samples,
            seed,
            half_width,
            height,
            kmax,
        } => {
            let n = pick_u64(n, &cfg, "n", 4)? as u32;
            let q = pick_f64(q, &cfg, "q", 3.0)?;
            let a = pick_f64(a, &cfg, "a", 4.0)?;
            let u = pick_f64(u, &cfg, "u", 0.25)?;
            let v = pick_f64(v, &cfg, "v", 0.25)?;
            let alpha = pick_f64(alpha, &cfg, "alpha", 0.5)?;
            let samples = pick_u64(samples, &cfg, "samples", 1000)? as usize;
            let seed = pick_u64(seed, &cfg, "seed", 1)?;
            let mode = match mode {
                Some(ModeArg::Discrete) => EstimatorMode::Discrete,
                Some(ModeArg::Metric) => EstimatorMode::Metric,
                None => match cfg.string("mode")?.as_deref() {
                    Some("discrete") => EstimatorMode::Discrete,
                    Some("metric") | None => EstimatorMode::Metric,
                    Some(other) => bail!("config key `mode`: unknown mode `{other}`"),
                },
            };
            let box_scaled = match (half_width.or(cfg.f64("half_width")?), height.or(cfg.f64("height")?)) {
                (Some(hw), Some(ht)) => Some((hw, ht)),
                (None, None) => None,
                _ => bail!("half_width and height must be given together"),
            };
            let cc = ConnectionConfig {
                n,
                q,
                a,
                u,
                v,
                alpha,
                mode,
                box_scaled,
                kmax: kmax.or(cfg.u64("kmax")?).map(|k| k as usize),
            };
            let est = estimate_p(&cc, seed, samples)?;
            let mut csv = String::from("p_hat,stderr,formula,ceq,censor_rate\n");
            writeln!(
                csv,
                "{:.8},{:.3e},{},{},{:.6}",
                est.p_hat,
                est.stderr,
                est.formula.map_or("".into(), |f| format!("{f:.8}")),
                est.ceq.map_or("".into(), |c| format!("{c:.8}")),
                est.frame_contact_rate
            )?;
            let mut writer = RunWriter::new(&out, "estimate-p");
            writer.add_file("estimate_p.csv", csv);
            let params = json!({
                "n": n, "q": q, "a": a, "u": u, "v": v, "alpha": alpha,
                "mode": match mode { EstimatorMode::Metric => "metric", EstimatorMode::Discrete => "discrete" },
                "samples": samples, "seed": seed, "box_scaled": box_scaled,
            });
            let hash = writer.commit(&params, seed)?;
            println!(
                "estimate-p: p_hat = {:.5} +- {:.5}{} ({hash})",
                est.p_hat,
                est.stderr,
                est.formula
                    .map_or(String::new(), |f| format!(", formula = {f:.5}"))
            );
        }
        Cmd::Contours {
            n,
            half_width,
            height,
            seed,
            samples,
        } => {
            let n = pick_u64(n, &cfg, "n", 4)? as u32;
            let hw = pick_f64(half_width, &cfg, "half_width", 10.0)?;
            let ht = pick_f64(height, &cfg, "height", 6.0)?;
            let seed = pick_u64(seed, &cfg, "seed", 1)?;
            let samples = pick_u64(samples, &cfg, "samples", 10)?;
            let g = build_half_plane_scaled(n, hw, ht)?;
            let sampler = GffSampler::new(&g)?;
            let mut lines = String::new();
            let mut censored_total = 0usize;
            let mut total = 0usize;
            for r in 0..samples {
                let mut s = sampler.sample_at(seed, r);
                sampler.mark_at(&mut s, seed, r);
                let part = sampler.sign_clusters(&s)?;
                let fam = outer_contours(
                    &g,
                    ClusterSource::Field {
                        partition: &part,
                        edges: sampler.edges(),
                        open: s.edge_open.as_ref().unwrap(),
                    },
                    &[],
                )?;
                censored_total += fam.censored.len();
                total += fam.contours.len() + fam.censored.len();
                for (c, censored) in fam
                    .contours
                    .iter()
                    .map(|c| (c, false))
                    .chain(fam.censored.iter().map(|c| (c, true)))
                {
                    writeln!(
                        lines,
                        "{}",
                        serde_json::to_string(&json!({
                            "sample": r,
                            "censored": censored,
                            "vertices": c.enclosed_vertices.len(),
                            "polyline": c.polyline,
                        }))?
                    )?;
                }
            }
            let mut writer = RunWriter::new(&out, "contours");
            writer.add_file("contours.jsonl", lines);
            let params = json!({"n": n, "half_width": hw, "height": ht, "seed": seed, "samples": samples});
            let hash = writer.commit(&params, seed)?;
            println!(
                "contours: {total} contours over {samples} samples, censor rate {:.4} ({hash})",
                censored_total as f64 / total.max(1) as f64
            );
        }
        Cmd::LoewnerMartingale {
            kappa,
            v,
            q0,
            t,
            paths,
            dt,
            seed,
        } => {
            let kappa = pick_f64(kappa, &cfg, "kappa", 4.0)?;
            let v = pick_f64(v, &cfg, "v", 1.0)?;
            let q0 = pick_f64(q0, &cfg, "q0", 2.0)?;
            let paths = pick_u64(paths, &cfg, "paths", 10_000)? as usize;
            let dt = pick_f64(dt, &cfg, "dt", 1e-4)?;
            let seed = pick_u64(seed, &cfg, "seed", 1)?;
            let ts: Vec<f64> = t
                .or(cfg.string("t")?)
                .unwrap_or("0.1,0.3,0.5".into())
                .split(',')
                .map(|s| s.trim().parse::<f64>().context("parsing t list"))
                .collect::<Result<_>>()?;
            let mut csv = String::from("t,mean,stderr,target,richardson_gap\n");
            for &t in &ts {
                let coarse = martingale_check(kappa, v, q0, t, paths, dt, seed)?;
                let fine = martingale_check(kappa, v, q0, t, paths, dt / 2.0, seed + 1)?;
                let gap = (coarse.mean - fine.mean).abs();
                writeln!(
                    csv,
                    "{t},{:.8},{:.3e},{:.8},{:.3e}",
                    coarse.mean, coarse.stderr, coarse.target, gap
                )?;
                println!(
                    "t={t}: mean {:.5} +- {:.5}, target {:.5}, richardson {:.2e}, absorbed {:.3}",
                    coarse.mean, coarse.stderr, coarse.target, gap, coarse.absorbed_fraction
                );
            }
            let mut writer = RunWriter::new(&out, "loewner-martingale");
            writer.add_file("martingale.csv", csv);
            let params = json!({
                "kappa": kappa, "v": v, "q0": q0, "t": ts, "paths": paths, "dt": dt, "seed": seed,
            });
            let hash = writer.commit(&params, seed)?;
            println!("loewner-martingale: done ({hash})");
        }
        Cmd::Formulas { alpha, u, v, q } => {
            let alpha = pick_f64(alpha, &cfg, "alpha", 0.5)?;
            let v = pick_f64(v, &cfg, "v", 1.0)?;
            let q = pick_f64(q, &cfg, "q", 4.0)?;
            let kappa = kappa_of_alpha(alpha)?;
            let u0 = u0_of_alpha(alpha)?;
            let u = pick_f64(u, &cfg, "u", u0)?;
            println!("kappa({alpha}) = {kappa:.12}");
            println!("u0({alpha}) = {u0:.12}");
            let metric = closed_form_p(alpha, u, v, q, ClosedFormMode::MetricLimit)?;
            println!("scaling form 1 - q^(-2 sqrt(uv)) at (u={u}, v={v}, q={q}): {metric:.12}");
            if (alpha - 0.5).abs() < 1e-12 && (u - 0.25).abs() < 1e-12 {
                let special = closed_form_p(alpha, u, v, q, ClosedFormMode::Kappa4Special)?;
                println!("chordal special form 1 - q^(-sqrt(v)): {special:.12}");
            }
        }
        Cmd::Accept { level, seed } => {
            let level = match level {
                Some(LevelArg::Fast) => Level::Fast,
                Some(LevelArg::Full) => Level::Full,
                None => match cfg.string("level")?.as_deref() {
                    Some("full") => Level::Full,
                    _ => Level::Fast,
                },
            };
            let seed = pick_u64(seed, &cfg, "seed", 0x10_0f_57)?;
            let reports = acceptance::run_all(level, seed)?;
            let mut all_pass = true;
            let mut csv = String::from("name,pass,estimate,stderr,target,z,p_value,runtime_s\n");
            for r in &reports {
                println!("{}", r.line());
                all_pass &= r.pass;
                writeln!(
                    csv,
                    "{},{},{:.8},{:.3e},{:.8},{:.3},{},{:.2}",
                    r.name,
                    r.pass,
                    r.estimate,
                    r.stderr,
                    r.target,
                    r.z_score,
                    r.p_value.map_or("".into(), |p| format!("{p:.5}")),
                    r.runtime_s
                )?;
            }
            let mut writer = RunWriter::new(&out, "accept");
            writer.add_file("acceptance.csv", csv);
            let params = json!({
                "level": match level { Level::Fast => "fast", Level::Full => "full" },
                "seed": seed,
            });
            writer.commit(&params, seed)?;
            return Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_interval(text: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        bail!("interval must be `lo,hi`");
    }
    let lo: f64 = parts[0].trim().parse().context("interval lo")?;
    let hi: f64 = parts[1].trim().parse().context("interval hi")?;
    if hi < lo {
        bail!("interval must satisfy lo <= hi");
    }
    Ok((lo, hi))
}
