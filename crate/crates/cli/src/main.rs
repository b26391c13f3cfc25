use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use lamkit_core::acceptance::{run_all, AcceptanceConfig};
use lamkit_core::affine::{AffineGenerators, AffineWord};
use lamkit_core::amalgam::Amalgam;
use lamkit_core::curves::{chain_intersection_matrix, derive_intersection_matrix, to_chain_labels};
use lamkit_core::dynamics::{
    fit_decay, iterate_trace, iterate_trace_at, log_schedule, twist_limit, uniform_angles,
    CircleChart,
};
use lamkit_core::flat_surface::{
    area, build_double_polygon, cylinder_decomposition, Direction, TranslationSurface,
};
use lamkit_core::obstruction::{contradiction_witness, genericity_sample, heights, BVector};
use lamkit_core::real::{to_decimal, Precision, Tolerance};
use lamkit_core::traintrack::TrackWeights;

#[derive(Parser, Debug)]
#[command(
    name = "lamkit",
    version,
    about = "Double (2g+1)-gon surfaces, twist dynamics and amalgam words"
)]
struct Cli {
    #[command(flatten)]
    run: RunConfig,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone)]
struct RunConfig {
    #[arg(long, short = 'g', alias = "g", global = true, default_value_t = 2,
          value_parser = clap::value_parser!(u64).range(2..=64))]
    genus: u64,
    /// Working precision in bits.
    #[arg(long, global = true, env = "LAMKIT_PRECISION", default_value_t = 128,
          value_parser = clap::value_parser!(u32).range(64..))]
    precision: u32,
    /// Relative tolerance of geometric predicates.
    #[arg(long, global = true, default_value_t = 1e-12, value_parser = positive_f64)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Write CSV, to the given file or to stdout.
    #[arg(long, global = true, num_args = 0..=1, value_name = "FILE")]
    csv: Option<Option<PathBuf>>,
    /// Write the main output to this file instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("{s:?} is not a positive number")),
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the double polygon surface and print it as JSON.
    Build,
    /// Cylinder decomposition in a distinguished direction.
    Cylinders {
        #[arg(long = "in", value_name = "FILE")]
        input: Option<PathBuf>,
        #[arg(long, default_value = "horizontal")]
        dir: Direction,
    },
    /// Derivative, trace and type of a word in TA, TB, sigma.
    Affine {
        #[arg(long, default_value = "TA")]
        word: String,
    },
    /// Chain intersection matrix, with the flat-geometry cross-check.
    Chain,
    /// Closed-form twist limit and the iterated trace approaching it.
    TwistLimit {
        #[arg(long, value_name = "FILE")]
        weights: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        k: i64,
        /// Record only about this many steps per decade.
        #[arg(long)]
        per_decade: Option<usize>,
    },
    /// Samples of the direction-foliation circle.
    CircleMap {
        #[arg(long, default_value_t = 720)]
        samples: usize,
    },
    /// Heights of the vertical cylinders.
    Heights,
    /// Fraction of random rational b-vectors in Y.
    GenericCheck {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Replace this sample by the height vector itself.
        #[arg(long)]
        plant: Option<usize>,
    },
    /// Separation between the twist limit of a b-vector and [nu_B].
    Witness {
        /// Comma-separated positive reals v_1,...,v_g.
        #[arg(long)]
        bvec: String,
    },
    /// Britton reduction and classification of an amalgam word.
    AmalgamReduce {
        #[arg(long)]
        word: String,
        /// Edge generator as a free word, used in both factors.
        #[arg(long, default_value = "g1")]
        edge_word: String,
    },
    /// Run the acceptance suite.
    Report,
}

impl RunConfig {
    fn genus(&self) -> usize {
        self.genus as usize
    }

    fn precision(&self) -> Result<Precision> {
        Ok(Precision::new(self.precision)?)
    }

    fn tolerance(&self) -> Result<Tolerance> {
        Ok(Tolerance::new(self.tol)?)
    }

    fn surface(&self) -> Result<TranslationSurface> {
        let s = build_double_polygon(self.genus(), self.precision()?)?;
        Ok(s.with_tolerance(self.tolerance()?)?)
    }

    fn to_json(&self) -> Value {
        json!({
            "genus": self.genus,
            "precision": self.precision,
            "tol": self.tol,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
        })
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => {
                fs::write(path, text).with_context(|| format!("writing {}", path.display()))
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())?;
                if !text.ends_with('\n') {
                    out.write_all(b"\n")?;
                }
                Ok(())
            }
        }
    }

    /// JSON envelope with the configuration, or the text rendering.
    fn report(&self, result: Value, text: impl FnOnce() -> String) -> Result<()> {
        if self.json {
            let doc = json!({ "config": self.to_json(), "result": result });
            self.emit(&serde_json::to_string_pretty(&doc)?)
        } else {
            self.emit(&text())
        }
    }

    fn write_csv(&self, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let Some(target) = &self.csv else {
            return Ok(());
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
        match target {
            Some(path) => {
                fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
            }
            None => Ok(std::io::stdout().write_all(&bytes)?),
        }
    }

    fn csv_to_stdout(&self) -> bool {
        matches!(self.csv, Some(None))
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = &cli.run;
    match &cli.command {
        Command::Build => {
            let s = cfg.surface()?;
            cfg.emit(&s.to_json())?;
        }
        Command::Cylinders { input, dir } => {
            let s = match input {
                Some(p) => {
                    TranslationSurface::from_json(&read(p)?, cfg.precision()?, cfg.tolerance()?)?
                }
                None => cfg.surface()?,
            };
            let cyls = cylinder_decomposition(&s, *dir)?;
            let rows: Vec<Vec<String>> = cyls
                .iter()
                .map(|c| {
                    vec![
                        c.label.to_string(),
                        to_decimal(&c.direction),
                        to_decimal(&c.circumference),
                        to_decimal(&c.height),
                        to_decimal(&c.modulus()),
                    ]
                })
                .collect();
            let header =
                ["label", "direction", "circumference", "height", "modulus"].map(String::from);
            cfg.write_csv(&header, &rows)?;
            if !cfg.csv_to_stdout() {
                let result = json!({
                    "direction": dir.to_string(),
                    "area": to_decimal(&area(&s)),
                    "cylinders": rows.iter().map(|r| json!({
                        "label": r[0], "direction": r[1], "circumference": r[2], "height": r[3], "modulus": r[4],
                    })).collect::<Vec<_>>(),
                });
                cfg.report(result, || {
                    rows.iter()
                        .map(|r| format!("{}  c={}  h={}  m={}", r[0], r[2], r[3], r[4]))
                        .collect::<Vec<_>>()
                        .join("\n")
                })?;
            }
        }
        Command::Affine { word } => {
            let w: AffineWord = word.parse()?;
            let gens = AffineGenerators::from_surface(&cfg.surface()?)?;
            let e = gens.evaluate(&w);
            let d = &e.derivative;
            let class = e.classify()?;
            let result = json!({
                "word": e.label.to_string(),
                "derivative": [[to_decimal(&d.a), to_decimal(&d.b)], [to_decimal(&d.c), to_decimal(&d.d)]],
                "trace": to_decimal(&e.trace()),
                "classification": class.to_string(),
            });
            cfg.report(result, || {
                let m = d.to_f64();
                format!(
                    "{}\nD = [[{:.12}, {:.12}], [{:.12}, {:.12}]]\ntrace = {}\n{class}",
                    e.label,
                    m[0][0],
                    m[0][1],
                    m[1][0],
                    m[1][1],
                    to_decimal(&e.trace())
                )
            })?;
        }
        Command::Chain => {
            let g = cfg.genus();
            let cs = chain_intersection_matrix(g)?;
            let flat = to_chain_labels(&derive_intersection_matrix(&cfg.surface()?)?);
            let labels: Vec<String> = cs.labels().iter().map(|l| l.to_string()).collect();
            let rows: Vec<Vec<String>> = cs
                .matrix()
                .iter()
                .zip(&labels)
                .map(|(r, l)| {
                    std::iter::once(l.clone())
                        .chain(r.iter().map(|v| v.to_string()))
                        .collect()
                })
                .collect();
            let header: Vec<String> = std::iter::once(String::new())
                .chain(labels.iter().cloned())
                .collect();
            cfg.write_csv(&header, &rows)?;
            if !cfg.csv_to_stdout() {
                let agrees = flat == cs.ab_block();
                let result = json!({
                    "labels": labels,
                    "chain_order": cs.order().iter().map(|l| l.to_string()).collect::<Vec<_>>(),
                    "matrix": cs.matrix(),
                    "flat_ab_block": flat,
                    "flat_agrees": agrees,
                });
                cfg.report(result, || {
                    let mut s = format!(
                        "chain: {}\n",
                        cs.order()
                            .iter()
                            .map(|l| l.to_string())
                            .collect::<Vec<_>>()
                            .join(" - ")
                    );
                    s += &format!("     {}\n", labels.join(" "));
                    for r in &rows {
                        s += &format!("{:>4} {}\n", r[0], r[1..].join("   "));
                    }
                    s += &format!("flat crossings agree: {agrees}");
                    s
                })?;
            }
        }
        Command::TwistLimit {
            weights,
            k,
            per_decade,
        } => {
            let w = TrackWeights::from_json(&read(weights)?)?;
            if *k <= 0 {
                bail!("--k must be positive");
            }
            let trace = match per_decade {
                Some(n) => iterate_trace_at(&w, &log_schedule(*k as u64, *n))?,
                None => iterate_trace(&w, *k)?,
            };
            let limit = twist_limit(&w).ok();
            let fit = fit_decay(&trace).ok();
            let last = trace.last().expect("k >= 1");
            let dim = last.class.len();
            let header: Vec<String> = ["k".to_string(), "error".to_string()]
                .into_iter()
                .chain((0..dim).map(|i| format!("p{i}")))
                .collect();
            let rows: Vec<Vec<String>> = trace
                .iter()
                .map(|p| {
                    [
                        p.k.to_string(),
                        p.error.map(|e| format!("{e:e}")).unwrap_or_default(),
                    ]
                    .into_iter()
                    .chain(p.class.coordinates().iter().map(|c| format!("{c:e}")))
                    .collect()
                })
                .collect();
            cfg.write_csv(&header, &rows)?;
            if !cfg.csv_to_stdout() {
                let result = json!({
                    "limit": limit.as_ref().map(|l| l.coordinates().to_vec()),
                    "k": last.k,
                    "iterate": last.class.coordinates(),
                    "error": last.error,
                    "fit": fit,
                });
                cfg.report(result, || {
                    let mut s = match &limit {
                        Some(l) => format!("limit {:?}\n", l.coordinates()),
                        None => "limit undefined: some x_j = 0\n".to_string(),
                    };
                    s += &format!("k = {}: {:?}\n", last.k, last.class.coordinates());
                    if let Some(e) = last.error {
                        s += &format!("error {e:.3e}\n");
                    }
                    if let Some(f) = fit {
                        s += &format!("log-log slope {:.4}, C = {:.4}", f.slope, f.constant);
                    }
                    s
                })?;
            }
        }
        Command::CircleMap { samples } => {
            if *samples == 0 {
                bail!("--samples must be positive");
            }
            let p = cfg.precision()?;
            let chart = CircleChart::new(&cfg.surface()?)?;
            let labels: Vec<String> = chart.labels().iter().map(|l| l.to_string()).collect();
            let angles = uniform_angles(*samples, p);
            let mut rows = Vec::with_capacity(angles.len());
            for t in &angles {
                let c = chart.evaluate(t)?;
                rows.push(
                    std::iter::once(format!("{:.17e}", t.to_f64()))
                        .chain(c.coordinates().iter().map(|x| format!("{x:e}")))
                        .collect::<Vec<_>>(),
                );
            }
            let header: Vec<String> = std::iter::once("theta".to_string())
                .chain(labels.iter().cloned())
                .collect();
            cfg.write_csv(&header, &rows)?;
            if !cfg.csv_to_stdout() {
                let result = json!({
                    "curves": labels,
                    "breakpoints": chart.breakpoints(),
                    "samples": rows,
                });
                cfg.report(result, || {
                    format!(
                        "{} samples on curves {}; breakpoints {:?}",
                        rows.len(),
                        labels.join(","),
                        chart.breakpoints()
                    )
                })?;
            }
        }
        Command::Heights => {
            let s = cfg.surface()?;
            let h = heights(&s)?;
            let dec: Vec<String> = h.0.iter().map(to_decimal).collect();
            cfg.report(json!({ "heights": dec }), || dec.join("\n"))?;
        }
        Command::GenericCheck { samples, plant } => {
            let r = genericity_sample(cfg.genus(), *samples, cfg.seed, *plant, cfg.precision()?)?;
            cfg.report(serde_json::to_value(&r)?, || {
                format!(
                    "{} of {} samples in Y (fraction {})",
                    r.hits, r.samples, r.fraction_in_y
                )
            })?;
        }
        Command::Witness { bvec } => {
            let v: Vec<f64> = bvec
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .with_context(|| format!("bad entry {t:?}"))
                })
                .collect::<Result<_>>()?;
            let w = heights(&cfg.surface()?)?;
            let wit = contradiction_witness(&BVector(v), &w)?;
            let result = json!({
                "in_Y": wit.in_y,
                "separation": wit.separation,
                "limit_class": wit.limit_class,
                "nu_B_class": wit.nu_b_class,
            });
            cfg.report(result, || {
                format!(
                    "in_Y {}\nseparation {:e}\nlimit {:?}\nnu_B {:?}",
                    wit.in_y,
                    wit.separation,
                    wit.limit_class.coordinates(),
                    wit.nu_b_class.coordinates()
                )
            })?;
        }
        Command::AmalgamReduce { word, edge_word } => {
            let g = Amalgam::with_edge_word(cfg.genus(), edge_word)?;
            let w = g.parse(word)?;
            let r = g.britton_reduce(&w);
            let c = g.cyclic_reduce(&w);
            let class = g.classify_element(&w);
            let result = json!({
                "input": w.to_string(),
                "reduced": r.to_string(),
                "syllable_length": r.len(),
                "cyclic_reduction": c.to_string(),
                "classification": class.to_string(),
            });
            cfg.report(result, || format!("{r}\nlength {}\n{class}", r.len()))?;
        }
        Command::Report => {
            let acfg = AcceptanceConfig {
                seed: cfg.seed,
                precision: cfg.precision,
            };
            let outcomes = run_all(&acfg);
            let ok = outcomes.iter().all(|o| o.passed && o.within_budget());
            // Timings stay out of the JSON so reruns are byte-identical.
            let result = json!({
                "all_passed": ok,
                "criteria": outcomes.iter().map(|o| json!({
                    "id": o.id, "name": o.name, "passed": o.passed, "detail": o.detail,
                })).collect::<Vec<_>>(),
            });
            cfg.report(result, || {
                outcomes
                    .iter()
                    .map(|o| o.line())
                    .collect::<Vec<_>>()
                    .join("\n")
            })?;
            return Ok(ok);
        }
    }
    Ok(true)
}
