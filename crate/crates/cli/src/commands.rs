use crate::table::{Cell, Table};
use crate::{manifest_path, Command, Format, Globals, IntervalArgs, Manifest, ProblemKind};
use classplan::binom_ci::DEFAULT_NTEST_CAP;
use classplan::*;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

fn usage(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn plan(args: &IntervalArgs, cap: u64) -> Result<WidthPlan> {
    Ok(WidthPlan {
        level: args.level,
        prior: PriorSpec::new(args.prior_a, args.prior_b)?,
        method: args.method.parse()?,
        cap,
    })
}

fn interval_row(table: &mut Table, p_or_k: Cell, n: Cell, ci: &CredibleInterval, mean: f64) {
    table.push(vec![
        p_or_k,
        n,
        ci.method.name().into(),
        ci.level.into(),
        ci.lower.into(),
        ci.upper.into(),
        mean.into(),
        ci.width().into(),
    ]);
}

/// `first:last` inclusive, or a comma-separated list.
pub fn parse_sizes(text: &str) -> Result<Vec<u64>> {
    let bad = || usage(format!("invalid test sizes {text:?}; use first:last or a comma list"));
    let sizes: Vec<u64> = if let Some((a, b)) = text.split_once(':') {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        (a..=b).collect()
    } else {
        text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(bad());
    }
    Ok(sizes)
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if !is_json {
        return Scenario::from_toml(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())));
    }
    match Scenario::from_json(&text) {
        Ok(s) => Ok(s),
        Err(first) => match serde_json::from_str::<Manifest>(&text) {
            Ok(Manifest { scenario: Some(s), .. }) => Ok(s),
            _ => Err(Error::Format(format!("{}: {first}", path.display()))),
        },
    }
}

enum Output {
    Table(Table),
    Curves { result: ScenarioResult, seed: u64 },
    Dataset(LabeledDataset),
    Binary(LabeledDataset),
}

fn build(command: &Command, scenario: Option<Scenario>) -> Result<(Output, Option<Scenario>)> {
    let table = |t| Ok((Output::Table(t), None));
    match command {
        Command::Ci { k, n, interval: args } => {
            let plan = plan(args, DEFAULT_NTEST_CAP)?;
            let obs = BinomialObservation::new(*k, *n)?;
            let ci = interval(&obs, plan.level, &plan.prior, plan.method)?;
            let mut t = Table::new(&["k", "n", "method", "level", "lower", "upper", "mean", "width"]);
            interval_row(&mut t, Cell::Exact(*k), Cell::Exact(*n), &ci, posterior(&obs, &plan.prior).mean());
            table(t)
        }
        Command::Ntest { p_hat, width, cap, interval: args } => {
            let plan = plan(args, *cap)?;
            let p = p_hat.unwrap_or(0.5);
            let n = min_ntest_for_width(p, *width, &plan)?;
            let mut t = Table::new(&["p_hat", "max_width", "method", "level", "n", "width"]);
            t.push(vec![
                Cell::Exact(p),
                Cell::Exact(*width),
                plan.method.name().into(),
                plan.level.into(),
                n.into(),
                plan.interval_at(p, n)?.width().into(),
            ]);
            table(t)
        }
        Command::CiTable { p_hat, n, interval: args } => {
            let plan = plan(args, DEFAULT_NTEST_CAP)?;
            let sizes = parse_sizes(n)?;
            let mut t = Table::new(&["p_hat", "n", "method", "level", "lower", "upper", "mean", "width"]);
            for &p in p_hat {
                for &size in &sizes {
                    let ci = plan.interval_at(p, size)?;
                    let k = (p * size as f64).clamp(0.0, size as f64);
                    let mean = posterior(&BinomialObservation::new(k, size as f64)?, &plan.prior).mean();
                    interval_row(&mut t, Cell::Exact(p), size.into(), &ci, mean);
                }
            }
            table(t)
        }
        &Command::Power { p1, p2, n1, n2, alpha } => {
            let power = analytic_power(&TwoProportionSpec::new(p1, p2, n1, n2, alpha)?)?;
            let mut t = Table::new(&["p1", "p2", "n1", "n2", "alpha", "power"]);
            t.push(vec![
                Cell::Exact(p1),
                Cell::Exact(p2),
                Cell::Exact(n1),
                Cell::Exact(n2),
                Cell::Exact(alpha),
                power.into(),
            ]);
            table(t)
        }
        &Command::PowerSim { p1, p2, n1, n2, alpha, reps, seed } => {
            let mc = simulated_power(&TwoProportionSpec::new(p1, p2, n1, n2, alpha)?, reps, seed)?;
            if mc.rounded {
                eprintln!("warning: group sizes rounded to ({}, {}) for simulation", n1.round(), n2.round());
            }
            let mut t = Table::new(&[
                "p1",
                "p2",
                "n1",
                "n2",
                "alpha",
                "power",
                "ci_lower",
                "ci_upper",
                "replicates",
                "seed",
                "rounded",
            ]);
            t.push(vec![
                Cell::Exact(p1),
                Cell::Exact(p2),
                Cell::Exact(n1),
                Cell::Exact(n2),
                Cell::Exact(alpha),
                mc.estimate.into(),
                mc.ci_lower.into(),
                mc.ci_upper.into(),
                mc.replicates.into(),
                mc.seed.into(),
                mc.rounded.into(),
            ]);
            table(t)
        }
        &Command::Samsize { p1, p2, alpha, power, fraction } => {
            let plan = allocation_samsize(p1, p2, fraction, alpha, power)?;
            let mut t = Table::new(&["p1", "p2", "fraction", "alpha", "power", "n1", "n2", "total"]);
            t.push(vec![
                Cell::Exact(p1),
                Cell::Exact(p2),
                Cell::Exact(fraction),
                Cell::Exact(alpha),
                Cell::Exact(power),
                plan.n1.into(),
                plan.n2.into(),
                plan.total().into(),
            ]);
            table(t)
        }
        &Command::NNew { p_old, n_old, p_new, alpha, power } => {
            let n = n_new_for_fixed_n_old(p_old, n_old, p_new, alpha, power)?;
            let limit = max_power_vs_infinite_test(p_old, n_old, p_new, alpha)?;
            let mut t = Table::new(&["p_old", "n_old", "p_new", "alpha", "power", "n_new", "max_power"]);
            t.push(vec![
                Cell::Exact(p_old),
                n_old.into(),
                Cell::Exact(p_new),
                Cell::Exact(alpha),
                Cell::Exact(power),
                n.into(),
                limit.into(),
            ]);
            table(t)
        }
        &Command::Simulate { problem, classes, dim, separation, random_cov, n_per_class, seed, binary } => {
            if n_per_class == 0 {
                return Err(usage("--n-per-class must be positive"));
            }
            let root = RngSeed::new(seed);
            let specs = match problem {
                ProblemKind::Simplex => make_problem(classes, dim, separation, !random_cov, root.substream(0))?,
                ProblemKind::Mimic => mimic_problem(dim)?,
            };
            let data = Population::new(specs)?.sample(n_per_class, root.substream(1));
            Ok((if binary { Output::Binary(data) } else { Output::Dataset(data) }, None))
        }
        Command::LearningCurve { config } => {
            let scenario = match scenario {
                Some(s) => s,
                None => load_scenario(config)?,
            };
            let start = Instant::now();
            let result = scenario.run()?;
            eprintln!("learning curve {:?} finished in {:.1?}", scenario.name, start.elapsed());
            Ok((Output::Curves { result, seed: scenario.seed }, Some(scenario)))
        }
        Command::Replay { .. } => Err(usage("a manifest cannot replay another manifest")),
    }
}

fn curves_table(result: &ScenarioResult, seed: u64) -> Table {
    let mut t = Table::new(&["view", "class", "train_size_per_class", "statistic", "value", "seed", "config_hash"]);
    for curve in &result.curves {
        for point in &curve.points {
            for (class, band) in curve.classes.iter().zip(&point.bands) {
                for (stat, v) in [("p5", band.lo), ("mean", band.mean), ("p95", band.hi)] {
                    t.push(vec![
                        curve.view.name().into(),
                        class.as_str().into(),
                        Cell::Exact(point.train_size_per_class),
                        stat.into(),
                        v.into(),
                        seed.into(),
                        result.config_hash.as_str().into(),
                    ]);
                }
            }
        }
    }
    t
}

fn dataset_table(data: &LabeledDataset) -> Table {
    let mut headers = vec!["label".to_string()];
    headers.extend((1..=data.dim()).map(|j| format!("f{j}")));
    let mut t = Table::with_headers(headers);
    for (i, &label) in data.labels.iter().enumerate() {
        let mut row = vec![Cell::Text(data.classes[label].clone())];
        row.extend(data.features.row(i).iter().map(|&v| Cell::Exact(v)));
        t.push(row);
    }
    t
}

fn emit<W: Write>(output: &Output, globals: &Globals, mut w: W) -> Result<()> {
    let p = globals.precision;
    match (output, globals.format) {
        (Output::Table(t), Format::Csv) => t.write_csv(&mut w, p)?,
        (Output::Table(t), Format::Json) => t.write_json(&mut w, p)?,
        (Output::Curves { result, seed }, Format::Csv) => result.write_csv(*seed, Some(p), &mut w)?,
        (Output::Curves { result, seed }, Format::Json) => curves_table(result, *seed).write_json(&mut w, p)?,
        (Output::Dataset(d), Format::Csv) => d.write_csv(&mut w)?,
        (Output::Dataset(d), Format::Json) => dataset_table(d).write_json(&mut w, p)?,
        (Output::Binary(d), _) => d.write_binary(&mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub fn run(globals: &Globals, command: &Command, scenario: Option<Scenario>) -> Result<()> {
    let (output, scenario) = build(command, scenario)?;
    match &globals.output {
        Some(path) => emit(&output, globals, BufWriter::new(File::create(path)?))?,
        None if matches!(output, Output::Binary(_)) => return Err(usage("--binary needs --output")),
        None => emit(&output, globals, io::stdout().lock())?,
    }
    if let Some(path) = manifest_path(globals) {
        let config_hash = scenario.as_ref().map(|s| s.config_hash()).transpose()?;
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            globals: globals.clone(),
            command: command.clone(),
            scenario,
            config_hash,
        };
        let mut file = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut file, &manifest)?;
        writeln!(file)?;
        file.flush()?;
        eprintln!("manifest written to {}", path.display());
    }
    Ok(())
}
