use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ilm_core::io::format::sig6;
use ilm_core::io::manifest::{parse_baseline, parse_manifest, render_baseline};
use ilm_core::io::{
    load_config, plot_losses, plot_metrics, read_losses, read_records, write_losses, write_records,
    RunManifest, Setting,
};
use ilm_core::lang::space_size;
use ilm_core::{
    baseline_for, run_experiment_with, run_until_egood, sweep_bottleneck, AgentKind, AutoScaling,
    Error, ExperimentConfig, Result,
};

use crate::ranges::parse_list;
use crate::{Command, Common};

const TOOL: &str = concat!("ilm ", env!("CARGO_PKG_VERSION"));

pub fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { common, baseline } => run(&common, baseline.as_deref()),
        Command::Sweep {
            common,
            ns,
            sizes,
            auto_factor,
        } => sweep(&common, &ns, &sizes, auto_factor),
        Command::Baseline { common } => baseline(&common),
        Command::Until { common } => until(&common),
        Command::Plot {
            input,
            out,
            divisor,
        } => plot(&input, out.as_deref(), divisor),
    }
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut flags = self
            .sets
            .iter()
            .map(|s| Setting::parse_flag(s))
            .collect::<Result<Vec<_>>>()?;
        if let Some(seed) = self.seed {
            flags.push(Setting::flag("seed", seed.to_string()));
        }
        if let Some(w) = self.workers {
            flags.push(Setting::flag("workers", w.to_string()));
        }
        load_config(self.config.as_deref(), &flags)
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).map_err(|e| Error::Io {
            path: self.out.clone(),
            source: e,
        })?;
        Ok(&self.out)
    }

    fn manifest(&self, cfg: &ExperimentConfig, command: &str) -> RunManifest {
        let mut m = RunManifest::new(cfg.clone(), TOOL, command);
        if self.timing {
            m.timestamps = Some((now(), String::new()));
        }
        m
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn finish(mut m: RunManifest, dir: &Path) -> Result<()> {
    if let Some((_, end)) = m.timestamps.as_mut() {
        *end = now();
    }
    m.write(&dir.join("manifest.txt"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Renders metrics.svg and, when there are losses, losses.svg from the CSV
/// files in `from`, writing into `to`. Returns the file names written.
fn render_plots(from: &Path, to: &Path, divisor: f64) -> Result<Vec<String>> {
    let rows = read_records(&from.join("records.csv"))?;
    write_text(&to.join("metrics.svg"), &plot_metrics(&rows))?;
    let mut written = vec!["metrics.svg".to_string()];
    let losses_path = from.join("losses.csv");
    if losses_path.exists() {
        if let Some(svg) = plot_losses(&read_losses(&losses_path)?, divisor) {
            write_text(&to.join("losses.svg"), &svg)?;
            written.push("losses.svg".into());
        }
    }
    Ok(written)
}

fn run(common: &Common, baseline_file: Option<&Path>) -> Result<ExitCode> {
    let cfg = common.config()?;
    let dir = common.out_dir()?;
    let mut manifest = common.manifest(&cfg, "run");
    let baseline = match baseline_file {
        Some(p) => parse_baseline(&read_text(p)?, p)?,
        None => baseline_for(&cfg)?,
    };
    let output = run_experiment_with(&cfg, baseline, |g, recs| {
        log::info!("generation {g}: {} replicates stepped", recs.len());
        false
    })?;
    let records = output.records();
    write_records(&records, &dir.join("records.csv"), common.timing)?;
    write_losses(&records, &dir.join("losses.csv"))?;
    manifest.outputs = vec!["records.csv".into(), "losses.csv".into()];
    manifest
        .outputs
        .extend(render_plots(dir, dir, cfg.reporting_divisor())?);
    manifest.baseline = Some(output.baseline.clone());
    manifest.failures = output
        .failures()
        .map(|(r, why)| (r, why.to_string()))
        .collect();
    finish(manifest, dir)?;

    if let Some(last) = output.mean_corrected().last() {
        println!(
            "generation {}: mean corrected x={} c={} s={}",
            cfg.generations.min(output.mean_corrected().len()),
            sig6(last.x),
            sig6(last.c),
            sig6(last.s)
        );
    }
    let failures: Vec<_> = output.failures().collect();
    for (r, why) in &failures {
        eprintln!("replicate {r} failed: {why}");
    }
    Ok(if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn baseline(common: &Common) -> Result<ExitCode> {
    let cfg = common.config()?;
    let dir = common.out_dir()?;
    let b = baseline_for(&cfg)?;
    let text = render_baseline(&b, cfg.seed);
    write_text(&dir.join("baseline.txt"), &text)?;
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn until(common: &Common) -> Result<ExitCode> {
    let cfg = common.config()?;
    let dir = common.out_dir()?;
    let mut manifest = common.manifest(&cfg, "until");
    let outcome = run_until_egood(&cfg)?;
    let mut csv = String::from("replicate,generations,capped\n");
    for (r, g) in outcome.generations.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{r},{},{}",
            g.unwrap_or(outcome.cap),
            g.is_none() as u8
        );
    }
    write_text(&dir.join("until.csv"), &csv)?;
    let summary = format!(
        "cap={}\nmean_generations={}\ncapped={}\nreplicates={}\n",
        outcome.cap,
        sig6(outcome.mean()),
        outcome.capped(),
        outcome.generations.len()
    );
    write_text(&dir.join("until_summary.txt"), &summary)?;
    manifest.outputs = vec!["until.csv".into(), "until_summary.txt".into()];
    finish(manifest, dir)?;
    print!("{summary}");
    Ok(ExitCode::SUCCESS)
}

fn sweep(common: &Common, ns: &str, sizes: &str, auto_factor: usize) -> Result<ExitCode> {
    let template = common.config()?;
    let ns = parse_list(ns).map_err(|m| Error::Config {
        key: "ns".into(),
        message: m,
    })?;
    let sizes = parse_list(sizes).map_err(|m| Error::Config {
        key: "sizes".into(),
        message: m,
    })?;
    let dir = common.out_dir()?;
    let mut manifest = common.manifest(&template, "sweep");
    let scaling = if auto_factor > 0 && template.model == AgentKind::Ailm {
        AutoScaling::Multiple(auto_factor)
    } else {
        AutoScaling::Template
    };
    let per_n = |n: usize| -> Vec<usize> {
        sizes
            .iter()
            .copied()
            .filter(|&b| b >= 1 && b <= space_size(n))
            .collect()
    };
    let result = sweep_bottleneck(&template, &ns, per_n, scaling)?;

    let mut csv = String::from("n,bottleneck,auto_size,replicates,capped,mean_generations\n");
    for p in &result.points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            p.n,
            p.bottleneck,
            p.auto_size,
            p.outcome.generations.len(),
            p.outcome.capped(),
            sig6(p.outcome.mean())
        );
    }
    write_text(&dir.join("sweep.csv"), &csv)?;

    let mut summary = String::new();
    match result.fit {
        Some(f) => {
            let _ = writeln!(summary, "slope={}", sig6(f.slope));
            let _ = writeln!(summary, "intercept={}", sig6(f.intercept));
        }
        None => {
            let _ = writeln!(summary, "slope=");
            let _ = writeln!(summary, "intercept=");
        }
    }
    for b in &result.best {
        let _ = writeln!(summary, "best.{}.bottleneck={}", b.n, b.bottleneck);
        let _ = writeln!(
            summary,
            "best.{}.mean_generations={}",
            b.n,
            sig6(b.mean_generations)
        );
        let _ = writeln!(
            summary,
            "best.{}.neighbor_mean={}",
            b.n,
            b.neighbor_mean.map(sig6).unwrap_or_default()
        );
    }
    let excluded: Vec<String> = result.excluded.iter().map(|n| n.to_string()).collect();
    let _ = writeln!(summary, "excluded={}", excluded.join(","));
    write_text(&dir.join("sweep_summary.txt"), &summary)?;
    manifest.outputs = vec!["sweep.csv".into(), "sweep_summary.txt".into()];
    finish(manifest, dir)?;
    print!("{summary}");
    Ok(ExitCode::SUCCESS)
}

fn plot(input: &Path, out: Option<&Path>, divisor: Option<f64>) -> Result<ExitCode> {
    if input.is_dir() {
        let to: PathBuf = out
            .map(Path::to_path_buf)
            .unwrap_or_else(|| input.to_path_buf());
        fs::create_dir_all(&to).map_err(|e| Error::Io {
            path: to.clone(),
            source: e,
        })?;
        let divisor = match divisor {
            Some(d) => d,
            None => {
                let m = input.join("manifest.txt");
                if m.exists() {
                    parse_manifest(&read_text(&m)?, &m)?.1.reporting_divisor()
                } else {
                    1.0
                }
            }
        };
        for name in render_plots(input, &to, divisor)? {
            println!("{}", to.join(name).display());
        }
    } else {
        let rows = read_records(input)?;
        let to = out
            .map(Path::to_path_buf)
            .unwrap_or_else(|| input.with_extension("svg"));
        write_text(&to, &plot_metrics(&rows))?;
        println!("{}", to.display());
    }
    Ok(ExitCode::SUCCESS)
}
