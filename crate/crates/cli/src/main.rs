use std::fs;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use surgery_core::blowdown::{continued_fraction_value, PlumbingChain};
use surgery_core::mcg::{classify_block, verify_derivation, word_to_matrix, ChainHomology, Derivation};
use surgery_core::plan::parse;
use surgery_core::presets;
use surgery_core::report::Report;
use surgery_core::run::run;

#[derive(Parser)]
#[command(name = "surgery", version, about = "Exact surgery bookkeeping for small 4-manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Kv,
}

#[derive(Subcommand)]
enum Command {
    /// Run a plan file.
    Run {
        file: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Run a built-in plan.
    Case {
        /// Preset name; omit to list them.
        name: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Print the plumbing chain of C(p,q).
    Blowdown { p: u64, q: u64 },
    /// Mapping class group tools.
    Mcg {
        #[command(subcommand)]
        command: McgCommand,
    },
    /// Render a report: a .kv file is reformatted, anything else is run as a plan.
    Report {
        file: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

#[derive(Subcommand)]
enum McgCommand {
    /// Replay a derivation file and check its end blocks.
    Verify { file: String },
}

const USAGE: u8 = 2;
const FAILED: u8 = 1;

fn read(path: &str) -> Result<String, ExitCode> {
    fs::read_to_string(path).map_err(|e| {
        eprintln!("error: {path}: {e}");
        ExitCode::from(USAGE)
    })
}

fn emit(report: &Report, format: Format) {
    match format {
        Format::Text => print!("{}", report.to_text()),
        Format::Kv => print!("{}", report.to_kv()),
    }
}

fn run_plan(text: &str, origin: &str, format: Format) -> ExitCode {
    let plan = match parse(text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {origin}: {e}");
            return ExitCode::from(USAGE);
        }
    };
    match run(&plan) {
        Ok(r) => {
            emit(&r, format);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {origin}: {e}");
            ExitCode::from(FAILED)
        }
    }
}

fn blowdown(p: u64, q: u64) -> ExitCode {
    let chain = match PlumbingChain::new(p, q) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let weights: Vec<String> = chain.weights().iter().map(|w| format!("-{w}")).collect();
    println!("weights: {}", weights.join(" "));
    println!("continued fraction: {}", continued_fraction_value(chain.weights()));
    println!("determinant: {}", chain.determinant());
    println!("boundary: {}", chain.boundary());
    ExitCode::SUCCESS
}

fn mcg_verify(path: &str) -> ExitCode {
    let text = match read(path) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let d = match Derivation::parse(&text) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {path}: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let out = verify_derivation(&d);
    if !out.ok {
        let step = out.failing_step.map_or_else(|| "?".into(), |s| s.to_string());
        println!("FAILED at step {step}: {}", out.reason.unwrap_or_default());
        println!("word: {}", out.last_word);
        return ExitCode::from(FAILED);
    }
    let h = ChainHomology::standard(d.genus);
    let same = word_to_matrix(&d.start, &h) == word_to_matrix(&d.end_word(), &h);
    println!("replayed {} moves, {} checkpoints", d.steps.len(), out.checkpoints);
    println!("homology action preserved: {same}");
    let mut ok = same;
    for (i, claim) in &d.claims {
        let got = classify_block(&d.end[*i], &h);
        let hit = got == *claim;
        ok &= hit;
        println!("fiber {}: {} -> {got:?}{}", i + 1, d.end[*i], if hit { "" } else { " (claim differs)" });
    }
    if ok { ExitCode::SUCCESS } else { ExitCode::from(FAILED) }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { file, format } => match read(&file) {
            Ok(text) => run_plan(&text, &file, format),
            Err(c) => c,
        },
        Command::Case { name: None, .. } => {
            for n in presets::names() {
                println!("{n}");
            }
            ExitCode::SUCCESS
        }
        Command::Case { name: Some(name), format } => match presets::preset(&name) {
            Some(text) => run_plan(text, &name, format),
            None => {
                eprintln!("error: unknown case `{name}`; known: {}", presets::names().collect::<Vec<_>>().join(", "));
                ExitCode::from(USAGE)
            }
        },
        Command::Blowdown { p, q } => blowdown(p, q),
        Command::Mcg { command: McgCommand::Verify { file } } => mcg_verify(&file),
        Command::Report { file, format } => {
            let text = match read(&file) {
                Ok(t) => t,
                Err(c) => return c,
            };
            if file.ends_with(".kv") {
                match Report::from_kv(&text) {
                    Ok(r) => {
                        emit(&r, format);
                        ExitCode::SUCCESS
                    }
                    Err(e) => {
                        eprintln!("error: {file}: {e}");
                        ExitCode::from(USAGE)
                    }
                }
            } else {
                run_plan(&text, &file, format)
            }
        }
    }
}
