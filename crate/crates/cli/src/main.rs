use clap::Parser;
use conestab_cli::{exit_code, run, Cli, LOG_ENV};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    let result = run(&cli);
    match &result {
        Ok((report, path)) => {
            for a in &report.analyses {
                let status = if a.passed { "pass" } else { "FAIL" };
                match &a.error {
                    Some(e) => println!("[{status}] {} #{}: {e}", a.kind, a.index),
                    None => println!("[{status}] {} #{}", a.kind, a.index),
                }
            }
            println!("report: {}", path.display());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    std::process::exit(exit_code(&result));
}
