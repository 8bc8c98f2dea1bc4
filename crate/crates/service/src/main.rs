use clap::Parser;
use geoqa_service::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let json = cli.json;
    if let Err(e) = run(cli) {
        if json {
            println!("{}", serde_json::json!({"error": {"code": e.code, "message": e.message}}));
        } else {
            eprintln!("error [{}]: {}", e.code, e.message);
        }
        std::process::exit(e.exit_code);
    }
}
