use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = atk_cli::Cli::parse();
    let code = atk_cli::run(cli, &mut std::io::stdout().lock());
    std::process::exit(code);
}
