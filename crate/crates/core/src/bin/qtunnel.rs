use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QTUNNEL_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let outcome = qtunnel::cli::run(std::env::args_os());
    std::io::stdout()
        .write_all(outcome.stdout.as_bytes())
        .expect("write stdout");
    std::io::stderr()
        .write_all(outcome.stderr.as_bytes())
        .expect("write stderr");
    std::process::exit(outcome.exit_code);
}
