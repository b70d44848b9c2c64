use assortment::cli;

fn main() {
    if let Err(err) = cli::init_thread_pool() {
        eprintln!("{}", cli::error_json(&err));
        std::process::exit(err.exit_code());
    }
    std::process::exit(cli::run(std::env::args_os()));
}
