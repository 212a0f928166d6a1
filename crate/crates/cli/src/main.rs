fn main() {
    std::process::exit(aggdiff_cli::run(std::env::args_os()));
}
