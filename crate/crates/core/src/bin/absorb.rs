fn main() {
    std::process::exit(absorbing_values::cli::run(std::env::args_os()));
}
