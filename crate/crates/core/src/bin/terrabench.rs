fn main() {
    std::process::exit(terrabench::bench::cli::main_with_args(std::env::args_os()));
}
