fn main() {
    std::process::exit(ggm_knockoff::cli::run(std::env::args_os()));
}
