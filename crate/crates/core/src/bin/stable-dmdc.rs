fn main() {
    std::process::exit(stable_dmdc::cli::run(std::env::args_os()));
}
