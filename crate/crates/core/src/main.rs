fn main() {
    std::process::exit(dsre_core::cli::run(std::env::args_os()));
}
