fn main() {
    std::process::exit(gm_core::cli::cli_main(std::env::args_os()));
}
