fn main() {
    std::process::exit(peq_cli::cli_main(std::env::args_os()));
}
