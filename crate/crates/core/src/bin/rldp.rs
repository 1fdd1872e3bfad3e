fn main() {
    std::process::exit(rldp_core::experiments::cli_main(std::env::args_os()));
}
