fn main() {
    std::process::exit(branchpde_cli::run_command(std::env::args_os()));
}
