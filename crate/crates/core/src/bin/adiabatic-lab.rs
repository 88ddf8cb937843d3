fn main() {
    std::process::exit(adiabatic_lab::cli::run(std::env::args_os()));
}
