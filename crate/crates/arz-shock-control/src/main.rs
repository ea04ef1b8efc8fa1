fn main() {
    std::process::exit(arz_shock_control::cli::run());
}
